#include "eivscreen/ingest.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace eivscreen {

using nlohmann::json;

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& cell, double& out) {
    const std::string t = trim(cell);
    if (t.empty()) return false;
    errno = 0;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size() && errno != ERANGE;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    return out;
}

void check_written(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

std::string full_precision(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

CsvTable parse_csv(std::istream& in, const std::string& name) {
    CsvTable t;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t width = 0;
    long lineno = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        std::vector<double> vals(cells.size());
        std::size_t bad = cells.size();
        for (std::size_t c = 0; c < cells.size() && bad == cells.size(); ++c)
            if (!parse_double(cells[c], vals[c])) bad = c;

        if (first) {
            first = false;
            width = cells.size();
            if (bad != cells.size()) {
                for (const auto& c : cells) t.header.push_back(trim(c));
                continue;
            }
        }
        if (cells.size() != width) {
            std::ostringstream os;
            os << name << ": row " << lineno << " has " << cells.size() << " column(s), expected " << width;
            throw Error(ErrorCode::ParseError, os.str());
        }
        if (bad != cells.size()) {
            std::ostringstream os;
            os << name << ": row " << lineno << ", column " << (bad + 1) << ": '" << trim(cells[bad])
               << "' is not a number";
            throw Error(ErrorCode::ParseError, os.str());
        }
        rows.push_back(std::move(vals));
    }
    t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < width; ++c) t.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    return t;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    return parse_csv(in, path);
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.values.rows() == 0) throw Error(ErrorCode::ParseError, path + ": no data rows");
    return std::move(t.values);
}

Eigen::VectorXd read_vector_csv(const std::string& path) {
    const Eigen::MatrixXd m = read_matrix_csv(path);
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    std::ostringstream os;
    os << path << ": expected a single column, found " << m.rows() << " x " << m.cols();
    throw Error(ErrorCode::ParseError, os.str());
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m, const std::vector<std::string>& header) {
    std::ofstream out = open_out(path);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    if (!header.empty()) out << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << full_precision(m(i, j));
        out << '\n';
    }
    check_written(out, path);
}

void write_vector_csv(const std::string& path, const Eigen::VectorXd& v, const std::string& header) {
    write_matrix_csv(path, v, header.empty() ? std::vector<std::string>{} : std::vector<std::string>{header});
}

void write_index_csv(const std::string& path, const IndexSet& idx, const std::string& header) {
    std::ofstream out = open_out(path);
    out << header << '\n';
    for (Index j : idx) out << (j + 1) << '\n';
    check_written(out, path);
}

ObservedDataset load_dataset(const std::string& y_path, const std::string& w_path, const std::string& sigma_u_path,
                             SigmaU::Form form) {
    ObservedDataset d;
    d.y = read_vector_csv(y_path);
    d.W = read_matrix_csv(w_path);
    if (form == SigmaU::Form::Diagonal) {
        d.sigma_u = SigmaU::diagonal(read_vector_csv(sigma_u_path));
    } else {
        d.sigma_u = SigmaU::full(read_matrix_csv(sigma_u_path));
    }
    validate_dataset(d);
    return d;
}

StandardizedData standardize_and_filter(const PosteriorSummaries& ps, double ratio_threshold) {
    const Index n = ps.means.rows();
    const Index p = ps.means.cols();
    if (ps.variances.rows() != n || ps.variances.cols() != p) {
        std::ostringstream os;
        os << "means are " << n << " x " << p << " but variances are " << ps.variances.rows() << " x "
           << ps.variances.cols();
        throw Error(ErrorCode::DimensionMismatch, os.str());
    }
    if (n < 2) throw Error(ErrorCode::DimensionMismatch, "standardization needs at least 2 observations");
    if (!(ratio_threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "ratio threshold must be positive");
    if (!ps.means.allFinite() || !ps.variances.allFinite())
        throw Error(ErrorCode::ValidationError, "posterior summaries contain non-finite values");
    if ((ps.variances.array() < 0.0).any()) throw Error(ErrorCode::ValidationError, "posterior variances must be >= 0");

    StandardizedData out;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<Eigen::VectorXd> cols;
    std::vector<double> su;
    for (Index j = 0; j < p; ++j) {
        const double mean = ps.means.col(j).mean();
        const Eigen::VectorXd centered = ps.means.col(j).array() - mean;
        const double s2 = centered.squaredNorm() * inv_n;
        const double err = ps.variances.col(j).mean();
        if (!(s2 > 0.0)) {
            out.dropped.push_back(j);
            out.warnings.push_back("ZeroVariance: feature " + std::to_string(j + 1) + " is constant and was dropped");
            continue;
        }
        if (!(err < ratio_threshold * s2)) {
            out.dropped.push_back(j);
            continue;
        }
        out.kept.push_back(j);
        cols.push_back(centered / std::sqrt(s2));
        su.push_back(err / s2);
    }
    out.W.resize(n, static_cast<Index>(cols.size()));
    out.sigma_u_diag.resize(static_cast<Index>(su.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        out.W.col(static_cast<Index>(k)) = cols[k];
        out.sigma_u_diag(static_cast<Index>(k)) = su[k];
    }
    return out;
}

ReportFormat report_format_for(const std::string& path) {
    const auto dot = path.rfind('.');
    if (dot != std::string::npos && path.substr(dot) == ".json") return ReportFormat::Json;
    return ReportFormat::Csv;
}

std::string format_number(double x) {
    if (!std::isfinite(x)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::string format_number(const std::optional<double>& x) { return x ? format_number(*x) : "NA"; }

const std::vector<std::string> kReportColumns = {
    "scenario_id", "method",  "stage1_fpr", "stage1_fnr",    "stage2_fpr",    "stage2_fnr", "l2_mean",
    "l2_sd",       "l2_se",   "time_stage1_s", "time_stage2_s", "reps_ok",     "reps_failed"};

void write_report(const ScenarioReport& r, const std::string& path, ReportFormat fmt) {
    std::ofstream out = open_out(path);
    if (fmt == ReportFormat::Json) {
        out << report_metadata(r).dump(2) << '\n';
    } else {
        for (std::size_t c = 0; c < kReportColumns.size(); ++c) out << (c ? "," : "") << kReportColumns[c];
        out << '\n';
        for (const MethodSummary& s : r.rows) {
            out << r.config.id << ',' << s.method << ',' << format_number(s.stage1_fpr) << ','
                << format_number(s.stage1_fnr) << ',' << format_number(s.stage2_fpr) << ','
                << format_number(s.stage2_fnr) << ',' << format_number(s.l2_mean) << ',' << format_number(s.l2_sd)
                << ',' << format_number(s.l2_se) << ',' << format_number(s.time_stage1_s) << ','
                << format_number(s.time_stage2_s) << ',' << s.reps_ok << ',' << s.reps_failed << '\n';
        }
    }
    check_written(out, path);
}

json tuning_json(const TuningRecord& t) {
    json j = json::object();
    auto put = [&j](const char* key, const auto& opt) {
        if (opt) j[key] = *opt;
    };
    put("lambda", t.lambda);
    put("mu", t.mu);
    put("radius", t.radius);
    put("mu_tilde", t.mu_tilde);
    put("alpha", t.alpha);
    put("kappa", t.kappa);
    put("d", t.d);
    put("M", t.M);
    put("folds", t.folds);
    put("seed", t.seed);
    j["degenerate_features"] = t.degenerate_features;
    j["diagnostics"] = t.diagnostics;
    return j;
}

json estimate_json(const CoefEstimate& e) {
    json support = json::array(), coef = json::array();
    for (Index j : e.support) {
        support.push_back(j + 1);
        coef.push_back(e.beta(j));
    }
    return {{"method", e.method},
            {"p", e.beta.size()},
            {"support", std::move(support)},
            {"coefficients", std::move(coef)},
            {"tuning", tuning_json(e.tuning)},
            {"elapsed", {{"screening_s", e.elapsed.screening_s}, {"estimation_s", e.elapsed.estimation_s}}},
            {"converged", e.converged},
            {"warnings", e.warnings}};
}

json screening_json(const ScreeningResult& s) {
    json kept = json::array();
    for (Index j : s.kept) kept.push_back(j + 1);
    return {{"method", s.method}, {"kept", std::move(kept)}, {"tuning", tuning_json(s.tuning)}, {"warnings", s.warnings}};
}

void write_report(const CoefEstimate& e, const std::string& path, ReportFormat fmt) {
    std::ofstream out = open_out(path);
    if (fmt == ReportFormat::Json) {
        out << estimate_json(e).dump(2) << '\n';
    } else {
        out << "index,coefficient\n";
        for (Index j : e.support) out << (j + 1) << ',' << format_number(e.beta(j)) << '\n';
    }
    check_written(out, path);
}

std::vector<ReportRow> read_report_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path + ": empty report");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (split_line(line) != kReportColumns) throw Error(ErrorCode::ParseError, path + ": unexpected report header");

    std::vector<ReportRow> rows;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != kReportColumns.size()) {
            std::ostringstream os;
            os << path << ": row " << lineno << " has " << cells.size() << " column(s), expected "
               << kReportColumns.size();
            throw Error(ErrorCode::ParseError, os.str());
        }
        auto num = [&](std::size_t c) -> std::optional<double> {
            if (cells[c] == "NA") return std::nullopt;
            double v = 0.0;
            if (!parse_double(cells[c], v)) {
                std::ostringstream os;
                os << path << ": row " << lineno << ", column " << (c + 1) << ": '" << cells[c] << "' is not a number";
                throw Error(ErrorCode::ParseError, os.str());
            }
            return v;
        };
        ReportRow r;
        r.scenario_id = cells[0];
        r.summary.method = cells[1];
        r.summary.stage1_fpr = num(2);
        r.summary.stage1_fnr = num(3);
        r.summary.stage2_fpr = num(4);
        r.summary.stage2_fnr = num(5);
        r.summary.l2_mean = num(6);
        r.summary.l2_sd = num(7);
        r.summary.l2_se = num(8);
        r.summary.time_stage1_s = num(9).value_or(0.0);
        r.summary.time_stage2_s = num(10).value_or(0.0);
        r.summary.reps_ok = static_cast<int>(num(11).value_or(0.0));
        r.summary.reps_failed = static_cast<int>(num(12).value_or(0.0));
        rows.push_back(std::move(r));
    }
    return rows;
}

Eigen::VectorXd read_coefficients_csv(const std::string& path, Index p) {
    const CsvTable t = read_csv(path);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (t.values.rows() == 0) return beta;
    if (t.values.cols() != 2) throw Error(ErrorCode::ParseError, path + ": expected index,coefficient columns");
    for (Index r = 0; r < t.values.rows(); ++r) {
        const double idx = t.values(r, 0);
        if (idx != std::floor(idx) || idx < 1 || idx > static_cast<double>(p)) {
            std::ostringstream os;
            os << path << ": index " << idx << " outside 1.." << p;
            throw Error(ErrorCode::IndexOutOfRange, os.str());
        }
        beta(static_cast<Index>(idx) - 1) = t.values(r, 1);
    }
    return beta;
}

void write_replicates_csv(const ScenarioReport& r, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "rep,method,ok,stage1_fpr,stage1_fnr,stage2_fpr,stage2_fnr,l2,stage1_kept,support_size,time_stage1_s,"
           "time_stage2_s,projections,projections_converged,mms_sisc,mms_pmsc_fs\n";
    for (const ReplicateRecord& rec : r.replicates) {
        for (std::size_t m = 0; m < rec.methods.size(); ++m) {
            const MethodOutcome& o = rec.methods[m];
            auto rate = [](const std::optional<SelectionRates>& s, bool fpr) {
                return s ? format_number(fpr ? s->fpr : s->fnr) : std::string("NA");
            };
            out << (rec.rep + 1) << ',' << r.config.methods[m].label() << ',' << (o.ok ? 1 : 0) << ','
                << rate(o.stage1, true) << ',' << rate(o.stage1, false) << ',' << rate(o.stage2, true) << ','
                << rate(o.stage2, false) << ',' << format_number(o.l2) << ',' << o.stage1_kept << ','
                << o.support_size << ',' << format_number(o.elapsed.screening_s) << ','
                << format_number(o.elapsed.estimation_s) << ',' << o.projections << ',' << o.projections_converged
                << ',' << rec.mms_sisc << ',' << rec.mms_pmsc << '\n';
        }
    }
    check_written(out, path);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out = open_out(path);
    out << text;
    check_written(out, path);
}

}  // namespace eivscreen
