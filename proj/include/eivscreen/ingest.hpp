#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "eivscreen/core.hpp"
#include "eivscreen/simbench.hpp"

namespace eivscreen {

// Comma-separated numbers, '.' decimals, LF or CRLF. A first row with any
// non-numeric cell is taken as a header. Blank lines are ignored.
struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

CsvTable parse_csv(std::istream& in, const std::string& name);
CsvTable read_csv(const std::string& path);

// A single column, or a single row, read as a vector.
Eigen::VectorXd read_vector_csv(const std::string& path);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

// Full precision, so data files round-trip exactly.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m, const std::vector<std::string>& header = {});
void write_vector_csv(const std::string& path, const Eigen::VectorXd& v, const std::string& header = "");
// 1-based indices, one per line, under a header.
void write_index_csv(const std::string& path, const IndexSet& idx, const std::string& header);

ObservedDataset load_dataset(const std::string& y_path, const std::string& w_path, const std::string& sigma_u_path,
                             SigmaU::Form form);

struct PosteriorSummaries {
    Eigen::MatrixXd means;     // n x p posterior means
    Eigen::MatrixXd variances; // n x p posterior variances
};

struct StandardizedData {
    Eigen::MatrixXd W;            // kept columns, mean 0 and mean square 1
    Eigen::VectorXd sigma_u_diag; // error variance over column variance
    IndexSet kept;
    IndexSet dropped;
    std::vector<std::string> warnings;
};

StandardizedData standardize_and_filter(const PosteriorSummaries& ps, double ratio_threshold = 0.5);

enum class ReportFormat { Csv, Json };

ReportFormat report_format_for(const std::string& path);

// Six significant digits; "NA" for missing values.
std::string format_number(double x);
std::string format_number(const std::optional<double>& x);

extern const std::vector<std::string> kReportColumns;

void write_report(const ScenarioReport& r, const std::string& path, ReportFormat fmt);
void write_report(const CoefEstimate& e, const std::string& path, ReportFormat fmt);

struct ReportRow {
    std::string scenario_id;
    MethodSummary summary;
};

std::vector<ReportRow> read_report_csv(const std::string& path);
// Dense coefficient vector of length p from an "index,coefficient" file.
Eigen::VectorXd read_coefficients_csv(const std::string& path, Index p);

// Per-replicate outcomes, one row per (replicate, method).
void write_replicates_csv(const ScenarioReport& r, const std::string& path);

nlohmann::json estimate_json(const CoefEstimate& e);
nlohmann::json screening_json(const ScreeningResult& s);
nlohmann::json tuning_json(const TuningRecord& t);

void write_text(const std::string& path, const std::string& text);

}  // namespace eivscreen
