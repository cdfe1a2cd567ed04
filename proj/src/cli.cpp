#include "eivscreen/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "eivscreen/estimators.hpp"
#include "eivscreen/ingest.hpp"
#include "eivscreen/simbench.hpp"

namespace eivscreen {

namespace {

using nlohmann::json;

struct DataArgs {
    std::string y, w, sigma_u;
    std::string form = "diag";

    void add(CLI::App* app) {
        app->add_option("--y", y, "Response, one column (CSV)")->required()->check(CLI::ExistingFile);
        app->add_option("--w", w, "Observed design, n rows x p columns (CSV)")->required()->check(CLI::ExistingFile);
        app->add_option("--sigma-u", sigma_u, "Measurement-error covariance: p values (diag) or p x p (full)")
            ->required()
            ->check(CLI::ExistingFile);
        app->add_option("--sigma-u-form", form, "Layout of --sigma-u")->check(CLI::IsMember({"diag", "full"}));
    }

    ObservedDataset load() const {
        return load_dataset(y, w, sigma_u, form == "full" ? SigmaU::Form::Full : SigmaU::Form::Diagonal);
    }
};

struct ScreenArgs {
    std::optional<Index> d, M;
    double alpha = 0.5;
    int folds = 5;
    int grid_size = 40;

    ScreenerSpec spec(ScreenerKind kind) const {
        ScreenerSpec s;
        s.kind = kind;
        s.size = d ? d : M;
        s.alpha = alpha;
        s.folds = folds;
        s.grid_size = grid_size;
        return s;
    }

    // Flags naming a size that the chosen method does not use.
    void check(ScreenerKind kind) const {
        if (d && kind != ScreenerKind::Sisc) throw CLI::ValidationError("--d", "only applies to sisc");
        if (M && kind != ScreenerKind::PmscFs) throw CLI::ValidationError("--M", "only applies to pmsc-fs");
    }
};

void add_screen_size(CLI::App* app, ScreenArgs& a) {
    auto* d = app->add_option("--d", a.d, "SISc screen size (default floor(n / ln n))")->check(CLI::PositiveNumber);
    auto* m = app->add_option("--M", a.M, "PMSc-FS screen size (default floor(n / ln n))")->check(CLI::PositiveNumber);
    d->excludes(m);
}

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) err << "warning: " << w << '\n';
}

void write_screen(std::ostream& os, const ScreeningResult& r) {
    os << "index,score\n";
    for (Index j : r.kept) os << (j + 1) << ',' << format_number(r.scores(j)) << '\n';
}

int jobs_from_env() {
    const char* v = std::getenv("EIVSCREEN_JOBS");
    if (!v || !*v) return 1;
    try {
        const int j = std::stoi(v);
        if (j >= 1) return j;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidArgument, std::string("EIVSCREEN_JOBS='") + v + "' is not a positive integer");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Feature screening and estimation for errors-in-variables linear regression.", "eivscreen"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    // screen
    auto* screen = app.add_subcommand("screen", "Rank features and keep a screened subset");
    DataArgs screen_data;
    ScreenArgs screen_args;
    std::string screen_method;
    std::uint64_t screen_seed = 0;
    std::string screen_out, screen_record;
    screen->add_option("--method", screen_method, "Screening method")
        ->required()
        ->check(CLI::IsMember({"sisc", "pmsc-fs", "pmsc-cv"}));
    screen_data.add(screen);
    add_screen_size(screen, screen_args);
    screen->add_option("--alpha", screen_args.alpha, "Bridge exponent for PMSc, in (0, 1)");
    screen->add_option("--folds", screen_args.folds, "PMSc-CV folds");
    screen->add_option("--grid-size", screen_args.grid_size, "PMSc-CV lambda grid size");
    screen->add_option("--seed", screen_seed, "Seed for cross-validation folds");
    screen->add_option("--out", screen_out, "Kept features as index,score CSV (default: standard output)");
    screen->add_option("--record", screen_record, "JSON record of the screen");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a one-stage or two-stage estimator");
    DataArgs fit_data;
    ScreenArgs fit_screen;
    std::string fit_estimator, fit_screener = "none", coco_test_gram = "project";
    EstimatorSpec espec;
    std::optional<double> mu, radius, mu_tilde;
    std::uint64_t fit_seed = 0;
    std::string fit_out, fit_record;
    fit->add_option("--estimator", fit_estimator, "Second-stage estimator")
        ->required()
        ->check(CLI::IsMember({"corrected-lasso", "coco"}));
    fit->add_option("--screen", fit_screener, "First-stage screener")
        ->check(CLI::IsMember({"none", "sisc", "pmsc-fs", "pmsc-cv"}));
    fit_data.add(fit);
    add_screen_size(fit, fit_screen);
    fit->add_option("--alpha", fit_screen.alpha, "Bridge exponent for PMSc, in (0, 1)");
    fit->add_option("--screen-folds", fit_screen.folds, "PMSc-CV folds");
    fit->add_option("--screen-grid", fit_screen.grid_size, "PMSc-CV lambda grid size");
    fit->add_option("--folds", espec.folds, "Estimator cross-validation folds");
    fit->add_option("--r-grid", espec.r_grid, "Corrected lasso radius grid size");
    fit->add_option("--mu-grid", espec.mu_grid, "Naive lasso penalty grid size");
    fit->add_option("--coco-grid", espec.coco_grid, "CoCo penalty grid size");
    fit->add_option("--coco-test-gram", coco_test_gram, "CoCo CV scoring Gram: project the test split or reuse training")
        ->check(CLI::IsMember({"project", "reuse"}));
    fit->add_option("--admm-tol", espec.projection.tol, "PSD projection tolerance");
    fit->add_option("--admm-max-iter", espec.projection.max_iter, "PSD projection iteration cap");
    fit->add_option("--psd-floor", espec.projection.min_eigenvalue, "Smallest eigenvalue allowed in the CoCo Gram surrogate")
        ->check(CLI::NonNegativeNumber);
    auto* o_mu = fit->add_option("--mu", mu, "Fixed corrected lasso penalty (skips CV; needs --radius)");
    auto* o_r = fit->add_option("--radius", radius, "Fixed corrected lasso l1 radius R (needs --mu)");
    auto* o_mt = fit->add_option("--mu-tilde", mu_tilde, "Fixed CoCo penalty (skips CV)");
    o_mu->needs(o_r);
    o_r->needs(o_mu);
    o_mt->excludes(o_mu)->excludes(o_r);
    fit->add_option("--seed", fit_seed, "Seed for all cross-validation folds");
    fit->add_option("--out", fit_out, "Sparse coefficients as index,coefficient CSV")->required();
    fit->add_option("--record", fit_record, "JSON run record (tuning, timings, warnings)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run a replicated simulation campaign");
    std::string sim_config, sim_out, sim_meta, sim_reps;
    std::optional<int> sim_jobs;
    sim->add_option("--config", sim_config, "Scenario configuration (JSON)")->required()->check(CLI::ExistingFile);
    sim->add_option("--out", sim_out, "Report CSV")->required();
    sim->add_option("--meta", sim_meta, "Metadata JSON (config echo, seeds, version, rows)");
    sim->add_option("--replicates", sim_reps, "Per-replicate outcomes CSV");
    sim->add_option("--jobs", sim_jobs, "Worker threads (default: EIVSCREEN_JOBS or 1)")->check(CLI::PositiveNumber);

    // ingest
    auto* ing = app.add_subcommand("ingest", "Standardize posterior summaries and filter noisy features");
    std::string ing_means, ing_vars, ing_dir;
    double ratio = 0.5;
    ing->add_option("--means", ing_means, "Posterior means, n x p (CSV)")->required()->check(CLI::ExistingFile);
    ing->add_option("--vars", ing_vars, "Posterior variances, n x p (CSV)")->required()->check(CLI::ExistingFile);
    ing->add_option("--ratio-threshold", ratio, "Keep features whose error variance is below this share of their variance");
    ing->add_option("--out-dir", ing_dir, "Directory for w.csv, sigma_u.csv, kept.csv, dropped.csv")->required();

    std::vector<std::string> argv_store;
    argv_store.reserve(args.size() + 1);
    argv_store.push_back("eivscreen");
    for (const auto& a : args) argv_store.push_back(a);
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (screen->parsed()) {
            const ScreenerKind kind = parse_screener(screen_method);
            screen_args.check(kind);
            const ObservedDataset d = screen_data.load();
            EstimatorSpec none;
            none.kind = EstimatorKind::None;
            const TwoStageResult r = two_stage_fit(d, screen_args.spec(kind), none, screen_seed);
            print_warnings(err, r.screen.warnings);
            if (screen_out.empty()) {
                write_screen(out, r.screen);
            } else {
                std::ostringstream os;
                write_screen(os, r.screen);
                write_text(screen_out, os.str());
            }
            if (!screen_record.empty()) {
                json rec = screening_json(r.screen);
                rec["seed"] = screen_seed;
                rec["elapsed_s"] = r.elapsed.screening_s;
                write_text(screen_record, rec.dump(2) + "\n");
            }
            return 0;
        }

        if (fit->parsed()) {
            const ScreenerKind skind = parse_screener(fit_screener);
            if (skind == ScreenerKind::None && (fit_screen.d || fit_screen.M))
                throw CLI::ValidationError("--d/--M", "need a screener");
            fit_screen.check(skind);
            espec.kind = parse_estimator(fit_estimator);
            if (espec.kind == EstimatorKind::Coco && (mu || radius))
                throw CLI::ValidationError("--mu/--radius", "only apply to corrected-lasso");
            if (espec.kind == EstimatorKind::CorrectedLasso && mu_tilde)
                throw CLI::ValidationError("--mu-tilde", "only applies to coco");
            espec.coco_test_gram =
                coco_test_gram == "reuse" ? CocoTestGram::ReuseTrainingProjection : CocoTestGram::ProjectTestSplit;
            espec.mu = mu;
            espec.radius = radius;
            espec.mu_tilde = mu_tilde;

            const ObservedDataset d = fit_data.load();
            const TwoStageResult r = two_stage_fit(d, fit_screen.spec(skind), espec, fit_seed);
            print_warnings(err, r.estimate.warnings);
            write_report(r.estimate, fit_out, ReportFormat::Csv);
            if (!fit_record.empty()) {
                json rec = estimate_json(r.estimate);
                rec["screen"] = screening_json(r.screen);
                rec["seed"] = fit_seed;
                rec["version"] = kVersion;
                write_text(fit_record, rec.dump(2) + "\n");
            }
            return 0;
        }

        if (sim->parsed()) {
            std::ifstream in(sim_config);
            json j;
            try {
                j = json::parse(in);
            } catch (const json::parse_error& e) {
                throw Error(ErrorCode::ParseError, sim_config + ": " + e.what());
            }
            const ScenarioConfig cfg = scenario_from_json(j);
            RunOptions opt;
            opt.jobs = sim_jobs ? *sim_jobs : jobs_from_env();
            const ScenarioReport rep = run_scenario(cfg, opt);
            write_report(rep, sim_out, ReportFormat::Csv);
            if (!sim_meta.empty()) write_report(rep, sim_meta, ReportFormat::Json);
            if (!sim_reps.empty()) write_replicates_csv(rep, sim_reps);
            for (const auto& row : rep.rows)
                if (row.reps_failed > 0)
                    err << "warning: " << row.method << ": " << row.reps_failed << " replicate(s) failed\n";
            return 0;
        }

        if (ing->parsed()) {
            PosteriorSummaries ps{read_matrix_csv(ing_means), read_matrix_csv(ing_vars)};
            const StandardizedData sd = standardize_and_filter(ps, ratio);
            print_warnings(err, sd.warnings);
            std::error_code ec;
            std::filesystem::create_directories(ing_dir, ec);
            if (ec) throw Error(ErrorCode::IoError, "cannot create '" + ing_dir + "': " + ec.message());
            const std::filesystem::path dir(ing_dir);
            std::vector<std::string> header;
            for (Index j : sd.kept) header.push_back("f" + std::to_string(j + 1));
            write_matrix_csv((dir / "w.csv").string(), sd.W, header);
            write_vector_csv((dir / "sigma_u.csv").string(), sd.sigma_u_diag, "sigma_u");
            write_index_csv((dir / "kept.csv").string(), sd.kept, "index");
            write_index_csv((dir / "dropped.csv").string(), sd.dropped, "index");
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace eivscreen
