#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eivscreen/core.hpp"
#include "eivscreen/estimators.hpp"
#include "eivscreen/rng.hpp"

namespace eivscreen {

enum class SigmaXKind { Ar1, Homogeneous };
enum class SigmaUKind { DiagonalUniform, BlockDiagonal, Homogeneous, None };

std::string to_string(SigmaXKind k);
std::string to_string(SigmaUKind k);

struct MethodPair {
    ScreenerSpec screener;
    EstimatorSpec estimator;

    // "pmsc-cv+corrected-lasso", "corrected-lasso", "sisc" ...
    std::string label() const;
};

struct ScenarioConfig {
    std::string id = "scenario";
    Index n = 500;
    Index p = 1000;
    Index s = 5;
    SigmaXKind sigma_x = SigmaXKind::Ar1;
    double rho_x = 0.5;
    SigmaUKind sigma_u = SigmaUKind::DiagonalUniform;
    double noise_var = 0.25;
    int reps = 100;
    std::uint64_t base_seed = 0;
    std::vector<MethodPair> methods;
};

// Every problem with the configuration, one message each; empty when valid.
std::vector<std::string> config_problems(const ScenarioConfig& cfg);
void validate_config(const ScenarioConfig& cfg);

// Schema problems (unknown keys, wrong types, bad enum strings) and
// config_problems are all collected before a ValidationError is thrown.
ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioConfig& cfg);

Eigen::MatrixXd make_sigma_x(SigmaXKind kind, double rho_x, Index p);
SigmaU make_sigma_u(SigmaUKind kind, Index p, Rng& rng);

struct GeneratedInstance {
    ObservedDataset dataset;
    Eigen::VectorXd beta0;
    IndexSet true_support;
    Eigen::MatrixXd X; // latent design, kept for diagnostics
};

// Draws replicates of one scenario; covariance factors are computed once.
class ScenarioSampler {
public:
    explicit ScenarioSampler(const ScenarioConfig& cfg);
    GeneratedInstance draw(int rep_index) const;

private:
    ScenarioConfig cfg_;
    Eigen::MatrixXd lx_; // lower factor of Sigma_x
    Eigen::MatrixXd lu_; // lower factor of a fixed Sigma_u; empty for the per-replicate diagonal kind
    SigmaU fixed_u_;
};

GeneratedInstance gen_instance(const ScenarioConfig& cfg, int rep_index);

struct SelectionRates {
    double fpr = 0.0; // percent
    double fnr = 0.0; // percent
};

SelectionRates selection_metrics(const IndexSet& selected, const IndexSet& true_support, Index p);
double l2_error(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta0);

// Smallest d whose top-d ranked features cover the true support; p + 1 when
// some true feature is unranked.
Index min_model_size(const Eigen::VectorXd& scores, const IndexSet& true_support);
Index min_model_size(const IndexSet& ordering, const IndexSet& true_support, Index p);

struct MethodOutcome {
    bool ok = false;
    std::string error;
    std::optional<SelectionRates> stage1;
    std::optional<SelectionRates> stage2;
    std::optional<double> l2;
    Index stage1_kept = 0;
    Index support_size = 0;
    bool support_within_stage1 = true;
    StageTimes elapsed;
    bool converged = true;
    int projections = 0;
    int projections_converged = 0;
    std::vector<std::string> warnings;
};

struct ReplicateRecord {
    int rep = 0;
    bool ok = false;
    std::string error;
    std::vector<MethodOutcome> methods; // aligned with ScenarioConfig::methods
    Index mms_sisc = 0;
    Index mms_pmsc = 0;
};

struct MethodSummary {
    std::string method;
    std::optional<double> stage1_fpr, stage1_fnr;
    std::optional<double> stage2_fpr, stage2_fnr;
    std::optional<double> stage1_fnr_sd;
    std::optional<double> l2_mean, l2_sd, l2_se;
    double time_stage1_s = 0.0;
    double time_stage2_s = 0.0;
    int reps_ok = 0;
    int reps_failed = 0;
};

struct ScenarioReport {
    ScenarioConfig config;
    std::vector<MethodSummary> rows;
    std::vector<ReplicateRecord> replicates;
};

struct RunOptions {
    int jobs = 1;
    // Called after each finished replicate with (done, total); serialized.
    std::function<void(int, int)> progress;
};

ReplicateRecord run_replicate(const ScenarioConfig& cfg, const ScenarioSampler& sampler, int rep);
std::vector<MethodSummary> summarize(const ScenarioConfig& cfg, const std::vector<ReplicateRecord>& reps);
ScenarioReport run_scenario(const ScenarioConfig& cfg, const RunOptions& opt = {});

// Config echo, seeds, library version and per-method rows (timings included).
nlohmann::json report_metadata(const ScenarioReport& r);

extern const char* const kVersion;

}  // namespace eivscreen
