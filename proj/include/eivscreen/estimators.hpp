#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "eivscreen/core.hpp"
#include "eivscreen/screening.hpp"

namespace eivscreen {

// Gamma = (1/n) W'W - Sigma_u (possibly indefinite), rho = (1/n) W'y.
struct CorrectedGram {
    Eigen::MatrixXd gamma;
    Eigen::VectorXd rho;
};

CorrectedGram corrected_gram(const ObservedDataset& d);
// Same quantities without the measurement-error correction.
CorrectedGram naive_gram(const ObservedDataset& d);

// ---------------------------------------------------------------------------
// Lasso on a PSD quadratic: min 1/2 b'G b - r'b + mu |b|_1, cyclic coordinate
// descent with an active-set inner loop. Convergence is declared on the KKT
// residual, so `kkt_residual <= tol` whenever `converged` is set.

struct LassoCdOptions {
    double tol = 1e-10;
    int max_iter = 10000; // full sweeps
};

struct LassoCdResult {
    Eigen::VectorXd beta;
    int sweeps = 0;
    bool converged = false;
    double kkt_residual = 0.0;
};

LassoCdResult lasso_cd(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& rho, double mu,
                       const LassoCdOptions& opt = {}, const Eigen::VectorXd* warm_start = nullptr);

// max over j of the violation of the lasso optimality conditions at beta.
double lasso_kkt_residual(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& rho, double mu,
                          const Eigen::VectorXd& beta);

struct NaiveLassoOptions {
    int folds = 10;
    int grid_size = 100;
    double grid_ratio = 1e-3;
    std::uint64_t seed = 0;
    // A fold path stops once the training fit explains this share of y'y, or
    // once a grid step adds less than min_gain (relative) to it. Only grid
    // points reached by every fold are candidates.
    double max_explained = 0.999;
    double min_gain = 1e-5;
};

struct NaiveLassoCvResult {
    double mu_hat = 0.0; // on the 1/2-scaled lasso_cd objective
    CoefEstimate fit;
    Eigen::VectorXd mu_grid;
    Eigen::VectorXd cv_curve; // pooled held-out mean squared prediction error
    int path_length = 0;      // leading grid points scored by every fold
};

NaiveLassoCvResult naive_lasso_cv(const ObservedDataset& d, const NaiveLassoOptions& opt = {});

// ---------------------------------------------------------------------------
// Euclidean projection onto {w : |w|_1 <= R}.
Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius);
// Threshold theta >= 0 such that soft(v, theta) is the projection.
double l1_ball_threshold(const Eigen::VectorXd& v, double radius);

// ---------------------------------------------------------------------------
// Corrected lasso:
//   min (1/n)|y - W b|^2 - b' Sigma_u b + mu |b|_1   s.t. |b|_1 <= R
// by composite gradient descent started at 0. The loss is non-convex when
// Gamma is indefinite; the result is a stationary point.

enum class StepRule { FixedLipschitz, Backtracking };

struct CorrectedLassoConfig {
    double mu = 0.0;
    double radius = 1.0;
    StepRule step = StepRule::Backtracking;
    int max_iter = 5000;
    double tol = 1e-8;
    int power_iterations = 100;
};

struct CorrectedLassoTrace {
    std::vector<double> objective; // filled only when requested
};

struct CorrectedLassoResult {
    Eigen::VectorXd beta;
    int iterations = 0;
    bool converged = false;
    double kkt_residual = 0.0; // norm of the gradient mapping at the final iterate
    double objective = 0.0;    // b'Gamma b - 2 rho'b + mu|b|_1
    double step = 0.0;
};

// Largest |eigenvalue| of a symmetric matrix by power iteration.
double spectral_norm(const Eigen::MatrixXd& sym, int iterations = 100);

CorrectedLassoResult corrected_lasso_solve(const CorrectedGram& g, const CorrectedLassoConfig& cfg,
                                           std::optional<double> lipschitz = std::nullopt,
                                           const Eigen::VectorXd* warm_start = nullptr,
                                           CorrectedLassoTrace* trace = nullptr);

CoefEstimate corrected_lasso(const ObservedDataset& d, const CorrectedLassoConfig& cfg);

struct CorrectedLassoTuneOptions {
    int folds = 10;
    int r_grid = 20;
    NaiveLassoOptions naive{};
    std::uint64_t seed = 0;
};

// mu from the naive lasso CV curve, R from a second CV over
// [1e-3 kappa, kappa], kappa = 2 |b_naive|_1.
CoefEstimate corrected_lasso_tuned(const ObservedDataset& d, const CorrectedLassoTuneOptions& opt = {});

// ---------------------------------------------------------------------------
// Nearest PSD matrix in the element-wise max norm, by ADMM.

struct PsdProjectionOptions {
    double tol = 1e-7;
    int max_iter = 10000;
    double rho = 1.0;
    // Project onto {A : A >= floor * I}; 0 gives the PSD cone itself.
    double min_eigenvalue = 0.0;
};

// CoCo keeps a small eigenvalue floor so that its lasso stays bounded below
// when the surrogate Gram would otherwise be singular.
inline constexpr double kCocoEigenFloor = 1e-4;

inline PsdProjectionOptions coco_projection_defaults() {
    PsdProjectionOptions o;
    o.min_eigenvalue = kCocoEigenFloor;
    return o;
}

struct PsdProjection {
    Eigen::MatrixXd sigma_tilde;
    double maxnorm_distance = 0.0;
    int iterations = 0;
    bool converged = false;
};

PsdProjection nearest_psd_maxnorm(const Eigen::MatrixXd& sigma_hat, const PsdProjectionOptions& opt = {});

// Eigenvalue clipping at `floor`: the Frobenius-nearest matrix with spectrum >= floor.
Eigen::MatrixXd clip_eigenvalues(const Eigen::MatrixXd& sym, double floor = 0.0);

// ---------------------------------------------------------------------------
// CoCo lasso: lasso on the max-norm-nearest PSD surrogate of the corrected Gram.

struct CocoFit {
    CoefEstimate estimate;
    PsdProjection projection;
};

CoefEstimate coco_lasso(const ObservedDataset& d, double mu_tilde,
                        const PsdProjectionOptions& popt = coco_projection_defaults());
CoefEstimate coco_lasso(const PsdProjection& proj, const Eigen::VectorXd& rho, double mu_tilde);

enum class CocoTestGram { ProjectTestSplit, ReuseTrainingProjection };

struct CocoCvOptions {
    int folds = 10;
    int grid_size = 50;
    double grid_ratio = 1e-3;
    CocoTestGram test_gram = CocoTestGram::ProjectTestSplit;
    PsdProjectionOptions projection = coco_projection_defaults();
    std::uint64_t seed = 0;
};

struct CocoCvResult {
    double mu_tilde_hat = 0.0;
    Eigen::VectorXd mu_grid;
    Eigen::VectorXd cv_curve;
    int projections = 0;
    int projections_converged = 0;
};

CocoCvResult coco_cv(const ObservedDataset& d, const CocoCvOptions& opt = {});

// coco_cv followed by the full-data fit at the selected penalty.
CoefEstimate coco_tuned(const ObservedDataset& d, const CocoCvOptions& opt = {});

// ---------------------------------------------------------------------------
// Screen -> restrict -> estimate -> embed.

enum class ScreenerKind { None, Sisc, PmscFs, PmscCv };
enum class EstimatorKind { None, CorrectedLasso, Coco };

struct ScreenerSpec {
    ScreenerKind kind = ScreenerKind::None;
    std::optional<Index> size; // d for SISc, M for PMSc-FS; default floor(n / ln n)
    double alpha = 0.5;
    int folds = 5;
    int grid_size = 40;
};

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::CorrectedLasso;
    int folds = 10;
    int r_grid = 20;
    int mu_grid = 100;
    int coco_grid = 50;
    CocoTestGram coco_test_gram = CocoTestGram::ProjectTestSplit;
    PsdProjectionOptions projection = coco_projection_defaults();
    // Fixed tuning values bypass cross-validation when set.
    std::optional<double> mu;
    std::optional<double> radius;
    std::optional<double> mu_tilde;
};

std::string to_string(ScreenerKind k);
std::string to_string(EstimatorKind k);
ScreenerKind parse_screener(const std::string& s);
EstimatorKind parse_estimator(const std::string& s);

struct TwoStageResult {
    ScreeningResult screen;
    CoefEstimate estimate;
    StageTimes elapsed;
};

ScreeningResult run_screener(const ObservedDataset& d, const ScreenerSpec& spec, std::uint64_t seed);
CoefEstimate run_estimator(const ObservedDataset& d, const EstimatorSpec& spec, std::uint64_t seed);

TwoStageResult two_stage_fit(const ObservedDataset& d, const ScreenerSpec& screener, const EstimatorSpec& estimator,
                             std::uint64_t seed);

}  // namespace eivscreen
