#pragma once

#include <cstdint>
#include <utility>

#include "eivscreen/core.hpp"

namespace eivscreen {

// Bridge penalty |b|^alpha, 0 < alpha < 1, together with the constant that
// locates the zero/nonzero switch of the univariate penalized problem.
class BridgeConfig {
public:
    explicit BridgeConfig(double alpha = 0.5);

    double alpha() const { return alpha_; }
    double c_alpha() const { return c_alpha_; }

    static double compute_c_alpha(double alpha);

private:
    double alpha_;
    double c_alpha_;
};

struct PmscPath {
    Eigen::VectorXd thresholds; // lambda*_j; NaN for features with v_j <= 0
    IndexSet ordering;          // valid features by descending threshold
};

// Corrected marginal slopes c_j / v_j; NaN where v_j <= 0.
Eigen::VectorXd sisc_coefficients(const MarginalStats& s);

ScreeningResult sisc_screen(const Eigen::VectorXd& beta_tilde, Index d);

// floor(n / ln n)
Index default_screen_size(Index n);

PmscPath pmsc_entry_threshold(const MarginalStats& s, const BridgeConfig& cfg);

// Global minimizer of v b^2 - 2 c b + lambda |b|^alpha.
double pmsc_solve_univariate(double v, double c, double lambda, const BridgeConfig& cfg);

CoefEstimate pmsc_solve(const ObservedDataset& d, double lambda, const BridgeConfig& cfg);
CoefEstimate pmsc_solve(const MarginalStats& s, double lambda, const BridgeConfig& cfg);

ScreeningResult pmsc_fs_screen(const PmscPath& path, Index M);

struct PmscCvOptions {
    int grid_size = 40;
    int folds = 5;
    std::uint64_t seed = 0;
};

struct PmscCvResult {
    double lambda_hat = 0.0;
    ScreeningResult screen;
    Eigen::VectorXd lambda_grid;
    Eigen::VectorXd cv_curve; // summed corrected held-out criterion per grid point
};

PmscCvResult pmsc_cv_screen(const ObservedDataset& d, const BridgeConfig& cfg, const PmscCvOptions& opt = {});

// Indices of `scores` ranked by descending value, ties by ascending index.
// Non-finite scores are left out.
IndexSet rank_descending(const Eigen::VectorXd& scores);

}  // namespace eivscreen
