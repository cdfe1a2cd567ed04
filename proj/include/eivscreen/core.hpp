#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eivscreen/error.hpp"

namespace eivscreen {

using Index = Eigen::Index;
// Feature indices are 0-based in memory; files and the CLI use 1-based.
using IndexSet = std::vector<Index>;

inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kEigenTol = -1e-8;

// Measurement-error covariance, held either as its diagonal or as a full
// symmetric matrix. Marginal statistics only ever read the diagonal.
class SigmaU {
public:
    enum class Form { Diagonal, Full };

    SigmaU() = default;
    static SigmaU diagonal(Eigen::VectorXd diag);
    static SigmaU full(Eigen::MatrixXd matrix);
    static SigmaU zero(Index p) { return diagonal(Eigen::VectorXd::Zero(p)); }

    Form form() const { return form_; }
    bool is_diagonal() const { return form_ == Form::Diagonal; }
    Index size() const { return form_ == Form::Diagonal ? diag_.size() : full_.rows(); }

    // sigma_j^2 for every feature, regardless of form.
    Eigen::VectorXd variances() const;
    Eigen::MatrixXd dense() const;
    const Eigen::VectorXd& diag_storage() const { return diag_; }
    const Eigen::MatrixXd& full_storage() const { return full_; }

    double quad_form(const Eigen::VectorXd& beta) const;
    // Principal submatrix (or diagonal subvector) in the order of `idx`.
    SigmaU restrict(const IndexSet& idx) const;
    // gram -= Sigma_u, in place.
    void subtract_from(Eigen::MatrixXd& gram) const;

private:
    Form form_ = Form::Diagonal;
    Eigen::VectorXd diag_;
    Eigen::MatrixXd full_;
};

struct ObservedDataset {
    Eigen::VectorXd y;
    Eigen::MatrixXd W;
    SigmaU sigma_u;

    Index n() const { return W.rows(); }
    Index p() const { return W.cols(); }
};

struct MarginalStats {
    Eigen::VectorXd v;       // (1/n) sum_i W_ij^2 - sigma_j^2
    Eigen::VectorXd c;       // (1/n) sum_i W_ij y_i
    std::vector<bool> valid; // v_j > 0
    Index n = 0;

    Index p() const { return v.size(); }
    Index valid_count() const;
};

// Tuning values actually used by a fit or a screen. Unset fields did not apply.
struct TuningRecord {
    std::optional<double> lambda;
    std::optional<double> mu;
    std::optional<double> radius;
    std::optional<double> mu_tilde;
    std::optional<double> alpha;
    std::optional<double> kappa;
    std::optional<Index> d;
    std::optional<Index> M;
    std::optional<int> folds;
    std::optional<std::uint64_t> seed;
    Index degenerate_features = 0;
    // Solver diagnostics (iteration counts, residuals, projection distance).
    std::map<std::string, double> diagnostics;
};

struct StageTimes {
    double screening_s = 0.0;
    double estimation_s = 0.0;
};

struct CoefEstimate {
    Eigen::VectorXd beta;
    IndexSet support;
    std::string method;
    TuningRecord tuning;
    StageTimes elapsed;
    bool converged = true;
    std::vector<std::string> warnings;
};

struct ScreeningResult {
    IndexSet kept;          // sorted ascending
    Eigen::VectorXd scores; // NaN for features that could not be ranked
    std::string method;
    TuningRecord tuning;
    std::vector<std::string> warnings;
};

void validate_dataset(const ObservedDataset& d);
MarginalStats marginal_stats(const ObservedDataset& d);
ObservedDataset restrict_columns(const ObservedDataset& d, const IndexSet& idx);
Eigen::VectorXd embed_coefficients(const Eigen::VectorXd& beta_sub, const IndexSet& idx, Index p);

// Exact nonzero pattern, ascending.
IndexSet support_of(const Eigen::VectorXd& beta);
CoefEstimate make_estimate(Eigen::VectorXd beta, std::string method);

}  // namespace eivscreen
