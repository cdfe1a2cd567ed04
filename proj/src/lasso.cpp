#include <algorithm>
#include <cmath>
#include <sstream>

#include "detail.hpp"
#include "eivscreen/estimators.hpp"
#include "eivscreen/rng.hpp"

namespace eivscreen {

using detail::soft_threshold;

CorrectedGram naive_gram(const ObservedDataset& d) {
    const double inv_n = 1.0 / static_cast<double>(d.n());
    CorrectedGram g;
    g.gamma = detail::cross_product(d.W) * inv_n;
    g.rho = (d.W.transpose() * d.y) * inv_n;
    return g;
}

CorrectedGram corrected_gram(const ObservedDataset& d) {
    CorrectedGram g = naive_gram(d);
    d.sigma_u.subtract_from(g.gamma);
    return g;
}

namespace {

// Violation of the optimality conditions given grad = rho - Gamma beta.
double kkt_from_gradient(const Eigen::VectorXd& grad, const Eigen::VectorXd& beta, double mu) {
    double worst = 0.0;
    for (Index j = 0; j < beta.size(); ++j) {
        const double r = beta(j) == 0.0 ? std::max(0.0, std::abs(grad(j)) - mu)
                                         : std::abs(grad(j) - std::copysign(mu, beta(j)));
        worst = std::max(worst, r);
    }
    return worst;
}

}  // namespace

double lasso_kkt_residual(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& rho, double mu,
                          const Eigen::VectorXd& beta) {
    return kkt_from_gradient(rho - detail::sparse_matvec(gamma, beta), beta, mu);
}

LassoCdResult lasso_cd(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& rho, double mu,
                       const LassoCdOptions& opt, const Eigen::VectorXd* warm_start) {
    const Index p = gamma.rows();
    if (gamma.cols() != p || rho.size() != p)
        throw Error(ErrorCode::DimensionMismatch, "lasso_cd: gamma must be square and match rho");
    if (!(mu >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lasso_cd: mu must be non-negative");
    for (Index j = 0; j < p; ++j) {
        if (!(gamma(j, j) > 0.0)) {
            std::ostringstream os;
            os << "diagonal entry " << (j + 1) << " is " << gamma(j, j);
            throw Error(ErrorCode::NonPositiveDiagonal, os.str());
        }
    }

    LassoCdResult res;
    res.beta = warm_start ? *warm_start : Eigen::VectorXd::Zero(p);
    Eigen::VectorXd grad = rho - detail::sparse_matvec(gamma, res.beta);

    auto update = [&](Index j) {
        const double gjj = gamma(j, j);
        const double old = res.beta(j);
        const double next = soft_threshold(grad(j) + gjj * old, mu) / gjj;
        const double delta = next - old;
        if (delta != 0.0) {
            res.beta(j) = next;
            grad.noalias() -= gamma.col(j) * delta;
        }
    };

    constexpr int kInnerPasses = 1000;
    IndexSet active;
    for (res.sweeps = 1; res.sweeps <= opt.max_iter; ++res.sweeps) {
        for (Index j = 0; j < p; ++j) update(j);
        if (kkt_from_gradient(grad, res.beta, mu) <= opt.tol) {
            // Confirm against a freshly computed gradient before stopping.
            grad = rho - detail::sparse_matvec(gamma, res.beta);
            res.kkt_residual = kkt_from_gradient(grad, res.beta, mu);
            if (res.kkt_residual <= opt.tol) {
                res.converged = true;
                break;
            }
        }
        // Inner sweeps over the current support on a packed copy of its Gram
        // block; the full gradient is brought up to date afterwards.
        active = support_of(res.beta);
        const auto a = static_cast<Index>(active.size());
        if (a == 0) continue;
        Eigen::MatrixXd gaa(a, a);
        Eigen::VectorXd ga(a), ba(a);
        for (Index c = 0; c < a; ++c) {
            for (Index r = 0; r < a; ++r) gaa(r, c) = gamma(active[r], active[c]);
            ga(c) = grad(active[c]);
            ba(c) = res.beta(active[c]);
        }
        const Eigen::VectorXd b0 = ba;
        for (int inner = 0; inner < kInnerPasses; ++inner) {
            for (Index r = 0; r < a; ++r) {
                const double gjj = gaa(r, r);
                const double next = soft_threshold(ga(r) + gjj * ba(r), mu) / gjj;
                const double delta = next - ba(r);
                if (delta != 0.0) {
                    ba(r) = next;
                    ga.noalias() -= gaa.col(r) * delta;
                }
            }
            double worst = 0.0;
            for (Index r = 0; r < a; ++r) {
                const double v = ba(r) == 0.0 ? std::max(0.0, std::abs(ga(r)) - mu)
                                              : std::abs(ga(r) - std::copysign(mu, ba(r)));
                worst = std::max(worst, v);
            }
            if (worst <= 0.5 * opt.tol) break;
        }
        for (Index r = 0; r < a; ++r) {
            const double delta = ba(r) - b0(r);
            if (delta != 0.0) {
                res.beta(active[r]) = ba(r);
                grad.noalias() -= gamma.col(active[r]) * delta;
            }
        }
        if (!std::isfinite(res.beta.squaredNorm())) break; // unbounded objective
    }
    if (!res.converged) {
        res.sweeps = std::min(res.sweeps, opt.max_iter);
        res.kkt_residual = lasso_kkt_residual(gamma, rho, mu, res.beta);
    }
    return res;
}

NaiveLassoCvResult naive_lasso_cv(const ObservedDataset& d, const NaiveLassoOptions& opt) {
    const Index n = d.n();
    if (opt.folds > n) {
        std::ostringstream os;
        os << opt.folds << " folds for " << n << " observations";
        throw Error(ErrorCode::FoldsExceedN, os.str());
    }
    const detail::GramSums full = detail::gram_sums(d.W, d.y);
    const double inv_n = 1.0 / static_cast<double>(n);
    const Eigen::VectorXd rho_full = full.wy * inv_n;
    const double mu_max = rho_full.cwiseAbs().maxCoeff();

    NaiveLassoCvResult out;
    out.mu_grid = detail::geometric_grid(mu_max, opt.grid_ratio, opt.grid_size);
    out.cv_curve = Eigen::VectorXd::Zero(opt.grid_size);

    // Path fits only rank grid points, so they run at a looser tolerance.
    LassoCdOptions path_opt;
    path_opt.tol = std::max(1e-10, 1e-7 * mu_max);

    // Grid points every fold reached; a fold path stops early once the
    // training fit saturates (see path_saturated).
    int usable = opt.grid_size;
    if (mu_max > 0.0) {
        const std::vector<IndexSet> folds = make_folds(n, opt.folds, opt.seed);
        const double yy_full = d.y.squaredNorm();
        for (const IndexSet& test : folds) {
            const detail::SplitSums s = detail::split_sums(full, d.W, d.y, test);
            const double inv_tr = 1.0 / static_cast<double>(s.train.rows);
            const Eigen::MatrixXd gamma = s.train.ww * inv_tr;
            const Eigen::VectorXd rho = s.train.wy * inv_tr;
            const Eigen::VectorXd y_te = detail::gather(d.y, test);
            const double yy = (yy_full - y_te.squaredNorm()) * inv_tr;
            Eigen::VectorXd beta = Eigen::VectorXd::Zero(d.p());
            double prev_explained = 0.0;
            for (int g = 0; g < usable; ++g) {
                beta = lasso_cd(gamma, rho, out.mu_grid(g), path_opt, &beta).beta;
                const Eigen::VectorXd resid = y_te - detail::predict_rows(d.W, test, beta);
                out.cv_curve(g) += resid.squaredNorm();
                const double rss = yy - 2.0 * rho.dot(beta) + beta.dot(detail::sparse_matvec(gamma, beta));
                const double explained = yy > 0.0 ? 1.0 - rss / yy : 1.0;
                if (explained >= opt.max_explained || (g > 0 && explained - prev_explained < opt.min_gain * explained)) {
                    usable = g + 1;
                    break;
                }
                prev_explained = explained;
            }
        }
        out.cv_curve *= inv_n;
    }
    out.path_length = usable;

    // Ties go to the larger penalty.
    int best = 0;
    for (int g = 1; g < usable; ++g)
        if (out.cv_curve(g) < out.cv_curve(best)) best = g;
    out.mu_hat = out.mu_grid(best);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d.p());
    bool converged = true;
    double kkt = 0.0;
    int sweeps = 0;
    if (mu_max > 0.0) {
        // Warm-started descent along the grid down to the selected point.
        const Eigen::MatrixXd gamma = full.ww * inv_n;
        for (int g = 0; g <= best; ++g) {
            LassoCdOptions o;
            if (g < best) o = path_opt;
            LassoCdResult r = lasso_cd(gamma, rho_full, out.mu_grid(g), o, &beta);
            beta = std::move(r.beta);
            converged = r.converged;
            kkt = r.kkt_residual;
            sweeps = r.sweeps;
        }
    }
    out.fit = make_estimate(std::move(beta), "naive-lasso");
    out.fit.converged = converged;
    out.fit.tuning.mu = out.mu_hat;
    out.fit.tuning.folds = opt.folds;
    out.fit.tuning.seed = opt.seed;
    out.fit.tuning.diagnostics["kkt_residual"] = kkt;
    out.fit.tuning.diagnostics["cd_sweeps"] = sweeps;
    out.fit.tuning.diagnostics["path_length"] = usable;
    if (!converged) out.fit.warnings.push_back("naive lasso: MaxIterExceeded");
    return out;
}

}  // namespace eivscreen
