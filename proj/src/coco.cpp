#include <algorithm>
#include <cmath>
#include <sstream>

#include "detail.hpp"
#include "eivscreen/estimators.hpp"
#include "eivscreen/rng.hpp"

namespace eivscreen {

Eigen::MatrixXd clip_eigenvalues(const Eigen::MatrixXd& sym, double floor) {
    const Index p = sym.rows();
    Eigen::VectorXd lam; // ascending
    Eigen::MatrixXd V;
    detail::symmetric_eigen(sym, lam, &V);
    Index low = 0;
    while (low < p && lam(low) < floor) ++low;
    // Rebuild from whichever eigenspace is smaller.
    Eigen::MatrixXd out;
    if (low <= p - low) {
        out = sym;
        if (low > 0) {
            const Eigen::MatrixXd Z = V.leftCols(low) * (floor - lam.head(low).array()).sqrt().matrix().asDiagonal();
            out.selfadjointView<Eigen::Lower>().rankUpdate(Z);
        }
    } else {
        out = Eigen::MatrixXd::Identity(p, p) * floor;
        const Eigen::MatrixXd Z =
            V.rightCols(p - low) * (lam.tail(p - low).array() - floor).sqrt().matrix().asDiagonal();
        out.selfadjointView<Eigen::Lower>().rankUpdate(Z);
    }
    out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
    return out;
}

namespace {

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

// prox of t * max|.| at V, via Moreau: V - P_{|.|_1 <= t}(V).
Eigen::MatrixXd prox_maxnorm(const Eigen::MatrixXd& V, double t) {
    const Eigen::Map<const Eigen::VectorXd> flat(V.data(), V.size());
    const double theta = l1_ball_threshold(flat, t);
    // V - soft(V, theta) clips every entry to [-theta, theta].
    return V.cwiseMax(-theta).cwiseMin(theta);
}

}  // namespace

PsdProjection nearest_psd_maxnorm(const Eigen::MatrixXd& sigma_hat, const PsdProjectionOptions& opt) {
    const Index p = sigma_hat.rows();
    if (sigma_hat.cols() != p) throw Error(ErrorCode::DimensionMismatch, "nearest_psd_maxnorm: matrix must be square");
    if (p > 0 && (sigma_hat - sigma_hat.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol)
        throw Error(ErrorCode::InvalidArgument, "nearest_psd_maxnorm: matrix must be symmetric");

    PsdProjection out;
    if (p == 0) {
        out.converged = true;
        return out;
    }
    const Eigen::MatrixXd S = 0.5 * (sigma_hat + sigma_hat.transpose());

    Eigen::VectorXd lam0;
    detail::symmetric_eigen(S, lam0, nullptr);
    const double floor = opt.min_eigenvalue;
    // Inputs already inside the cone (up to rounding) are their own projection.
    if (lam0(0) - floor >= -1e-12 * std::max(1.0, S.cwiseAbs().maxCoeff())) {
        out.sigma_tilde = sigma_hat;
        out.converged = true;
        return out;
    }

    // Split: A in the PSD cone, B = A - S carries the max-norm objective.
    double rho = opt.rho;
    Eigen::MatrixXd A = clip_eigenvalues(S, floor);
    Eigen::MatrixXd B = A - S;
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(p, p); // scaled dual
    Eigen::MatrixXd best = A;
    double best_dist = max_abs_diff(A, S);

    const double sqrt_n = static_cast<double>(p); // sqrt of the entry count
    const double s_norm = S.norm();
    for (out.iterations = 1; out.iterations <= opt.max_iter; ++out.iterations) {
        A = clip_eigenvalues(B + S - U, floor);
        const Eigen::MatrixXd B_old = B;
        B = prox_maxnorm(A - S + U, 1.0 / rho);
        const Eigen::MatrixXd R = A - B - S;
        U += R;

        const double dist = max_abs_diff(A, S);
        if (dist < best_dist) {
            best_dist = dist;
            best = A;
        }

        const double r_norm = R.norm();
        const double s_dual = rho * (B - B_old).norm();
        const double eps_pri = sqrt_n * opt.tol + opt.tol * std::max({A.norm(), B.norm(), s_norm});
        const double eps_dual = sqrt_n * opt.tol + opt.tol * rho * U.norm();
        if (r_norm <= eps_pri && s_dual <= eps_dual) {
            out.converged = true;
            break;
        }
        if (r_norm > 10.0 * s_dual) {
            rho *= 2.0;
            U *= 0.5;
        } else if (s_dual > 10.0 * r_norm) {
            rho *= 0.5;
            U *= 2.0;
        }
    }
    out.iterations = std::min(out.iterations, opt.max_iter);
    out.sigma_tilde = std::move(best);
    out.maxnorm_distance = max_abs_diff(out.sigma_tilde, S);
    return out;
}

CoefEstimate coco_lasso(const PsdProjection& proj, const Eigen::VectorXd& rho, double mu_tilde) {
    const LassoCdResult r = lasso_cd(proj.sigma_tilde, rho, mu_tilde);
    CoefEstimate e = make_estimate(r.beta, "coco");
    e.converged = r.converged && proj.converged;
    e.tuning.mu_tilde = mu_tilde;
    e.tuning.diagnostics["kkt_residual"] = r.kkt_residual;
    e.tuning.diagnostics["cd_sweeps"] = r.sweeps;
    e.tuning.diagnostics["admm_iterations"] = proj.iterations;
    e.tuning.diagnostics["admm_converged"] = proj.converged ? 1.0 : 0.0;
    e.tuning.diagnostics["maxnorm_distance"] = proj.maxnorm_distance;
    if (!r.converged) e.warnings.push_back("coco lasso: coordinate descent MaxIterExceeded");
    if (!proj.converged) e.warnings.push_back("coco lasso: PSD projection MaxIterExceeded");
    return e;
}

CoefEstimate coco_lasso(const ObservedDataset& d, double mu_tilde, const PsdProjectionOptions& popt) {
    const CorrectedGram g = corrected_gram(d);
    return coco_lasso(nearest_psd_maxnorm(g.gamma, popt), g.rho, mu_tilde);
}

CocoCvResult coco_cv(const ObservedDataset& d, const CocoCvOptions& opt) {
    const Index n = d.n();
    if (opt.folds > n) {
        std::ostringstream os;
        os << opt.folds << " folds for " << n << " observations";
        throw Error(ErrorCode::FoldsExceedN, os.str());
    }
    const detail::GramSums full = detail::gram_sums(d.W, d.y);
    const double mu_max = (full.wy / static_cast<double>(n)).cwiseAbs().maxCoeff();

    CocoCvResult out;
    out.mu_grid = detail::geometric_grid(mu_max, opt.grid_ratio, opt.grid_size);
    out.cv_curve = Eigen::VectorXd::Zero(opt.grid_size);
    if (opt.grid_size == 1 || mu_max == 0.0) {
        out.mu_tilde_hat = out.mu_grid(0);
        return out;
    }

    LassoCdOptions path_opt;
    path_opt.tol = std::max(1e-10, 1e-7 * mu_max);

    const std::vector<IndexSet> folds = make_folds(n, opt.folds, opt.seed);
    for (const IndexSet& test : folds) {
        const detail::SplitSums s = detail::split_sums(full, d.W, d.y, test);
        const double inv_tr = 1.0 / static_cast<double>(s.train.rows);
        const double inv_te = 1.0 / static_cast<double>(s.test.rows);

        Eigen::MatrixXd gamma_tr = s.train.ww * inv_tr;
        d.sigma_u.subtract_from(gamma_tr);
        const PsdProjection proj_tr = nearest_psd_maxnorm(gamma_tr, opt.projection);
        ++out.projections;
        out.projections_converged += proj_tr.converged ? 1 : 0;

        Eigen::MatrixXd sigma_te;
        if (opt.test_gram == CocoTestGram::ProjectTestSplit) {
            Eigen::MatrixXd gamma_te = s.test.ww * inv_te;
            d.sigma_u.subtract_from(gamma_te);
            const PsdProjection proj_te = nearest_psd_maxnorm(gamma_te, opt.projection);
            ++out.projections;
            out.projections_converged += proj_te.converged ? 1 : 0;
            sigma_te = proj_te.sigma_tilde;
        } else {
            sigma_te = proj_tr.sigma_tilde;
        }
        const Eigen::VectorXd rho_tr = s.train.wy * inv_tr;
        const Eigen::VectorXd rho_te = s.test.wy * inv_te;

        Eigen::VectorXd beta = Eigen::VectorXd::Zero(d.p());
        for (int g = 0; g < opt.grid_size; ++g) {
            beta = lasso_cd(proj_tr.sigma_tilde, rho_tr, out.mu_grid(g), path_opt, &beta).beta;
            out.cv_curve(g) += 0.5 * beta.dot(detail::sparse_matvec(sigma_te, beta)) - rho_te.dot(beta);
        }
    }

    int best = 0;
    for (int g = 1; g < opt.grid_size; ++g)
        if (out.cv_curve(g) < out.cv_curve(best)) best = g;
    out.mu_tilde_hat = out.mu_grid(best);
    return out;
}

CoefEstimate coco_tuned(const ObservedDataset& d, const CocoCvOptions& opt) {
    const CocoCvResult cv = coco_cv(d, opt);
    const CorrectedGram g = corrected_gram(d);
    const PsdProjection proj = nearest_psd_maxnorm(g.gamma, opt.projection);
    CoefEstimate e = coco_lasso(proj, g.rho, cv.mu_tilde_hat);
    e.tuning.folds = opt.folds;
    e.tuning.seed = opt.seed;
    e.tuning.diagnostics["cv_projections"] = cv.projections;
    e.tuning.diagnostics["cv_projections_converged"] = cv.projections_converged;
    return e;
}

}  // namespace eivscreen
