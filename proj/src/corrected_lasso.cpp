#include <algorithm>
#include <cmath>
#include <sstream>

#include "detail.hpp"
#include "eivscreen/estimators.hpp"
#include "eivscreen/rng.hpp"

namespace eivscreen {

using detail::soft_threshold;

double l1_ball_threshold(const Eigen::VectorXd& v, double radius) {
    if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "l1-ball radius must be positive");
    const double l1 = v.lpNorm<1>();
    if (l1 <= radius) return 0.0;
    // Michelot's fixed point: theta = (sum of |v_j| above theta - R) / count,
    // started below the answer; entries at or below theta are dropped for good.
    std::vector<double> u(static_cast<std::size_t>(v.size()));
    for (Index j = 0; j < v.size(); ++j) u[static_cast<std::size_t>(j)] = std::abs(v(j));
    double theta = (l1 - radius) / static_cast<double>(u.size());
    for (;;) {
        double sum = 0.0;
        std::size_t kept = 0;
        for (double a : u)
            if (a > theta) {
                u[kept++] = a;
                sum += a;
            }
        const bool stable = kept == u.size();
        u.resize(kept);
        theta = (sum - radius) / static_cast<double>(kept);
        if (stable) break;
    }
    return std::max(theta, 0.0);
}

Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius) {
    const double theta = l1_ball_threshold(v, radius);
    if (theta == 0.0) return v;
    Eigen::VectorXd w(v.size());
    for (Index j = 0; j < v.size(); ++j) w(j) = soft_threshold(v(j), theta);
    // Guard the rounding in the cumulative sum.
    const double norm = w.lpNorm<1>();
    if (norm > radius) w *= radius / norm;
    return w;
}

double spectral_norm(const Eigen::MatrixXd& sym, int iterations) {
    const Index p = sym.rows();
    if (p == 0) return 0.0;
    Eigen::VectorXd x(p);
    for (Index i = 0; i < p; ++i) x(i) = 1.0 + static_cast<double>(i) / static_cast<double>(p);
    x.normalize();
    double est = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXd y = sym * x;
        const double nrm = y.norm();
        if (nrm == 0.0) return 0.0;
        est = nrm;
        x = y / nrm;
    }
    return est;
}

namespace {

struct SmoothPart {
    const CorrectedGram& g;
    // f(b) = b'Gamma b - 2 rho'b, with Gamma b supplied.
    double value(const Eigen::VectorXd& b, const Eigen::VectorXd& gb) const { return b.dot(gb) - 2.0 * g.rho.dot(b); }
};

Eigen::VectorXd prox_step(const Eigen::VectorXd& z, double t_l1, double radius) {
    Eigen::VectorXd w(z.size());
    for (Index j = 0; j < z.size(); ++j) w(j) = soft_threshold(z(j), t_l1);
    return project_l1_ball(w, radius);
}

}  // namespace

CorrectedLassoResult corrected_lasso_solve(const CorrectedGram& g, const CorrectedLassoConfig& cfg,
                                           std::optional<double> lipschitz, const Eigen::VectorXd* warm_start,
                                           CorrectedLassoTrace* trace) {
    if (!(cfg.mu >= 0.0)) throw Error(ErrorCode::InvalidArgument, "corrected lasso: mu must be non-negative");
    if (!(cfg.radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "corrected lasso: R must be positive");
    const Index p = g.gamma.rows();
    const SmoothPart f{g};

    const double L = lipschitz ? *lipschitz : 2.0 * spectral_norm(g.gamma, cfg.power_iterations);
    double eta = L > 0.0 ? 1.0 / L : 1.0;

    CorrectedLassoResult res;
    res.beta = warm_start ? project_l1_ball(*warm_start, cfg.radius) : Eigen::VectorXd::Zero(p);
    Eigen::VectorXd gb = detail::sparse_matvec(g.gamma, res.beta);
    double fval = f.value(res.beta, gb);
    if (trace) trace->objective.push_back(fval + cfg.mu * res.beta.lpNorm<1>());

    Eigen::VectorXd cand, gb_c, grad;
    for (res.iterations = 1; res.iterations <= cfg.max_iter; ++res.iterations) {
        grad = 2.0 * (gb - g.rho);
        double f_c = 0.0;
        for (int halvings = 0;; ++halvings) {
            cand = prox_step(res.beta - eta * grad, eta * cfg.mu, cfg.radius);
            gb_c = detail::sparse_matvec(g.gamma, cand);
            f_c = f.value(cand, gb_c);
            if (cfg.step == StepRule::FixedLipschitz || halvings >= 60) break;
            const Eigen::VectorXd diff = cand - res.beta;
            const double model = fval + grad.dot(diff) + diff.squaredNorm() / (2.0 * eta);
            if (f_c <= model + 1e-12 * std::max(1.0, std::abs(fval))) break;
            eta *= 0.5;
        }
        const double change = (cand - res.beta).norm();
        const double scale = std::max(1.0, res.beta.norm());
        res.beta.swap(cand);
        gb.swap(gb_c);
        fval = f_c;
        if (trace) trace->objective.push_back(fval + cfg.mu * res.beta.lpNorm<1>());
        if (change <= cfg.tol * scale) {
            res.converged = true;
            break;
        }
    }
    res.iterations = std::min(res.iterations, cfg.max_iter);
    grad = 2.0 * (gb - g.rho);
    res.kkt_residual = (res.beta - prox_step(res.beta - eta * grad, eta * cfg.mu, cfg.radius)).norm() / eta;
    res.objective = fval + cfg.mu * res.beta.lpNorm<1>();
    res.step = eta;
    return res;
}

CoefEstimate corrected_lasso(const ObservedDataset& d, const CorrectedLassoConfig& cfg) {
    const CorrectedGram g = corrected_gram(d);
    CorrectedLassoResult r = corrected_lasso_solve(g, cfg);
    CoefEstimate e = make_estimate(std::move(r.beta), "corrected-lasso");
    e.converged = r.converged;
    e.tuning.mu = cfg.mu;
    e.tuning.radius = cfg.radius;
    e.tuning.diagnostics["iterations"] = r.iterations;
    e.tuning.diagnostics["kkt_residual"] = r.kkt_residual;
    e.tuning.diagnostics["objective"] = r.objective;
    if (!r.converged) e.warnings.push_back("corrected lasso: MaxIterExceeded");
    return e;
}

CoefEstimate corrected_lasso_tuned(const ObservedDataset& d, const CorrectedLassoTuneOptions& opt) {
    const Index n = d.n();
    const Index p = d.p();
    if (opt.folds > n) {
        std::ostringstream os;
        os << opt.folds << " folds for " << n << " observations";
        throw Error(ErrorCode::FoldsExceedN, os.str());
    }
    NaiveLassoOptions nopt = opt.naive;
    nopt.folds = opt.folds;
    nopt.seed = derive_seed(opt.seed, 0, "naive-lasso-folds");
    const NaiveLassoCvResult naive = naive_lasso_cv(d, nopt);

    // The naive objective (1/n)|y - Wb|^2 + mu|b|_1 is twice the lasso_cd
    // objective at mu/2, so the corrected loss takes twice the CD penalty.
    const double mu = 2.0 * naive.mu_hat;
    const double kappa = 2.0 * naive.fit.beta.lpNorm<1>();

    if (kappa == 0.0) {
        CoefEstimate e = make_estimate(Eigen::VectorXd::Zero(p), "corrected-lasso");
        e.tuning.mu = mu;
        e.tuning.kappa = 0.0;
        e.tuning.folds = opt.folds;
        e.tuning.seed = opt.seed;
        e.warnings.push_back("DegenerateNaiveFit: naive lasso selected no feature; returning the zero estimate");
        return e;
    }

    const int K = std::max(1, opt.r_grid);
    Eigen::VectorXd radii(K);
    for (int k = 0; k < K; ++k)
        radii(k) = K == 1 ? kappa : kappa * (1e-3 + (1.0 - 1e-3) * static_cast<double>(k) / (K - 1));

    CorrectedLassoConfig cfg;
    cfg.mu = mu;

    const detail::GramSums full = detail::gram_sums(d.W, d.y);
    const std::vector<IndexSet> folds = make_folds(n, opt.folds, derive_seed(opt.seed, 0, "radius-folds"));
    Eigen::VectorXd curve = Eigen::VectorXd::Zero(K);
    for (const IndexSet& test : folds) {
        const detail::SplitSums s = detail::split_sums(full, d.W, d.y, test);
        const double inv_tr = 1.0 / static_cast<double>(s.train.rows);
        CorrectedGram g{s.train.ww * inv_tr, s.train.wy * inv_tr};
        d.sigma_u.subtract_from(g.gamma);
        const double L = 2.0 * spectral_norm(g.gamma, cfg.power_iterations);
        const Eigen::VectorXd y_te = detail::gather(d.y, test);
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
        for (int k = 0; k < K; ++k) {
            cfg.radius = radii(k);
            beta = corrected_lasso_solve(g, cfg, L, &beta).beta;
            const Eigen::VectorXd resid = y_te - detail::predict_rows(d.W, test, beta);
            curve(k) += resid.squaredNorm() / static_cast<double>(test.size()) - d.sigma_u.quad_form(beta);
        }
    }
    curve /= static_cast<double>(folds.size());

    int best = 0;
    for (int k = 1; k < K; ++k)
        if (curve(k) < curve(best)) best = k;
    cfg.radius = radii(best);

    CoefEstimate e = corrected_lasso(d, cfg);
    e.tuning.kappa = kappa;
    e.tuning.folds = opt.folds;
    e.tuning.seed = opt.seed;
    e.tuning.diagnostics["naive_mu_cd"] = naive.mu_hat;
    return e;
}

}  // namespace eivscreen
