#include "eivscreen/screening.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "eivscreen/rng.hpp"

namespace eivscreen {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double entry_threshold(double v, double c, const BridgeConfig& cfg) {
    const double a = cfg.alpha();
    return cfg.c_alpha() * std::pow(std::abs(c), 2.0 - a) * std::pow(v, a - 1.0);
}

IndexSet sorted_prefix(const IndexSet& ranking, Index k) {
    IndexSet kept(ranking.begin(), ranking.begin() + k);
    std::sort(kept.begin(), kept.end());
    return kept;
}

}  // namespace

BridgeConfig::BridgeConfig(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        std::ostringstream os;
        os << "bridge exponent must lie in (0,1), got " << alpha;
        throw Error(ErrorCode::InvalidArgument, os.str());
    }
    c_alpha_ = compute_c_alpha(alpha);
}

double BridgeConfig::compute_c_alpha(double alpha) {
    return (2.0 / (2.0 - alpha)) * std::pow(2.0 * (1.0 - alpha) / (2.0 - alpha), 1.0 - alpha);
}

IndexSet rank_descending(const Eigen::VectorXd& scores) {
    IndexSet order;
    for (Index j = 0; j < scores.size(); ++j)
        if (std::isfinite(scores(j))) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });
    return order;
}

Eigen::VectorXd sisc_coefficients(const MarginalStats& s) {
    if (s.valid_count() == 0)
        throw Error(ErrorCode::AllFeaturesDegenerate, "every corrected second moment is <= 0");
    Eigen::VectorXd beta(s.p());
    for (Index j = 0; j < s.p(); ++j) beta(j) = s.valid[static_cast<std::size_t>(j)] ? s.c(j) / s.v(j) : kNaN;
    return beta;
}

ScreeningResult sisc_screen(const Eigen::VectorXd& beta_tilde, Index d) {
    ScreeningResult r;
    r.method = "sisc";
    r.scores = beta_tilde.cwiseAbs();
    const IndexSet ranking = rank_descending(r.scores);
    const Index valid = static_cast<Index>(ranking.size());
    if (d < 1 || d > valid) {
        std::ostringstream os;
        os << "d=" << d << " but only " << valid << " features can be ranked";
        throw Error(ErrorCode::DTooLarge, os.str());
    }
    r.kept = sorted_prefix(ranking, d);
    r.tuning.d = d;
    r.tuning.degenerate_features = beta_tilde.size() - valid;
    if (r.tuning.degenerate_features > 0)
        r.warnings.push_back(std::to_string(r.tuning.degenerate_features) +
                             " feature(s) with non-positive corrected second moment excluded");
    return r;
}

Index default_screen_size(Index n) {
    if (n < 3) throw Error(ErrorCode::InvalidArgument, "default screen size needs n >= 3");
    const double nd = static_cast<double>(n);
    return static_cast<Index>(std::floor(nd / std::log(nd)));
}

PmscPath pmsc_entry_threshold(const MarginalStats& s, const BridgeConfig& cfg) {
    if (s.valid_count() == 0)
        throw Error(ErrorCode::AllFeaturesDegenerate, "every corrected second moment is <= 0");
    PmscPath path;
    path.thresholds.resize(s.p());
    for (Index j = 0; j < s.p(); ++j)
        path.thresholds(j) = s.valid[static_cast<std::size_t>(j)] ? entry_threshold(s.v(j), s.c(j), cfg) : kNaN;
    path.ordering = rank_descending(path.thresholds);
    return path;
}

double pmsc_solve_univariate(double v, double c, double lambda, const BridgeConfig& cfg) {
    if (!(v > 0.0)) {
        std::ostringstream os;
        os << "corrected second moment v=" << v << " is not positive";
        throw Error(ErrorCode::NonPositiveV, os.str());
    }
    if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be non-negative");
    if (lambda == 0.0) return c / v;
    if (c == 0.0) return 0.0;
    // Zero is the global minimizer iff lambda > lambda*; the tie at equality
    // is resolved to zero.
    if (lambda >= entry_threshold(v, c, cfg)) return 0.0;

    // Otherwise the minimizer is the unique root of
    //   f(u) = 2 v u - 2|c| + lambda alpha u^(alpha-1)
    // on (u_infl, |c|/v], where f is increasing and convex.
    const double alpha = cfg.alpha();
    const double a = std::abs(c);
    const double u_infl = std::pow(lambda * alpha * (1.0 - alpha) / (2.0 * v), 1.0 / (2.0 - alpha));
    auto f = [&](double u) { return 2.0 * v * u - 2.0 * a + lambda * alpha * std::pow(u, alpha - 1.0); };
    auto fprime = [&](double u) {
        return 2.0 * v + lambda * alpha * (alpha - 1.0) * std::pow(u, alpha - 2.0);
    };

    double lo = u_infl + 1e-15;
    double hi = a / v;
    const double tol = 1e-12 * std::max(1.0, 2.0 * a);
    double u = hi;
    for (int it = 0; it < 200; ++it) {
        const double fu = f(u);
        if (std::abs(fu) <= tol) break;
        if (fu > 0.0)
            hi = u;
        else
            lo = u;
        double next = u - fu / fprime(u);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
            u = next;
            break;
        }
        u = next;
    }
    return std::copysign(u, c);
}

CoefEstimate pmsc_solve(const MarginalStats& s, double lambda, const BridgeConfig& cfg) {
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(s.p());
    Index flagged = 0;
    for (Index j = 0; j < s.p(); ++j) {
        if (!s.valid[static_cast<std::size_t>(j)]) {
            ++flagged;
            continue;
        }
        beta(j) = pmsc_solve_univariate(s.v(j), s.c(j), lambda, cfg);
    }
    CoefEstimate e = make_estimate(std::move(beta), "pmsc");
    e.tuning.lambda = lambda;
    e.tuning.alpha = cfg.alpha();
    e.tuning.degenerate_features = flagged;
    if (flagged > 0)
        e.warnings.push_back(std::to_string(flagged) + " feature(s) with non-positive corrected second moment set to 0");
    return e;
}

CoefEstimate pmsc_solve(const ObservedDataset& d, double lambda, const BridgeConfig& cfg) {
    return pmsc_solve(marginal_stats(d), lambda, cfg);
}

ScreeningResult pmsc_fs_screen(const PmscPath& path, Index M) {
    const Index valid = static_cast<Index>(path.ordering.size());
    if (M < 1 || M > valid) {
        std::ostringstream os;
        os << "M=" << M << " but only " << valid << " features have an entry threshold";
        throw Error(ErrorCode::MTooLarge, os.str());
    }
    ScreeningResult r;
    r.method = "pmsc-fs";
    r.scores = path.thresholds;
    r.kept = sorted_prefix(path.ordering, M);
    r.tuning.M = M;
    r.tuning.degenerate_features = path.thresholds.size() - valid;
    if (r.tuning.degenerate_features > 0)
        r.warnings.push_back(std::to_string(r.tuning.degenerate_features) +
                             " feature(s) with non-positive corrected second moment excluded");
    return r;
}

PmscCvResult pmsc_cv_screen(const ObservedDataset& d, const BridgeConfig& cfg, const PmscCvOptions& opt) {
    const Index n = d.n();
    const Index p = d.p();
    if (opt.folds > n) {
        std::ostringstream os;
        os << opt.folds << " folds for " << n << " observations";
        throw Error(ErrorCode::FoldsExceedN, os.str());
    }
    if (opt.grid_size < 1) throw Error(ErrorCode::InvalidArgument, "grid_size must be >= 1");

    const MarginalStats full = marginal_stats(d);
    const PmscPath path = pmsc_entry_threshold(full, cfg);
    const double lambda_max = path.thresholds(path.ordering.front());

    // Equally spaced on (0, lambda_max]. The top point sits one ulp below
    // lambda_max so that it still admits the leading feature instead of
    // producing the empty fit.
    const int G = opt.grid_size;
    Eigen::VectorXd grid(G);
    for (int g = 0; g < G; ++g) grid(g) = lambda_max * static_cast<double>(g + 1) / G;
    grid(G - 1) = std::nextafter(lambda_max, 0.0);

    const Eigen::VectorXd sigma2 = d.sigma_u.variances();
    const std::vector<IndexSet> folds = make_folds(n, opt.folds, opt.seed);
    Eigen::VectorXd curve = Eigen::VectorXd::Zero(G);

    for (const IndexSet& test : folds) {
        const IndexSet train = fold_complement(test, n);
        const double n_tr = static_cast<double>(train.size());
        const double n_te = static_cast<double>(test.size());

        Eigen::VectorXd sww_tr = Eigen::VectorXd::Zero(p), swy_tr = Eigen::VectorXd::Zero(p);
        for (Index i : train) {
            sww_tr += d.W.row(i).transpose().cwiseAbs2();
            swy_tr += d.W.row(i).transpose() * d.y(i);
        }
        Eigen::VectorXd sww_te = Eigen::VectorXd::Zero(p), swy_te = Eigen::VectorXd::Zero(p);
        double syy_te = 0.0;
        for (Index i : test) {
            sww_te += d.W.row(i).transpose().cwiseAbs2();
            swy_te += d.W.row(i).transpose() * d.y(i);
            syy_te += d.y(i) * d.y(i);
        }
        const Eigen::VectorXd v_tr = sww_tr / n_tr - sigma2;
        const Eigen::VectorXd c_tr = swy_tr / n_tr;

        for (int g = 0; g < G; ++g) {
            double crit = 0.0;
            for (Index j = 0; j < p; ++j) {
                const double b = v_tr(j) > 0.0 ? pmsc_solve_univariate(v_tr(j), c_tr(j), grid(g), cfg) : 0.0;
                // sum_i (y_i - b W_ij)^2 - |F| b^2 sigma_j^2 over the held-out rows
                crit += syy_te - 2.0 * b * swy_te(j) + b * b * (sww_te(j) - n_te * sigma2(j));
            }
            curve(g) += crit;
        }
    }

    // Ties go to the larger lambda (sparser screen).
    int best = G - 1;
    for (int g = G - 2; g >= 0; --g)
        if (curve(g) < curve(best)) best = g;

    PmscCvResult out;
    out.lambda_hat = grid(best);
    out.lambda_grid = grid;
    out.cv_curve = curve;

    const CoefEstimate fit = pmsc_solve(full, out.lambda_hat, cfg);
    ScreeningResult& r = out.screen;
    r.method = "pmsc-cv";
    r.kept = fit.support;
    r.scores = fit.beta.cwiseAbs();
    for (Index j = 0; j < p; ++j)
        if (!full.valid[static_cast<std::size_t>(j)]) r.scores(j) = kNaN;
    r.tuning.lambda = out.lambda_hat;
    r.tuning.alpha = cfg.alpha();
    r.tuning.folds = opt.folds;
    r.tuning.seed = opt.seed;
    r.tuning.degenerate_features = fit.tuning.degenerate_features;
    r.tuning.diagnostics["lambda_max"] = lambda_max;
    r.tuning.diagnostics["grid_size"] = G;
    r.warnings = fit.warnings;
    return out;
}

}  // namespace eivscreen
