#include <chrono>
#include <sstream>

#include "eivscreen/estimators.hpp"
#include "eivscreen/rng.hpp"

namespace eivscreen {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::string to_string(ScreenerKind k) {
    switch (k) {
        case ScreenerKind::None: return "none";
        case ScreenerKind::Sisc: return "sisc";
        case ScreenerKind::PmscFs: return "pmsc-fs";
        case ScreenerKind::PmscCv: return "pmsc-cv";
    }
    return "?";
}

std::string to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::None: return "none";
        case EstimatorKind::CorrectedLasso: return "corrected-lasso";
        case EstimatorKind::Coco: return "coco";
    }
    return "?";
}

ScreenerKind parse_screener(const std::string& s) {
    if (s == "none") return ScreenerKind::None;
    if (s == "sisc") return ScreenerKind::Sisc;
    if (s == "pmsc-fs") return ScreenerKind::PmscFs;
    if (s == "pmsc-cv") return ScreenerKind::PmscCv;
    throw Error(ErrorCode::InvalidArgument, "unknown screener '" + s + "' (none|sisc|pmsc-fs|pmsc-cv)");
}

EstimatorKind parse_estimator(const std::string& s) {
    if (s == "none") return EstimatorKind::None;
    if (s == "corrected-lasso") return EstimatorKind::CorrectedLasso;
    if (s == "coco") return EstimatorKind::Coco;
    throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + s + "' (none|corrected-lasso|coco)");
}

ScreeningResult run_screener(const ObservedDataset& d, const ScreenerSpec& spec, std::uint64_t seed) {
    switch (spec.kind) {
        case ScreenerKind::None: {
            ScreeningResult r;
            r.method = "none";
            r.kept.resize(static_cast<std::size_t>(d.p()));
            for (Index j = 0; j < d.p(); ++j) r.kept[static_cast<std::size_t>(j)] = j;
            r.scores = Eigen::VectorXd::Constant(d.p(), std::numeric_limits<double>::quiet_NaN());
            return r;
        }
        case ScreenerKind::Sisc: {
            const Index size = spec.size.value_or(default_screen_size(d.n()));
            return sisc_screen(sisc_coefficients(marginal_stats(d)), size);
        }
        case ScreenerKind::PmscFs: {
            const BridgeConfig cfg(spec.alpha);
            const Index size = spec.size.value_or(default_screen_size(d.n()));
            ScreeningResult r = pmsc_fs_screen(pmsc_entry_threshold(marginal_stats(d), cfg), size);
            r.tuning.alpha = cfg.alpha();
            return r;
        }
        case ScreenerKind::PmscCv: {
            const BridgeConfig cfg(spec.alpha);
            PmscCvOptions opt;
            opt.folds = spec.folds;
            opt.grid_size = spec.grid_size;
            opt.seed = derive_seed(seed, 0, "pmsc-cv-folds");
            return pmsc_cv_screen(d, cfg, opt).screen;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown screener");
}

CoefEstimate run_estimator(const ObservedDataset& d, const EstimatorSpec& spec, std::uint64_t seed) {
    switch (spec.kind) {
        case EstimatorKind::None: {
            CoefEstimate e;
            e.method = "none";
            return e;
        }
        case EstimatorKind::CorrectedLasso: {
            if (spec.mu && spec.radius) {
                CorrectedLassoConfig cfg;
                cfg.mu = *spec.mu;
                cfg.radius = *spec.radius;
                return corrected_lasso(d, cfg);
            }
            if (spec.mu || spec.radius)
                throw Error(ErrorCode::InvalidArgument, "corrected lasso needs both mu and R, or neither");
            CorrectedLassoTuneOptions opt;
            opt.folds = spec.folds;
            opt.r_grid = spec.r_grid;
            opt.naive.grid_size = spec.mu_grid;
            opt.seed = seed;
            return corrected_lasso_tuned(d, opt);
        }
        case EstimatorKind::Coco: {
            if (spec.mu_tilde) {
                CoefEstimate e = coco_lasso(d, *spec.mu_tilde, spec.projection);
                return e;
            }
            CocoCvOptions opt;
            opt.folds = spec.folds;
            opt.grid_size = spec.coco_grid;
            opt.test_gram = spec.coco_test_gram;
            opt.projection = spec.projection;
            opt.seed = derive_seed(seed, 0, "coco-folds");
            return coco_tuned(d, opt);
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown estimator");
}

TwoStageResult two_stage_fit(const ObservedDataset& d, const ScreenerSpec& screener, const EstimatorSpec& estimator,
                             std::uint64_t seed) {
    TwoStageResult out;
    auto t0 = Clock::now();
    out.screen = run_screener(d, screener, derive_seed(seed, 0, "screener"));
    out.elapsed.screening_s = screener.kind == ScreenerKind::None ? 0.0 : seconds_since(t0);

    if (estimator.kind == EstimatorKind::None) {
        out.estimate.method = "none";
        out.estimate.elapsed = out.elapsed;
        return out;
    }

    const std::uint64_t est_seed = derive_seed(seed, 0, "estimator");
    t0 = Clock::now();
    if (out.screen.kept.empty()) {
        out.estimate = make_estimate(Eigen::VectorXd::Zero(d.p()), to_string(estimator.kind));
        out.estimate.warnings.push_back("EmptyScreeningSet: first stage kept no feature; returning the zero estimate");
    } else if (static_cast<Index>(out.screen.kept.size()) == d.p()) {
        out.estimate = run_estimator(d, estimator, est_seed);
    } else {
        const ObservedDataset sub = restrict_columns(d, out.screen.kept);
        CoefEstimate fit = run_estimator(sub, estimator, est_seed);
        Eigen::VectorXd beta = embed_coefficients(fit.beta, out.screen.kept, d.p());
        fit.support = support_of(beta);
        fit.beta = std::move(beta);
        out.estimate = std::move(fit);
    }
    out.elapsed.estimation_s = seconds_since(t0);

    const std::string prefix = screener.kind == ScreenerKind::None ? "" : to_string(screener.kind) + "+";
    out.estimate.method = prefix + out.estimate.method;
    out.estimate.elapsed = out.elapsed;
    for (const auto& w : out.screen.warnings) out.estimate.warnings.push_back("screening: " + w);
    return out;
}

}  // namespace eivscreen
