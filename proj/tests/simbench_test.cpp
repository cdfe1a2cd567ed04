#include <doctest.h>

#include "eivscreen/simbench.hpp"
#include "testkit.hpp"

using namespace eivscreen;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an eivscreen::Error");
    return ErrorCode::InvalidArgument;
}

double min_eig(const MatrixXd& m) {
    return Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

MatrixXd sample_cov(const MatrixXd& Z) {
    const MatrixXd c = Z.rowwise() - Z.colwise().mean();
    return c.transpose() * c / double(Z.rows() - 1);
}

ScenarioConfig small_config() {
    ScenarioConfig c;
    c.id = "small";
    c.n = 60;
    c.p = 40;
    c.s = 3;
    c.reps = 4;
    c.base_seed = 99;
    MethodPair a;
    a.screener.kind = ScreenerKind::Sisc;
    a.screener.size = 10;
    a.estimator.mu = 0.05;
    a.estimator.radius = 6.0;
    MethodPair b;
    b.screener.kind = ScreenerKind::PmscFs;
    b.estimator.kind = EstimatorKind::None;
    MethodPair c2;
    c2.screener.kind = ScreenerKind::PmscCv;
    c2.estimator.kind = EstimatorKind::CorrectedLasso;
    c2.estimator.folds = 5;
    c2.estimator.r_grid = 5;
    c2.estimator.mu_grid = 20;
    c.methods = {a, b, c2};
    return c;
}

}  // namespace

TEST_CASE("make_sigma_x") {
    CHECK(make_sigma_x(SigmaXKind::Ar1, 0.0, 4) == MatrixXd::Identity(4, 4));
    CHECK(make_sigma_x(SigmaXKind::Homogeneous, 0.0, 4) == MatrixXd::Identity(4, 4));
    MatrixXd ar(3, 3);
    ar << 1, .5, .25, .5, 1, .5, .25, .5, 1;
    CHECK(make_sigma_x(SigmaXKind::Ar1, 0.5, 3) == ar);
    CHECK(min_eig(make_sigma_x(SigmaXKind::Homogeneous, 0.5, 3)) == doctest::Approx(0.5));
    CHECK(code_of([] { make_sigma_x(SigmaXKind::Ar1, 1.0, 3); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("make_sigma_u") {
    Rng rng(1);
    auto blk = make_sigma_u(SigmaUKind::BlockDiagonal, 8, rng);
    const MatrixXd B = blk.dense();
    CHECK(B(0, 0) == 0.4);
    CHECK(B(0, 3) == doctest::Approx(0.08));
    CHECK(B(0, 4) == 0.0);
    CHECK(min_eig(B.topLeftCorner(4, 4)) == doctest::Approx(0.32));
    CHECK(code_of([&] { make_sigma_u(SigmaUKind::BlockDiagonal, 6, rng); }) == ErrorCode::BlockSizeIncompatible);

    auto hom = make_sigma_u(SigmaUKind::Homogeneous, 3, rng);
    CHECK(hom.dense()(0, 1) == 0.2);
    CHECK(min_eig(hom.dense()) == doctest::Approx(0.2));

    auto diag = make_sigma_u(SigmaUKind::DiagonalUniform, 500, rng);
    CHECK(diag.is_diagonal());
    CHECK(diag.variances().minCoeff() >= 0.1);
    CHECK(diag.variances().maxCoeff() <= 0.5);
}

TEST_CASE("gen_instance noiseless degenerate case") {
    ScenarioConfig c;
    c.n = 20;
    c.p = 10;
    c.rho_x = 0.0;
    c.noise_var = 0.0;
    c.sigma_u = SigmaUKind::None;
    auto g = gen_instance(c, 0);
    CHECK(g.dataset.W == g.X);
    CHECK((g.dataset.y - g.X * g.beta0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.true_support == IndexSet{0, 1, 2, 3, 4});
    for (Index j = 0; j < 5; ++j) {
        CHECK(g.beta0(j) >= 1.0);
        CHECK(g.beta0(j) <= 1.5);
    }
    CHECK(g.beta0.tail(5).isZero(0));
}

TEST_CASE("generator moments") {
    for (auto kind : {SigmaXKind::Ar1, SigmaXKind::Homogeneous}) {
        for (double rho : {0.3, 0.5}) {
            ScenarioConfig c;
            c.n = 5000;
            c.p = 10;
            c.sigma_x = kind;
            c.rho_x = rho;
            c.sigma_u = SigmaUKind::DiagonalUniform;
            auto g = gen_instance(c, 3);
            const MatrixXd Sx = make_sigma_x(kind, rho, 10);
            CHECK((sample_cov(g.X) - Sx).cwiseAbs().maxCoeff() <= 0.05);
            const MatrixXd Sw = Sx + g.dataset.sigma_u.dense();
            CHECK((sample_cov(g.dataset.W) - Sw).cwiseAbs().maxCoeff() <= 0.05);
        }
    }
    ScenarioConfig c;
    c.n = 5000;
    c.p = 8;
    c.sigma_u = SigmaUKind::BlockDiagonal;
    auto g = gen_instance(c, 0);
    CHECK((sample_cov(g.dataset.W - g.X) - g.dataset.sigma_u.dense()).cwiseAbs().maxCoeff() <= 0.05);
}

TEST_CASE("replicate streams are fixed by seed and index") {
    auto c = small_config();
    auto a = gen_instance(c, 2), b = gen_instance(c, 2), other = gen_instance(c, 3);
    CHECK(a.dataset.W == b.dataset.W);
    CHECK(a.dataset.y == b.dataset.y);
    CHECK(a.dataset.W != other.dataset.W);
    c.noise_var = 1.0;
    auto noisier = gen_instance(c, 2);
    CHECK(noisier.X == a.X);
    CHECK(noisier.beta0 == a.beta0);
}

TEST_CASE("selection metrics") {
    IndexSet S{0, 1, 2, 3, 4};
    auto r = selection_metrics(S, S, 1000);
    CHECK(r.fpr == 0.0);
    CHECK(r.fnr == 0.0);
    CHECK(selection_metrics({}, S, 1000).fnr == 100.0);
    IndexSet sel;
    for (Index j = 0; j < 80; ++j) sel.push_back(j);
    CHECK(selection_metrics(sel, S, 1000).fpr == doctest::Approx(100.0 * 75.0 / 995.0));
    CHECK(code_of([] { selection_metrics({1}, {}, 10); }) == ErrorCode::EmptyTrueSupport);
}

TEST_CASE("l2 error") {
    VectorXd b(3);
    b << 1, 1.5, 0;
    CHECK(l2_error(b, b) == 0.0);
    CHECK(l2_error(VectorXd::Zero(3), b) == doctest::Approx(std::sqrt(3.25)));
    CHECK(l2_error(b + VectorXd::Ones(3), b) == l2_error(b, b - VectorXd::Ones(3)));
    CHECK(code_of([&] { l2_error(VectorXd::Zero(2), b); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("min model size") {
    CHECK(min_model_size((VectorXd(4) << 5, 1, 3, 2).finished(), {3}) == 3);
    CHECK(min_model_size((VectorXd(4) << 5, 4, 3, 2).finished(), {0, 1}) == 2);
    CHECK(min_model_size((VectorXd(3) << 5, NAN, 3).finished(), {1}) == 4);
    CHECK(min_model_size(IndexSet{2, 0}, {1}, 3) == 4);
    CHECK(code_of([] { min_model_size(VectorXd::Ones(3), {}); }) == ErrorCode::EmptyTrueSupport);
}

TEST_CASE("config json round trip and validation") {
    auto c = small_config();
    auto back = scenario_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));

    nlohmann::json bad = {{"n", 10}, {"p", 9}, {"s", 20}, {"rho_x", 1.5}, {"sigma_u_kind", "block_diagonal"},
                          {"colour", "red"}, {"methods", {{{"screener", "sis"}}}}};
    try {
        scenario_from_json(bad);
        FAIL("expected a ValidationError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ValidationError);
        const std::string msg = e.what();
        CHECK(msg.find("colour") != std::string::npos);
        CHECK(msg.find("sis") != std::string::npos);
        CHECK(msg.find("rho_x") != std::string::npos);
        CHECK(msg.find("s ") != std::string::npos);
        CHECK(msg.find("divisible by 4") != std::string::npos);
    }
}

TEST_CASE("scenario runs are schedule independent") {
    auto c = small_config();
    auto one = run_scenario(c, {1, {}});
    auto many = run_scenario(c, {3, {}});
    REQUIRE(one.rows.size() == 3);
    for (std::size_t m = 0; m < one.rows.size(); ++m) {
        CHECK(one.rows[m].method == many.rows[m].method);
        CHECK(one.rows[m].l2_mean == many.rows[m].l2_mean);
        CHECK(one.rows[m].stage1_fpr == many.rows[m].stage1_fpr);
        CHECK(one.rows[m].stage2_fnr == many.rows[m].stage2_fnr);
        CHECK(one.rows[m].reps_ok == 4);
    }
    for (int r = 0; r < 4; ++r)
        for (std::size_t m = 0; m < 3; ++m) {
            const auto& a = one.replicates[r].methods[m];
            const auto& b = many.replicates[r].methods[m];
            CHECK(a.l2 == b.l2);
            CHECK(a.support_within_stage1);
            CHECK(a.stage1_kept == b.stage1_kept);
        }

    CHECK(one.rows[0].method == "sisc+corrected-lasso");
    CHECK(one.rows[1].method == "pmsc-fs");
    CHECK_FALSE(one.rows[1].l2_mean.has_value());
    CHECK(one.rows[1].stage1_fpr.has_value());
    // default M for n = 60
    CHECK(one.replicates[0].methods[1].stage1_kept == default_screen_size(60));
    for (const auto& row : one.rows) {
        if (row.stage1_fpr) {
            CHECK(*row.stage1_fpr >= 0.0);
            CHECK(*row.stage1_fpr <= 100.0);
        }
        if (row.l2_se) CHECK(*row.l2_se >= 0.0);
    }
}

TEST_CASE("adding a method leaves the others unchanged") {
    auto c = small_config();
    c.reps = 2;
    auto full = run_scenario(c);
    c.methods.erase(c.methods.begin() + 1);
    auto fewer = run_scenario(c);
    CHECK(full.rows[0].l2_mean == fewer.rows[0].l2_mean);
    CHECK(full.rows[2].l2_mean == fewer.rows[1].l2_mean);
}

TEST_CASE("single noiseless replicate echoes its metrics") {
    ScenarioConfig c;
    c.n = 80;
    c.p = 20;
    c.reps = 1;
    c.noise_var = 0.0;
    c.sigma_u = SigmaUKind::None;
    MethodPair m;
    m.screener.kind = ScreenerKind::Sisc;
    m.screener.size = 10;
    m.estimator.mu = 1e-4;
    m.estimator.radius = 100;
    c.methods = {m};
    auto r = run_scenario(c);
    const auto& o = r.replicates[0].methods[0];
    REQUIRE(o.ok);
    CHECK(*r.rows[0].l2_mean == *o.l2);
    CHECK(*r.rows[0].stage2_fnr == o.stage2->fnr);
    CHECK(*o.l2 < 0.01);
    CHECK(r.rows[0].l2_sd.has_value() == false);
}

TEST_CASE("oversized screens are rejected before running") {
    auto c = small_config();
    c.methods.resize(1);
    c.methods[0].screener.size = 41; // more than p
    try {
        run_scenario(c);
        FAIL("expected a ValidationError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ValidationError);
        CHECK(std::string(e.what()).find("methods[0]: size must lie in [1, p]") != std::string::npos);
    }
}

TEST_CASE("report metadata") {
    auto c = small_config();
    c.reps = 1;
    auto r = run_scenario(c);
    auto j = report_metadata(r);
    CHECK(j.at("version") == kVersion);
    CHECK(j.at("config").at("base_seed") == 99);
    CHECK(j.contains("rows"));
}
