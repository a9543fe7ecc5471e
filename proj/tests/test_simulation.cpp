#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "fastbkmr/simulation.hpp"
#include "oracles.hpp"

using namespace fastbkmr;

TEST_CASE("true_h: origin, limits, and direct arithmetic") {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(4);
    CHECK(true_h(z) == doctest::Approx(2.0).epsilon(1e-12));

    z << 30.0, 0.0, 5.0, -7.0;
    CHECK(true_h(z) == doctest::Approx(4.0).epsilon(1e-6));
    z[0] = -30.0;  // argument -> -inf with z2 = 0
    CHECK(true_h(z) == doctest::Approx(0.0).epsilon(1e-6));

    // z = (1, 1, ., .): inner argument (5/6)(1 + 1 + 1/2) = 25/12.
    z << 1.0, 1.0, 0.3, -0.4;
    const double expected = 4.0 / (1.0 + std::exp(-25.0 / 12.0));
    CHECK(true_h(z) == doctest::Approx(expected).epsilon(1e-12));

    // Only z1, z2 matter.
    Eigen::VectorXd z2(4);
    z2 << 1.0, 1.0, 9.0, -9.0;
    CHECK(true_h(z2) == doctest::Approx(true_h(z)).epsilon(1e-12));

    CHECK_THROWS_AS(true_h(Eigen::VectorXd::Zero(1)), DomainError);
}

TEST_CASE("gen_data reproduces the generative moments at n = 10^4") {
    SimConfig cfg;
    cfg.n = 10000;
    const auto [ds, h0] = gen_data(cfg, 42);
    REQUIRE(ds.n() == 10000);
    REQUIRE(ds.q() == 4);
    REQUIRE(ds.p() == 1);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(ds.z.col(j).mean()) < 0.05);

    // Regressing y - h0 on x recovers the slope beta0 = 2.
    const Eigen::VectorXd resid = ds.y - h0;
    const oracles::Ols ols = oracles::ols_fit(ds.x.col(0), resid);
    CHECK(std::abs(ols.slope - 2.0) < 0.05);

    // x tracks 3 cos(z1).
    Eigen::VectorXd cz(ds.n());
    for (Eigen::Index i = 0; i < ds.n(); ++i) cz[i] = std::cos(ds.z(i, 0));
    const double cx = ((ds.x.col(0).array() - ds.x.col(0).mean()) * (cz.array() - cz.mean())).sum();
    const double corr = cx / std::sqrt((ds.x.col(0).array() - ds.x.col(0).mean()).square().sum() *
                                       (cz.array() - cz.mean()).square().sum());
    CHECK(corr > 0.5);

    // h0 values agree with the formula at the generated sites.
    for (int i = 0; i < 50; ++i) {
        CHECK(h0[i] == doctest::Approx(true_h(ds.z.row(i).transpose())).epsilon(1e-12));
    }
}

TEST_CASE("gen_data is deterministic and seed-sensitive") {
    SimConfig cfg;
    cfg.n = 100;
    const auto [a, ha] = gen_data(cfg, 7);
    const auto [b, hb] = gen_data(cfg, 7);
    const auto [c, hc] = gen_data(cfg, 8);
    CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.z - b.z).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.y - c.y).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("gen_data confounder noise scale flag") {
    SimConfig cfg;
    cfg.n = 20000;
    const auto [var_read, h1] = gen_data(cfg, 9);
    cfg.confounder_sd_mode = true;
    const auto [sd_read, h2] = gen_data(cfg, 9);
    auto resid_var = [](const Dataset& ds) {
        Eigen::VectorXd cz(ds.n());
        for (Eigen::Index i = 0; i < ds.n(); ++i) cz[i] = 3.0 * std::cos(ds.z(i, 0));
        return (ds.x.col(0) - cz).array().square().sum() / ds.n();
    };
    CHECK(resid_var(var_read) == doctest::Approx(2.0).epsilon(0.05));
    CHECK(resid_var(sd_read) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("SimConfig validation") {
    SimConfig cfg;
    cfg.n = 63;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg.n = 64;
    CHECK_NOTHROW(cfg.validate());
    cfg.t = 0.8;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("run_experiment: tiny sweep is deterministic with sane columns") {
    ExperimentOptions opts;
    opts.n_list = {64};
    opts.t_list = {0.0};
    opts.reps = 2;
    opts.seed = 5;
    opts.model.iters = 120;
    opts.model.burnin = 40;
    opts.model.thin = 4;
    opts.min_subset_size = 16;
    const auto rows = run_experiment(opts);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.status == "ok");
        CHECK(std::isfinite(r.gamma0));
        CHECK(std::isfinite(r.gamma1));
        CHECK(r.r2 >= 0.0);
        CHECK(r.r2 <= 1.0);
        CHECK(r.seconds > 0.0);
    }
    const auto rows2 = run_experiment(opts);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].gamma1 == rows2[i].gamma1);
        CHECK(rows[i].r2 == rows2[i].r2);
        CHECK(rows[i].beta_hat == rows2[i].beta_hat);
    }
}

TEST_CASE("run_experiment records SubsetTooSmall and continues") {
    ExperimentOptions opts;
    opts.n_list = {512};
    opts.t_list = {0.7};
    opts.reps = 1;
    opts.model.iters = 50;
    opts.model.burnin = 10;
    const auto rows = run_experiment(opts);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].status == "SubsetTooSmall");
    CHECK(std::isnan(rows[0].r2));
}

TEST_CASE("run_experiment splits reduce to subsets that cover the budget") {
    ExperimentOptions opts;
    opts.n_list = {96};
    opts.t_list = {0.0, 0.3};
    opts.reps = 1;
    opts.seed = 11;
    opts.model.iters = 100;
    opts.model.burnin = 30;
    opts.model.thin = 2;
    opts.min_subset_size = 16;
    const auto rows = run_experiment(opts);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].status == "ok");
    CHECK(rows[1].status == "ok");  // K = round(96^0.3) = 4 subsets of 24
}

TEST_CASE("results table and manifest writers") {
    ExperimentOptions opts;
    opts.n_list = {64};
    opts.t_list = {0.0};
    opts.reps = 1;
    opts.model.iters = 60;
    opts.model.burnin = 20;
    const auto rows = run_experiment(opts);
    const std::string path = "/tmp/fastbkmr_test_results.csv";
    write_results_csv(path, rows);
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    CHECK(header == "n,t,rep,gamma0,gamma1,r2,beta_hat,seconds");
    write_run_manifest(path + ".manifest", opts, rows);
    std::ifstream mf(path + ".manifest");
    std::string first;
    std::getline(mf, first);
    CHECK(first.rfind("version =", 0) == 0);
}
