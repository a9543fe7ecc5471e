#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fastbkmr/partition.hpp"
#include "fastbkmr/summary.hpp"
#include "oracles.hpp"

using namespace fastbkmr;

namespace {

Eigen::MatrixXd random_z(int n, int q, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd z(n, q);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < q; ++j) z(i, j) = rng.normal();
    return z;
}

PosteriorDraw iso_draw(const Eigen::VectorXd& h, double rho, double lambda = 1.0,
                       double sigma2 = 0.5) {
    PosteriorDraw d;
    d.h = h;
    d.rho = rho;
    d.lambda = lambda;
    d.sigma2 = sigma2;
    return d;
}

// Tiny two-subset fit used by the surface tests.
std::pair<std::vector<ChainOutput>, Eigen::MatrixXd> tiny_fit(std::uint64_t seed) {
    Rng rng(seed);
    const int n = 40;
    Dataset ds;
    ds.x.resize(n, 1);
    ds.z.resize(n, 2);
    ds.y.resize(n);
    for (int i = 0; i < n; ++i) {
        ds.x(i, 0) = rng.normal();
        ds.z(i, 0) = rng.normal();
        ds.z(i, 1) = rng.normal();
        ds.y[i] = ds.x(i, 0) + std::sin(1.5 * ds.z(i, 0)) + rng.normal(0.0, 0.3);
    }
    ModelConfig cfg;
    cfg.iters = 150;
    cfg.burnin = 50;
    cfg.thin = 2;
    const PartitionPlan plan = make_partition(n, 2, seed + 1);
    std::vector<ChainOutput> chains;
    for (int k = 1; k <= 2; ++k) {
        chains.push_back(run_chain(sketch(ds, plan, k, true), cfg, seed + 10 + k));
    }
    return {chains, ds.z};
}

}  // namespace

TEST_CASE("predict_h interpolates at training sites") {
    const Eigen::MatrixXd z = 3.0 * random_z(6, 2, 1);  // well separated
    Rng rng(2);
    const Eigen::VectorXd h = rng.normal_vector(6);
    const PosteriorDraw d = iso_draw(h, 1.2);
    const Eigen::VectorXd at_train = predict_h(d, z, z, KernelMode::isotropic);
    CHECK((at_train - h).cwiseAbs().maxCoeff() < 5e-7);

    const Eigen::VectorXd one = predict_h(d, z, z.row(3), KernelMode::isotropic);
    CHECK(one[0] == doctest::Approx(h[3]).epsilon(1e-6));
}

TEST_CASE("predict_h reverts to the prior far from the data") {
    const Eigen::MatrixXd z = random_z(8, 2, 3);
    Rng rng(4);
    const Eigen::VectorXd h = rng.normal_vector(8);
    PosteriorDraw d = iso_draw(h, 1.0, 2.0, 0.5);
    Eigen::MatrixXd far(1, 2);
    far << 40.0, -40.0;
    CHECK(std::abs(predict_h(d, z, far, KernelMode::isotropic)[0]) < 1e-8);

    // Predictive variance approaches tau = lambda sigma2.
    const double tau = d.lambda * d.sigma2;
    Rng noise(5);
    const int draws = 4000;
    Eigen::VectorXd sims(draws);
    for (int i = 0; i < draws; ++i) {
        sims[i] = predict_h(d, z, far, KernelMode::isotropic, &noise)[0];
    }
    const double var = (sims.array() - sims.mean()).square().sum() / draws;
    CHECK(var == doctest::Approx(tau).epsilon(0.15));
}

TEST_CASE("predict_h matches the dense-inverse oracle") {
    const Eigen::MatrixXd z_train = random_z(20, 3, 6);
    const Eigen::MatrixXd z_star = random_z(5, 3, 7);
    Rng rng(8);
    const Eigen::VectorXd h = rng.normal_vector(20);
    const double rho = 1.3;
    PosteriorDraw d = iso_draw(h, rho);
    const Eigen::VectorXd mean =
        predict_h(d, z_train, z_star, KernelMode::isotropic, nullptr, 0.0, 1e-10);

    Eigen::MatrixXd ktt = gram_cross_isotropic(z_train, z_train, rho);
    ktt.diagonal().array() += 1e-10;
    const Eigen::MatrixXd kst = gram_cross_isotropic(z_star, z_train, rho);
    const Eigen::VectorXd oracle = kst * ktt.inverse() * h;
    CHECK((mean - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("predict_h mean is linear in h_train") {
    const Eigen::MatrixXd z_train = random_z(10, 2, 9);
    const Eigen::MatrixXd z_star = random_z(4, 2, 10);
    Rng rng(11);
    const Eigen::VectorXd h = rng.normal_vector(10);
    const double a = 1.7, b = -0.6;
    PosteriorDraw d = iso_draw(h, 1.1);
    PosteriorDraw d_affine = iso_draw((a + b * h.array()).matrix(), 1.1);
    PosteriorDraw d_ones = iso_draw(Eigen::VectorXd::Ones(10), 1.1);
    const Eigen::VectorXd base = predict_h(d, z_train, z_star, KernelMode::isotropic);
    const Eigen::VectorXd affine = predict_h(d_affine, z_train, z_star, KernelMode::isotropic);
    const Eigen::VectorXd row_sums = predict_h(d_ones, z_train, z_star, KernelMode::isotropic);
    CHECK((affine - (a * row_sums + b * base)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("predict_h works in ard mode") {
    const Eigen::MatrixXd z = random_z(12, 3, 12);
    Rng rng(13);
    PosteriorDraw d;
    d.h = rng.normal_vector(12);
    d.r.resize(3);
    d.r << 0.5, 0.0, 1.2;
    d.lambda = 1.0;
    d.sigma2 = 1.0;
    const Eigen::VectorXd at_train = predict_h(d, z, z, KernelMode::ard);
    CHECK((at_train - d.h).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("weighted_quantile and make_grid") {
    Eigen::VectorXd v(4);
    v << 1.0, 2.0, 3.0, 4.0;
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(4, 0.25);
    CHECK(weighted_quantile(v, w, 0.5) == doctest::Approx(2.0));
    CHECK(weighted_quantile(v, w, 0.75) == doctest::Approx(3.0));
    CHECK(weighted_quantile(v, w, 1.0) == doctest::Approx(4.0));
    Eigen::VectorXd skew(3);
    skew << 1.0, 2.0, 10.0;
    Eigen::VectorXd ws(3);
    ws << 0.9, 0.05, 0.05;
    CHECK(weighted_quantile(skew, ws, 0.5) == doctest::Approx(1.0));

    const Eigen::VectorXd obs = Eigen::VectorXd::LinSpaced(200, -1.0, 1.0);
    const Eigen::VectorXd grid = make_grid(obs, 21);
    CHECK(grid.size() == 21);
    CHECK(grid[0] >= -1.0);
    CHECK(grid[20] <= 1.0);
    CHECK(grid[0] < -0.9);
    CHECK(grid[20] > 0.9);
    CHECK_THROWS_AS(make_grid(obs, 0), DomainError);
}

TEST_CASE("zstar builders fix the other exposures at the requested quantile") {
    const Eigen::MatrixXd z = random_z(50, 3, 14);
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0);
    const Eigen::MatrixXd zu = zstar_univariate(z, 2, grid, 0.5);
    CHECK(zu.rows() == 5);
    for (int g = 0; g < 5; ++g) CHECK(zu(g, 1) == doctest::Approx(grid[g]));
    CHECK(zu(0, 0) == zu(4, 0));  // fixed components constant along the grid
    CHECK_THROWS_AS(zstar_univariate(z, 2, Eigen::VectorXd(), 0.5), DomainError);
    CHECK_THROWS_AS(zstar_univariate(z, 9, grid, 0.5), DomainError);

    const Eigen::MatrixXd zb = zstar_bivariate(z, 1, 3, grid, grid, 0.5);
    CHECK(zb.rows() == 25);
    CHECK_THROWS_AS(zstar_bivariate(z, 1, 1, grid, grid, 0.5), DomainError);
}

TEST_CASE("surfaces from h == 0 draws are flat with zero-width bands") {
    const Eigen::MatrixXd z = random_z(20, 2, 15);
    ChainOutput out;
    out.p = 0;
    out.q = 2;
    out.kernel_mode = KernelMode::isotropic;
    out.n_k = 20;
    out.site_indices.resize(20);
    for (int i = 0; i < 20; ++i) out.site_indices[i] = i;
    for (int i = 0; i < 12; ++i) {
        out.draws.push_back(iso_draw(Eigen::VectorXd::Zero(20), 1.0 + 0.05 * i));
    }
    const UnivariateSurface s =
        surface_univariate({out}, z, 1, 9, 0.5, CombineOptions{});
    CHECK(s.mean.cwiseAbs().maxCoeff() < 1e-12);
    CHECK((s.hi95 - s.lo95).cwiseAbs().maxCoeff() < 1e-12);

    const BivariateSurface b = surface_bivariate({out}, z, 1, 2, 4, 0.5, CombineOptions{});
    CHECK(b.mean.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("surface bands are pointwise nested (50% inside 95%)") {
    const auto [chains, z] = tiny_fit(400);
    const UnivariateSurface s = surface_univariate(chains, z, 1, 9, 0.5, CombineOptions{});
    for (Eigen::Index g = 0; g < s.grid.size(); ++g) {
        CHECK(s.lo95[g] <= s.lo50[g]);
        CHECK(s.hi50[g] <= s.hi95[g]);
        CHECK(s.lo50[g] <= s.mean[g] + 1e-9);
        CHECK(s.mean[g] <= s.hi50[g] + 1e-9);
    }
}

TEST_CASE("surface csv writers produce well-formed files") {
    const auto [chains, z] = tiny_fit(500);
    const UnivariateSurface s = surface_univariate(chains, z, 2, 5, 0.5, CombineOptions{});
    write_surface_csv("/tmp/fastbkmr_test_surface_uni.csv", s);
    std::ifstream f("/tmp/fastbkmr_test_surface_uni.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header == "grid_value,mean,lo95,hi95");
    int rows = 0;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 5);
}

TEST_CASE("inclusion probabilities from combined eta functionals") {
    std::map<std::string, CombinedPosterior> combined;
    CombinedPosterior all_ones;
    all_ones.atoms = Eigen::MatrixXd::Ones(10, 1);
    all_ones.weights = Eigen::VectorXd::Constant(10, 0.1);
    CombinedPosterior none;
    none.atoms = Eigen::MatrixXd::Zero(10, 1);
    none.weights = Eigen::VectorXd::Constant(10, 0.1);
    combined["eta_1"] = all_ones;
    combined["eta_2"] = none;
    const Eigen::VectorXd pip = inclusion_probabilities(combined, 2);
    CHECK(pip[0] == doctest::Approx(1.0));
    CHECK(pip[1] == doctest::Approx(0.0));

    // Isotropic fits carry no eta functionals.
    std::map<std::string, CombinedPosterior> iso;
    iso["rho"] = all_ones;
    CHECK_THROWS_WITH_AS(inclusion_probabilities(iso, 2), doctest::Contains("ModeError"),
                         DomainError);
}

TEST_CASE("calibration_regression oracle cases") {
    Rng rng(16);
    const Eigen::VectorXd h = rng.normal_vector(50);

    const Calibration perfect = calibration_regression(h, h);
    CHECK(perfect.gamma0 == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(perfect.gamma1 == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(perfect.r2 == doctest::Approx(1.0).epsilon(1e-10));

    // h_hat = 2 h + 3: inverting the affine map gives (-1.5, 0.5, 1).
    const Eigen::VectorXd h_hat = (2.0 * h.array() + 3.0).matrix();
    const Calibration affine = calibration_regression(h, h_hat);
    CHECK(affine.gamma0 == doctest::Approx(-1.5).epsilon(1e-10));
    CHECK(affine.gamma1 == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(affine.r2 == doctest::Approx(1.0).epsilon(1e-10));

    const Eigen::VectorXd noisy = h + 0.5 * rng.normal_vector(50);
    const Calibration fit = calibration_regression(h, noisy);
    const oracles::Ols ols = oracles::ols_fit(noisy, h);
    CHECK(fit.gamma0 == doctest::Approx(ols.intercept).epsilon(1e-10));
    CHECK(fit.gamma1 == doctest::Approx(ols.slope).epsilon(1e-10));
    CHECK(fit.r2 == doctest::Approx(ols.r2).epsilon(1e-10));
    CHECK(fit.r2 >= 0.0);
    CHECK(fit.r2 <= 1.0);

    CHECK_THROWS_WITH_AS(calibration_regression(h, Eigen::VectorXd::Zero(50)),
                         doctest::Contains("DegenerateRegressor"), DataError);
    CHECK_THROWS_AS(calibration_regression(h.head(2), h.head(2)), DomainError);
}

TEST_CASE("combined_h_at: K = 1 chain averages its own predictions") {
    const Eigen::MatrixXd z = random_z(15, 2, 17);
    ChainOutput out;
    out.p = 0;
    out.q = 2;
    out.kernel_mode = KernelMode::isotropic;
    out.n_k = 15;
    out.site_indices.resize(15);
    for (int i = 0; i < 15; ++i) out.site_indices[i] = i;
    Rng rng(18);
    const int n_draws = 8;
    std::vector<Eigen::VectorXd> hs;
    for (int i = 0; i < n_draws; ++i) {
        hs.push_back(rng.normal_vector(15));
        out.draws.push_back(iso_draw(hs.back(), 1.4));
    }
    const std::vector<Eigen::MatrixXd> z_subs = subset_exposures({out}, z);
    const Eigen::VectorXd combined = combined_h_at({out}, z_subs, z, CombineOptions{});
    // With a single chain the combined mean is the average predictive mean.
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(15);
    for (int i = 0; i < n_draws; ++i) {
        expect += predict_h(out.draws[i], z, z, KernelMode::isotropic);
    }
    expect /= n_draws;
    CHECK((combined - expect).cwiseAbs().maxCoeff() < 1e-10);
}
