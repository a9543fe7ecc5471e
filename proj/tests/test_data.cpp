#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "fastbkmr/data.hpp"
#include "fastbkmr/rng.hpp"

using namespace fastbkmr;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = std::string("/tmp/fastbkmr_test_") + name;
    std::ofstream f(path);
    f << content;
    return path;
}

}  // namespace

TEST_CASE("load_csv assigns columns by role") {
    const auto path = write_temp("basic.csv",
                                 "y,x1,z1,z2\n"
                                 "1.0,0.5,0.1,0.2\n"
                                 "2.0,0.6,0.3,0.4\n"
                                 "3.0,0.7,0.5,0.6\n");
    const Dataset ds = load_csv(path, {"y", {"x1"}, {"z1", "z2"}});
    CHECK(ds.n() == 3);
    CHECK(ds.p() == 1);
    CHECK(ds.q() == 2);
    CHECK(ds.y[1] == doctest::Approx(2.0));
    CHECK(ds.x(2, 0) == doctest::Approx(0.7));
    CHECK(ds.z(0, 1) == doctest::Approx(0.2));
}

TEST_CASE("load_csv drop policy decrements n and counts the row") {
    const auto path = write_temp("na.csv",
                                 "y,z1\n"
                                 "1.0,0.1\n"
                                 "NA,0.3\n"
                                 "3.0,0.5\n");
    LoadReport report;
    const Dataset ds = load_csv(path, {"y", {}, {"z1"}}, MissingPolicy::drop, &report);
    CHECK(ds.n() == 2);
    CHECK(report.dropped_rows == 1);
    CHECK_THROWS_AS(load_csv(path, {"y", {}, {"z1"}}, MissingPolicy::error), DataError);
}

TEST_CASE("load_csv missing column") {
    const auto path = write_temp("missing.csv", "y,z1\n1.0,0.1\n");
    CHECK_THROWS_WITH_AS(load_csv(path, {"y", {}, {"z9"}}),
                         doctest::Contains("MissingColumn(\"z9\")"), DataError);
}

TEST_CASE("load_csv zero usable rows") {
    const auto path = write_temp("empty.csv", "y,z1\nNA,0.1\n");
    CHECK_THROWS_AS(load_csv(path, {"y", {}, {"z1"}}, MissingPolicy::drop), DataError);
}

TEST_CASE("standardize matches the direct arithmetic oracle") {
    Dataset ds;
    ds.y = Eigen::VectorXd::Zero(3);
    ds.x.resize(3, 0);
    ds.z.resize(3, 1);
    ds.z << 1.0, 2.0, 3.0;
    const auto [out, rec] = standardize(ds);
    // Population SD of (1,2,3): sqrt(2/3).
    const double sd = std::sqrt(2.0 / 3.0);
    CHECK(rec.z_mean[0] == doctest::Approx(2.0));
    CHECK(rec.z_sd[0] == doctest::Approx(sd));
    CHECK(out.z(0, 0) == doctest::Approx(-1.0 / sd));
    CHECK(out.z(1, 0) == doctest::Approx(0.0));
    CHECK(out.z(2, 0) == doctest::Approx(1.0 / sd));
    CHECK(out.z(2, 0) == doctest::Approx(1.2247448714));
}

TEST_CASE("standardize is idempotent and enforces moment invariants") {
    Rng rng(7);
    Dataset ds;
    const int n = 40;
    ds.y = rng.normal_vector(n);
    ds.x.resize(n, 0);
    ds.z.resize(n, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) ds.z(i, j) = rng.normal(2.0 * j, 1.5 + j);
    const auto [once, rec1] = standardize(ds);
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(once.z.col(j).mean()) < 1e-10);
        const double sd = std::sqrt(once.z.col(j).squaredNorm() / n -
                                    once.z.col(j).mean() * once.z.col(j).mean());
        CHECK(std::abs(sd - 1.0) < 1e-10);
    }
    const auto [twice, rec2] = standardize(once);
    CHECK((twice.z - once.z).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("standardize rejects constant exposure columns") {
    Dataset ds;
    ds.y = Eigen::VectorXd::Zero(3);
    ds.x.resize(3, 0);
    ds.z = Eigen::MatrixXd::Constant(3, 1, 4.2);
    CHECK_THROWS_WITH_AS(standardize(ds), doctest::Contains("DegenerateColumn"), DataError);
}

TEST_CASE("write_csv then load_csv round trips within 1e-12") {
    Rng rng(11);
    Dataset ds;
    const int n = 25;
    ds.y = rng.normal_vector(n);
    ds.x.resize(n, 2);
    ds.z.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 2; ++j) ds.x(i, j) = rng.normal(0, 3);
        for (int j = 0; j < 3; ++j) ds.z(i, j) = rng.normal(0, 0.1);
    }
    const CsvSchema schema{"y", {"x1", "x2"}, {"z1", "z2", "z3"}};
    const auto path = write_temp("roundtrip.csv", "");
    write_csv(path, ds, schema);
    const Dataset back = load_csv(path, schema);
    CHECK((back.y - ds.y).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.x - ds.x).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.z - ds.z).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ModelConfig validation") {
    ModelConfig cfg;
    CHECK_NOTHROW(cfg.validate(4));
    ModelConfig bad = cfg;
    bad.a_lambda = 0.0;
    CHECK_THROWS_AS(bad.validate(4), DomainError);
    bad = cfg;
    bad.burnin = bad.iters;
    CHECK_THROWS_AS(bad.validate(4), DomainError);
    bad = cfg;
    bad.pi = Eigen::VectorXd::Constant(1, 1.5);
    CHECK_THROWS_AS(bad.validate(4), DomainError);
    bad = cfg;
    bad.thin = 0;
    CHECK_THROWS_AS(bad.validate(4), DomainError);
}

TEST_CASE("Dataset validation rejects inconsistent shapes and non-finite entries") {
    Dataset ds;
    ds.y = Eigen::VectorXd::Zero(3);
    ds.x.resize(3, 1);
    ds.x.setZero();
    ds.z.resize(2, 1);
    ds.z.setZero();
    CHECK_THROWS_AS(ds.validate(), DataError);
    ds.z.resize(3, 1);
    ds.z.setZero();
    CHECK_NOTHROW(ds.validate());
    ds.y[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ds.validate(), DataError);
}
