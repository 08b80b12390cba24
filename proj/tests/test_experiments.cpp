#include <gtest/gtest.h>

#include <random>

#include "cflab/experiments.hpp"

using namespace cflab;

namespace {

std::vector<std::pair<double, double>> power_law(double a, double c, int count) {
  std::vector<std::pair<double, double>> out;
  for (int k = 0; k < count; ++k) {
    const double d = 0.2 * std::ldexp(1.0, -k);
    out.emplace_back(d, c * std::pow(d, a));
  }
  return out;
}

std::string dump_tables(const Report& r) {
  std::string s;
  for (const auto& t : r.tables)
    for (const auto& row : t.rows)
      for (const auto& c : row) {
        if (const double* d = std::get_if<double>(&c)) {
          char buf[40];
          std::snprintf(buf, sizeof buf, "%a,", *d);
          s += buf;
        } else {
          s += std::get<std::string>(c) + ",";
        }
      }
  return s;
}

}  // namespace

TEST(FitExponent, ExactPowerLaw) {
  auto f = fit_exponent(power_law(-0.5, 3.0, 7));
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  EXPECT_EQ(f.points, 7);
}

TEST(FitExponent, ConstantValues) {
  auto f = fit_exponent(power_law(0.0, 2.5, 6));
  EXPECT_NEAR(f.slope, 0.0, 1e-13);
  EXPECT_EQ(f.r2, 1.0);
}

TEST(FitExponent, NoisyPowerLaw) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int trial = 0; trial < 20; ++trial) {
    auto pts = power_law(-0.7, 1.0, 7);
    for (auto& p : pts) p.second *= 1.0 + u(rng);
    auto f = fit_exponent(pts);
    EXPECT_NEAR(f.slope, -0.7, 0.05);
    EXPECT_GE(f.r2, 0.0);
    EXPECT_LE(f.r2, 1.0);
  }
}

TEST(FitExponent, FiltersNonpositive) {
  auto pts = power_law(-1.0, 1.0, 7);
  pts[2].second = 0.0;
  pts[4].second = -1.0;
  auto f = fit_exponent(pts);
  EXPECT_EQ(f.points, 5);
  EXPECT_NEAR(f.slope, -1.0, 1e-12);
  pts[5].second = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fit_exponent(pts), InsufficientDataError);
}

TEST(FitExponent, RejectsBadInput) {
  EXPECT_THROW(fit_exponent(power_law(-1.0, 1.0, 4)), InsufficientDataError);
  auto pts = power_law(-1.0, 1.0, 6);
  std::swap(pts[1], pts[2]);
  EXPECT_THROW(fit_exponent(pts), InputError);
}

TEST(Percentile, NearestRank) {
  std::vector<double> v{5, 1, 4, 2, 3};
  EXPECT_EQ(percentile(v, 0.0), 1.0);
  EXPECT_EQ(percentile(v, 0.5), 3.0);
  EXPECT_EQ(percentile(v, 1.0), 5.0);
  EXPECT_EQ(percentile(v, 0.99), 5.0);
}

TEST(Config, Validation) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.depths().size(), 7u);
  EXPECT_DOUBLE_EQ(c.depths().back(), 0.2 / 64);

  auto bad = c;
  bad.level = 7;
  EXPECT_THROW(bad.validate(), InputError);
  bad = c;
  bad.t0 = 0.4;
  EXPECT_THROW(bad.validate(), InputError);
  bad = c;
  bad.k_max = 12;  // 0.2 / 4096 < 1e-4
  EXPECT_THROW(bad.validate(), InputError);
  bad = c;
  bad.experiment = "growth";
  bad.k_max = 4;
  EXPECT_THROW(bad.validate(), InputError);
  bad = c;
  bad.thresholds["no_such_gate"] = 1.0;
  EXPECT_THROW(bad.validate(), InputError);
  bad = c;
  bad.domain = "torus";
  EXPECT_THROW(bad.validate(), InputError);
  bad = c;
  bad.feet = {"apex"};
  EXPECT_THROW(bad.validate(), InputError);
}

TEST(Config, ThresholdOverride) {
  ExperimentConfig c;
  c.experiment = "growth";
  EXPECT_DOUBLE_EQ(c.threshold("zbar_slope"), -0.6);
  c.thresholds["zbar_slope"] = 0.5;
  EXPECT_DOUBLE_EQ(c.threshold("zbar_slope"), 0.5);
  EXPECT_THROW(c.threshold("koppelman"), InputError);
}

TEST(RayFeet, OnBoundary) {
  for (auto d : {DomainSpec::ball(2), DomainSpec::ellipsoid(2)})
    for (const char* name : {"weak", "generic"}) {
      auto p = ray_foot(d, name);
      EXPECT_NEAR(eval_r(d, p), 0.0, 1e-12) << d.id() << " " << name;
    }
  // the weak foot is where the ellipsoid's Levi form degenerates
  auto e = DomainSpec::ellipsoid(2);
  CPoint t{cplx(0.0), cplx(1.0)};
  EXPECT_NEAR(levi_form(e, ray_foot(e, "weak"), t), 0.0, 1e-14);
  EXPECT_THROW(ray_foot(e, "apex"), InputError);
}

TEST(OrderTable, ReferenceOrderByHand) {
  // Omega_q(W^L), n = 2: 3 - 1 (credit) - 2 (Levi factor) = 0
  KernelDescriptor w{2, 1, Rational(0), 2, 0, 0, 0, Arena::Boundary, ""};
  EXPECT_EQ(reference_order(w), Rational(0));
  // A_{0,00}, n = 2: 3 + 1 - 2 - 1 = 1
  KernelDescriptor a{2, 0, Rational(1), 1, 1, 0, 0, Arena::Boundary, ""};
  EXPECT_EQ(reference_order(a), Rational(1));
  // volume arena: 4 + 1/2 + 1 - 2 - 1 - 1 - 3 = -3/2 with two credits and no Levi factor
  KernelDescriptor v{2, 0, Rational(1, 2), 3, 1, 1, 0, Arena::Volume, ""};
  EXPECT_EQ(reference_order(v), Rational(-3, 2));
}

TEST(OrderTable, RowsAgreeWithCalculator) {
  for (int n : {2, 3})
    for (const auto& r : order_rows(n)) EXPECT_EQ(order_of(r.desc), r.expected) << r.family << " n=" << n;
  for (const auto& k : random_descriptors(50, 9)) EXPECT_EQ(order_of(k), reference_order(k));
}

TEST(Estimate, BallPasses) {
  ExperimentConfig c;
  c.experiment = "estimate";
  auto r = run_estimate(c);
  EXPECT_TRUE(r.passed()) << (r.failures().empty() ? "" : r.failures().front());
  EXPECT_EQ(r.to_json()["schema"], 1);
}

TEST(Estimate, Deterministic) {
  ExperimentConfig c;
  c.experiment = "estimate";
  c.domain = "ellipsoid:m=2";
  c.samples = 2000;
  auto a = run_estimate(c), b = run_estimate(c);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(dump_tables(a), dump_tables(b));
  c.seed = 43;
  EXPECT_NE(dump_tables(run_estimate(c)), dump_tables(a));
}

TEST(Symmetry, IdentityRatiosBounded) {
  ExperimentConfig c;
  c.experiment = "symmetry";
  c.samples = 2000;
  for (const char* dom : {"ball", "ellipsoid:m=2"}) {
    c.domain = dom;
    auto r = run_symmetry(c);
    EXPECT_TRUE(r.passed()) << dom;
    EXPECT_TRUE(std::isfinite(r.summary["normal_identity_p99"].get<double>()));
    EXPECT_TRUE(std::isfinite(r.summary["expansion_identity_p99"].get<double>()));
  }
}

TEST(Symmetry, NormalIdentityResidualShrinks) {
  // both points on bD, |zeta - z| -> 0: residual / |zeta - z|^2 stays bounded
  auto d = DomainSpec::ellipsoid(2);
  const SupportFunctionParams p{d, 1.0};
  CPoint xi{cplx(0.6, 0.3), cplx(0.5, -0.4)};
  const double s = std::sqrt(norm2(xi));
  for (auto& c : xi) c /= s;
  const double rho = radial_extent(d, xi);
  CPoint zeta{rho * xi[0], rho * xi[1]};
  double prev = 0.0;
  for (double h : {1e-1, 1e-2, 1e-3}) {
    CPoint yi{xi[0] + cplx(0.0, h), xi[1] + cplx(h, 0.0)};
    const double sy = std::sqrt(norm2(yi));
    for (auto& c : yi) c /= sy;
    const double ry = radial_extent(d, yi);
    CPoint z{ry * yi[0], ry * yi[1]};
    auto [res, bound] = normal_identity_terms(p, zeta, z);
    EXPECT_LT(res / bound, 10.0) << h;
    if (prev > 0.0) {
      EXPECT_LT(res, prev);
    }
    prev = res;
  }
}

TEST(Report, FailuresListed) {
  Report r{"x", "ball"};
  r.check("a", true, "fine");
  r.check("b", false, "too big");
  EXPECT_FALSE(r.passed());
  ASSERT_EQ(r.failures().size(), 1u);
  EXPECT_EQ(r.failures()[0], "b: too big");
  auto& t = r.table("t", {"x", "y"});
  EXPECT_THROW(t.add({1.0}), UsageError);
}
