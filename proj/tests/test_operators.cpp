#include <gtest/gtest.h>

#include "cflab/operators.hpp"

using namespace cflab;

namespace {

const CPoint kProbe{cplx(0.2, 0.1), cplx(-0.3, 0.2)};

ZetaForm constant_dzetabar1(cplx c) {
  return zeta_form(2, 1, [c](const auto& p) {
    using T = typename std::decay_t<decltype(p)>::value_type;
    FormValue<T> f(2);
    f.add(gen(2, kZetaBar, 0), T(c));
    return f;
  });
}

// zetabar_1 as a function: dbar f = dzetabar_1.
ZetaForm conj_zeta1() {
  return zeta_form(2, 0, [](const auto& p) {
    using T = typename std::decay_t<decltype(p)>::value_type;
    return FormValue<T>::scalar(2, cconj(p[0]));
  });
}

ZetaForm polynomial_01() {
  return zeta_form(2, 1, [](const auto& p) {
    using T = typename std::decay_t<decltype(p)>::value_type;
    FormValue<T> f(2);
    f.add(gen(2, kZetaBar, 0), p[1] * cconj(p[0]) + T(0.5));
    f.add(gen(2, kZetaBar, 1), T(cplx(0.0, 0.3)) * p[0] * p[0] - cconj(p[1]));
    return f;
  });
}

ZetaForm sum(const ZetaForm& a, const ZetaForm& b, cplx s) {
  ZetaForm out = a;
  out.eval = [a, b, s](const CPoint& p) { return a(p) + b(p) * s; };
  out.eval_jet = nullptr;
  return out;
}

}  // namespace

TEST(TestForms, DomDbarStarProfilesVanishOnBoundary) {
  for (auto d : {DomainSpec::ball(2), DomainSpec::ellipsoid(2)})
    for (auto pr : {Profile::NormalVanishing, Profile::Tangential, Profile::Mixed})
      for (int psi = 0; psi < kPsiCount; ++psi) {
        auto f = make_test_form(d, 1, pr, psi);
        EXPECT_LT(max_normal_component(f), 1e-10) << d.id() << " " << profile_name(pr) << " " << psi;
        EXPECT_NO_THROW(require_dom_dbar_star(f));
      }
}

TEST(TestForms, EuclideanFormRejected) {
  auto f = make_test_form(DomainSpec::ball(2), 1, Profile::Euclidean, 0);
  EXPECT_GT(max_normal_component(f), 0.1);
  EXPECT_THROW(s_bD(f, kProbe, 2), DomainError);
}

TEST(TestForms, InvalidArguments) {
  auto d = DomainSpec::ball(2);
  EXPECT_THROW(make_test_form(d, 0, Profile::Mixed), InputError);
  EXPECT_THROW(make_test_form(d, 3, Profile::Mixed), InputError);
  EXPECT_THROW(make_test_form(d, 1, Profile::Mixed, 5), InputError);
  EXPECT_THROW(make_test_form(d, 2, Profile::Tangential), InputError);
  EXPECT_EQ(parse_profile("mixed"), Profile::Mixed);
  EXPECT_THROW(parse_profile("radial"), InputError);
}

TEST(TestForms, TopDegreeNormalVanishing) {
  auto f = make_test_form(DomainSpec::ellipsoid(2), 2, Profile::NormalVanishing, 1);
  EXPECT_LT(max_normal_component(f), 1e-10);
}

TEST(Q0Norm, ConstantForm) {
  const cplx c(0.6, -0.8);
  auto parts = q0_parts(constant_dzetabar1(c), DomainSpec::ball(2), 500);
  EXPECT_NEAR(parts.f, std::abs(c) * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(parts.dbar, 0.0, 1e-12);
  EXPECT_NEAR(parts.vartheta, 0.0, 1e-12);
}

TEST(Q0Norm, HomogeneousAndZero) {
  auto d = DomainSpec::ellipsoid(2);
  auto f = make_test_form(d, 1, Profile::Mixed, 1);
  auto g = make_test_form(d, 1, Profile::Mixed, 1, cplx(0.0, 2.0));
  const double a = q0_norm(f, 400), b = q0_norm(g, 400);
  EXPECT_GT(a, 0.0);
  EXPECT_NEAR(b, 2.0 * a, 1e-9 * a);
  EXPECT_EQ(q0_norm(constant_dzetabar1(0.0), d, 100), 0.0);
}

TEST(Q0Norm, DbarOfConjugateCoordinate) {
  auto parts = q0_parts(conj_zeta1(), DomainSpec::ball(2), 300);
  EXPECT_NEAR(parts.dbar, std::sqrt(2.0), 1e-9);
}

TEST(Operators, TopDegreeBoundaryOperatorVanishes) {
  auto f = make_test_form(DomainSpec::ball(2), 2, Profile::NormalVanishing, 1);
  EXPECT_EQ(s_bD(f, kProbe, 2).max_abs(), 0.0);
}

TEST(Operators, Linearity) {
  auto d = DomainSpec::ellipsoid(2);
  auto f = make_test_form(d, 1, Profile::Mixed, 1).form();
  auto g = polynomial_01();
  const cplx s(0.5, -1.5);
  auto lhs = s_bD(sum(f, g, s), d, kProbe, 2);
  auto rhs = s_bD(f, d, kProbe, 2) + s_bD(g, d, kProbe, 2) * s;
  EXPECT_LT((lhs - rhs).max_abs(), 1e-12);
}

TEST(Operators, ClosedFormTransitionDerivative) {
  auto d = DomainSpec::ellipsoid(2);
  const SupportFunctionParams p{d, 1.0};
  auto W = generating_form(GenKind::WL, p);
  auto B = generating_form(GenKind::B, p);
  FormField field;
  field.n = 2;
  field.grade = {1, 0, 0, 0};
  field.eval = [&](const CPoint& s, const CPoint& z) { return transition_kernel<cplx>(W, B, 0, s, z); };
  const CPoint zeta{cplx(0.7, 0.1), cplx(0.2, -0.3)};
  auto fd = dbar(field, Slot::Z, zeta, kProbe);
  auto gw = gen_forms(detail::wl_coeffs<cplx>(p, zeta, kProbe));
  auto gb = gen_forms(detail::b_coeffs<cplx>(zeta, kProbe));
  auto closed = dbar_z_transition0(gw, gb, 2);
  EXPECT_LT((fd - closed).max_abs(), 1e-6 * std::max(1.0, closed.max_abs()));
  EXPECT_GT(closed.max_abs(), 1e-3);
}

TEST(Operators, OperatorNames) {
  for (auto o : {OpId::SbD, OpId::TqL, OpId::BM}) EXPECT_EQ(parse_op(op_name(o)), o);
  EXPECT_THROW(parse_op("T_iso"), InputError);
}

TEST(Reproduction, ConstantFunction) {
  auto r = bmk_reproduce(constant_function(2, 1.0), DomainSpec::ball(2), kProbe, 3);
  EXPECT_LT(r.residual, 1e-3);
}

TEST(Reproduction, ConjugateCoordinate) {
  auto d = DomainSpec::ball(2);
  const double r3 = bmk_reproduce(conj_zeta1(), d, kProbe, 3).residual;
  EXPECT_LT(r3, 1e-2);
}

TEST(Reproduction, OneFormResidualDecreases) {
  auto d = DomainSpec::ball(2);
  auto f = make_test_form(d, 1, Profile::Mixed, 1).form();
  const double r2 = bmk_reproduce(f, d, kProbe, 2).residual;
  const double r3 = bmk_reproduce(f, d, kProbe, 3).residual;
  EXPECT_LT(r3, 1e-2);
  EXPECT_LT(2.0 * r3, r2);
}

TEST(Reproduction, KoppelmanIdentity) {
  for (auto d : {DomainSpec::ball(2), DomainSpec::ellipsoid(2)}) {
    auto f = make_test_form(d, 1, Profile::Mixed, 1).form();
    auto k = koppelman_residual(f, d, kProbe, 3);
    EXPECT_LT(k.residual, 1e-10) << d.id();
    EXPECT_GT(k.bm.max_abs(), 1e-3);
  }
}

TEST(Reproduction, KoppelmanFunctions) {
  auto d = DomainSpec::ellipsoid(2);
  const double r2 = koppelman_residual(conj_zeta1(), d, kProbe, 2).residual;
  const double r3 = koppelman_residual(conj_zeta1(), d, kProbe, 3).residual;
  EXPECT_LT(r3, 1e-6);
  EXPECT_LT(r3, r2);
}

TEST(Operators, TqLGradeAndZero) {
  auto d = DomainSpec::ellipsoid(2);
  auto v = t_q_L(make_test_form(d, 1, Profile::Tangential, 1).form(), d, kProbe, 2);
  for (const auto& t : v.terms()) EXPECT_EQ(std::popcount(t.first), 1);
  EXPECT_GT(v.max_abs(), 0.0);
  EXPECT_EQ(t_q_L(constant_dzetabar1(0.0), d, kProbe, 2).max_abs(), 0.0);
}

TEST(WeightedBM, WeightedOperator) {
  auto d = DomainSpec::ball(2);
  EXPECT_EQ(std::abs(t_bm(constant_dzetabar1(0.0), d, kProbe, 2)), 0.0);
  EXPECT_THROW(t_bm(constant_dzetabar1(1.0), d, kProbe, 2, 1.0), InputError);
  // dbar of zetabar_1 is dzetabar_1, so T^BM reproduces zetabar_1 minus its boundary integral
  auto g = constant_dzetabar1(1.0);
  const cplx tb = t_bm(g, d, kProbe, 4);
  const cplx bd = t_q_B(conj_zeta1(), d, kProbe, 4).coefficient(0);
  EXPECT_LT(std::abs(bd - tb - std::conj(kProbe[0])), 1e-4);
}

TEST(WeightedBM, SingularWeightStable) {
  auto d = DomainSpec::ball(2);
  const double alpha = 0.5;
  ZetaForm g;
  g.q = 1;
  g.eval = [alpha](const CPoint& p) {
    FormValue<cplx> f(2);
    f.add(gen(2, kZetaBar, 0), std::pow(std::max(1.0 - std::sqrt(norm2(p)), 1e-300), -alpha));
    return f;
  };
  const cplx a = t_bm(g, d, kProbe, 4, alpha), b = t_bm(g, d, kProbe, 5, alpha);
  EXPECT_LT(std::abs(a - b), 0.01 * std::abs(b));
}

TEST(Derivatives, ConstantFunctionHasZeroDerivative) {
  auto d = DomainSpec::ball(2);
  auto z = CPoint{cplx(0.0, 0.0), cplx(0.0, 0.6)};
  auto v = directional_derivative(OpId::SbD, constant_function(2, 1.0), d, z, {DirKind::Lbar, 0}, 3);
  EXPECT_LT(v.max_abs(), 1e-8);
}

TEST(Derivatives, AnalyticMatchesFiniteDifference) {
  auto d = DomainSpec::ellipsoid(2);
  auto f = make_test_form(d, 1, Profile::Mixed, 1).form();
  for (auto dir : {Direction{DirKind::Lbar, 0}, Direction{DirKind::L, 1}}) {
    auto a = directional_derivative(OpId::SbD, f, d, kProbe, dir, 3, 1.0, DerivMethod::Analytic);
    auto b = directional_derivative(OpId::SbD, f, d, kProbe, dir, 3, 1.0, DerivMethod::FiniteDifference);
    EXPECT_LT((a - b).max_abs(), 1e-5 * std::max(1.0, a.max_abs())) << direction_name(dir);
  }
}

TEST(Derivatives, TooCloseRejected) {
  auto d = DomainSpec::ball(2);
  auto f = make_test_form(d, 1, Profile::Mixed, 1).form();
  CPoint z{cplx(1.0 - 1e-8, 0.0), cplx(0.0)};
  EXPECT_THROW(directional_derivative(OpId::SbD, f, d, z, {DirKind::Lbar, 0}, 2), DomainError);
  EXPECT_THROW(directional_derivative(OpId::SbD, f, d, kProbe, {DirKind::Lbar, 2}, 2), InputError);
}

TEST(Derivatives, KernelNormGrowsTowardBoundary) {
  auto d = DomainSpec::ellipsoid(2);
  auto ray = normal_ray(d, {cplx(1.0), cplx(0.0)}, {0.1, 0.05});
  const double a = kernel_derivative_l1(OpId::TqL, d, ray[0], {DirKind::L, 1}, 3);
  const double b = kernel_derivative_l1(OpId::TqL, d, ray[1], {DirKind::L, 1}, 3);
  EXPECT_GT(b, 1.5 * a);
}

TEST(Holder, Quotient) {
  std::vector<CPoint> pts{{cplx(0.0), cplx(0.0)}, {cplx(0.25), cplx(0.0)}, {cplx(1.0), cplx(0.0)}};
  std::vector<cplx> vals{0.0, 0.5, 1.0};
  EXPECT_NEAR(holder_quotient(pts, vals, 0.5), 1.0, 1e-14);
  EXPECT_THROW(holder_quotient(pts, {0.0}, 0.5), InputError);
}

TEST(Holder, NormalRay) {
  auto d = DomainSpec::ellipsoid(2);
  auto ray = normal_ray(d, {cplx(1.0), cplx(0.0)}, {0.2, 0.1});
  EXPECT_NEAR(boundary_distance(d, ray[1]), 0.1, 1e-8);
  EXPECT_THROW(normal_ray(d, {cplx(0.5), cplx(0.0)}, {0.1}), InputError);
}

TEST(NormalComponents, DecompositionConverges) {
  auto d = DomainSpec::ball(2);
  auto f = make_test_form(d, 1, Profile::Mixed, 1);
  const CPoint z0{cplx(0.2, 0.1), cplx(-0.1, 0.15)};
  const double r0 = normal_component_decomposition(f, z0, -0.75, 0, 2).residual;
  const double r1 = normal_component_decomposition(f, z0, -0.75, 1, 2).residual;
  EXPECT_LT(r1, 1e-3);
  EXPECT_LT(10.0 * r1, r0);
  EXPECT_THROW(normal_component_decomposition(f, z0, 0.1, 0, 2), DomainError);
}
