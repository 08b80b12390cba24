#pragma once
// Integral operators on (0,q)-forms: the boundary operator S^bD, T_q^L, the
// Bochner-Martinelli operators, reproduction residuals, test forms, Q_0 and
// frame derivatives of operator values.

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cflab/quadrature.hpp"

namespace cflab {

using JZ = Jet<cplx, 4>;  // partials along x_1, y_1, x_2, y_2 of z

// ---------------------------------------------------------------------------
// Forms in the zeta slot.

struct ZetaForm {
  int n = 2;
  int q = 0;
  std::function<FormValue<cplx>(const CPoint&)> eval;
  std::function<FormValue<JetS>(const Coords<JetS>&)> eval_jet;

  FormField field() const {
    FormField f;
    f.n = n;
    f.grade = {0, q, 0, 0};
    auto e = eval;
    f.eval = [e](const CPoint& zeta, const CPoint&) { return e(zeta); };
    if (eval_jet) {
      auto ej = eval_jet;
      f.eval_jet = [ej](const Coords<JetS>& zeta, const Coords<JetS>&) { return ej(zeta); };
    }
    return f;
  }
  FormValue<cplx> operator()(const CPoint& zeta) const { return eval(zeta); }
  FormValue<cplx> dbar_at(const CPoint& zeta) const { return dbar(field(), Slot::Zeta, zeta, zeta); }
  FormValue<cplx> vartheta_at(const CPoint& zeta) const {
    if (q == 0) return FormValue<cplx>(n);
    return vartheta(field(), zeta, zeta);
  }
};

// f is a generic callable Coords<T> -> FormValue<T>.
template <class F>
ZetaForm zeta_form(int n, int q, F f) {
  ZetaForm z;
  z.n = n;
  z.q = q;
  z.eval = [f](const CPoint& p) { return f(p); };
  z.eval_jet = [f](const Coords<JetS>& p) { return f(p); };
  return z;
}

inline ZetaForm constant_function(int n, cplx c) {
  return zeta_form(n, 0, [n, c](const auto& p) {
    using T = typename std::decay_t<decltype(p)>::value_type;
    return FormValue<T>::scalar(n, T(c));
  });
}

// Same coefficients with dzetabar_j replaced by dzbar_j.
inline FormValue<cplx> as_z_form(const FormValue<cplx>& f) {
  const int n = f.n();
  FormValue<cplx> out(n);
  for (const auto& t : f.terms()) {
    const Mask zb = (t.first & family_mask(n, kZetaBar)) >> n;
    out.add((t.first & ~family_mask(n, kZetaBar)) | (zb << (2 * n)), t.second);
  }
  return out;
}

inline double coefficient_distance(const FormValue<cplx>& a, const FormValue<cplx>& b) {
  return (a - b).max_abs();
}

// ---------------------------------------------------------------------------
// Test forms.

enum class Profile { NormalVanishing, Tangential, Mixed, Euclidean };

inline std::string profile_name(Profile p) {
  switch (p) {
    case Profile::NormalVanishing: return "normal-vanishing";
    case Profile::Tangential: return "tangential";
    case Profile::Mixed: return "mixed";
    default: return "euclidean";
  }
}

inline Profile parse_profile(const std::string& s) {
  for (auto p : {Profile::NormalVanishing, Profile::Tangential, Profile::Mixed, Profile::Euclidean})
    if (profile_name(p) == s) return p;
  throw InputError("unknown profile '" + s + "'");
}

inline constexpr int kPsiCount = 3;

// Fixed polynomial family in (zeta, zetabar).
template <class T>
T psi_poly(int k, const Coords<T>& z) {
  switch (k) {
    case 0: return T(1.0);
    case 1:
      return T(1.0) + 0.5 * cconj(z[0]) + T(cplx(0.3, 0.0)) * z[0] * cconj(z[1]) + T(cplx(0.0, -0.2)) * z[1] * z[1];
    case 2: return T(0.25) + z[0] + T(cplx(0.0, 1.0)) * cconj(z[1]) * cconj(z[0]);
    default: throw InputError("psi index out of range [0,2]");
  }
}

struct TestForm {
  DomainSpec domain;
  int q = 1;
  Profile profile = Profile::Mixed;
  int psi = 1;
  cplx scale = 1.0;

  // normal-vanishing: r psi dbar r; tangential: psi (r_2 dzetabar_1 - r_1 dzetabar_2);
  // euclidean: psi dzetabar_1 (not in dom(dbar*)).
  template <class T>
  FormValue<T> value(const Coords<T>& zeta) const {
    const int n = domain.n;
    FormValue<T> out(n);
    auto v = eval_defining_t<T>(domain, zeta);
    const T ps = psi_poly<T>(psi, zeta) * T(scale);
    const bool nv = profile == Profile::NormalVanishing || profile == Profile::Mixed;
    const bool tan = profile == Profile::Tangential || profile == Profile::Mixed;
    if (q == n) {
      const Mask top = family_mask(n, kZetaBar);
      if (nv) out.add(top, v.r * ps);
      if (profile == Profile::Euclidean) out.add(top, ps);
      return out;
    }
    if (nv)
      for (int j = 0; j < n; ++j) out.add(gen(n, kZetaBar, j), v.r * ps * cconj(v.dr[j]));
    if (tan) {
      const T p2 = profile == Profile::Mixed ? psi_poly<T>((psi + 1) % kPsiCount, zeta) * T(scale) : ps;
      out.add(gen(n, kZetaBar, 0), p2 * v.dr[1]);
      out.add(gen(n, kZetaBar, 1), T(-1.0) * p2 * v.dr[0]);
    }
    if (profile == Profile::Euclidean) out.add(gen(n, kZetaBar, 0), ps);
    return out;
  }

  ZetaForm form() const {
    TestForm self = *this;
    return zeta_form(domain.n, q, [self](const auto& p) { return self.value(p); });
  }

  // Coefficients f_J over the adapted coframe conj(omega)^J at zeta, J ascending.
  std::vector<cplx> frame_coefficients(const CPoint& zeta) const {
    auto fr = adapted_frame(domain, zeta);
    auto f = value<cplx>(zeta);
    const int n = domain.n;
    std::vector<cplx> out;
    if (q == n) {
      out.push_back(f.coefficient(family_mask(n, kZetaBar)) * (2.0 * fr.omega).determinant());
      return out;
    }
    for (int J = 0; J < n; ++J) {
      cplx s = 0.0;
      for (int j = 0; j < n; ++j) s += f.coefficient(gen(n, kZetaBar, j)) * fr.omega(J, j);
      out.push_back(2.0 * s);
    }
    return out;
  }

  // max |f_J| over J containing the normal index.
  double normal_component(const CPoint& zeta) const {
    auto c = frame_coefficients(zeta);
    return std::abs(c.back());
  }
};

inline TestForm make_test_form(const DomainSpec& d, int q, Profile profile, int psi = 1, cplx scale = 1.0) {
  if (q < 1 || q > d.n) throw InputError("test form degree must satisfy 1 <= q <= n");
  if (d.n != 2) throw UnsupportedDomainError("test forms are built for n = 2");
  if (psi < 0 || psi >= kPsiCount) throw InputError("psi index out of range [0,2]");
  if (q == d.n && profile == Profile::Tangential) throw InputError("no tangential (0,n)-forms");
  return TestForm{d, q, profile, psi, scale};
}

// Boundary samples for the dom(dbar*) gate.
inline std::vector<CPoint> boundary_samples(const DomainSpec& d, int nt = 4, int nphi = 8) {
  auto s = sphere_rule(nt, nphi);
  std::vector<CPoint> out;
  for (const auto& xi : s.dirs) {
    const double rho = radial_extent(d, xi);
    CPoint p;
    for (auto c : xi) p.push_back(rho * c);
    out.push_back(p);
  }
  return out;
}

inline constexpr double kDomainGateTol = 1e-8;

inline double max_normal_component(const TestForm& f) {
  double m = 0.0;
  for (const auto& p : boundary_samples(f.domain)) m = std::max(m, f.normal_component(p));
  return m;
}

inline void require_dom_dbar_star(const TestForm& f) {
  if (max_normal_component(f) > kDomainGateTol) throw DomainError("test form violates the dom(dbar*) condition");
}

// ---------------------------------------------------------------------------
// Q_0 norm.

// Coefficient sum in the orthonormal coframe dzetabar_j / sqrt(2).
inline double coframe_sum(const FormValue<cplx>& a) {
  double s = 0.0;
  for (const auto& t : a.terms()) s += std::abs(t.second) * std::pow(2.0, 0.5 * std::popcount(t.first));
  return s;
}

// Deterministic interior samples, uniform in volume along rays.
inline std::vector<CPoint> interior_samples(const DomainSpec& d, int count, std::uint64_t seed) {
  Sampler s(seed);
  std::vector<CPoint> out;
  out.reserve(count);
  while (static_cast<int>(out.size()) < count) {
    CPoint xi = s.direction(d.n);
    const double rho = radial_extent(d, xi) * std::pow(s.uniform(), 1.0 / (2 * d.n));
    CPoint p;
    for (auto c : xi) p.push_back(rho * c);
    if (norm2(p) < 1e-12) continue;
    out.push_back(p);
  }
  return out;
}

struct Q0Parts {
  double f = 0.0, dbar = 0.0, vartheta = 0.0;
  double total() const { return f + dbar + vartheta; }
};

inline Q0Parts q0_parts(const ZetaForm& f, const DomainSpec& d, int samples = 10000, std::uint64_t seed = 7) {
  if (samples < 1) throw InputError("q0_norm needs samples");
  Q0Parts q;
  for (const auto& p : interior_samples(d, samples, seed)) {
    q.f = std::max(q.f, coframe_sum(f(p)));
    q.dbar = std::max(q.dbar, coframe_sum(f.dbar_at(p)));
    q.vartheta = std::max(q.vartheta, coframe_sum(f.vartheta_at(p)));
  }
  return q;
}

inline double q0_norm(const ZetaForm& f, const DomainSpec& d, int samples = 10000, std::uint64_t seed = 7) {
  return q0_parts(f, d, samples, seed).total();
}

inline double q0_norm(const TestForm& f, int samples = 10000, std::uint64_t seed = 7) {
  return q0_norm(f.form(), f.domain, samples, seed);
}

// ---------------------------------------------------------------------------
// Kernels in the operators.

enum class OpId { SbD, TqL, BM };

inline std::string op_name(OpId op) {
  switch (op) {
    case OpId::SbD: return "S_bD";
    case OpId::TqL: return "T_q^L";
    default: return "T_q^B";
  }
}

inline OpId parse_op(const std::string& s) {
  for (auto o : {OpId::SbD, OpId::TqL, OpId::BM})
    if (op_name(o) == s) return o;
  throw InputError("unknown operator '" + s + "'");
}

// dbar_z Omega_0(W,B) = c (W ^ dbar_z B - dbar_z W ^ B) for n = 2.
template <class T>
FormValue<T> dbar_z_transition0(const GenForms<T>& w, const GenForms<T>& b, int n) {
  if (n != 2) throw UsageError("closed-form dbar_z Omega_0(W,B) is for n = 2");
  const auto tc = transition_coefficients(n, 0);
  const cplx c = boost::rational_cast<double>(tc.front().a) / std::pow(cplx(0.0, 2.0 * kPi), n);
  return (wedge(w.W, b.dzW) - wedge(w.dzW, b.W)) * T(c);
}

template <class T>
FormValue<T> lift_form(const FormValue<cplx>& a) {
  return a.template map<T>([](const cplx& c) { return T(c); });
}

// Integrand of op at (zeta, z): f ^ K, plus dbar f ^ Omega_q(W,B) for S^bD.
template <class T>
FormValue<T> op_integrand(OpId op, const SupportFunctionParams& p, int q, const FormValue<cplx>& f,
                          const FormValue<cplx>& df, const Coords<T>& zeta, const Coords<T>& z) {
  const int n = p.domain.n;
  const auto gb = gen_forms(detail::b_coeffs(zeta, z));
  if (op == OpId::BM) return wedge(lift_form<T>(f), cf_form_from(gb, n, q));
  const auto gw = gen_forms(detail::wl_coeffs(p, zeta, z));
  FormValue<T> out = wedge(lift_form<T>(f), cf_form_from(gw, n, q));
  if (op == OpId::TqL) return out;
  if (q <= n - 2) out += wedge(lift_form<T>(df), transition_from(gw, gb, n, q));
  if (q >= 1 && q - 1 <= n - 2) out += wedge(lift_form<T>(f), dbar_z_transition0(gw, gb, n));
  return out;
}

// ---------------------------------------------------------------------------
// Operator values with z-partials.

struct ZValue {
  FormValue<cplx> value;
  std::vector<FormValue<cplx>> partial;  // d/dx_1, d/dy_1, ..., d/dy_n

  FormValue<cplx> d_dz(int k) const { return (partial[2 * k] - partial[2 * k + 1] * kI) * cplx(0.5); }
  FormValue<cplx> d_dzbar(int k) const { return (partial[2 * k] + partial[2 * k + 1] * kI) * cplx(0.5); }
};

struct OperatorOptions {
  double K = 1.0;
  int level = 3;
  bool derivatives = false;
};

inline const QuadratureRule& shared_boundary_rule(const DomainSpec& d, int level) {
  static std::mutex mu;
  static std::map<std::string, std::unique_ptr<QuadratureRule>> memo;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = memo[d.id() + "/" + std::to_string(level)];
  if (!slot) slot = std::make_unique<QuadratureRule>(cached_rule(d, Arena::Boundary, level));
  return *slot;
}

// Boundary integral of kern(zeta_T, z_T, zeta) over bD at z, with z-partials on request.
template <class Kern>
ZValue boundary_operator(const DomainSpec& d, const CPoint& z, const OperatorOptions& o, Kern kern) {
  const int n = d.n;
  if (o.derivatives && 2 * n != 4) throw UnsupportedDomainError("z-partials are implemented for n = 2");
  const auto masks = z_monomials(n);
  const int C = o.derivatives ? 1 + 2 * n : 1;
  const int dim = 2 * C * static_cast<int>(masks.size());
  auto put = [&](Eigen::VectorXd& v, std::size_t i, int c, const cplx& x) {
    v[2 * (i * C + c)] = x.real();
    v[2 * (i * C + c) + 1] = x.imag();
  };
  auto density = [&](const CPoint& p, const CPoint& nu) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    if (o.derivatives) {
      auto val = boundary_density(kern(lift<JZ>(p), lift<JZ>(z, 0), p), nu);
      for (const auto& t : val.terms()) {
        const auto i = monomial_index(masks, t.first);
        put(v, i, 0, t.second.v);
        for (int c = 0; c < 2 * n; ++c) put(v, i, 1 + c, t.second.d[c]);
      }
    } else {
      auto val = boundary_density(kern(p, z, p), nu);
      for (const auto& t : val.terms()) put(v, monomial_index(masks, t.first), 0, t.second);
    }
    return v;
  };
  const QuadratureRule* grid = nullptr;
  if (boundary_distance(d, z) >= kNearDistance) grid = &shared_boundary_rule(d, o.level);
  auto res = integrate_boundary_vector(d, z, o.level, dim, density, grid);
  ZValue out;
  out.value = FormValue<cplx>(n);
  if (o.derivatives) out.partial.assign(2 * n, FormValue<cplx>(n));
  for (std::size_t i = 0; i < masks.size(); ++i)
    for (int c = 0; c < C; ++c) {
      const cplx x(res[2 * (i * C + c)], res[2 * (i * C + c) + 1]);
      if (x == cplx(0.0)) continue;
      (c == 0 ? out.value : out.partial[c - 1]).add(masks[i], x);
    }
  return out;
}

inline ZValue apply_operator(OpId op, const ZetaForm& f, const DomainSpec& d, const CPoint& z,
                             const OperatorOptions& o) {
  if (f.n != d.n) throw InputError("form and domain dimensions differ");
  if (op == OpId::SbD && f.q == d.n) {
    // S^bD = 0 for q = n
    ZValue zero;
    zero.value = FormValue<cplx>(d.n);
    if (o.derivatives) zero.partial.assign(2 * d.n, FormValue<cplx>(d.n));
    return zero;
  }
  const SupportFunctionParams p{d, o.K};
  const bool need_df = op == OpId::SbD && f.q <= d.n - 2;
  const int q = f.q;
  return boundary_operator(d, z, o, [&](const auto& zt, const auto& wt, const CPoint& zeta) {
    using T = typename std::decay_t<decltype(zt)>::value_type;
    const auto fv = f(zeta);
    const auto df = need_df ? f.dbar_at(zeta) : FormValue<cplx>(d.n);
    return op_integrand<T>(op, p, q, fv, df, zt, wt);
  });
}

// S^bD f(z) = int f ^ Omega_q(W^L) + int dbar f ^ Omega_q(W^L,B) + int f ^ dbar_z Omega_{q-1}(W^L,B).
inline FormValue<cplx> s_bD(const ZetaForm& f, const DomainSpec& d, const CPoint& z, int level, double K = 1.0) {
  return apply_operator(OpId::SbD, f, d, z, {K, level, false}).value;
}

inline FormValue<cplx> s_bD(const TestForm& f, const CPoint& z, int level, double K = 1.0) {
  require_dom_dbar_star(f);
  return s_bD(f.form(), f.domain, z, level, K);
}

inline FormValue<cplx> t_q_L(const ZetaForm& f, const DomainSpec& d, const CPoint& z, int level, double K = 1.0) {
  return apply_operator(OpId::TqL, f, d, z, {K, level, false}).value;
}

// int_bD f ^ Omega_q(B).
inline FormValue<cplx> t_q_B(const ZetaForm& f, const DomainSpec& d, const CPoint& z, int level) {
  return apply_operator(OpId::BM, f, d, z, {0.0, level, false}).value;
}

// ---------------------------------------------------------------------------
// Volume operators and reproduction identities.

// int_D g ^ Omega_q(B) with the rule centred at z; grading as in centered_volume_rule.
inline FormValue<cplx> volume_bm(const ZetaForm& g, int q, const DomainSpec& d, const CPoint& z, int level,
                                 double grading = 1.0, double level_set = 0.0) {
  auto B = generating_form(GenKind::B, {d, 0.0});
  FormField field;
  field.n = d.n;
  field.eval = [&](const CPoint& zeta, const CPoint& w) { return wedge(g(zeta), cf_form(B, q, zeta, w)); };
  return integrate(field, centered_volume_rule(d, z, level, level_set, grading), z);
}

// T^BM g(z) = int_D g ^ Omega_0(B) for g bounded by C dist^{-alpha}.
inline cplx t_bm(const ZetaForm& g, const DomainSpec& d, const CPoint& z, int level, double alpha = 0.0) {
  if (g.q != 1) throw InputError("T^BM takes (0,1)-forms");
  if (alpha >= 1.0) throw InputError("unsupported weight: alpha must be < 1");
  const double grading = alpha > 0.0 ? 1.0 / (1.0 - alpha) : 1.0;
  return volume_bm(g, 0, d, z, level, grading).coefficient(0);
}

// dbar_z of a z-dependent form by 5-point central differences, dzbar on the right.
template <class F>
FormValue<cplx> dbar_z_fd(F value_at, const CPoint& z, int n, double h = 1e-4) {
  FormValue<cplx> out(n);
  for (int k = 0; k < n; ++k) {
    FormValue<cplx> part[2];
    for (int c = 0; c < 2; ++c) {
      const cplx e = c == 0 ? cplx(h, 0.0) : cplx(0.0, h);
      auto at = [&](double s) {
        CPoint w = z;
        w[k] += s * e;
        return value_at(w);
      };
      part[c] = (at(-2) - at(-1) * cplx(8.0) + at(1) * cplx(8.0) - at(2)) * cplx(1.0 / (12.0 * h));
    }
    auto db = (part[0] + part[1] * kI) * cplx(0.5);
    out += wedge(db, FormValue<cplx>::generator(n, kZBar, k));
  }
  return out;
}

struct BmkTerms {
  FormValue<cplx> f_at_z, boundary, dbar_volume, volume;
  double residual = 0.0;
};

// f(z) - int_bD f^Omega_q(B) + dbar_z int_D f^Omega_{q-1}(B) + int_D dbar f^Omega_q(B).
inline BmkTerms bmk_reproduce(const ZetaForm& f, const DomainSpec& d, const CPoint& z, int level) {
  const int n = d.n, q = f.q;
  BmkTerms t;
  t.f_at_z = as_z_form(f(z));
  t.boundary = t_q_B(f, d, z, level);
  t.dbar_volume = FormValue<cplx>(n);
  if (q >= 1)
    t.dbar_volume = dbar_z_fd([&](const CPoint& w) { return volume_bm(f, q - 1, d, w, level); }, z, n);
  ZetaForm df = f;
  df.q = q + 1;
  df.eval = [f](const CPoint& zeta) { return f.dbar_at(zeta); };
  df.eval_jet = nullptr;
  t.volume = q < n ? volume_bm(df, q, d, z, level) : FormValue<cplx>(n);
  t.residual = (t.f_at_z - t.boundary + t.dbar_volume + t.volume).max_abs();
  return t;
}

struct KoppelmanTerms {
  FormValue<cplx> bm, sbd;
  double residual = 0.0;
};

// int_bD f ^ Omega_q(B) against S^bD f at z.
inline KoppelmanTerms koppelman_residual(const ZetaForm& f, const DomainSpec& d, const CPoint& z, int level,
                                         double K = 1.0) {
  KoppelmanTerms t;
  t.bm = t_q_B(f, d, z, level);
  t.sbd = s_bD(f, d, z, level, K);
  t.residual = (t.bm - t.sbd).max_abs();
  return t;
}

// ---------------------------------------------------------------------------
// Frame derivatives.

enum class DirKind { L, Lbar };

struct Direction {
  DirKind kind = DirKind::Lbar;
  int j = 0;  // frame index; n-1 is the normal
};

inline std::string direction_name(const Direction& v) {
  return std::string(v.kind == DirKind::L ? "L" : "Lbar") + "_" + std::to_string(v.j + 1);
}

enum class DerivMethod { Analytic, FiniteDifference };

inline Frame foot_frame(const DomainSpec& d, const CPoint& z) {
  return adapted_frame(d, nearest_boundary_point(d, z));
}

inline FormValue<cplx> apply_direction(const ZValue& v, const Frame& fr, const Direction& dir, int n) {
  FormValue<cplx> out(n);
  for (int k = 0; k < n; ++k) {
    if (dir.kind == DirKind::L)
      out += v.d_dz(k) * fr.L(dir.j, k);
    else
      out += v.d_dzbar(k) * std::conj(fr.L(dir.j, k));
  }
  return out;
}

// Derivative of an operator value along a frame field of the normal foot of z.
inline FormValue<cplx> directional_derivative(OpId op, const ZetaForm& f, const DomainSpec& d, const CPoint& z,
                                              const Direction& dir, int level, double K = 1.0,
                                              DerivMethod method = DerivMethod::Analytic) {
  const int n = d.n;
  const double delta = boundary_distance(d, z);
  if (delta < 1e-6) throw DomainError("evaluation point too close to bD for a derivative");
  if (dir.j < 0 || dir.j >= n) throw InputError("frame index out of range");
  const Frame fr = foot_frame(d, z);
  if (method == DerivMethod::Analytic) return apply_direction(apply_operator(op, f, d, z, {K, level, true}), fr, dir, n);
  // real directional differences along a and i a recombined into L or Lbar
  const double h = std::min(1e-4, delta / 10.0);
  CPoint a;
  for (int k = 0; k < n; ++k) a.push_back(fr.L(dir.j, k));
  auto value = [&](const CPoint& w) { return apply_operator(op, f, d, w, {K, level, false}).value; };
  auto real_deriv = [&](const CPoint& v) {
    CPoint p = z, m = z;
    for (int k = 0; k < n; ++k) {
      p[k] += h * v[k];
      m[k] -= h * v[k];
    }
    return (value(p) - value(m)) * cplx(1.0 / (2.0 * h));
  };
  CPoint ia;
  for (auto c : a) ia.push_back(kI * c);
  auto da = real_deriv(a), dia = real_deriv(ia);
  if (dir.kind == DirKind::L) return (da - dia * kI) * cplx(0.5);
  // sum conj(a_k) d/dzbar_k = (D_a + i D_{ia}) / 2
  return (da + dia * kI) * cplx(0.5);
}

// Worst case over bounded tangential (0,1)-data: int_bD sum_I |D K_I(omega-bar_1)| dS, one value per direction.
inline std::vector<double> kernel_derivative_l1(OpId op, const DomainSpec& d, const CPoint& z,
                                                const std::vector<Direction>& dirs, int level, double K = 1.0) {
  const int n = d.n;
  if (n != 2) throw UnsupportedDomainError("kernel norms are implemented for n = 2");
  for (const auto& dir : dirs)
    if (dir.j < 0 || dir.j >= n) throw InputError("frame index out of range");
  const Frame fr = foot_frame(d, z);
  const SupportFunctionParams p{d, K};
  const int m = static_cast<int>(dirs.size());
  auto density = [&](const CPoint& zeta, const CPoint& nu) {
    auto fz = adapted_frame(d, zeta);
    FormValue<cplx> e(n);
    for (int l = 0; l < n; ++l) e.add(gen(n, kZetaBar, l), std::conj(fz.omega(0, l)));
    auto val = boundary_density(op_integrand<JZ>(op, p, 1, e, FormValue<cplx>(n), lift<JZ>(zeta), lift<JZ>(z, 0)), nu);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    for (const auto& t : val.terms())
      for (int i = 0; i < m; ++i) {
        cplx dv = 0.0;
        for (int k = 0; k < n; ++k) {
          const cplx dz = d_dz(t.second.d[2 * k], t.second.d[2 * k + 1]);
          const cplx dzb = d_dzbar(t.second.d[2 * k], t.second.d[2 * k + 1]);
          dv += dirs[i].kind == DirKind::L ? fr.L(dirs[i].j, k) * dz : std::conj(fr.L(dirs[i].j, k)) * dzb;
        }
        v[i] += std::abs(dv);
      }
    return v;
  };
  const QuadratureRule* grid = nullptr;
  if (boundary_distance(d, z) >= kNearDistance) grid = &shared_boundary_rule(d, level);
  auto res = integrate_boundary_vector(d, z, level, m, density, grid);
  return std::vector<double>(res.data(), res.data() + m);
}

inline double kernel_derivative_l1(OpId op, const DomainSpec& d, const CPoint& z, const Direction& dir, int level,
                                   double K = 1.0) {
  return kernel_derivative_l1(op, d, z, std::vector<Direction>{dir}, level, K).front();
}

// ---------------------------------------------------------------------------
// Normal components and Holder quotients.

// h_n = sum_k H_k r_k with H = S^bD f; proportional to the normal coefficient of H.
struct NormalValue {
  cplx h;
  FormValue<cplx> dbar_h;  // in dzetabar
};

inline NormalValue normal_coefficient(const ZetaForm& f, const DomainSpec& d, const CPoint& zeta, int level,
                                      double K, bool with_dbar = true) {
  const int n = d.n;
  auto H = apply_operator(OpId::SbD, f, d, zeta, {K, level, with_dbar});
  auto v = eval_defining_t<JZ>(d, lift<JZ>(zeta, 0));
  NormalValue out{0.0, FormValue<cplx>(n)};
  for (int k = 0; k < n; ++k) {
    const Mask m = gen(n, kZBar, k);
    out.h += H.value.coefficient(m) * v.dr[k].v;
    if (!with_dbar) continue;
    for (int l = 0; l < n; ++l) {
      const cplx drk = d_dzbar(v.dr[k].d[2 * l], v.dr[k].d[2 * l + 1]);
      out.dbar_h.add(gen(n, kZetaBar, l), H.d_dzbar(l).coefficient(m) * v.dr[k].v + H.value.coefficient(m) * drk);
    }
  }
  return out;
}

struct BmnTerms {
  cplx lhs, boundary, volume;
  double residual = 0.0;
};

// h_n(z0) = int_{bD_t} h_n Omega_0(B) - int_{D_t} dbar h_n ^ Omega_0(B) on D_t = {r < t}.
inline BmnTerms normal_component_decomposition(const TestForm& f, const CPoint& z0, double t, int level,
                                               int inner_level, double K = 1.0) {
  require_dom_dbar_star(f);
  const DomainSpec& d = f.domain;
  const int n = d.n;
  if (!(t < 0.0) || !(eval_r(d, z0) < t)) throw DomainError("z0 must lie in D_t with t < 0");
  const auto form = f.form();
  auto B = generating_form(GenKind::B, {d, 0.0});
  BmnTerms out;
  out.lhs = normal_coefficient(form, d, z0, inner_level, K, false).h;
  auto bq = boundary_rule(d, level, t);
  out.boundary = pairwise_sum<cplx>(bq.size(), [&](std::size_t i) {
    const auto& p = bq.nodes[i];
    auto h = normal_coefficient(form, d, p, inner_level, K, false).h;
    return boundary_density(cf_form(B, 0, p, z0), bq.normals[i]).coefficient(0) * h * bq.weights[i];
  });
  auto vq = centered_volume_rule(d, z0, level, t);
  out.volume = pairwise_sum<cplx>(vq.size(), [&](std::size_t i) {
    const auto& p = vq.nodes[i];
    auto nv = normal_coefficient(form, d, p, inner_level, K);
    return volume_density(wedge(nv.dbar_h, cf_form(B, 0, p, z0))).coefficient(0) * vq.weights[i];
  });
  (void)n;
  out.residual = std::abs(out.lhs - out.boundary + out.volume);
  return out;
}

// sup over point pairs of |h_i - h_j| / |z_i - z_j|^delta.
inline double holder_quotient(const std::vector<CPoint>& pts, const std::vector<cplx>& vals, double delta) {
  if (pts.size() != vals.size()) throw InputError("points and values differ in length");
  double best = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double s = dist(pts[i], pts[j]);
      if (s <= 0.0) continue;
      best = std::max(best, std::abs(vals[i] - vals[j]) / std::pow(s, delta));
    }
  return best;
}

// Points z = foot - depth * nu on the inward normal ray.
inline std::vector<CPoint> normal_ray(const DomainSpec& d, const CPoint& foot, const std::vector<double>& depths) {
  if (std::abs(eval_r(d, foot)) > 1e-10) throw InputError("ray foot must lie on bD");
  const CPoint nu = unit_normal(d, foot);
  std::vector<CPoint> out;
  for (double s : depths) {
    CPoint z = foot;
    for (int k = 0; k < d.n; ++k) z[k] -= s * nu[k];
    out.push_back(z);
  }
  return out;
}

// Operator report.
struct OperatorPoint {
  CPoint z;
  double dist = 0.0;
  FormValue<cplx> value;
  std::vector<std::pair<std::string, FormValue<cplx>>> dvals;
};

struct OperatorReport {
  std::string op, domain, profile;
  int q = 0, level = 0;
  std::vector<OperatorPoint> points;
};

}  // namespace cflab
