#pragma once
// Support functions, generating forms and Cauchy-Fantappie kernels.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/binomial.hpp>
#include <boost/rational.hpp>

#include "cflab/forms.hpp"
#include "cflab/geometry.hpp"

namespace cflab {

using Rational = boost::rational<std::int64_t>;

struct SupportFunctionParams {
  DomainSpec domain;
  double K = 0.0;
};

// Levi polynomial F = sum r_j u_j - 1/2 sum r_jk u_j u_k, u = zeta - z.
template <class T>
T levi_polynomial_t(const DefiningValues<T>& v, const Coords<T>& zeta, const Coords<T>& z) {
  T F(0.0);
  for (std::size_t j = 0; j < zeta.size(); ++j) {
    const T u = zeta[j] - z[j];
    F = F + v.dr[j] * u - 0.5 * v.pure[j] * u * u;
  }
  return F;
}

inline cplx levi_polynomial(const DomainSpec& d, const CPoint& zeta, const CPoint& z) {
  return levi_polynomial_t(eval_defining_t<cplx>(d, zeta), zeta, z);
}

template <class T>
T support_function_t(const SupportFunctionParams& p, const Coords<T>& zeta, const Coords<T>& z) {
  auto v = eval_defining_t<T>(p.domain, zeta);
  T F = levi_polynomial_t(v, zeta, z);
  T rho = norm_of(sub(zeta, z));
  return F - v.r + p.K * rho * rho * rho;
}

struct SupportTerms {
  cplx phi;       // Phi_K
  cplx F;         // Levi polynomial
  double imF;     // Im F
  double rzeta;   // r(zeta)
  double rz;      // r(z)
  double levi;    // L(r, zeta; pi^t(zeta - z))
  double cubic;   // K |zeta - z|^3
};

inline SupportTerms support_terms(const SupportFunctionParams& p, const CPoint& zeta,
                                  const CPoint& z) {
  auto v = eval_defining_t<cplx>(p.domain, zeta);
  SupportTerms t{};
  t.F = levi_polynomial_t(v, zeta, z);
  t.imF = t.F.imag();
  t.rzeta = v.r.real();
  t.rz = eval_r(p.domain, z);
  const double rho = dist(zeta, z);
  t.cubic = p.K * rho * rho * rho;
  t.phi = t.F - t.rzeta + t.cubic;
  auto proj = tangential_projection(p.domain, zeta, sub(zeta, z));
  t.levi = levi_form(p.domain, zeta, proj);
  return t;
}

inline cplx support_function(const SupportFunctionParams& p, const CPoint& zeta, const CPoint& z) {
  return support_function_t<cplx>(p, zeta, z);
}

// g_j and its derivatives; dzb(j,k) = dg_j/dzetabar_k, dzzb(j,k) = dg_j/dzbar_k.
template <class T>
struct GValues {
  Coords<T> g;
  Mat<T> dzb{};
  Mat<T> dzzb{};
  T D{};  // sum g_j u_j = Phi_K + r(zeta)
  T r{};
};

template <class T>
GValues<T> g_values(const SupportFunctionParams& p, const Coords<T>& zeta, const Coords<T>& z) {
  const int n = p.domain.n;
  auto v = eval_defining_t<T>(p.domain, zeta);
  auto u = sub(zeta, z);
  GValues<T> out;
  out.r = v.r;
  const bool cubic = p.K != 0.0;
  T rho(0.0);
  if (cubic) rho = norm_of(u);
  for (int j = 0; j < n; ++j) {
    T gj = v.dr[j] - 0.5 * v.pure[j] * u[j];
    if (cubic) gj = gj + p.K * rho * cconj(u[j]);
    out.g.push_back(gj);
  }
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      T a(0.0), b(0.0);
      if (j == k) a = v.mixed[j] - 0.5 * v.third[j] * u[j];
      if (cubic) {
        const T c = p.K * u[k] * cconj(u[j]) / (2.0 * rho);
        a = a + c;
        b = -c;
        if (j == k) {
          a = a + p.K * rho;
          b = b - p.K * rho;
        }
      }
      out.dzb[j][k] = a;
      out.dzzb[j][k] = b;
    }
  out.D = T(0.0);
  for (int j = 0; j < n; ++j) out.D = out.D + out.g[j] * u[j];
  return out;
}

inline CPoint g_coefficients(const SupportFunctionParams& p, const CPoint& zeta, const CPoint& z) {
  auto gv = g_values<cplx>(p, zeta, z);
  return gv.g;
}

// Cutoff in r: 1 for r >= -eps/2, 0 for r <= -3eps/4, quintic in between.
template <class T>
T cutoff(const T& r, double eps) {
  const double rv = base(r).real();
  if (rv >= -eps / 2) return T(1.0);
  if (rv <= -0.75 * eps) return T(0.0);
  const T s = (r + 0.75 * eps) * (4.0 / eps);
  return s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

// ---------------------------------------------------------------------------
// Generating forms.

enum class GenKind { B, WL, WLHat, BHat };

inline std::string gen_name(GenKind k) {
  switch (k) {
    case GenKind::B: return "B";
    case GenKind::WL: return "W^L";
    case GenKind::WLHat: return "W^L-hat";
    default: return "B-hat";
  }
}

template <class T>
struct GenCoeffs {
  int n = 0;
  Coords<T> w;
  Mat<T> dzb{};   // dw_j/dzetabar_k
  Mat<T> dzzb{};  // dw_j/dzbar_k
};

struct GeneratingForm {
  GenKind kind = GenKind::B;
  SupportFunctionParams params;

  template <class T>
  GenCoeffs<T> coeffs(const Coords<T>& zeta, const Coords<T>& z) const;

  // Plain coefficient values (no derivatives).
  template <class T>
  Coords<T> values(const Coords<T>& zeta, const Coords<T>& z) const;
};

namespace detail {

template <class T>
GenCoeffs<T> b_coeffs(const Coords<T>& zeta, const Coords<T>& z) {
  const int n = static_cast<int>(zeta.size());
  auto u = sub(zeta, z);
  T beta(0.0);
  for (auto& x : u) beta = beta + abs2(x);
  if (!(std::abs(base(beta)) > 0.0)) throw SingularityError("zeta = z");
  const T ib = T(1.0) / beta;
  GenCoeffs<T> c;
  c.n = n;
  for (int j = 0; j < n; ++j) c.w.push_back(cconj(u[j]) * ib);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      T a = -(c.w[j] * u[k] * ib);
      if (j == k) a = a + ib;
      c.dzb[j][k] = a;
      c.dzzb[j][k] = -a;
    }
  return c;
}

template <class T>
GenCoeffs<T> wl_coeffs(const SupportFunctionParams& p, const Coords<T>& zeta, const Coords<T>& z) {
  const int n = p.domain.n;
  auto u = sub(zeta, z);
  auto gv = g_values<T>(p, zeta, z);
  if (!(std::abs(base(gv.D)) > 0.0)) throw SingularityError("vanishing support function");
  const T iD = T(1.0) / gv.D;
  GenCoeffs<T> c;
  c.n = n;
  Coords<T> dDb, dDzb;
  for (int k = 0; k < n; ++k) {
    T a(0.0), b(0.0);
    for (int l = 0; l < n; ++l) {
      a = a + gv.dzb[l][k] * u[l];
      b = b + gv.dzzb[l][k] * u[l];
    }
    dDb.push_back(a);
    dDzb.push_back(b);
  }
  for (int j = 0; j < n; ++j) c.w.push_back(gv.g[j] * iD);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      c.dzb[j][k] = (gv.dzb[j][k] - c.w[j] * dDb[k]) * iD;
      c.dzzb[j][k] = (gv.dzzb[j][k] - c.w[j] * dDzb[k]) * iD;
    }
  return c;
}

// P = beta + 2 r(zeta) r(z) / (||dr(zeta)|| ||dr(z)||), the denominator of B-hat.
template <class S>
S extension_denominator(const DomainSpec& d, const Coords<S>& zeta, const Coords<S>& z) {
  auto vz = eval_defining_t<S>(d, zeta);
  auto vw = eval_defining_t<S>(d, z);
  S beta(0.0);
  for (std::size_t j = 0; j < zeta.size(); ++j) beta = beta + abs2(zeta[j] - z[j]);
  return beta + 2.0 * vz.r * vw.r / (norm_dr(vz) * norm_dr(vw));
}

// Coefficients of the interior extensions, evaluated on any scalar type.
template <class S>
Coords<S> hat_values(GenKind kind, const SupportFunctionParams& p, const Coords<S>& zeta,
                     const Coords<S>& z) {
  const int n = p.domain.n;
  auto u = sub(zeta, z);
  Coords<S> w;
  if (kind == GenKind::WLHat) {
    auto gv = g_values<S>(p, zeta, z);
    const S phi = gv.D - gv.r;  // Phi_K
    if (!(std::abs(base(phi)) > 0.0)) throw SingularityError("vanishing support function");
    const S c = cutoff(gv.r, p.domain.epsilon) / phi;
    for (int j = 0; j < n; ++j) w.push_back(gv.g[j] * c);
  } else {
    const S P = extension_denominator<S>(p.domain, zeta, z);
    if (!(std::abs(base(P)) > 0.0)) throw SingularityError("P vanishes");
    for (int j = 0; j < n; ++j) w.push_back(cconj(u[j]) / P);
  }
  return w;
}

}  // namespace detail

template <class T>
Coords<T> GeneratingForm::values(const Coords<T>& zeta, const Coords<T>& z) const {
  switch (kind) {
    case GenKind::B: return detail::b_coeffs(zeta, z).w;
    case GenKind::WL: return detail::wl_coeffs(params, zeta, z).w;
    default: return detail::hat_values<T>(kind, params, zeta, z);
  }
}

template <class T>
GenCoeffs<T> GeneratingForm::coeffs(const Coords<T>& zeta, const Coords<T>& z) const {
  if (kind == GenKind::B) return detail::b_coeffs(zeta, z);
  if (kind == GenKind::WL) return detail::wl_coeffs(params, zeta, z);
  // Interior extensions: derivatives by forward-mode differentiation.
  using J = Jet<T, 2 * kMaxDim>;
  const int n = params.domain.n;
  GenCoeffs<T> c;
  c.n = n;
  for (int slot = 0; slot < 2; ++slot) {
    Coords<J> a, b;
    for (int k = 0; k < n; ++k) {
      J x(zeta[k]), y(z[k]);
      J& s = slot == 0 ? x : y;
      s.d[2 * k] = T(1.0);
      s.d[2 * k + 1] = T(cplx(0.0, 1.0));
      a.push_back(x);
      b.push_back(y);
    }
    auto w = detail::hat_values<J>(kind, params, a, b);
    for (int j = 0; j < n; ++j) {
      if (slot == 0) c.w.push_back(w[j].v);
      for (int k = 0; k < n; ++k) {
        const T db = d_dzbar(w[j].d[2 * k], w[j].d[2 * k + 1]);
        (slot == 0 ? c.dzb : c.dzzb)[j][k] = db;
      }
    }
  }
  return c;
}

inline GeneratingForm generating_form(GenKind kind, const SupportFunctionParams& p) {
  return GeneratingForm{kind, p};
}

inline GeneratingForm extend_hat(GenKind kind, const SupportFunctionParams& p) {
  if (kind != GenKind::WLHat && kind != GenKind::BHat)
    throw InputError("extend_hat takes W^L-hat or B-hat");
  return GeneratingForm{kind, p};
}

// Sum_j w_j (zeta_j - z_j).
template <class T>
T generating_identity(const GeneratingForm& W, const Coords<T>& zeta, const Coords<T>& z) {
  auto w = W.values(zeta, z);
  T s(0.0);
  for (std::size_t j = 0; j < w.size(); ++j) s = s + w[j] * (zeta[j] - z[j]);
  return s;
}

// ---------------------------------------------------------------------------
// Cauchy-Fantappie forms.

template <class T>
struct GenForms {
  FormValue<T> W, dW, dzW;  // W, dbar_zeta W (dzetabar on the left), dbar_z W (dzbar on the right)
};

template <class T>
GenForms<T> gen_forms(const GenCoeffs<T>& c) {
  const int n = c.n;
  GenForms<T> f{FormValue<T>(n), FormValue<T>(n), FormValue<T>(n)};
  for (int j = 0; j < n; ++j) {
    f.W.add(gen(n, kZeta, j), c.w[j]);
    for (int k = 0; k < n; ++k) {
      int a[2] = {kZetaBar * n + k, kZeta * n + j};
      f.dW.add_ordered(a, c.dzb[j][k]);
      int b[2] = {kZeta * n + j, kZBar * n + k};
      f.dzW.add_ordered(b, c.dzzb[j][k]);
    }
  }
  return f;
}

inline double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  return boost::math::binomial_coefficient<double>(n, k);
}

inline cplx cf_constant(int n, int q) {
  const double s = ((q * (q - 1) / 2) % 2) ? -1.0 : 1.0;
  return s * binom(n - 1, q) / std::pow(cplx(0.0, 2.0 * kPi), n);
}

template <class T>
FormValue<T> cf_form_from(const GenForms<T>& f, int n, int q) {
  if (q < 0 || q >= n) return FormValue<T>(n);
  auto out = wedge(wedge(f.W, power(f.dW, n - q - 1)), power(f.dzW, q));
  return out * T(cf_constant(n, q));
}

template <class T>
FormValue<T> cf_form(const GeneratingForm& W, int q, const Coords<T>& zeta, const Coords<T>& z) {
  const int n = W.params.domain.n;
  if (q < 0 || q >= n) return FormValue<T>(n);
  return cf_form_from(gen_forms(W.coeffs(zeta, z)), n, q);
}

struct TransitionTerm {
  int mu = 0;
  int k = 0;
  Rational a;
};

// Orientation of the segment integral relative to the Koppelman identity.
inline constexpr int kTransitionSign = 1;

// a_{mu,k,q} from the segment W_t = (1-t)B + tW: the dt-component of
// Omega_q(W_t) integrated over t in [0,1], normalised by (2 pi i)^{-n}.
inline std::vector<TransitionTerm> transition_coefficients(int n, int q) {
  std::vector<TransitionTerm> out;
  if (q < 0 || q > n - 2) return out;
  const std::int64_t sq = ((q * (q - 1) / 2) % 2) ? -1 : 1;
  auto fact = [](int m) {
    std::int64_t f = 1;
    for (int i = 2; i <= m; ++i) f *= i;
    return f;
  };
  auto C = [&](int a, int b) { return Rational(fact(a), fact(b) * fact(a - b)); };
  for (int mu = 0; mu <= n - q - 2; ++mu)
    for (int k = 0; k <= q; ++k) {
      // c_nq (n-q-1) C(n-q-2,mu) C(q,k) B(mu+k+1, n-1-mu-k), times (2 pi i)^n
      Rational a = Rational(sq * kTransitionSign) * C(n - 1, q) * Rational(n - q - 1) *
                   C(n - q - 2, mu) * C(q, k) *
                   Rational(fact(mu + k) * fact(n - 2 - mu - k), fact(n - 1));
      out.push_back({mu, k, a});
    }
  return out;
}

template <class T>
FormValue<T> transition_from(const GenForms<T>& w, const GenForms<T>& b, int n, int q) {
  FormValue<T> out(n);
  if (q < 0 || q > n - 2) return out;
  const cplx norm = 1.0 / std::pow(cplx(0.0, 2.0 * kPi), n);
  const auto WB = wedge(w.W, b.W);
  for (const auto& t : transition_coefficients(n, q)) {
    auto term = wedge(WB, power(w.dW, t.mu));
    term = wedge(term, power(b.dW, n - q - 2 - t.mu));
    term = wedge(term, power(w.dzW, t.k));
    term = wedge(term, power(b.dzW, q - t.k));
    const double a = boost::rational_cast<double>(t.a);
    out += term * T(norm * a);
  }
  return out;
}

template <class T>
FormValue<T> transition_kernel(const GeneratingForm& W, const GeneratingForm& B, int q,
                               const Coords<T>& zeta, const Coords<T>& z) {
  const int n = W.params.domain.n;
  if (q < 0 || q > n - 2) return FormValue<T>(n);
  return transition_from(gen_forms(W.coeffs(zeta, z)), gen_forms(B.coeffs(zeta, z)), n, q);
}

// ---------------------------------------------------------------------------
// Weighted order bookkeeping.

enum class Arena { Boundary, Volume };

struct KernelDescriptor {
  int n = 2;
  int mu = 0;
  Rational j{0};
  int t1 = 0;
  int t0 = 0;
  int rzeta = 0;
  int rz = 0;
  Arena arena = Arena::Boundary;
  std::string label;
};

inline Rational order_of(const KernelDescriptor& d) {
  const int n = d.n;
  if (d.mu < 0 || d.j < 0 || d.t1 < 0 || d.t0 < 0 || d.rzeta < 0 || d.rz < 0)
    throw InputError("negative exponent in kernel descriptor");
  const bool vol = d.arena == Arena::Volume;
  Rational lam = Rational(vol ? 2 * n : 2 * n - 1) + d.j;
  if (vol) lam += d.rzeta + d.rz;
  if (d.t1 == 0) return lam - 2 * d.t0;
  const int credit = vol ? std::min(d.t1, 2) : 1;  // Phi factors counted with weight 1
  const int rest = d.t1 - credit;                   // remaining Phi factors
  lam -= credit;
  if (d.mu >= 1)
    lam -= 2 * std::max(0, std::min(rest, d.mu)) + 3 * std::max(rest - d.mu, 0);
  else
    lam -= 3 * std::max(rest, 0);
  return lam - 2 * d.t0;
}

enum class SmoothingLabel { GammaLambda, GammaZbarHalf, GammaZbarTwoThirds, NonSmoothing };

struct SmoothingClass {
  SmoothingLabel label = SmoothingLabel::NonSmoothing;
  Rational lambda{0};
  std::string name() const {
    switch (label) {
      case SmoothingLabel::GammaLambda: {
        std::string s = std::to_string(lambda.numerator());
        if (lambda.denominator() != 1) s += "/" + std::to_string(lambda.denominator());
        return "Gamma_" + s;
      }
      case SmoothingLabel::GammaZbarHalf: return "Gamma^zbar_{0,1/2}";
      case SmoothingLabel::GammaZbarTwoThirds: return "Gamma^zbar_{0,2/3}";
      default: return "non-smoothing";
    }
  }
};

// ---------------------------------------------------------------------------
// Calibration of K.

// Deterministic uniform doubles in [0,1) from a 64-bit Mersenne twister.
struct Sampler {
  std::mt19937_64 eng;
  explicit Sampler(std::uint64_t seed) : eng(seed) {}
  double uniform() { return double(eng() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal() {
    // Box-Muller, deterministic
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }
  CPoint direction(int n) {
    CPoint v;
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      v.emplace_back(normal(), normal());
      s += std::norm(v.back());
    }
    s = std::sqrt(s);
    for (auto& x : v) x /= s;
    return v;
  }
};

struct CollarPair {
  CPoint zeta, z;
};

// Pairs with -eps <= r <= 0 at both points and |zeta - z| < eps; half of the
// zeta samples lie on bD, separations are log-uniform in [1e-3 eps, eps).
inline std::vector<CollarPair> sample_collar_pairs(const DomainSpec& d, int count,
                                                   std::uint64_t seed) {
  Sampler s(seed);
  std::vector<CollarPair> out;
  out.reserve(count);
  const double eps = d.epsilon;
  while (static_cast<int>(out.size()) < count) {
    CPoint xi = s.direction(d.n);
    double rb = radial_extent(d, xi);
    CPoint zeta;
    if (s.uniform() < 0.5) {
      for (auto c : xi) zeta.push_back(rb * c);
    } else {
      // interior collar point on the same ray: r in [-eps, 0)
      const double lev = -eps * s.uniform();
      const double rr = radial_extent(d, xi, lev);
      for (auto c : xi) zeta.push_back(rr * c);
    }
    const double sep = eps * std::exp(std::log(1e-3) * s.uniform());
    CPoint dir = s.direction(d.n);
    CPoint z;
    for (int j = 0; j < d.n; ++j) z.push_back(zeta[j] + sep * dir[j]);
    const double rz = eval_r(d, z);
    if (rz > 0.0 || rz < -eps) continue;
    out.push_back({zeta, z});
  }
  return out;
}

inline double estimate_ratio(const SupportFunctionParams& p, const CPoint& zeta, const CPoint& z) {
  auto t = support_terms(p, zeta, z);
  const double rhs = std::abs(t.imF) + std::abs(t.rzeta) + std::abs(t.rz) + t.levi + t.cubic;
  if (!(rhs > 0.0)) return std::numeric_limits<double>::infinity();
  return std::abs(t.phi) / rhs;
}

struct CalibrationResult {
  double K = 0.0;
  double c0 = 0.05;
  int samples = 0;
  double min_ratio = 0.0;
  CollarPair worst;
  bool ok = false;
};

struct CalibrationError : std::runtime_error {
  CalibrationResult result;
  CalibrationError(const std::string& m, CalibrationResult r)
      : std::runtime_error(m), result(std::move(r)) {}
};

inline CalibrationResult min_ratio(const SupportFunctionParams& p,
                                   const std::vector<CollarPair>& pairs) {
  CalibrationResult r;
  r.K = p.K;
  r.samples = static_cast<int>(pairs.size());
  r.min_ratio = std::numeric_limits<double>::infinity();
  for (const auto& pr : pairs) {
    const double q = estimate_ratio(p, pr.zeta, pr.z);
    if (q < r.min_ratio) {
      r.min_ratio = q;
      r.worst = pr;
    }
  }
  return r;
}

inline CalibrationResult calibrate_K(const DomainSpec& d, int samples, std::uint64_t seed = 42,
                                     double c0 = 0.05) {
  if (samples < 1000) throw InputError("calibrate_K needs at least 1000 samples");
  auto pairs = sample_collar_pairs(d, samples, seed);
  CalibrationResult last;
  for (int e = -1; e <= 10; ++e) {
    const double K = e < 0 ? 0.0 : std::ldexp(1.0, e);
    auto r = min_ratio({d, K}, pairs);
    r.c0 = c0;
    last = r;
    if (r.min_ratio >= c0) {
      r.ok = true;
      return r;
    }
  }
  throw CalibrationError("K search exhausted at 2^10", last);
}

}  // namespace cflab
