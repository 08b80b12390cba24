#pragma once
// Boundary and volume quadrature on star-shaped model domains in C^2,
// integration of double forms, and adaptive cubature near the boundary.
//
// Sphere nodes use S^3 coordinates xi = (sqrt(1-t) e^{i phi1}, sqrt(t) e^{i phi2})
// with dOmega = dt dphi1 dphi2 / 2: Gauss-Legendre in t, trapezoid in the angles.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/legendre.hpp>

#include "cflab/forms.hpp"
#include "cflab/geometry.hpp"
#include "cflab/kernels.hpp"

namespace cflab {

struct UnsupportedDomainError : InputError {
  using InputError::InputError;
};

inline constexpr int kMaxLevel = 6;

inline void check_level(int level) {
  if (level < 0 || level > kMaxLevel) throw InputError("quadrature level out of range [0,6]");
}

struct QuadratureRule {
  Arena arena = Arena::Boundary;
  std::string domain;
  int level = 0;
  double level_set = 0.0;   // nodes lie on / inside {r = level_set}
  std::vector<CPoint> nodes;
  std::vector<double> weights;
  std::vector<CPoint> normals;  // outward unit normals (boundary rules)

  std::size_t size() const { return nodes.size(); }
  double total() const;
};

// Fixed-shape pairwise summation: blocks of 32 summed in order, then a
// balanced binary tree over blocks.
template <class V, class F>
V pairwise_sum(std::size_t count, F term) {
  constexpr std::size_t kBlock = 32;
  if (count == 0) return V{};
  std::vector<V> partial;
  partial.reserve(count / kBlock + 1);
  for (std::size_t b = 0; b < count; b += kBlock) {
    V s = term(b);
    const std::size_t e = std::min(count, b + kBlock);
    for (std::size_t i = b + 1; i < e; ++i) s = s + term(i);
    partial.push_back(std::move(s));
  }
  while (partial.size() > 1) {
    std::vector<V> next;
    next.reserve(partial.size() / 2 + 1);
    for (std::size_t i = 0; i + 1 < partial.size(); i += 2) next.push_back(partial[i] + partial[i + 1]);
    if (partial.size() % 2) next.push_back(std::move(partial.back()));
    partial.swap(next);
  }
  return partial.front();
}

inline double QuadratureRule::total() const {
  return pairwise_sum<double>(weights.size(), [&](std::size_t i) { return weights[i]; });
}

// Gauss-Legendre nodes and weights on [0,1].
struct GaussRule {
  std::vector<double> x, w;
};

inline const GaussRule& gauss_legendre(int N) {
  static std::map<int, GaussRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(N);
  if (it != cache.end()) return it->second;
  GaussRule g;
  auto zeros = boost::math::legendre_p_zeros<double>(N);
  std::vector<double> xs;
  for (double z : zeros) {
    xs.push_back(z);
    if (z != 0.0) xs.push_back(-z);
  }
  std::sort(xs.begin(), xs.end());
  for (double x : xs) {
    const double dp = boost::math::legendre_p_prime(N, x);
    g.x.push_back(0.5 * (x + 1.0));
    g.w.push_back(1.0 / ((1.0 - x * x) * dp * dp));  // 2/(...) scaled by 1/2
  }
  return cache.emplace(N, std::move(g)).first->second;
}

struct SphereRule {
  std::vector<CPoint> dirs;
  std::vector<double> weights;
};

inline SphereRule sphere_rule(int nt, int nphi) {
  const auto& g = gauss_legendre(nt);
  SphereRule s;
  const double h = 2.0 * kPi / nphi;
  for (int a = 0; a < nt; ++a) {
    const double t = g.x[a];
    const double c = std::sqrt(1.0 - t), sn = std::sqrt(t);
    for (int i = 0; i < nphi; ++i)
      for (int k = 0; k < nphi; ++k) {
        const double p1 = (i + 0.25) * h, p2 = (k + 0.75) * h;
        s.dirs.push_back(CPoint{std::polar(c, p1), std::polar(sn, p2)});
        s.weights.push_back(0.5 * g.w[a] * h * h);
      }
  }
  return s;
}

inline void require_n2(const DomainSpec& d) {
  if (d.n != 2) throw UnsupportedDomainError("quadrature rules are built for n = 2");
}

// Surface element factor rho^3 |grad r| / (grad r . xi) at the boundary point rho*xi.
inline double surface_factor(const DomainSpec& d, const CPoint& p, const CPoint& xi, double rho) {
  auto v = eval_defining_t<cplx>(d, p);
  double g2 = 0.0;
  cplx dot = 0.0;
  for (int j = 0; j < d.n; ++j) {
    g2 += std::norm(v.dr[j]);
    dot += v.dr[j] * xi[j];
  }
  return rho * rho * rho * std::sqrt(g2) / dot.real();
}

inline QuadratureRule boundary_rule(const DomainSpec& d, int level, double level_set = 0.0) {
  require_n2(d);
  check_level(level);
  auto s = sphere_rule(2 << level, 4 << level);
  QuadratureRule q;
  q.arena = Arena::Boundary;
  q.domain = d.id();
  q.level = level;
  q.level_set = level_set;
  q.nodes.reserve(s.dirs.size());
  for (std::size_t i = 0; i < s.dirs.size(); ++i) {
    const auto& xi = s.dirs[i];
    const double rho = radial_extent(d, xi, level_set);
    CPoint p;
    for (auto c : xi) p.push_back(rho * c);
    q.nodes.push_back(p);
    q.weights.push_back(s.weights[i] * surface_factor(d, p, xi, rho));
    q.normals.push_back(unit_normal(d, p));
  }
  return q;
}

// Origin-centred shells rho = s R(xi); panels in s end at 1 - 2^{-k},
// k = 1..level+1, so the outermost shell thickness halves per level.
inline QuadratureRule volume_rule(const DomainSpec& d, int level) {
  require_n2(d);
  check_level(level);
  auto s = sphere_rule(1 << level, 2 << level);
  const auto& g = gauss_legendre(6);
  std::vector<double> br{0.0};
  for (int k = 1; k <= level + 1; ++k) br.push_back(1.0 - std::ldexp(1.0, -k));
  br.push_back(1.0);
  QuadratureRule q;
  q.arena = Arena::Volume;
  q.domain = d.id();
  q.level = level;
  for (std::size_t i = 0; i < s.dirs.size(); ++i) {
    const auto& xi = s.dirs[i];
    const double R = radial_extent(d, xi);
    for (std::size_t p = 0; p + 1 < br.size(); ++p) {
      const double a = br[p], len = br[p + 1] - br[p];
      for (std::size_t k = 0; k < g.x.size(); ++k) {
        const double sv = a + len * g.x[k];
        const double rho = sv * R;
        CPoint node;
        for (auto c : xi) node.push_back(rho * c);
        q.nodes.push_back(node);
        q.weights.push_back(s.weights[i] * g.w[k] * len * R * rho * rho * rho);
      }
    }
  }
  return q;
}

// Distance R > 0 from an interior point z to {r = level_set} along the unit direction xi.
inline double ray_extent(const DomainSpec& d, const CPoint& z, const CPoint& xi, double level_set = 0.0) {
  auto f = [&](double t) {
    CPoint p = z;
    for (int j = 0; j < d.n; ++j) p[j] += t * xi[j];
    return eval_r(d, p) - level_set;
  };
  if (f(0.0) >= 0.0) throw DomainError("ray origin not inside the level set");
  double lo = 0.0, hi = 1.0;
  while (f(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  // bracketed Newton (convex model domains: single crossing)
  double t = hi;
  for (int it = 0; it < 200; ++it) {
    CPoint p = z;
    for (int j = 0; j < d.n; ++j) p[j] += t * xi[j];
    auto v = eval_defining_t<cplx>(d, p);
    const double fv = v.r.real() - level_set;
    if (fv < 0.0) lo = t; else hi = t;
    cplx dot = 0.0;
    for (int j = 0; j < d.n; ++j) dot += v.dr[j] * xi[j];
    const double fp = 2.0 * dot.real();
    double nt = fp > 0.0 ? t - fv / fp : 0.5 * (lo + hi);
    if (!(nt > lo && nt < hi)) nt = 0.5 * (lo + hi);
    if (std::abs(nt - t) < 1e-15 * std::max(1.0, t)) {
      t = nt;
      break;
    }
    t = nt;
  }
  return t;
}

// z-centred polar rule over {r < level_set}: zeta = z + rho xi, rho in (0, R(xi; z)).
// grading p > 1 maps rho = R (1 - (1-x)^p), absorbing (R - rho)^{1/p - 1} weights at the boundary.
inline QuadratureRule centered_volume_rule(const DomainSpec& d, const CPoint& z, int level,
                                           double level_set = 0.0, double grading = 1.0) {
  require_n2(d);
  check_level(level);
  if (!(grading >= 1.0)) throw InputError("grading must be >= 1");
  auto s = sphere_rule(1 << level, 2 << level);
  const auto& g = gauss_legendre(2 * level + 2);
  QuadratureRule q;
  q.arena = Arena::Volume;
  q.domain = d.id();
  q.level = level;
  q.level_set = level_set;
  for (std::size_t i = 0; i < s.dirs.size(); ++i) {
    const auto& xi = s.dirs[i];
    const double R = ray_extent(d, z, xi, level_set);
    for (std::size_t k = 0; k < g.x.size(); ++k) {
      const double u = 1.0 - g.x[k];
      const double rho = R * (1.0 - std::pow(u, grading));
      CPoint node = z;
      for (int j = 0; j < d.n; ++j) node[j] += rho * xi[j];
      q.nodes.push_back(node);
      q.weights.push_back(s.weights[i] * g.w[k] * grading * std::pow(u, grading - 1.0) * R * rho * rho * rho);
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// Densities of double forms.

// Splits a form into (zeta-top coefficient / dV coefficient) x z-monomial.
template <class T>
FormValue<T> volume_density(const FormValue<T>& a) {
  const int n = a.n();
  const Mask zm = zeta_mask(n);
  const cplx iv = 1.0 / volume_coefficient(n);
  FormValue<T> out(n);
  for (const auto& t : a.terms())
    if ((t.first & zm) == zm) out.add(t.first & ~zm, t.second * T(iv));
  return out;
}

// Real conormal nu^flat = sum (conj(nu_j) dzeta_j + nu_j dzetabar_j) / 2.
template <class T>
FormValue<T> conormal(int n, const CPoint& nu) {
  FormValue<T> f(n);
  for (int j = 0; j < n; ++j) {
    f.add(gen(n, kZeta, j), T(0.5 * std::conj(nu[j])));
    f.add(gen(n, kZetaBar, j), T(0.5 * nu[j]));
  }
  return f;
}

// dS-density of a (2n-1)-form in zeta on the boundary: (nu^flat ^ a) / dV.
template <class T>
FormValue<T> boundary_density(const FormValue<T>& a, const CPoint& nu) {
  return volume_density(wedge(conormal<T>(a.n(), nu), a));
}

// Integral of a form field over a rule, returned as a form in the z-differentials.
inline FormValue<cplx> integrate(const FormField& field, const QuadratureRule& rule, const CPoint& z) {
  const int n = field.n;
  using Acc = std::vector<std::pair<Mask, cplx>>;
  auto add = [](Acc a, const Acc& b) {
    for (const auto& t : b) {
      auto it = std::find_if(a.begin(), a.end(), [&](const auto& x) { return x.first == t.first; });
      if (it == a.end())
        a.push_back(t);
      else
        it->second += t.second;
    }
    std::sort(a.begin(), a.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    return a;
  };
  auto term = [&](std::size_t i) {
    const auto& p = rule.nodes[i];
    if (!z.empty() && dist(p, z) < 1e-12) throw SingularityError("quadrature node at the singularity");
    auto val = field.eval(p, z);
    auto dens = rule.arena == Arena::Boundary ? boundary_density(val, rule.normals[i]) : volume_density(val);
    Acc a;
    for (const auto& t : dens.terms()) a.emplace_back(t.first, t.second * rule.weights[i]);
    return a;
  };
  // pairwise reduction of sparse accumulators
  constexpr std::size_t kBlock = 32;
  std::vector<Acc> partial;
  for (std::size_t b = 0; b < rule.size(); b += kBlock) {
    Acc s;
    for (std::size_t i = b; i < std::min(rule.size(), b + kBlock); ++i) s = add(std::move(s), term(i));
    partial.push_back(std::move(s));
  }
  while (partial.size() > 1) {
    std::vector<Acc> next;
    for (std::size_t i = 0; i + 1 < partial.size(); i += 2) next.push_back(add(partial[i], partial[i + 1]));
    if (partial.size() % 2) next.push_back(partial.back());
    partial.swap(next);
  }
  FormValue<cplx> out(n);
  if (!partial.empty())
    for (const auto& t : partial.front()) out.add(t.first, t.second);
  return out;
}

// ---------------------------------------------------------------------------
// Adaptive Genz-Malik cubature (degree 7 with embedded degree 5) on 3-boxes.

struct CubatureOptions {
  double rel_tol = 1e-6;
  double abs_tol = 1e-13;
  long max_evals = 2'000'000;
};

struct CubatureResult {
  Eigen::VectorXd value;
  Eigen::VectorXd error;
  long evals = 0;
  bool converged = false;
};

namespace detail {

struct GMBox {
  std::array<double, 3> c, h;
  Eigen::VectorXd val, err;
  double key = 0.0;
  int split = 0;
};

template <class F>
GMBox genz_malik_box(F& f, const std::array<double, 3>& c, const std::array<double, 3>& h,
                     const Eigen::VectorXd& scale, long& evals) {
  constexpr int N = 3;
  const double l2 = std::sqrt(9.0 / 70.0), l4 = std::sqrt(9.0 / 10.0), l5 = std::sqrt(9.0 / 19.0);
  const double w1 = (12824.0 - 9120.0 * N + 400.0 * N * N) / 19683.0, w2 = 980.0 / 6561.0,
               w3 = (1820.0 - 400.0 * N) / 19683.0, w4 = 200.0 / 19683.0, w5 = 6859.0 / 19683.0 / 8.0;
  const double v1 = (729.0 - 950.0 * N + 50.0 * N * N) / 729.0, v2 = 245.0 / 486.0,
               v3 = (265.0 - 100.0 * N) / 1458.0, v4 = 25.0 / 729.0;
  auto at = [&](double a0, double a1, double a2) {
    ++evals;
    return f(std::array<double, 3>{c[0] + a0 * h[0], c[1] + a1 * h[1], c[2] + a2 * h[2]});
  };
  Eigen::VectorXd f1 = at(0, 0, 0);
  Eigen::VectorXd f2 = Eigen::VectorXd::Zero(f1.size()), f3 = f2, f4 = f2, f5 = f2;
  std::array<double, N> diff{};
  for (int i = 0; i < N; ++i) {
    std::array<double, 3> e{0, 0, 0};
    e[i] = l2;
    Eigen::VectorXd a = at(e[0], e[1], e[2]) + at(-e[0], -e[1], -e[2]);
    e[i] = l4;
    Eigen::VectorXd b = at(e[0], e[1], e[2]) + at(-e[0], -e[1], -e[2]);
    f2 += a;
    f3 += b;
    const double ratio = (l2 * l2) / (l4 * l4);
    diff[i] = ((a - 2.0 * f1) - ratio * (b - 2.0 * f1)).cwiseAbs().cwiseProduct(scale).maxCoeff();
  }
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j)
      for (int si : {-1, 1})
        for (int sj : {-1, 1}) {
          std::array<double, 3> e{0, 0, 0};
          e[i] = si * l4;
          e[j] = sj * l4;
          f4 += at(e[0], e[1], e[2]);
        }
  for (int s0 : {-1, 1})
    for (int s1 : {-1, 1})
      for (int s2 : {-1, 1}) f5 += at(s0 * l5, s1 * l5, s2 * l5);
  const double vol = 8.0 * h[0] * h[1] * h[2];
  GMBox b;
  b.c = c;
  b.h = h;
  Eigen::VectorXd i7 = vol * (w1 * f1 + w2 * f2 + w3 * f3 + w4 * f4 + w5 * f5);
  Eigen::VectorXd i5 = vol * (v1 * f1 + v2 * f2 + v3 * f3 + v4 * f4);
  b.val = i7;
  b.err = (i7 - i5).cwiseAbs();
  b.key = b.err.cwiseProduct(scale).maxCoeff();
  int best = 0;
  for (int i = 1; i < N; ++i)
    if (diff[i] > diff[best] * (1 + 1e-12)) best = i;
  if (diff[best] == 0.0) best = static_cast<int>(std::max_element(h.begin(), h.end()) - h.begin());
  b.split = best;
  return b;
}

}  // namespace detail

// Integrates a vector-valued f over the union of the given initial boxes
// (lower/upper corners). `scale` weights the components in the error norm.
template <class F>
CubatureResult genz_malik(F f, const std::vector<std::pair<std::array<double, 3>, std::array<double, 3>>>& boxes,
                          const Eigen::VectorXd& scale, const CubatureOptions& opt = {}) {
  using detail::GMBox;
  auto cmp = [](const GMBox& a, const GMBox& b) { return a.key < b.key; };
  std::priority_queue<GMBox, std::vector<GMBox>, decltype(cmp)> heap(cmp);
  CubatureResult r;
  Eigen::VectorXd total, err;
  for (const auto& bx : boxes) {
    std::array<double, 3> c, h;
    for (int i = 0; i < 3; ++i) {
      c[i] = 0.5 * (bx.first[i] + bx.second[i]);
      h[i] = 0.5 * (bx.second[i] - bx.first[i]);
    }
    auto b = detail::genz_malik_box(f, c, h, scale, r.evals);
    if (total.size() == 0) {
      total = Eigen::VectorXd::Zero(b.val.size());
      err = total;
    }
    total += b.val;
    err += b.err;
    heap.push(std::move(b));
  }
  auto done = [&] {
    const double tol = std::max(opt.abs_tol, opt.rel_tol * total.cwiseAbs().cwiseProduct(scale).maxCoeff());
    return err.cwiseProduct(scale).maxCoeff() <= tol;
  };
  while (!heap.empty() && !done() && r.evals < opt.max_evals) {
    GMBox b = heap.top();
    heap.pop();
    total -= b.val;
    err -= b.err;
    auto h = b.h;
    h[b.split] *= 0.5;
    for (int s : {-1, 1}) {
      auto c = b.c;
      c[b.split] += s * h[b.split];
      auto nb = detail::genz_malik_box(f, c, h, scale, r.evals);
      total += nb.val;
      err += nb.err;
      heap.push(std::move(nb));
    }
  }
  // final sums in a fixed order to shed accumulated rounding
  std::vector<GMBox> all;
  while (!heap.empty()) {
    all.push_back(heap.top());
    heap.pop();
  }
  std::sort(all.begin(), all.end(), [](const GMBox& a, const GMBox& b) { return a.c < b.c || (a.c == b.c && a.h < b.h); });
  r.value = Eigen::VectorXd::Zero(total.size());
  r.error = r.value;
  for (const auto& b : all) {
    r.value += b.val;
    r.error += b.err;
  }
  total = r.value;
  err = r.error;
  r.converged = done();
  return r;
}

// Foot-centred polar coordinates on bD: xi = cos(th) xi0 + sin(th) (a e1 +
// sqrt(1-a^2)(cos(psi) e2 + sin(psi) e3)) with e1 = i xi0; dOmega = sin^2(th) dth da dpsi.
struct FootChart {
  CPoint xi0;
  std::array<CPoint, 3> e;

  FootChart(const CPoint& foot) {
    const double s = std::sqrt(norm2(foot));
    for (auto c : foot) xi0.push_back(c / s);
    auto rdot = [](const CPoint& a, const CPoint& b) {
      cplx t = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) t += a[k] * std::conj(b[k]);
      return t.real();
    };
    std::vector<CPoint> basis{xi0};
    CPoint e1;
    for (auto c : xi0) e1.push_back(kI * c);
    basis.push_back(e1);
    for (std::size_t k = 0; k < 2 * xi0.size() && basis.size() < 4; ++k) {
      CPoint v(xi0.size(), cplx(0.0));
      v[k / 2] = (k % 2) ? kI : cplx(1.0);
      for (const auto& b : basis) {
        const double c = rdot(v, b);
        for (std::size_t j = 0; j < v.size(); ++j) v[j] -= c * b[j];
      }
      const double nv = std::sqrt(norm2(v));
      if (nv < 1e-6) continue;
      for (auto& c : v) c /= nv;
      basis.push_back(v);
    }
    e = {basis[1], basis[2], basis[3]};
  }

  CPoint direction(double th, double a, double psi) const {
    const double ct = std::cos(th), st = std::sin(th), b = std::sqrt(std::max(0.0, 1.0 - a * a));
    CPoint xi;
    for (std::size_t j = 0; j < xi0.size(); ++j)
      xi.push_back(ct * xi0[j] + st * (a * e[0][j] + b * (std::cos(psi) * e[1][j] + std::sin(psi) * e[2][j])));
    return xi;
  }
};

// Adaptive integral over bD of density(zeta, nu) (a vector) graded toward the
// foot point at scale `scale_len`.
template <class F>
CubatureResult integrate_boundary_near(const DomainSpec& d, const CPoint& foot, double scale_len, F density,
                                       const Eigen::VectorXd& scale, const CubatureOptions& opt = {}) {
  require_n2(d);
  FootChart chart(foot);
  auto g = [&](const std::array<double, 3>& x) {
    const auto xi = chart.direction(x[0], x[1], x[2]);
    const double rho = radial_extent(d, xi);
    CPoint p;
    for (auto c : xi) p.push_back(rho * c);
    const double st = std::sin(x[0]);
    const double w = st * st * surface_factor(d, p, xi, rho);
    Eigen::VectorXd v = density(p, unit_normal(d, p));
    return Eigen::VectorXd(v * w);
  };
  std::vector<double> th{0.0};
  for (double t = std::max(scale_len, 1e-8) / 4; t < kPi / 2; t *= 2) th.push_back(t);
  th.push_back(kPi / 2);
  th.push_back(kPi);
  std::vector<std::pair<std::array<double, 3>, std::array<double, 3>>> boxes;
  for (std::size_t i = 0; i + 1 < th.size(); ++i)
    for (int a = 0; a < 2; ++a)
      for (int p = 0; p < 4; ++p)
        boxes.push_back({{th[i], a - 1.0, p * kPi / 2}, {th[i + 1], double(a), (p + 1) * kPi / 2}});
  return genz_malik(g, boxes, scale, opt);
}

// Points closer to bD than this use the foot-graded rule.
inline constexpr double kNearDistance = 0.25;

// Relative tolerance of the graded rule: 1e-4 at level 3, quartered per level.
inline double near_tolerance(int level) {
  check_level(level);
  return std::max(1e-10, 1e-4 * std::ldexp(1.0, -2 * (level - 3)));
}

// All z-monomial masks of a double form in C^n, ascending.
inline std::vector<Mask> z_monomials(int n) {
  std::vector<Mask> masks;
  const Mask zm = z_mask(n);
  for (Mask m = zm;; m = (m - 1) & zm) {
    masks.push_back(m);
    if (m == 0) break;
  }
  std::reverse(masks.begin(), masks.end());
  return masks;
}

inline std::size_t monomial_index(const std::vector<Mask>& masks, Mask m) {
  return std::lower_bound(masks.begin(), masks.end(), m) - masks.begin();
}

// Boundary integral at z in D of a vector density(zeta, nu) of length dim. Far
// from bD this is the product rule of the given level (or `grid`); near bD the
// adaptive rule graded at the normal foot.
template <class F>
Eigen::VectorXd integrate_boundary_vector(const DomainSpec& d, const CPoint& z, int level, int dim, F density,
                                          const QuadratureRule* grid = nullptr) {
  const double delta = boundary_distance(d, z);
  if (delta < 1e-6) throw SingularityError("evaluation point too close to bD");
  if (delta >= kNearDistance) {
    QuadratureRule local;
    if (!grid) local = boundary_rule(d, level);
    const QuadratureRule& q = grid ? *grid : local;
    return pairwise_sum<Eigen::VectorXd>(q.size(), [&](std::size_t i) {
      return Eigen::VectorXd(density(q.nodes[i], q.normals[i]) * q.weights[i]);
    });
  }
  CubatureOptions opt;
  opt.rel_tol = near_tolerance(level);
  return integrate_boundary_near(d, nearest_boundary_point(d, z), delta, density, Eigen::VectorXd::Ones(dim), opt)
      .value;
}

// Boundary integral of a form field at z in D, as a form in the z-differentials.
inline FormValue<cplx> integrate_boundary(const FormField& field, const DomainSpec& d, const CPoint& z, int level,
                                          const QuadratureRule* grid = nullptr) {
  const int n = field.n;
  const auto masks = z_monomials(n);
  const int dim = 2 * static_cast<int>(masks.size());
  auto density = [&](const CPoint& p, const CPoint& nu) {
    auto dens = boundary_density(field.eval(p, z), nu);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    for (const auto& t : dens.terms()) {
      const auto i = monomial_index(masks, t.first);
      v[2 * i] = t.second.real();
      v[2 * i + 1] = t.second.imag();
    }
    return v;
  };
  auto res = integrate_boundary_vector(d, z, level, dim, density, grid);
  FormValue<cplx> out(n);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const cplx c(res[2 * i], res[2 * i + 1]);
    if (c != cplx(0.0)) out.add(masks[i], c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rule cache: versioned binary table.

inline constexpr std::uint32_t kRuleMagic = 0x43464c52;  // "CFLR"
inline constexpr std::uint32_t kRuleVersion = 1;

inline std::filesystem::path cache_dir() {
  if (const char* e = std::getenv("CFLAB_CACHE_DIR"); e && *e) return e;
  if (const char* h = std::getenv("HOME"); h && *h) return std::filesystem::path(h) / ".cache" / "cflab";
  return std::filesystem::temp_directory_path() / "cflab-cache";
}

inline void save_rule(const QuadratureRule& q, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write rule cache " + tmp);
    auto put = [&](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    put(kRuleMagic);
    put(kRuleVersion);
    const std::uint32_t idlen = q.domain.size();
    put(idlen);
    os.write(q.domain.data(), idlen);
    const std::int32_t arena = q.arena == Arena::Boundary ? 0 : 1;
    put(arena);
    const std::int32_t level = q.level;
    put(level);
    put(q.level_set);
    const std::uint64_t count = q.size();
    put(count);
    const std::uint32_t n = count ? q.nodes[0].size() : 0;
    put(n);
    for (std::size_t i = 0; i < count; ++i) {
      for (auto c : q.nodes[i]) put(c);
      put(q.weights[i]);
      if (arena == 0)
        for (auto c : q.normals[i]) put(c);
    }
  }
  std::filesystem::rename(tmp, path);
}

inline bool load_rule(const std::filesystem::path& path, QuadratureRule& q) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  auto get = [&](auto& v) { is.read(reinterpret_cast<char*>(&v), sizeof(v)); return bool(is); };
  std::uint32_t magic = 0, version = 0, idlen = 0, n = 0;
  if (!get(magic) || magic != kRuleMagic || !get(version) || version != kRuleVersion || !get(idlen)) return false;
  q.domain.assign(idlen, '\0');
  is.read(q.domain.data(), idlen);
  std::int32_t arena = 0, level = 0;
  std::uint64_t count = 0;
  if (!get(arena) || !get(level) || !get(q.level_set) || !get(count) || !get(n)) return false;
  q.arena = arena == 0 ? Arena::Boundary : Arena::Volume;
  q.level = level;
  q.nodes.assign(count, CPoint(n, cplx(0.0)));
  q.weights.assign(count, 0.0);
  if (arena == 0) q.normals.assign(count, CPoint(n, cplx(0.0)));
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& c : q.nodes[i]) get(c);
    get(q.weights[i]);
    if (arena == 0)
      for (auto& c : q.normals[i]) get(c);
  }
  return bool(is);
}

inline std::string rule_file_name(const DomainSpec& d, Arena arena, int level, double level_set) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s_%s_L%d_%a.rule", d.id().c_str(), arena == Arena::Boundary ? "bd" : "vol",
                level, level_set);
  std::string s = buf;
  std::replace(s.begin(), s.end(), ':', '-');
  std::replace(s.begin(), s.end(), '=', '-');
  return s;
}

// Boundary or origin-centred volume rule through the on-disk cache.
inline QuadratureRule cached_rule(const DomainSpec& d, Arena arena, int level, double level_set = 0.0,
                                  const std::filesystem::path& dir = cache_dir()) {
  const auto path = dir / rule_file_name(d, arena, level, level_set);
  QuadratureRule q;
  if (load_rule(path, q) && q.domain == d.id() && q.level == level) return q;
  q = arena == Arena::Boundary ? boundary_rule(d, level, level_set) : volume_rule(d, level);
  try {
    save_rule(q, path);
  } catch (const std::exception&) {
    // cache is best effort
  }
  return q;
}

}  // namespace cflab
