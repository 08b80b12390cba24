#pragma once
// Model domains: the ball |z|^2 < 1 and the ellipsoids
// |z_1|^2 + ... + |z_{n-1}|^2 + |z_n|^{2m} < 1.
//
// Both defining functions are separable, r = sum_j rho_j(z_j) - 1 with
// rho_j(w) = |w|^{2p_j}, so every complex derivative tensor is diagonal.
// Metric convention: ||dzeta_j||^2 = 2, ||d/dzeta_j||^2 = 1/2.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "cflab/scalar.hpp"

namespace cflab {

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DegeneratePointError : std::domain_error {
  using std::domain_error::domain_error;
};
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

enum class DomainKind { Ball, Ellipsoid };

struct DomainSpec {
  DomainKind kind = DomainKind::Ball;
  int n = 2;
  int m = 1;  // exponent of the last coordinate (1 for the ball)
  double epsilon = 0.5;
  double K = 0.0;

  static DomainSpec ball(int n = 2) { return {DomainKind::Ball, n, 1, 0.5, 0.0}; }
  static DomainSpec ellipsoid(int m, int n = 2) {
    if (m < 2) throw InputError("ellipsoid exponent must be >= 2");
    return {DomainKind::Ellipsoid, n, m, 0.5, 0.0};
  }
  // "ball", "ellipsoid:m=2", "ellipsoid:m=3"
  static DomainSpec parse(const std::string& id, int n = 2) {
    if (id == "ball") return ball(n);
    const std::string pre = "ellipsoid:m=";
    if (id.rfind(pre, 0) == 0) {
      int m = 0;
      try {
        m = std::stoi(id.substr(pre.size()));
      } catch (...) {
        throw InputError("bad domain id: " + id);
      }
      if (m != 2 && m != 3) throw InputError("unsupported ellipsoid exponent in: " + id);
      return ellipsoid(m, n);
    }
    throw InputError("unknown domain id: " + id);
  }
  std::string id() const {
    return kind == DomainKind::Ball ? "ball" : "ellipsoid:m=" + std::to_string(m);
  }
  int power(int j) const { return j == n - 1 ? m : 1; }
};

// Per-coordinate derivative data of r. Off-diagonal tensor entries vanish.
template <class T>
struct DefiningValues {
  T r{};
  Coords<T> dr;      // dr/dzeta_j
  Coords<T> pure;    // d2r/dzeta_j^2
  Coords<T> mixed;   // d2r/dzeta_j dzetabar_j
  Coords<T> third;   // d3r/dzeta_j^2 dzetabar_j
};

template <class T>
DefiningValues<T> eval_defining_t(const DomainSpec& d, const Coords<T>& p) {
  if (static_cast<int>(p.size()) != d.n) throw InputError("dimension mismatch");
  DefiningValues<T> out;
  out.r = T(-1.0);
  for (int j = 0; j < d.n; ++j) {
    const int k = d.power(j);
    const T w = p[j];
    const T wb = cconj(w);
    if (k == 1) {
      out.r = out.r + re(w * wb);
      out.dr.push_back(wb);
      out.pure.push_back(T(0.0));
      out.mixed.push_back(T(1.0));
      out.third.push_back(T(0.0));
    } else {
      const T a = re(w * wb);
      const T wk2 = ipow(w, k - 2);
      const T wbk1 = ipow(wb, k - 1);
      out.r = out.r + ipow(a, k);
      out.dr.push_back(double(k) * wk2 * w * wbk1 * wb);
      out.pure.push_back(double(k * (k - 1)) * wk2 * wbk1 * wb);
      out.mixed.push_back(double(k * k) * ipow(a, k - 1));
      out.third.push_back(double(k * k * (k - 1)) * wk2 * wbk1);
    }
  }
  return out;
}

struct DefiningRecord {
  double r;
  CPoint dr;
  Eigen::MatrixXcd pureHessian;
  Eigen::MatrixXcd mixedHessian;
};

inline DefiningRecord eval_defining(const DomainSpec& d, const CPoint& p) {
  auto v = eval_defining_t<cplx>(d, p);
  DefiningRecord rec{v.r.real(), v.dr, Eigen::MatrixXcd::Zero(d.n, d.n),
                     Eigen::MatrixXcd::Zero(d.n, d.n)};
  for (int j = 0; j < d.n; ++j) {
    rec.pureHessian(j, j) = v.pure[j];
    rec.mixedHessian(j, j) = v.mixed[j];
  }
  return rec;
}

inline double eval_r(const DomainSpec& d, const CPoint& p) {
  double s = -1.0;
  for (int j = 0; j < d.n; ++j) s += std::pow(std::norm(p[j]), d.power(j));
  return s;
}

// ||dr||^2 = 2 sum |dr/dzeta_j|^2 in the fixed metric.
template <class T>
T norm_dr(const DefiningValues<T>& v) {
  T s(0.0);
  for (const auto& x : v.dr) s = s + abs2(x);
  return csqrt(2.0 * s);
}

// Euclidean gradient length |grad r| = 2 |(dr/dzeta_j)|.
inline double grad_norm(const DefiningValues<cplx>& v) {
  double s = 0.0;
  for (const auto& x : v.dr) s += std::norm(x);
  return 2.0 * std::sqrt(s);
}

inline double levi_form(const DomainSpec& d, const CPoint& zeta, const CPoint& t) {
  auto v = eval_defining_t<cplx>(d, zeta);
  double s = 0.0;
  for (int j = 0; j < d.n; ++j) s += v.mixed[j].real() * std::norm(t[j]);
  return s;
}

struct Frame {
  CPoint at;
  // omega(j, l): coefficient of dzeta_l in omega_j; L(j, l): coefficient of
  // d/dzeta_l in L_j. The last row is the normal direction.
  Eigen::MatrixXcd omega;
  Eigen::MatrixXcd L;
  double normOfDr = 0.0;
};

inline Frame adapted_frame(const DomainSpec& d, const CPoint& zeta) {
  const int n = d.n;
  auto v = eval_defining_t<cplx>(d, zeta);
  const double nd = norm_dr(v).real();
  if (!(nd > 1e-14)) throw DegeneratePointError("grad r vanishes");
  Eigen::MatrixXcd om(n, n);
  // Hermitian product of (1,0)-form coefficient vectors: <a,b> = 2 sum a conj(b).
  auto ip = [](const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    return 2.0 * (a.array() * b.array().conjugate()).sum();
  };
  Eigen::VectorXcd un(n);
  for (int l = 0; l < n; ++l) un(l) = v.dr[l] / nd;
  std::vector<Eigen::VectorXcd> basis{un};
  int skip = 0;
  for (int l = 1; l < n; ++l)
    if (std::abs(v.dr[l]) > std::abs(v.dr[skip])) skip = l;
  for (int l = 0; l < n; ++l) {
    if (l == skip) continue;
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
    e(l) = 1.0;
    for (const auto& b : basis) e -= ip(e, b) * b;
    e /= std::sqrt(ip(e, e).real());
    basis.push_back(e);
  }
  for (int j = 0; j < n - 1; ++j) om.row(j) = basis[j + 1].transpose();
  om.row(n - 1) = un.transpose();
  Frame f;
  f.at = zeta;
  f.omega = om;
  f.L = 2.0 * om.conjugate();
  f.normOfDr = nd;
  return f;
}

inline CPoint tangential_projection(const DomainSpec& d, const CPoint& zeta, const CPoint& v) {
  auto dv = eval_defining_t<cplx>(d, zeta);
  cplx num = 0.0;
  double den = 0.0;
  for (int j = 0; j < d.n; ++j) {
    num += v[j] * dv.dr[j];
    den += std::norm(dv.dr[j]);
  }
  if (!(den > 1e-28)) throw DegeneratePointError("grad r vanishes");
  CPoint out;
  for (int j = 0; j < d.n; ++j) out.push_back(v[j] - (num / den) * std::conj(dv.dr[j]));
  return out;
}

namespace detail {
// Real gradient and Hessian of r in coordinates (x_1, y_1, ..., x_n, y_n).
inline void real_derivs(const DomainSpec& d, const CPoint& p, Eigen::VectorXd& g,
                        Eigen::MatrixXd& H) {
  auto v = eval_defining_t<cplx>(d, p);
  const int n = d.n;
  g.setZero(2 * n);
  H.setZero(2 * n, 2 * n);
  for (int j = 0; j < n; ++j) {
    g(2 * j) = 2.0 * v.dr[j].real();
    g(2 * j + 1) = -2.0 * v.dr[j].imag();
    const double s = v.pure[j].real(), si = v.pure[j].imag(), h = v.mixed[j].real();
    H(2 * j, 2 * j) = 2.0 * s + 2.0 * h;
    H(2 * j + 1, 2 * j + 1) = -2.0 * s + 2.0 * h;
    H(2 * j, 2 * j + 1) = H(2 * j + 1, 2 * j) = -2.0 * si;
  }
}
}  // namespace detail

// Radial boundary point rho(xi)*xi for a unit vector xi.
inline double radial_extent(const DomainSpec& d, const CPoint& xi, double level = 0.0) {
  if (d.kind == DomainKind::Ball) return std::sqrt(1.0 + level);
  double a = 0.0;
  for (int j = 0; j < d.n - 1; ++j) a += std::norm(xi[j]);
  const double b = std::pow(std::norm(xi[d.n - 1]), d.m);
  const int m = d.m;
  double rho = 1.0;
  // f(rho) = a rho^2 + b rho^{2m} - 1 - level, convex increasing
  if (a + b - 1.0 - level > 0) rho = std::pow((1.0 + level) / (a + b), 0.5 / m);
  for (int it = 0; it < 100; ++it) {
    const double f = a * rho * rho + b * std::pow(rho, 2 * m) - 1.0 - level;
    const double fp = 2.0 * a * rho + 2.0 * m * b * std::pow(rho, 2 * m - 1);
    const double step = f / fp;
    rho -= step;
    if (std::abs(step) < 1e-15 * rho) break;
  }
  return rho;
}

// Nearest boundary point by Newton on the Lagrange system.
inline CPoint nearest_boundary_point(const DomainSpec& d, const CPoint& z) {
  const int n = d.n;
  const double rz = eval_r(d, z);
  if (rz > 1e-12) throw DomainError("point outside closed domain");
  CPoint x;
  double nz = std::sqrt(norm2(z));
  if (nz < 1e-14) {
    x = CPoint(n, cplx(0.0));
    x[0] = 1.0;
  } else {
    CPoint xi;
    for (auto c : z) xi.push_back(c / nz);
    const double rho = radial_extent(d, xi);
    for (auto c : xi) x.push_back(rho * c);
  }
  Eigen::VectorXd X(2 * n), Z(2 * n);
  for (int j = 0; j < n; ++j) {
    X(2 * j) = x[j].real();
    X(2 * j + 1) = x[j].imag();
    Z(2 * j) = z[j].real();
    Z(2 * j + 1) = z[j].imag();
  }
  auto toC = [n](const Eigen::VectorXd& v) {
    CPoint p;
    for (int j = 0; j < n; ++j) p.emplace_back(v(2 * j), v(2 * j + 1));
    return p;
  };
  Eigen::VectorXd g;
  Eigen::MatrixXd H;
  detail::real_derivs(d, toC(X), g, H);
  double lam = -(X - Z).dot(g) / g.squaredNorm();
  for (int it = 0; it < 60; ++it) {
    CPoint xc = toC(X);
    detail::real_derivs(d, xc, g, H);
    Eigen::VectorXd F(2 * n + 1);
    F.head(2 * n) = X - Z + lam * g;
    F(2 * n) = eval_r(d, xc);
    if (F.norm() < 1e-15) break;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n + 1, 2 * n + 1);
    J.topLeftCorner(2 * n, 2 * n) = Eigen::MatrixXd::Identity(2 * n, 2 * n) + lam * H;
    J.block(0, 2 * n, 2 * n, 1) = g;
    J.block(2 * n, 0, 1, 2 * n) = g.transpose();
    Eigen::VectorXd step = J.colPivHouseholderQr().solve(F);
    X -= step.head(2 * n);
    lam -= step(2 * n);
    if (step.norm() < 1e-15) break;
  }
  CPoint out = toC(X);
  if (!(std::abs(eval_r(d, out)) < 1e-9) || !std::isfinite(X.norm())) {
    // first-order fallback
    auto v = eval_defining_t<cplx>(d, z);
    const double gn = grad_norm(v);
    out = z;
    for (int j = 0; j < n; ++j) out[j] += (-rz / (gn * gn)) * 2.0 * std::conj(v.dr[j]);
  }
  return out;
}

inline double boundary_distance(const DomainSpec& d, const CPoint& z) {
  const double rz = eval_r(d, z);
  if (rz > 1e-12) throw DomainError("point outside closed domain");
  if (d.kind == DomainKind::Ball) return 1.0 - std::sqrt(norm2(z));
  return dist(z, nearest_boundary_point(d, z));
}

// Outward unit normal at a boundary point as a complex vector.
inline CPoint unit_normal(const DomainSpec& d, const CPoint& p) {
  auto v = eval_defining_t<cplx>(d, p);
  double s = 0.0;
  for (auto& x : v.dr) s += std::norm(x);
  s = std::sqrt(s);
  CPoint out;
  for (auto& x : v.dr) out.push_back(std::conj(x) / s);
  return out;
}

}  // namespace cflab
