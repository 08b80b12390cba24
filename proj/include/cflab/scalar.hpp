#pragma once
// Complex scalars and forward-mode jets.
//
// A Jet<T, N> carries a value and N partials with respect to real
// parameters. Wirtinger derivatives are recovered from pairs of real
// directions: d/dz = (D_x - i D_y)/2, d/dzbar = (D_x + i D_y)/2.

#include <array>
#include <cmath>
#include <complex>
#include <type_traits>

#include <boost/container/static_vector.hpp>

namespace cflab {

using cplx = std::complex<double>;
inline constexpr int kMaxDim = 4;
inline constexpr double kPi = 3.14159265358979323846;
inline const cplx kI{0.0, 1.0};

template <class T>
using Coords = boost::container::static_vector<T, kMaxDim>;
using CPoint = Coords<cplx>;

template <class T>
using Mat = std::array<std::array<T, kMaxDim>, kMaxDim>;

template <class T, int N>
struct Jet {
  T v{};
  std::array<T, N> d{};

  Jet() = default;
  Jet(double x) : v(T(x)) {}
  Jet(const cplx& x) requires(!std::is_same_v<T, cplx>) : v(T(x)) {}
  Jet(const T& x) : v(x) {}

  friend Jet operator+(const Jet& a, const Jet& b) {
    Jet r;
    r.v = a.v + b.v;
    for (int i = 0; i < N; ++i) r.d[i] = a.d[i] + b.d[i];
    return r;
  }
  friend Jet operator-(const Jet& a, const Jet& b) {
    Jet r;
    r.v = a.v - b.v;
    for (int i = 0; i < N; ++i) r.d[i] = a.d[i] - b.d[i];
    return r;
  }
  friend Jet operator-(const Jet& a) {
    Jet r;
    r.v = -a.v;
    for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
    return r;
  }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    r.v = a.v * b.v;
    for (int i = 0; i < N; ++i) r.d[i] = a.v * b.d[i] + a.d[i] * b.v;
    return r;
  }
  friend Jet operator*(const Jet& a, double s) {
    Jet r;
    r.v = a.v * s;
    for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * s;
    return r;
  }
  friend Jet operator*(double s, const Jet& a) { return a * s; }
  friend Jet operator/(const Jet& a, const Jet& b) {
    Jet r;
    T inv = T(1.0) / b.v;
    r.v = a.v * inv;
    for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
    return r;
  }
  friend Jet operator/(const Jet& a, double s) { return a * (1.0 / s); }

  Jet& operator+=(const Jet& b) { return *this = *this + b; }
  Jet& operator-=(const Jet& b) { return *this = *this - b; }
  Jet& operator*=(const Jet& b) { return *this = *this * b; }
  Jet& operator/=(const Jet& b) { return *this = *this / b; }
};

template <class T>
struct is_jet : std::false_type {};
template <class T, int N>
struct is_jet<Jet<T, N>> : std::true_type {};

// Base complex value of a possibly nested jet.
inline cplx base(const cplx& x) { return x; }
inline cplx base(double x) { return cplx(x); }
template <class T, int N>
cplx base(const Jet<T, N>& x) {
  return base(x.v);
}

inline cplx cconj(const cplx& x) { return std::conj(x); }
inline double cconj(double x) { return x; }
template <class T, int N>
Jet<T, N> cconj(const Jet<T, N>& a) {
  Jet<T, N> r;
  r.v = cconj(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = cconj(a.d[i]);
  return r;
}

// Real part along real parameters (partials of the real part).
inline cplx re(const cplx& x) { return cplx(x.real(), 0.0); }
template <class T, int N>
Jet<T, N> re(const Jet<T, N>& a) {
  Jet<T, N> r;
  r.v = re(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = re(a.d[i]);
  return r;
}

// |x|^2 as a real-valued scalar of the same type.
template <class T>
T abs2(const T& x) {
  return re(x * cconj(x));
}

inline cplx csqrt(const cplx& x) { return std::sqrt(x); }
template <class T, int N>
Jet<T, N> csqrt(const Jet<T, N>& a) {
  Jet<T, N> r;
  r.v = csqrt(a.v);
  T inv = T(0.5) / r.v;
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * inv;
  return r;
}

template <class T>
T ipow(const T& x, int k) {
  T r(1.0);
  for (int i = 0; i < k; ++i) r = r * x;
  return r;
}

// Euclidean norm |v| as real-valued scalar.
template <class T>
T norm_of(const Coords<T>& v) {
  T s(0.0);
  for (const auto& x : v) s = s + abs2(x);
  return csqrt(s);
}

// Lift a point into jets; when offset >= 0, coordinate k is seeded with
// real directions offset+2k (x_k) and offset+2k+1 (y_k).
template <class J>
Coords<J> lift(const CPoint& p, int offset = -1) {
  Coords<J> out;
  for (std::size_t k = 0; k < p.size(); ++k) {
    J x(p[k]);
    if constexpr (is_jet<J>::value) {
      if (offset >= 0) {
        x.d[offset + 2 * k] = decltype(x.v)(1.0);
        x.d[offset + 2 * k + 1] = decltype(x.v)(cplx(0.0, 1.0));
      }
    }
    out.push_back(x);
  }
  return out;
}

// Lift along a single real direction: p(t) = p + t*dir, partial slot `slot`.
template <class J>
Coords<J> lift_direction(const CPoint& p, const CPoint& dir, int slot) {
  Coords<J> out;
  for (std::size_t k = 0; k < p.size(); ++k) {
    J x(p[k]);
    x.d[slot] = decltype(x.v)(dir[k]);
    out.push_back(x);
  }
  return out;
}

// Wirtinger derivatives from real-direction partials seeded by lift().
template <class T>
T d_dz(const T& dx, const T& dy) {
  return (dx - T(cplx(0.0, 1.0)) * dy) * 0.5;
}
template <class T>
T d_dzbar(const T& dx, const T& dy) {
  return (dx + T(cplx(0.0, 1.0)) * dy) * 0.5;
}

template <class T>
Coords<T> sub(const Coords<T>& a, const Coords<T>& b) {
  Coords<T> r;
  for (std::size_t k = 0; k < a.size(); ++k) r.push_back(a[k] - b[k]);
  return r;
}

inline double dist(const CPoint& a, const CPoint& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::norm(a[k] - b[k]);
  return std::sqrt(s);
}

inline double norm2(const CPoint& a) {
  double s = 0.0;
  for (const auto& x : a) s += std::norm(x);
  return s;
}

}  // namespace cflab
