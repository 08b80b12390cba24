#pragma once
// Double differential forms at a point pair (zeta, z).
//
// Generators are indexed family*n + j with families, in canonical order,
// dzeta, dzetabar, dzbar, dz. A monomial is a bitmask; products are stored
// in increasing generator order, so zeta-differentials always precede
// z-differentials.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>

#include <boost/container/small_vector.hpp>

#include "cflab/geometry.hpp"
#include "cflab/scalar.hpp"

namespace cflab {

struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};
struct SingularityError : std::domain_error {
  using std::domain_error::domain_error;
};

enum Family : int { kZeta = 0, kZetaBar = 1, kZBar = 2, kZ = 3 };

using Mask = std::uint32_t;

inline Mask gen(int n, int family, int j) { return Mask(1) << (family * n + j); }
inline Mask family_mask(int n, int family) { return ((Mask(1) << n) - 1) << (family * n); }
inline Mask zeta_mask(int n) { return family_mask(n, kZeta) | family_mask(n, kZetaBar); }
inline Mask z_mask(int n) { return family_mask(n, kZBar) | family_mask(n, kZ); }

// Sign of e_a ^ e_b relative to e_{a|b}; zero if a and b overlap.
inline int wedge_sign(Mask a, Mask b) {
  if (a & b) return 0;
  int inv = 0;
  Mask bb = b;
  while (bb) {
    const int j = std::countr_zero(bb);
    bb &= bb - 1;
    inv += std::popcount(a >> (j + 1));
  }
  return (inv & 1) ? -1 : 1;
}

// Sign of the permutation sorting a sequence of distinct generator indices.
template <class Seq>
int sort_sign(const Seq& s) {
  int inv = 0;
  const std::size_t len = std::size(s);
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t k = i + 1; k < len; ++k)
      if (s[i] > s[k]) ++inv;
  return (inv & 1) ? -1 : 1;
}

struct Grade {
  int p = 0, q = 0, pz = 0, qz = 0;  // (p,q) in zeta; (pz,qz) counts dz and dzbar
  bool operator==(const Grade&) const = default;
};

inline Grade grade_of(int n, Mask m) {
  return {std::popcount(m & family_mask(n, kZeta)), std::popcount(m & family_mask(n, kZetaBar)),
          std::popcount(m & family_mask(n, kZ)), std::popcount(m & family_mask(n, kZBar))};
}

template <class T>
class FormValue {
 public:
  using Term = std::pair<Mask, T>;
  using Terms = boost::container::small_vector<Term, 8>;

  FormValue() = default;
  explicit FormValue(int n) : n_(n) {}

  static FormValue scalar(int n, const T& c) {
    FormValue f(n);
    f.terms_.push_back({0, c});
    return f;
  }
  static FormValue generator(int n, int family, int j, const T& c = T(1.0)) {
    FormValue f(n);
    f.terms_.push_back({gen(n, family, j), c});
    return f;
  }

  int n() const { return n_; }
  const Terms& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  // Adds c * e_mask, where mask is already canonical.
  void add(Mask m, const T& c) {
    auto it = std::lower_bound(terms_.begin(), terms_.end(), m,
                               [](const Term& t, Mask k) { return t.first < k; });
    if (it != terms_.end() && it->first == m)
      it->second = it->second + c;
    else
      terms_.insert(it, {m, c});
  }
  // Adds c * g_1 ^ ... ^ g_k for generator indices in the given order.
  template <class Seq>
  void add_ordered(const Seq& idx, const T& c) {
    Mask m = 0;
    for (int i : idx) {
      if (m & (Mask(1) << i)) return;
      m |= Mask(1) << i;
    }
    const int s = sort_sign(idx);
    add(m, s > 0 ? c : -c);
  }

  T coefficient(Mask m) const {
    for (const auto& t : terms_)
      if (t.first == m) return t.second;
    return T(0.0);
  }

  FormValue operator+(const FormValue& o) const {
    FormValue r = *this;
    if (r.n_ == 0) r.n_ = o.n_;
    for (const auto& t : o.terms_) r.add(t.first, t.second);
    return r;
  }
  FormValue operator-(const FormValue& o) const { return *this + o * T(-1.0); }
  FormValue operator*(const T& s) const {
    FormValue r = *this;
    for (auto& t : r.terms_) t.second = t.second * s;
    return r;
  }
  FormValue& operator+=(const FormValue& o) { return *this = *this + o; }

  // Restrict to terms whose mask satisfies pred.
  template <class Pred>
  FormValue filter(Pred pred) const {
    FormValue r(n_);
    for (const auto& t : terms_)
      if (pred(t.first)) r.terms_.push_back(t);
    return r;
  }

  template <class U, class F>
  FormValue<U> map(F f) const {
    FormValue<U> r(n_);
    for (const auto& t : terms_) r.add(t.first, f(t.second));
    return r;
  }

  // Homogeneous grade; throws on mixed input.
  Grade grade() const {
    if (terms_.empty()) return {};
    Grade g = grade_of(n_, terms_.front().first);
    for (const auto& t : terms_)
      if (!(grade_of(n_, t.first) == g)) throw UsageError("mixed-grade form");
    return g;
  }
  bool is_homogeneous() const {
    if (terms_.empty()) return true;
    Grade g = grade_of(n_, terms_.front().first);
    for (const auto& t : terms_)
      if (!(grade_of(n_, t.first) == g)) return false;
    return true;
  }

  double max_abs() const {
    double s = 0.0;
    for (const auto& t : terms_) s = std::max(s, std::abs(base(t.second)));
    return s;
  }

 private:
  int n_ = 0;
  Terms terms_;
};

template <class T>
FormValue<T> wedge(const FormValue<T>& a, const FormValue<T>& b) {
  if (a.n() != b.n() && a.n() != 0 && b.n() != 0) throw InputError("dimension mismatch");
  FormValue<T> r(std::max(a.n(), b.n()));
  for (const auto& ta : a.terms())
    for (const auto& tb : b.terms()) {
      const int s = wedge_sign(ta.first, tb.first);
      if (s == 0) continue;
      T c = ta.second * tb.second;
      r.add(ta.first | tb.first, s > 0 ? c : -c);
    }
  return r;
}

template <class T>
FormValue<T> power(const FormValue<T>& a, int k) {
  if (k < 0) throw UsageError("negative power");
  if (k >= 2)
    for (const auto& t : a.terms())
      if (std::popcount(t.first) % 2) throw UsageError("power of odd-degree form");
  FormValue<T> r = FormValue<T>::scalar(a.n(), T(1.0));
  for (int i = 0; i < k; ++i) r = wedge(r, a);
  return r;
}

// Complex conjugation: every generator goes to its conjugate family.
inline int conj_family(int f) {
  switch (f) {
    case kZeta: return kZetaBar;
    case kZetaBar: return kZeta;
    case kZBar: return kZ;
    default: return kZBar;
  }
}

template <class T>
FormValue<T> conjugate(const FormValue<T>& a) {
  const int n = a.n();
  FormValue<T> r(n);
  for (const auto& t : a.terms()) {
    boost::container::small_vector<int, 16> idx;
    Mask m = t.first;
    while (m) {
      const int g = std::countr_zero(m);
      m &= m - 1;
      idx.push_back(conj_family(g / n) * n + g % n);
    }
    r.add_ordered(idx, cconj(t.second));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Volume form and Hodge star in zeta.

// dV = (i/2)^n prod_j dzeta_j ^ dzetabar_j = dv_top * e_top (canonical order).
inline cplx volume_coefficient(int n) {
  boost::container::small_vector<int, 16> idx;
  for (int j = 0; j < n; ++j) {
    idx.push_back(kZeta * n + j);
    idx.push_back(kZetaBar * n + j);
  }
  return std::pow(cplx(0.0, 0.5), n) * double(sort_sign(idx));
}

template <class T>
FormValue<T> volume_form(int n) {
  FormValue<T> r(n);
  r.add(zeta_mask(n), T(volume_coefficient(n)));
  return r;
}

// Complex-linear star in zeta with alpha ^ *conj(beta) = <alpha,beta> dV,
// z-differentials carried along on the right.
template <class T>
FormValue<T> hodge_star(const FormValue<T>& a) {
  const int n = a.n();
  const Mask zm = zeta_mask(n);
  for (const auto& t : a.terms())
    if (std::popcount(t.first & zm) != std::popcount(a.terms().front().first & zm))
      throw UsageError("mixed-degree form");
  const cplx vtop = volume_coefficient(n);
  FormValue<T> r(n);
  for (const auto& t : a.terms()) {
    const Mask mz = t.first & zm, mrest = t.first & ~zm;
    // conj(e_M) = sigma e_{Mbar}
    FormValue<double> e(n);
    e.add(mz, 1.0);
    auto ce = conjugate(e);
    const Mask mbar = ce.terms().front().first;
    const double sigma = ce.terms().front().second;
    const Mask comp = zm & ~mbar;
    const int s = wedge_sign(mbar, comp);
    const cplx c = sigma * std::pow(2.0, std::popcount(mz)) * vtop / double(s);
    const int s2 = wedge_sign(comp, mrest);
    r.add(comp | mrest, t.second * T(c * double(s2)));
  }
  return r;
}

// Pointwise Hermitian product of zeta-forms: monomials orthogonal, |e_M|^2 = 2^deg.
template <class T>
cplx inner(const FormValue<T>& a, const FormValue<T>& b) {
  cplx s = 0.0;
  for (const auto& ta : a.terms())
    for (const auto& tb : b.terms())
      if (ta.first == tb.first)
        s += base(ta.second) * std::conj(base(tb.second)) * std::pow(2.0, std::popcount(ta.first));
  return s;
}

// Interior product with a real tangent vector v of C^n (complex components).
template <class T>
FormValue<T> interior(const FormValue<T>& a, const CPoint& v) {
  const int n = a.n();
  FormValue<T> r(n);
  for (const auto& t : a.terms()) {
    int pos = 0;
    Mask m = t.first;
    while (m) {
      const int g = std::countr_zero(m);
      m &= m - 1;
      const int fam = g / n, j = g % n;
      cplx val = 0.0;
      if (fam == kZeta)
        val = v[j];
      else if (fam == kZetaBar)
        val = std::conj(v[j]);
      else
        break;  // z-generators are annihilated and come last
      const double s = (pos % 2) ? -1.0 : 1.0;
      r.add(t.first & ~(Mask(1) << g), t.second * T(val * s));
      ++pos;
    }
  }
  return r;
}

// Tangential part of a form at a boundary point: a - nu^flat ^ i_nu a.
template <class T>
FormValue<T> pullback_to_boundary(const FormValue<T>& a, const DomainSpec& d, const CPoint& zeta) {
  if (!(std::abs(eval_r(d, zeta)) < 1e-10)) throw UsageError("point not on boundary");
  const int n = d.n;
  CPoint nu = unit_normal(d, zeta);
  // nu^flat = sum conj(nu_j)/2 dzeta_j + nu_j/2 dzetabar_j
  FormValue<T> nf(n);
  for (int j = 0; j < n; ++j) {
    nf.add(gen(n, kZeta, j), T(std::conj(nu[j]) * 0.5));
    nf.add(gen(n, kZetaBar, j), T(nu[j] * 0.5));
  }
  auto out = a - wedge(nf, interior(a, nu));
  return out.filter([&](Mask) { return true; });
}

// ---------------------------------------------------------------------------
// Form fields and differential operators.

using JetS = Jet<cplx, 2 * kMaxDim>;

struct FormField {
  int n = 2;
  Grade grade{};
  std::function<FormValue<cplx>(const CPoint&, const CPoint&)> eval;
  // Optional: evaluation with jets in both slots (analytic derivatives).
  std::function<FormValue<JetS>(const Coords<JetS>&, const Coords<JetS>&)> eval_jet;

  FormValue<cplx> operator()(const CPoint& zeta, const CPoint& z) const { return eval(zeta, z); }
};

enum class Slot { Zeta, Z };

namespace detail {
inline FormValue<cplx> strip(const FormValue<JetS>& f) {
  return f.map<cplx>([](const JetS& x) { return x.v; });
}
}  // namespace detail

// Partials d/dw_k and d/dwbar_k of all coefficients of a field in one slot.
inline void slot_partials(const FormField& f, Slot slot, const CPoint& zeta, const CPoint& z,
                          std::vector<FormValue<cplx>>& dhol, std::vector<FormValue<cplx>>& dbar) {
  const int n = f.n;
  dhol.assign(n, FormValue<cplx>(n));
  dbar.assign(n, FormValue<cplx>(n));
  if (f.eval_jet) {
    auto zj = lift<JetS>(zeta, slot == Slot::Zeta ? 0 : -1);
    auto wj = lift<JetS>(z, slot == Slot::Z ? 0 : -1);
    auto val = f.eval_jet(zj, wj);
    for (int k = 0; k < n; ++k) {
      dhol[k] = val.map<cplx>([k](const JetS& x) { return d_dz(x.d[2 * k], x.d[2 * k + 1]); });
      dbar[k] = val.map<cplx>([k](const JetS& x) { return d_dzbar(x.d[2 * k], x.d[2 * k + 1]); });
    }
    return;
  }
  const double h = 1e-5 * std::max(1.0, dist(zeta, z));
  for (int k = 0; k < n; ++k) {
    FormValue<cplx> dx(n), dy(n);
    for (int part = 0; part < 2; ++part) {
      const cplx step = part == 0 ? cplx(h, 0) : cplx(0, h);
      CPoint a = slot == Slot::Zeta ? zeta : z, b = a;
      a[k] += step;
      b[k] -= step;
      auto fp = slot == Slot::Zeta ? f.eval(a, z) : f.eval(zeta, a);
      auto fm = slot == Slot::Zeta ? f.eval(b, z) : f.eval(zeta, b);
      auto diff = (fp - fm) * cplx(1.0 / (2.0 * h));
      (part == 0 ? dx : dy) = diff;
    }
    dhol[k] = (dx - dy * kI) * cplx(0.5);
    dbar[k] = (dx + dy * kI) * cplx(0.5);
  }
}

inline FormValue<cplx> dbar(const FormField& f, Slot slot, const CPoint& zeta, const CPoint& z) {
  if (dist(zeta, z) < 1e-14 && !f.eval_jet) throw SingularityError("evaluation on the diagonal");
  std::vector<FormValue<cplx>> dh, db;
  slot_partials(f, slot, zeta, z, dh, db);
  const int n = f.n;
  FormValue<cplx> r(n);
  // dbar_zeta multiplies on the left, dbar_z on the right: dbar_z a = sum da/dzbar_k ^ dzbar_k
  for (int k = 0; k < n; ++k) {
    if (slot == Slot::Zeta)
      r += wedge(FormValue<cplx>::generator(n, kZetaBar, k), db[k]);
    else
      r += wedge(db[k], FormValue<cplx>::generator(n, kZBar, k));
  }
  return r;
}

// Holomorphic exterior derivative in zeta.
inline FormValue<cplx> del_zeta(const FormField& f, const CPoint& zeta, const CPoint& z) {
  std::vector<FormValue<cplx>> dh, db;
  slot_partials(f, Slot::Zeta, zeta, z, dh, db);
  FormValue<cplx> r(f.n);
  for (int k = 0; k < f.n; ++k) r += wedge(FormValue<cplx>::generator(f.n, kZeta, k), dh[k]);
  return r;
}

// Formal adjoint of dbar: -* d_zeta *.
inline FormValue<cplx> vartheta(const FormField& f, const CPoint& zeta, const CPoint& z = {}) {
  if (f.grade.q < 1) throw UsageError("vartheta needs q >= 1");
  FormField starred;
  starred.n = f.n;
  starred.eval = [f](const CPoint& a, const CPoint& b) { return hodge_star(f.eval(a, b)); };
  if (f.eval_jet)
    starred.eval_jet = [f](const Coords<JetS>& a, const Coords<JetS>& b) {
      return hodge_star(f.eval_jet(a, b));
    };
  CPoint zz = z.empty() ? CPoint(f.n, cplx(0.0)) : z;
  return hodge_star(del_zeta(starred, zeta, zz)) * cplx(-1.0);
}

inline int transpose_family(int f) {
  // swap slots (dzeta<->dz, dzetabar<->dzbar), then conjugate
  switch (f) {
    case kZeta: return kZBar;
    case kZetaBar: return kZ;
    case kZBar: return kZeta;
    default: return kZetaBar;
  }
}

template <class T>
FormValue<T> transpose_value(const FormValue<T>& a) {
  const int n = a.n();
  FormValue<T> r(n);
  for (const auto& t : a.terms()) {
    boost::container::small_vector<int, 16> idx;
    Mask m = t.first;
    while (m) {
      const int g = std::countr_zero(m);
      m &= m - 1;
      idx.push_back(transpose_family(g / n) * n + g % n);
    }
    r.add_ordered(idx, cconj(t.second));
  }
  return r;
}

// K*(zeta, z) = conj(K(z, zeta)).
inline FormField hermitian_transpose(const FormField& f) {
  FormField r;
  r.n = f.n;
  r.grade = {f.grade.qz, f.grade.pz, f.grade.q, f.grade.p};
  r.eval = [f](const CPoint& zeta, const CPoint& z) { return transpose_value(f.eval(z, zeta)); };
  return r;
}

}  // namespace cflab
