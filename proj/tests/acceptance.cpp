// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any criterion fails.

#include <cstdio>
#include <functional>

#include "cflab/experiments.hpp"

using namespace cflab;

namespace {

const DomainSpec kBall = DomainSpec::ball(2);
const DomainSpec kEllipsoid = DomainSpec::ellipsoid(2);
const std::vector<DomainSpec> kDomains{kBall, kEllipsoid};

struct Verdict {
  bool pass = true;
  std::string detail;
  void need(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "!") + what;
  }
};

ExperimentConfig config(const std::string& exp, const DomainSpec& d) {
  ExperimentConfig c;
  c.experiment = exp;
  c.domain = d.id();
  return c;
}

ZetaForm conj_zeta1() {
  return zeta_form(2, 0, [](const auto& p) {
    using T = typename std::decay_t<decltype(p)>::value_type;
    return FormValue<T>::scalar(2, cconj(p[0]));
  });
}

// Criterion 1.
Verdict bmk_reproduction() {
  Verdict v;
  const CPoint z{cplx(0.2, 0.1), cplx(-0.3, 0.2)};
  struct Case {
    std::string name;
    ZetaForm f;
    double gate;
  };
  std::vector<Case> cases{{"q0 one", constant_function(2, 1.0), 1e-3},
                          {"q0 conj_zeta1", conj_zeta1(), 1e-2},
                          {"q1 test form", make_test_form(kBall, 1, Profile::Mixed, 1).form(), 1e-2}};
  for (const auto& c : cases) {
    std::vector<double> r;
    for (int L : {3, 4, 5}) r.push_back(bmk_reproduce(c.f, kBall, z, L).residual);
    v.need(r[0] < c.gate, c.name + " L3 " + fmt(r[0], 3) + " < " + fmt(c.gate, 1));
    // residuals at roundoff cannot halve further
    bool halves = true;
    for (int i = 1; i < 3; ++i) halves = halves && (2.0 * r[i] <= r[i - 1] || r[i] < 1e-9);
    v.need(halves, c.name + " L4 " + fmt(r[1], 3) + " L5 " + fmt(r[2], 3));
  }
  return v;
}

// Criterion 2.
Verdict koppelman_transfer() {
  Verdict v;
  for (const auto& d : kDomains) {
    const double K = operational_K(d, 42);
    auto f = make_test_form(d, 1, Profile::Mixed, 1).form();
    double worst = 0.0, mind = 1.0;
    for (const auto& z : interior_probes()) {
      mind = std::min(mind, boundary_distance(d, z));
      worst = std::max(worst, koppelman_residual(f, d, z, 4, K).residual);
    }
    v.need(mind >= 0.3, d.id() + " probe dist >= " + fmt(mind, 3));
    v.need(worst < 1e-2, d.id() + " residual " + fmt(worst, 3));
    auto W = generating_form(GenKind::WL, {d, K});
    auto B = generating_form(GenKind::B, {d, K});
    double omax = 0.0;
    for (const auto& pr : sample_collar_pairs(d, 1000, 42))
      omax = std::max(omax, transition_kernel<cplx>(W, B, 1, pr.zeta, pr.z).max_abs());
    v.need(omax == 0.0, d.id() + " |Omega_1(W,B)| " + fmt(omax, 3));
  }
  return v;
}

// Criterion 3.
Verdict support_lower_bound() {
  Verdict v;
  for (const auto& d : kDomains) {
    auto r = run_estimate(config("estimate", d));
    const double mn = r.summary["min_ratio"], drift = r.summary["p1_drift"];
    v.need(mn >= 0.05, d.id() + " K=" + fmt(r.summary["K_calibrated"].get<double>(), 3) + " min " + fmt(mn, 3));
    v.need(drift < 0.2, d.id() + " p1 drift " + fmt(drift, 2));
  }
  return v;
}

// Criteria 4 and 5 share the symmetry runs.
std::vector<Report> symmetry_runs() {
  std::vector<Report> out;
  for (const auto& d : kDomains) out.push_back(run_symmetry(config("symmetry", d)));
  return out;
}

Verdict approximate_symmetry(const std::vector<Report>& runs) {
  Verdict v;
  for (const auto& r : runs) {
    if (r.summary.contains("symmetry_exact")) {
      // Phi* = Phi to roundoff: the E_3 bound holds with constant 0 and no slope exists to fit
      const auto& t = r.tables.front();
      double mx = 0.0;
      for (const auto& row : t.rows) mx = std::max(mx, std::get<double>(row[1]));
      v.need(mx < 1e-13, r.domain + " Phi*-Phi identically 0 (max " + fmt(mx, 2) + "), fit not applicable");
    } else {
      const double s = r.summary["symmetry_slope"], r2 = r.summary["symmetry_r2"];
      v.need(s >= 2.9 && r2 >= 0.9, r.domain + " slope " + fmt(s, 3) + " R2 " + fmt(r2, 3));
    }
  }
  return v;
}

Verdict identity_residuals(const std::vector<Report>& runs) {
  Verdict v;
  for (const auto& r : runs)
    for (const char* k : {"normal_identity", "expansion_identity"}) {
      const double p = r.summary[std::string(k) + "_p99"], dr = r.summary[std::string(k) + "_drift"];
      v.need(std::isfinite(p) && dr <= 0.2, r.domain + " " + k + " p99 " + fmt(p, 3) + " drift " + fmt(dr, 2));
    }
  return v;
}

// Criterion 6. The second implementation below is kept separate from the library's.
Rational acceptance_order(const KernelDescriptor& d) {
  Rational base = d.arena == Arena::Volume ? Rational(2 * d.n + d.rzeta + d.rz) : Rational(2 * d.n - 1);
  base += d.j;
  base -= Rational(2 * d.t0);
  const int cheap = std::min(d.t1, d.arena == Arena::Volume ? 2 : 1);
  const int levi = std::min(d.t1 - cheap, d.mu);
  const int rest = d.t1 - cheap - levi;
  return base - Rational(cheap + 2 * levi + 3 * rest);
}

Verdict order_calculator() {
  Verdict v;
  for (int n : {2, 3}) {
    bool w = true, a = true, e = true;
    int rows_a = 0;
    for (int q = 0; q < n; ++q) w = w && order_of({n, n - 1, Rational(0), n, 0, 0, 0, Arena::Boundary, ""}) == Rational(0);
    for (int q = 0; q <= n - 2; ++q)
      for (int mu = 0; mu <= n - q - 2; ++mu)
        for (int k = 0; k <= q; ++k, ++rows_a)
          a = a && order_of({n, mu, Rational(k + 1), 1 + mu + k, n - mu - k - 1, 0, 0, Arena::Boundary, ""}) == Rational(1);
    e = order_of({n, 0, Rational(1), 0, n, 0, 0, Arena::Boundary, ""}) == Rational(0);
    v.need(w, "n=" + std::to_string(n) + " Omega_q(W^L) -> 0");
    v.need(a, "n=" + std::to_string(n) + " " + std::to_string(rows_a) + " A_{q,mu k} -> 1");
    v.need(e, "n=" + std::to_string(n) + " E_1/beta^n -> 0");
  }
  int agree = 0;
  for (const auto& k : random_descriptors(10, 42)) agree += order_of(k) == acceptance_order(k);
  v.need(agree == 10, std::to_string(agree) + "/10 random descriptors agree");
  return v;
}

// Criterion 7.
Verdict growth_exponents() {
  Verdict v;
  double min_normal = 0.0;
  for (const auto& d : kDomains) {
    auto r = run_growth(config("growth", d));
    const Table* fits = nullptr;
    for (const auto& t : r.tables)
      if (t.name == "fits") fits = &t;
    for (const auto& row : fits->rows) {
      const double bound = std::get<double>(row[7]);
      if (std::isnan(bound)) continue;
      const double s = std::get<double>(row[3]), r2 = std::get<double>(row[5]);
      const std::string key = d.id() + " " + std::get<std::string>(row[0]) + " " + std::get<std::string>(row[1]) +
                              " " + std::get<std::string>(row[2]);
      v.need(s >= bound && r2 >= 0.8, key + " slope " + fmt(s, 3) + " (>= " + fmt(bound, 2) + ") R2 " + fmt(r2, 2));
    }
    min_normal = std::min(min_normal, r.summary["min_normal_slope"].get<double>());
  }
  v.need(min_normal <= -0.8, "L_n slope reported, most negative " + fmt(min_normal, 3));
  return v;
}

// Criterion 8.
Verdict normal_components() {
  Verdict v;
  for (const auto& d : kDomains) {
    auto r = run_normal(config("normal", d));
    for (const auto& a : r.assertions) v.need(a.passed, d.id() + " " + a.name + ": " + a.detail);
  }
  return v;
}

// Criterion 9.
std::string fingerprint(const Report& r) {
  std::string s = r.to_json().dump();
  for (const auto& t : r.tables)
    for (const auto& row : t.rows)
      for (const auto& c : row) {
        if (const double* x = std::get_if<double>(&c)) {
          char buf[40];
          std::snprintf(buf, sizeof buf, "%a|", *x);
          s += buf;
        } else {
          s += std::get<std::string>(c) + "|";
        }
      }
  return s;
}

Verdict determinism() {
  Verdict v;
  std::vector<ExperimentConfig> cfgs{config("estimate", kEllipsoid), config("symmetry", kEllipsoid),
                                     config("order_table", kBall)};
  auto rep = config("reproduction", kEllipsoid);
  rep.levels = {1, 2};
  cfgs.push_back(rep);
  auto gr = config("growth", kEllipsoid);
  gr.level = 1;
  gr.k_max = 5;
  gr.feet = {"weak"};
  cfgs.push_back(gr);
  cfgs[2].level = 1;
  for (const auto& c : cfgs) {
    const bool same = fingerprint(run_experiment(c)) == fingerprint(run_experiment(c));
    v.need(same, c.experiment + " bit-identical");
  }
  const double area = boundary_rule(kBall, 3).total(), vol = volume_rule(kBall, 3).total();
  const double pi2 = kPi * kPi;
  v.need(std::abs(area - 2 * pi2) < 1e-3 * 2 * pi2, "area " + fmt(area, 8) + " vs 2pi^2");
  v.need(std::abs(vol - pi2 / 2) < 1e-3 * pi2 / 2, "volume " + fmt(vol, 8) + " vs pi^2/2");
  return v;
}

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IONBF, 0);
  int failed = 0;
  auto report = [&](int id, const std::string& name, const std::function<Verdict()>& fn) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    if (!v.pass) ++failed;
    std::printf("criterion %d %-24s %s  %s\n", id, name.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str());
  };
  report(1, "bmk_reproduction", bmk_reproduction);
  report(2, "koppelman_transfer", koppelman_transfer);
  report(3, "support_lower_bound", support_lower_bound);
  std::vector<Report> sym;
  try {
    sym = symmetry_runs();
  } catch (const std::exception& e) {
    std::printf("symmetry runs failed: %s\n", e.what());
  }
  report(4, "approximate_symmetry", [&] { return sym.size() == 2 ? approximate_symmetry(sym) : Verdict{false, "no runs"}; });
  report(5, "frame_identities_P", [&] { return sym.size() == 2 ? identity_residuals(sym) : Verdict{false, "no runs"}; });
  report(6, "order_calculator", order_calculator);
  report(7, "growth_exponents", growth_exponents);
  report(8, "normal_components", normal_components);
  report(9, "determinism", determinism);
  std::printf("%d of 9 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
