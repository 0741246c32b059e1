// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion-number ...]

#include "mthin/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#ifndef ACCEPTANCE_CONFIG
#error "ACCEPTANCE_CONFIG must point at the acceptance JSON config"
#endif

using namespace mthin;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

Point p2(double a, double b) {
  Point p(2);
  p << a, b;
  return p;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// 1 -------------------------------------------------------------------------

Outcome whitney_case(const DomainDescriptor& D, const std::string& label) {
  const int d = D.dim();
  const double side_min = std::ldexp(1.0, -10);
  const Box window{Point::Zero(d), Point::Ones(d)};
  const WhitneyDecomposition dec = whitney_decompose(D, window, side_min);

  std::size_t bad = 0;
  for (const auto& c : dec.cubes) {
    // numeric boundary distance of the closed cube, tolerance 1e-8
    const double dist = box_boundary_distance(D, c.box()).value_or(-1.0);
    if (dist < c.diam - 1e-8 || dist > 4.0 * c.diam + 1e-8) ++bad;
  }

  // coverage: uniform points of window cap D at height >= 5 sqrt(d) side_min
  std::vector<Box> boxes;
  boxes.reserve(dec.cubes.size());
  for (const auto& c : dec.cubes) boxes.push_back(c.box());
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double margin = 5.0 * std::sqrt(static_cast<double>(d)) * side_min;
  int misses = 0, tested = 0;
  while (tested < 10000) {
    Point x(d);
    for (int i = 0; i < d; ++i) x(i) = unif(rng);
    if (delta_D(D, x) < margin) continue;
    ++tested;
    const bool hit = std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) { return b.contains(x); });
    if (!hit) ++misses;
  }
  return {bad == 0 && misses == 0,
          label + ": " + std::to_string(dec.cubes.size()) + " cubes, " + std::to_string(bad) +
              " predicate violations, " + std::to_string(misses) + "/10000 coverage misses"};
}

Outcome criterion1() {
  const auto a = whitney_case(DomainDescriptor::half_space(2), "half-space");
  const auto b = whitney_case(DomainDescriptor::graph(GraphFunction(SinusoidGraph{0.3}), 2), "0.3 sin graph");
  return {a.pass && b.pass, a.detail + "; " + b.detail};
}

// 2 -------------------------------------------------------------------------

Outcome criterion2() {
  bool pass = true;
  std::string detail;
  for (double alpha : {0.8, 1.0, 1.5}) {
    const auto P = ScalingProfile::isotropic_stable(alpha, 2);
    std::vector<double> lr, lc;
    double worst_ratio = 0.0;
    bool bracket_ok = true;
    for (int k = -4; k <= 0; ++k) {
      const double r = std::ldexp(1.0, k);
      const EnergyResult e = ball_capacity(P, r, 600, 1);
      lr.push_back(std::log(r));
      lc.push_back(std::log(e.capacity));
      const double ratio = e.capacity_upper / e.capacity_lower;
      worst_ratio = std::max(worst_ratio, ratio);
      if (!(e.capacity_lower <= e.capacity && e.capacity <= e.capacity_upper) || ratio > 2.0) bracket_ok = false;
    }
    const double slope = fit_slope(lr, lc);
    const bool ok = bracket_ok && std::abs(slope - (2.0 - alpha)) <= 0.05;
    pass = pass && ok;
    detail += "alpha=" + fmt(alpha, 2) + " slope " + fmt(slope) + " (target " + fmt(2.0 - alpha, 2) +
              "), bracket ratio <= " + fmt(worst_ratio) + "; ";
  }
  return {pass, detail};
}

// 3 -------------------------------------------------------------------------

Outcome criterion3() {
  const auto P = ScalingProfile::isotropic_stable(1.0, 2);
  const auto H = DomainDescriptor::half_space(2);
  const auto ref = reference_point_infinity(P, H);
  bool pass = true;
  std::string detail;
  for (double delta : {0.25, 0.5, 1.0, 0.0, -0.5}) {
    const Verdict expected = delta > 0 ? Verdict::Convergent : Verdict::Divergent;
    const auto g = graph_test(GraphFunction(PowerGraph{1.0, 1.0 - delta}), Mode::Infinity, 2);
    const auto E = SetDescriptor::power_cusp(H, 1.0, 1.0 - delta);
    const auto it = integral_test_infinity(P, H, ref, E);
    bool ok = g.verdict == expected && it.verdict == expected;
    std::string q;
    if (delta == 0.25 || delta == 0.5) {
      ok = ok && std::abs(it.tail_fit.ratio - std::exp2(-delta)) <= 0.03;
      q = " q=" + fmt(it.tail_fit.ratio) + " vs " + fmt(std::exp2(-delta));
    }
    pass = pass && ok;
    detail += "delta=" + fmt(delta, 2) + " graph " + to_string(g.verdict) + " integral " + to_string(it.verdict) + q + "; ";
  }
  return {pass, detail};
}

// 4 -------------------------------------------------------------------------

Outcome criterion4() {
  const auto P = ScalingProfile::isotropic_stable(1.0, 2);
  const auto H = DomainDescriptor::half_space(2);
  const Point z = Point::Zero(2);
  const auto ref = reference_point_finite(P, H, z);
  CriterionOptions opt;
  opt.n_min = 3;
  opt.n_max = 10;
  bool pass = true;
  std::string detail;
  for (double p : {2.0, 1.0}) {
    const Verdict expected = p > 1.0 ? Verdict::Convergent : Verdict::Divergent;
    const auto E = SetDescriptor::power_cusp(H, 1.0, p);
    const auto a = integral_test_finite(P, H, ref, E, z, opt);
    const auto b = wiener_series_finite(P, H, ref, E, z, opt);
    const auto c = aikawa_sum_c11(P, H, E, z, opt);
    const bool ok = a.verdict == expected && b.verdict == expected && c.verdict == expected;
    pass = pass && ok;
    detail += "|x|^" + fmt(p, 2) + ": integral " + to_string(a.verdict) + ", wiener " + to_string(b.verdict) +
              ", aikawa_c11 " + to_string(c.verdict) + "; ";
  }
  return {pass, detail};
}

// 5 -------------------------------------------------------------------------

Outcome criterion5() {
  const auto H = DomainDescriptor::half_space(2);
  bool pass = true;
  std::string detail;
  for (double alpha : {0.8, 1.5}) {
    const auto P = ScalingProfile::isotropic_stable(alpha, 2);
    std::vector<double> lt, lm;
    for (int k = -8; k <= 8; ++k) {
      const double t = std::ldexp(1.0, k);
      Point x(2);
      x << 0.0, t;
      lt.push_back(std::log(t));
      lm.push_back(std::log(martin_infinity(P, H, x).value));
    }
    const double slope = fit_slope(lt, lm);
    const bool ok = std::abs(slope - alpha / 2) <= 0.02;
    pass = pass && ok;
    detail += "alpha=" + fmt(alpha, 2) + " slope " + fmt(slope, 6) + "; ";
  }
  return {pass, detail};
}

// 6 -------------------------------------------------------------------------

Outcome criterion6() {
  const auto P = ScalingProfile::isotropic_stable(1.0, 2);
  const auto H = DomainDescriptor::half_space(2);
  const Box window{Point::Zero(2), Point::Ones(2)};
  const auto dec = whitney_decompose(H, window, std::ldexp(1.0, -10));
  std::vector<WhitneyCube> band;
  std::vector<Box> boxes;
  for (const auto& c : dec.cubes) {
    if (c.exponent == -5 && band.size() < 20) {
      band.push_back(c);
      boxes.push_back(c.box());
    }
  }
  if (band.size() < 20) return {false, "window holds fewer than 20 cubes of side 2^-5"};
  Point z(2);
  z << 0.3, 0.0;
  const auto ref = reference_point_finite(P, H, z);
  const UFunction u = reference_function(P, H, ref);
  const Region E = Region::box_union(boxes);
  const auto r = quasi_additivity_diagnostic(P, H, u, E, band, 200, 1);
  const bool pass = r.ratio >= 0.2 && r.ratio <= 1.05 && r.subadditive;
  return {pass, "ratio " + fmt(r.ratio) + " over " + std::to_string(r.pieces) + " cubes (gamma(E) " + fmt(r.gamma_union) +
                    ", sum " + fmt(r.gamma_sum) + ")"};
}

// 7 -------------------------------------------------------------------------

Outcome criterion7() {
  const auto P = ScalingProfile::isotropic_stable(1.0, 2);
  const auto H = DomainDescriptor::half_space(2);
  const double R = H.r_loc();
  const double radius = std::ldexp(1.0, -7) * H.kappa() * H.kappa() * R;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double lo = INFINITY, hi = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Point z = p2(2.0 * unif(rng) - 1.0, 0.0);
    const auto ref = reference_point_finite(P, H, z);
    // uniform in the upper half of B(c, radius)
    auto draw = [&](const Point& c) {
      for (;;) {
        Point p(2);
        p << c(0) + radius * (2.0 * unif(rng) - 1.0), radius * unif(rng);
        if ((p - c).norm() < radius && p(1) > 0.0) return p;
      }
    };
    const Point x = draw(z);
    // y shares the window centred at the projection of x
    const Point y = draw(p2(x(0), 0.0));
    const Point A = find_witness(H, ref, x, y);
    const double ratio = green_kappa_fat(P, H, ref, x, y, A).value / green_halfspace(P, x, y).value;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  const double width = hi / lo;
  return {width <= 100.0, "ratio band [" + fmt(lo) + ", " + fmt(hi) + "], width " + fmt(width)};
}

// 8 -------------------------------------------------------------------------

std::map<std::string, std::string> run_config_into(const cli::RunConfig& cfg, const std::filesystem::path& dir) {
  cli::RunOptions opt;
  opt.output_dir = dir.string();
  const auto outcomes = cli::run_jobs(cfg, opt);
  std::map<std::string, std::string> files;
  for (const auto& oc : outcomes) {
    if (oc.exit_code != 0) throw std::runtime_error("job " + oc.name + " failed: " + oc.message);
    for (const auto& f : oc.files) {
      std::ifstream in(f, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      const std::string name = std::filesystem::path(f).filename().string();
      files[name] = name.size() > 5 && name.substr(name.size() - 5) == ".json" ? cli::strip_timestamp(ss.str()) : ss.str();
    }
  }
  return files;
}

Outcome criterion8() {
  const cli::RunConfig cfg = cli::load_config(ACCEPTANCE_CONFIG);
  const auto base = std::filesystem::temp_directory_path() / ("mthin_acceptance_" + std::to_string(::getpid()));
  std::filesystem::remove_all(base);
  const auto first = run_config_into(cfg, base / "a");
  const auto second = run_config_into(cfg, base / "b");
  std::filesystem::remove_all(base);
  std::size_t differing = 0;
  for (const auto& [name, content] : first) {
    auto it = second.find(name);
    if (it == second.end() || it->second != content) ++differing;
  }
  const bool pass = !first.empty() && first.size() == second.size() && differing == 0;
  return {pass, std::to_string(first.size()) + " files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"whitney validity", criterion1},      {"ball capacity scaling", criterion2},
      {"cusp at infinity", criterion3},      {"finite-point criteria", criterion4},
      {"martin kernel scaling", criterion5}, {"quasi-additivity", criterion6},
      {"envelope cross-check", criterion7},  {"determinism", criterion8},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out.pass) ++failures;
    std::cout << (out.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << " [" << fmt(secs, 3)
              << " s]: " << out.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
