#include "mthin/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace mthin {

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gk15(const std::function<double(double)>& f, double a, double b, long& evals) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double f1 = f(c - dx);
    const double f2 = f(c + dx);
    kronrod += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
  }
  evals += 15;
  kronrod *= h;
  gauss *= h;
  return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace

QuadratureResult integrate_1d(const std::function<double(double)>& f, double a, double b,
                              double rel_tol, double abs_tol, int max_subdivisions) {
  QuadratureResult out;
  if (!(b > a)) return out;
  std::priority_queue<Segment> heap;
  double total = 0.0;
  double err = 0.0;
  const int initial = 2;
  for (int i = 0; i < initial; ++i) {
    const double lo = a + (b - a) * i / initial;
    const double hi = i + 1 == initial ? b : a + (b - a) * (i + 1) / initial;
    Segment s = gk15(f, lo, hi, out.evaluations);
    total += s.value;
    err += s.error;
    heap.push(s);
  }
  int subdivisions = initial;
  while (err > std::max(abs_tol, rel_tol * std::abs(total)) && subdivisions < max_subdivisions) {
    const Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      heap.push(worst);
      break;
    }
    const Segment l = gk15(f, worst.a, mid, out.evaluations);
    const Segment r = gk15(f, mid, worst.b, out.evaluations);
    total += l.value + r.value - worst.value;
    err += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
    ++subdivisions;
  }
  // recompute sums to shed accumulated cancellation
  total = 0.0;
  err = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  out.value = total;
  out.error = err;
  out.converged = std::isfinite(total) && err <= std::max(abs_tol, rel_tol * std::abs(total));
  return out;
}

QuadratureResult integrate_region(const Region& region, const std::function<double(const Point&)>& f,
                                  double rel_tol, double abs_tol, int max_subdivisions) {
  QuadratureResult out;
  if (region.is_empty()) return out;
  if (!region.bounded()) throw InputError("integrate_region needs a bounded region");
  const int d = region.dim();
  const int m = d - 1;
  const Box& bb = region.bbox();
  bool inner_ok = true;
  long evals = 0;
  const double inner_rel = 0.1 * rel_tol;

  std::function<double(int, Point&)> level = [&](int k, Point& xt) -> double {
    if (k == m) {
      double sum = 0.0;
      for (const auto& iv : region.fibers(xt)) {
        const auto r = integrate_1d(
            [&](double t) { return f(make_point(xt, t)); }, iv.lo, iv.hi, inner_rel,
            0.1 * abs_tol / std::max(1e-300, (bb.hi.head(m) - bb.lo.head(m)).prod()), max_subdivisions);
        evals += r.evaluations;
        inner_ok = inner_ok && r.converged;
        sum += r.value;
      }
      return sum;
    }
    const auto r = integrate_1d(
        [&](double s) {
          xt(k) = s;
          return level(k + 1, xt);
        },
        bb.lo(k), bb.hi(k), k == 0 ? rel_tol : inner_rel, k == 0 ? abs_tol : 0.0, max_subdivisions);
    if (k == 0) {
      out.error = r.error;
      out.converged = r.converged;
    } else {
      inner_ok = inner_ok && r.converged;
    }
    return r.value;
  };
  Point xt(m);
  out.value = level(0, xt);
  out.converged = out.converged && inner_ok;
  out.evaluations = evals;
  return out;
}

QuadratureResult region_volume(const Region& region, double rel_tol) {
  return integrate_region(region, [](const Point&) { return 1.0; }, rel_tol, 0.0);
}

}  // namespace mthin
