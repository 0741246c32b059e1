#include "mthin/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace mthin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Range of sin over [a, b].
std::pair<double, double> sin_range(double a, double b) {
  if (b - a >= 2.0 * std::numbers::pi) return {-1.0, 1.0};
  double lo = std::min(std::sin(a), std::sin(b));
  double hi = std::max(std::sin(a), std::sin(b));
  const double half_pi = 0.5 * std::numbers::pi;
  // peaks at pi/2 + 2k pi, troughs at -pi/2 + 2k pi
  const double k_peak = std::ceil((a - half_pi) / (2.0 * std::numbers::pi));
  if (half_pi + 2.0 * std::numbers::pi * k_peak <= b) hi = 1.0;
  const double k_trough = std::ceil((a + half_pi) / (2.0 * std::numbers::pi));
  if (-half_pi + 2.0 * std::numbers::pi * k_trough <= b) lo = -1.0;
  return {lo, hi};
}

double tabulated_value(const TabulatedGraph& t, double s) {
  if (s <= t.x.front()) return t.y.front();
  if (s >= t.x.back()) return t.y.back();
  const auto it = std::upper_bound(t.x.begin(), t.x.end(), s);
  const std::size_t hi = static_cast<std::size_t>(it - t.x.begin());
  const std::size_t lo = hi - 1;
  const double w = (s - t.x[lo]) / (t.x[hi] - t.x[lo]);
  return (1.0 - w) * t.y[lo] + w * t.y[hi];
}

double tabulated_slope(const TabulatedGraph& t, double s) {
  if (s <= t.x.front() || s >= t.x.back()) return 0.0;
  const auto it = std::upper_bound(t.x.begin(), t.x.end(), s);
  const std::size_t hi = static_cast<std::size_t>(it - t.x.begin());
  const std::size_t lo = hi - 1;
  return (t.y[hi] - t.y[lo]) / (t.x[hi] - t.x[lo]);
}

}  // namespace

// ---------------------------------------------------------------------------
// GraphFunction

GraphFunction::GraphFunction(Kind kind) : kind_(std::move(kind)) {
  std::visit(overloaded{
                 [](const ConstantGraph& c) {
                   if (!std::isfinite(c.value)) throw InputError("constant graph value must be finite");
                 },
                 [](const SinusoidGraph& s) {
                   if (!std::isfinite(s.amplitude) || !(s.frequency > 0.0) || s.axis < 0)
                     throw InputError("sinusoid graph needs finite amplitude, positive frequency");
                 },
                 [](const PowerGraph& p) {
                   if (!(p.c > 0.0) || !std::isfinite(p.p))
                     throw InputError("power graph needs c > 0 and finite exponent");
                 },
                 [](const TabulatedGraph& t) {
                   if (t.x.size() < 2 || t.x.size() != t.y.size())
                     throw InputError("tabulated graph needs at least 2 rows of (x, y)");
                   for (std::size_t i = 1; i < t.x.size(); ++i)
                     if (!(t.x[i] > t.x[i - 1]))
                       throw InputError("tabulated graph: x must be strictly increasing");
                   double lip = 0.0;
                   for (std::size_t i = 1; i < t.x.size(); ++i)
                     lip = std::max(lip, std::abs((t.y[i] - t.y[i - 1]) / (t.x[i] - t.x[i - 1])));
                   if (lip > t.lipschitz * (1.0 + 1e-12))
                     throw InputError("tabulated graph exceeds its declared Lipschitz constant");
                 },
             },
             kind_);
}

double GraphFunction::value(const Point& xt) const {
  return std::visit(overloaded{
                        [](const ConstantGraph& c) { return c.value; },
                        [&](const SinusoidGraph& s) {
                          const double arg = s.axis < xt.size() ? xt(s.axis) : 0.0;
                          return s.offset + s.amplitude * std::sin(s.frequency * arg + s.phase);
                        },
                        [&](const PowerGraph& p) {
                          const double r = xt.norm();
                          if (p.p == 0.0) return p.c;
                          if (r == 0.0) return p.p > 0.0 ? 0.0 : kInf;
                          return p.c * std::pow(r, p.p);
                        },
                        [&](const TabulatedGraph& t) { return tabulated_value(t, xt.size() ? xt(0) : 0.0); },
                    },
                    kind_);
}

Point GraphFunction::gradient(const Point& xt) const {
  Point g = Point::Zero(xt.size());
  std::visit(overloaded{
                 [](const ConstantGraph&) {},
                 [&](const SinusoidGraph& s) {
                   if (s.axis < xt.size())
                     g(s.axis) = s.amplitude * s.frequency * std::cos(s.frequency * xt(s.axis) + s.phase);
                 },
                 [&](const PowerGraph& p) {
                   const double r = xt.norm();
                   if (r > 0.0 && p.p != 0.0) g = p.c * p.p * std::pow(r, p.p - 2.0) * xt;
                 },
                 [&](const TabulatedGraph& t) {
                   if (xt.size()) g(0) = tabulated_slope(t, xt(0));
                 },
             },
             kind_);
  return g;
}

Eigen::MatrixXd GraphFunction::hessian(const Point& xt) const {
  const auto m = xt.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
  std::visit(overloaded{
                 [](const ConstantGraph&) {},
                 [&](const SinusoidGraph& s) {
                   if (s.axis < m)
                     h(s.axis, s.axis) = -s.amplitude * s.frequency * s.frequency *
                                         std::sin(s.frequency * xt(s.axis) + s.phase);
                 },
                 [&](const PowerGraph& p) {
                   const double r = xt.norm();
                   if (r > 0.0 && p.p != 0.0) {
                     const Point u = xt / r;
                     h = p.c * p.p * std::pow(r, p.p - 2.0) *
                         (Eigen::MatrixXd::Identity(m, m) + (p.p - 2.0) * u * u.transpose());
                   }
                 },
                 [](const TabulatedGraph&) {},
             },
             kind_);
  return h;
}

double GraphFunction::lipschitz() const {
  return std::visit(overloaded{
                        [](const ConstantGraph&) { return 0.0; },
                        [](const SinusoidGraph& s) { return std::abs(s.amplitude) * s.frequency; },
                        [](const PowerGraph& p) {
                          if (p.p == 0.0) return 0.0;
                          if (p.p == 1.0) return p.c;
                          return kInf;
                        },
                        [](const TabulatedGraph& t) { return t.lipschitz; },
                    },
                    kind_);
}

double GraphFunction::gradient_lipschitz() const {
  return std::visit(overloaded{
                        [](const ConstantGraph&) { return 0.0; },
                        [](const SinusoidGraph& s) {
                          return std::abs(s.amplitude) * s.frequency * s.frequency;
                        },
                        [](const PowerGraph& p) {
                          if (p.p == 0.0) return 0.0;
                          if (p.p == 2.0) return 2.0 * p.c;
                          return kInf;
                        },
                        [](const TabulatedGraph&) { return 0.0; },
                    },
                    kind_);
}

std::pair<double, double> GraphFunction::bounds() const {
  return std::visit(overloaded{
                        [](const ConstantGraph& c) { return std::pair{c.value, c.value}; },
                        [](const SinusoidGraph& s) {
                          const double a = std::abs(s.amplitude);
                          return std::pair{s.offset - a, s.offset + a};
                        },
                        [](const PowerGraph& p) {
                          if (p.p == 0.0) return std::pair{p.c, p.c};
                          return std::pair{0.0, kInf};
                        },
                        [](const TabulatedGraph& t) {
                          const auto [mn, mx] = std::minmax_element(t.y.begin(), t.y.end());
                          return std::pair{*mn, *mx};
                        },
                    },
                    kind_);
}

std::pair<double, double> GraphFunction::range_over(const Point& lo, const Point& hi) const {
  return std::visit(
      overloaded{
          [](const ConstantGraph& c) { return std::pair{c.value, c.value}; },
          [&](const SinusoidGraph& s) {
            if (s.axis >= lo.size()) {
              const double v = s.offset + s.amplitude * std::sin(s.phase);
              return std::pair{v, v};
            }
            const auto [a, b] = sin_range(s.frequency * lo(s.axis) + s.phase,
                                          s.frequency * hi(s.axis) + s.phase);
            const double v1 = s.offset + s.amplitude * a;
            const double v2 = s.offset + s.amplitude * b;
            return std::pair{std::min(v1, v2), std::max(v1, v2)};
          },
          [&](const PowerGraph& p) {
            // |x| ranges over [dist(0, box), farthest corner]
            const double rmin = Point::Zero(lo.size()).cwiseMax(lo).cwiseMin(hi).norm();
            const double rmax = lo.cwiseAbs().cwiseMax(hi.cwiseAbs()).norm();
            if (p.p == 0.0) return std::pair{p.c, p.c};
            const double a = rmin == 0.0 ? (p.p > 0.0 ? 0.0 : kInf) : p.c * std::pow(rmin, p.p);
            const double b = rmax == 0.0 ? (p.p > 0.0 ? 0.0 : kInf) : p.c * std::pow(rmax, p.p);
            return std::pair{std::min(a, b), std::max(a, b)};
          },
          [&](const TabulatedGraph& t) {
            const double a = lo.size() ? lo(0) : 0.0;
            const double b = hi.size() ? hi(0) : 0.0;
            double mn = std::min(tabulated_value(t, a), tabulated_value(t, b));
            double mx = std::max(tabulated_value(t, a), tabulated_value(t, b));
            for (std::size_t i = 0; i < t.x.size(); ++i) {
              if (t.x[i] > a && t.x[i] < b) {
                mn = std::min(mn, t.y[i]);
                mx = std::max(mx, t.y[i]);
              }
            }
            return std::pair{mn, mx};
          },
      },
      kind_);
}

// ---------------------------------------------------------------------------
// DomainDescriptor

DomainDescriptor::DomainDescriptor(DomainKind kind, int dim, double kappa, double r_loc)
    : kind_(kind), dim_(dim), kappa_(kappa), r_loc_(r_loc) {
  if (dim_ < 2) throw InputError("domain dimension must be at least 2");
  if (!(kappa_ > 0.0 && kappa_ <= 0.25)) throw InputError("kappa must lie in (0, 1/4]");
  if (!(r_loc_ > 0.0 && r_loc_ <= 0.5)) throw InputError("R_loc must lie in (0, 1/2]");
}

DomainDescriptor DomainDescriptor::half_space(int dim, double kappa, double r_loc) {
  DomainDescriptor d(DomainKind::HalfSpace, dim, kappa, r_loc);
  d.boundary_ = GraphFunction(ConstantGraph{0.0});
  return d;
}

DomainDescriptor DomainDescriptor::half_space_like(GraphFunction h, int dim, double kappa,
                                                   double r_loc) {
  const auto [b1, b2] = h.bounds();
  if (!(b1 >= 0.0 && b2 <= 1.0))
    throw InputError("half-space-like boundary must take values in [0, 1]");
  DomainDescriptor d(DomainKind::HalfSpaceLike, dim, kappa, r_loc);
  d.boundary_ = std::move(h);
  return d;
}

DomainDescriptor DomainDescriptor::graph(GraphFunction h, int dim, double kappa, double r_loc) {
  const auto [b1, b2] = h.bounds();
  if (!std::isfinite(b1) || !std::isfinite(b2)) throw InputError("graph boundary must be bounded");
  if (!std::isfinite(h.gradient_lipschitz()))
    throw InputError("graph boundary must have a Lipschitz gradient");
  DomainDescriptor d(DomainKind::Graph, dim, kappa, r_loc);
  d.boundary_ = std::move(h);
  return d;
}

DomainDescriptor DomainDescriptor::cube_union(std::vector<Box> cubes, double kappa, double r_loc) {
  if (cubes.empty()) throw InputError("cube union needs at least one cube");
  const int dim = cubes.front().dim();
  for (const auto& c : cubes) {
    if (c.dim() != dim) throw InputError("cube union: mixed dimensions");
    if (c.empty()) throw InputError("cube union: degenerate cube");
    const Point side = c.hi - c.lo;
    if ((side.array() - side(0)).abs().maxCoeff() > 1e-12 * side(0))
      throw InputError("cube union: boxes must be cubes");
  }
  for (std::size_t i = 0; i < cubes.size(); ++i)
    for (std::size_t j = i + 1; j < cubes.size(); ++j)
      if ((cubes[i].lo.array() < cubes[j].hi.array()).all() &&
          (cubes[j].lo.array() < cubes[i].hi.array()).all())
        throw InputError("cube union: cube interiors must be disjoint");
  DomainDescriptor d(DomainKind::CubeUnion, dim, kappa, r_loc);
  d.cubes_ = std::move(cubes);
  return d;
}

bool DomainDescriptor::contains(const Point& x) const {
  if (x.size() != dim_) throw InputError("point dimension does not match the domain");
  switch (kind_) {
    case DomainKind::HalfSpace:
      return x(dim_ - 1) > 0.0;
    case DomainKind::HalfSpaceLike:
    case DomainKind::Graph:
      return x(dim_ - 1) > boundary_->value(tilde(x));
    case DomainKind::CubeUnion:
      for (const auto& c : cubes_)
        if ((x.array() > c.lo.array()).all() && (x.array() < c.hi.array()).all()) return true;
      return false;
  }
  return false;
}

Point DomainDescriptor::inward_normal(const Point& z) const {
  if (!boundary_) throw CapabilityError("inward normal requires a graph-type domain");
  Point n(dim_);
  n.head(dim_ - 1) = -boundary_->gradient(tilde(z));
  n(dim_ - 1) = 1.0;
  return n / n.norm();
}

// ---------------------------------------------------------------------------
// Distances and projections

namespace {

struct GraphCandidate {
  Point s;
  double dist;
};

double graph_sq_dist(const GraphFunction& h, const Point& s, const Point& x) {
  const auto m = s.size();
  const double dv = h.value(s) - x(m);
  return (s - x.head(m)).squaredNorm() + dv * dv;
}

// Golden-section minimization of f on [a, b].
template <class F>
double golden_min(F&& f, double a, double b, int max_iter = 100) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

bool lex_less(const Point& a, const Point& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (a(i) > b(i)) return false;
  }
  return false;
}

// Picks the best candidate; near-ties go to the lexicographically smallest point.
GraphCandidate pick(std::vector<GraphCandidate>& cands) {
  double best = kInf;
  for (const auto& c : cands) best = std::min(best, c.dist);
  const double tol = 1e-12 * std::max(best, 1e-300) + 1e-300;
  const GraphCandidate* choice = nullptr;
  for (const auto& c : cands)
    if (c.dist <= best + tol && (!choice || lex_less(c.s, choice->s))) choice = &c;
  return *choice;
}

// Newton iteration on grad of squared distance with backtracking, from s0.
GraphCandidate newton_refine(const GraphFunction& h, const Point& x, Point s) {
  const auto m = s.size();
  double f = graph_sq_dist(h, s, x);
  for (int it = 0; it < 100; ++it) {
    const double hv = h.value(s) - x(m);
    const Point gh = h.gradient(s);
    const Point grad = 2.0 * ((s - x.head(m)) + hv * gh);
    if (grad.norm() <= 1e-14 * (1.0 + std::sqrt(f))) break;
    Eigen::MatrixXd H = 2.0 * (Eigen::MatrixXd::Identity(m, m) + gh * gh.transpose() + hv * h.hessian(s));
    Point step;
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() == Eigen::Success)
      step = -llt.solve(grad);
    else
      step = -0.5 * grad;
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Point trial = s + t * step;
      const double ft = graph_sq_dist(h, trial, x);
      if (ft < f) {
        s = trial;
        f = ft;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return {s, std::sqrt(f)};
}

GraphCandidate project_to_graph(const GraphFunction& h, const Point& x) {
  const auto m = x.size() - 1;
  const Point xt = tilde(x);
  const double rho0 = std::abs(x(m) - h.value(xt));
  if (std::holds_alternative<ConstantGraph>(h.kind())) return {xt, rho0};
  if (rho0 == 0.0) return {xt, 0.0};
  const double k = h.gradient_lipschitz();
  double spacing = rho0;
  if (k > 0.0 && std::isfinite(k)) spacing = std::min(spacing, 1.0 / k);
  const double lip = h.lipschitz();
  if (lip > 0.0 && std::isfinite(lip)) spacing = std::min(spacing, rho0 / lip);
  spacing /= 16.0;

  std::vector<GraphCandidate> cands;
  cands.push_back({xt, rho0});
  if (m == 1) {
    const int n = std::clamp(static_cast<int>(std::ceil(2.0 * rho0 / spacing)), 8, 8192);
    const double a = xt(0) - rho0;
    const double step = 2.0 * rho0 / n;
    std::vector<double> vals(n + 1);
    Point s(1);
    for (int i = 0; i <= n; ++i) {
      s(0) = a + step * i;
      vals[i] = graph_sq_dist(h, s, x);
    }
    for (int i = 0; i <= n; ++i) {
      const bool left = i == 0 || vals[i] <= vals[i - 1];
      const bool right = i == n || vals[i] <= vals[i + 1];
      if (!(left && right)) continue;
      const double lo = a + step * std::max(0, i - 1);
      const double hi = a + step * std::min(n, i + 1);
      const double best = golden_min(
          [&](double t) {
            Point p(1);
            p(0) = t;
            return graph_sq_dist(h, p, x);
          },
          lo, hi);
      Point p(1);
      p(0) = best;
      auto refined = newton_refine(h, x, p);
      cands.push_back(refined);
    }
  } else {
    const int per_dim = m == 2 ? 48 : 16;
    const int n = std::clamp(static_cast<int>(std::ceil(2.0 * rho0 / spacing)), 4, per_dim);
    std::vector<std::pair<double, Point>> grid;
    std::vector<int> idx(m, 0);
    while (true) {
      Point s(m);
      for (Eigen::Index j = 0; j < m; ++j) s(j) = xt(j) - rho0 + 2.0 * rho0 * idx[j] / n;
      if ((s - xt).norm() <= rho0) grid.emplace_back(graph_sq_dist(h, s, x), s);
      Eigen::Index j = 0;
      while (j < m && ++idx[j] > n) idx[j++] = 0;
      if (j == m) break;
    }
    std::sort(grid.begin(), grid.end(), [](const auto& a, const auto& b) {
      return a.first < b.first || (a.first == b.first && lex_less(a.second, b.second));
    });
    for (std::size_t i = 0; i < std::min<std::size_t>(8, grid.size()); ++i)
      cands.push_back(newton_refine(h, x, grid[i].second));
  }
  return pick(cands);
}

}  // namespace

double delta_D(const DomainDescriptor& domain, const Point& x) {
  if (x.size() != domain.dim()) throw InputError("point dimension does not match the domain");
  const int d = domain.dim();
  switch (domain.kind()) {
    case DomainKind::HalfSpace:
      return std::max(x(d - 1), 0.0);
    case DomainKind::HalfSpaceLike:
    case DomainKind::Graph: {
      if (!domain.contains(x)) return 0.0;
      return project_to_graph(*domain.boundary(), x).dist;
    }
    case DomainKind::CubeUnion:
      for (const auto& c : domain.cubes()) {
        if ((x.array() > c.lo.array()).all() && (x.array() < c.hi.array()).all())
          return std::min((x - c.lo).minCoeff(), (c.hi - x).minCoeff());
      }
      return 0.0;
  }
  return 0.0;
}

Point boundary_projection(const DomainDescriptor& domain, const Point& x) {
  if (!domain.contains(x)) throw DomainError("boundary_projection requires an interior point");
  const int d = domain.dim();
  switch (domain.kind()) {
    case DomainKind::HalfSpace: {
      Point z = x;
      z(d - 1) = 0.0;
      return z;
    }
    case DomainKind::HalfSpaceLike:
    case DomainKind::Graph: {
      const auto& h = *domain.boundary();
      const auto c = project_to_graph(h, x);
      const Point z = make_point(c.s, h.value(c.s));
      const double rho0 = x(d - 1) - h.value(tilde(x));
      if (!(c.dist <= rho0 * (1.0 + 1e-12)) || !std::isfinite(c.dist))
        throw NumericError("boundary projection did not converge", z);
      return z;
    }
    case DomainKind::CubeUnion: {
      for (const auto& c : domain.cubes()) {
        if (!((x.array() > c.lo.array()).all() && (x.array() < c.hi.array()).all())) continue;
        // nearest face; lexicographic preference falls out of the scan order
        double best = kInf;
        Point z = x;
        for (int i = 0; i < d; ++i) {
          for (int side = 0; side < 2; ++side) {
            const double target = side == 0 ? c.lo(i) : c.hi(i);
            const double dist = std::abs(x(i) - target);
            Point cand = x;
            cand(i) = target;
            if (dist < best || (dist == best && lex_less(cand, z))) {
              best = dist;
              z = cand;
            }
          }
        }
        return z;
      }
      break;
    }
  }
  throw DomainError("boundary_projection requires an interior point");
}

std::optional<double> box_boundary_distance(const DomainDescriptor& domain, const Box& box) {
  const int d = domain.dim();
  switch (domain.kind()) {
    case DomainKind::HalfSpace:
      if (box.hi(d - 1) <= 0.0) return std::nullopt;
      return std::max(box.lo(d - 1), 0.0);
    case DomainKind::CubeUnion: {
      for (const auto& c : domain.cubes()) {
        if ((box.lo.array() >= c.lo.array()).all() && (box.hi.array() <= c.hi.array()).all())
          return std::min((box.lo - c.lo).minCoeff(), (c.hi - box.hi).minCoeff());
      }
      for (const auto& c : domain.cubes())
        if ((box.lo.array() < c.hi.array()).all() && (c.lo.array() < box.hi.array()).all())
          return 0.0;
      return std::nullopt;
    }
    case DomainKind::HalfSpaceLike:
    case DomainKind::Graph:
      break;
  }
  const auto& h = *domain.boundary();
  const auto m = d - 1;
  const Point lo_t = box.lo.head(m);
  const Point hi_t = box.hi.head(m);
  const auto [hmin, hmax] = h.range_over(lo_t, hi_t);
  // ranges are exact, so any vertical overlap with [hmin, hmax] means the graph meets the box
  if (box.hi(m) <= hmin) return std::nullopt;
  if (box.lo(m) <= hmax) return 0.0;
  if (std::holds_alternative<ConstantGraph>(h.kind())) return box.lo(m) - hmax;

  const auto dist_at = [&](const Point& s) { return distance_to_box(make_point(s, h.value(s)), box); };
  const Point ct = 0.5 * (lo_t + hi_t);
  const double u = dist_at(ct);
  if (u == 0.0) return 0.0;
  double spacing = std::min((hi_t - lo_t).maxCoeff(), u);
  const double k = h.gradient_lipschitz();
  if (k > 0.0 && std::isfinite(k)) spacing = std::min(spacing, 1.0 / k);
  spacing /= 8.0;
  double best = u;
  if (m == 1) {
    const double a = lo_t(0) - u;
    const double b = hi_t(0) + u;
    const int n = std::clamp(static_cast<int>(std::ceil((b - a) / spacing)), 16, 4096);
    const double step = (b - a) / n;
    std::vector<double> vals(n + 1);
    Point s(1);
    for (int i = 0; i <= n; ++i) {
      s(0) = a + step * i;
      vals[i] = dist_at(s);
    }
    for (int i = 0; i <= n; ++i) {
      best = std::min(best, vals[i]);
      const bool left = i == 0 || vals[i] <= vals[i - 1];
      const bool right = i == n || vals[i] <= vals[i + 1];
      if (!(left && right)) continue;
      const double t = golden_min(
          [&](double v) {
            Point p(1);
            p(0) = v;
            return dist_at(p);
          },
          a + step * std::max(0, i - 1), a + step * std::min(n, i + 1));
      Point p(1);
      p(0) = t;
      best = std::min(best, dist_at(p));
    }
  } else {
    const int n = m == 2 ? 40 : 12;
    std::vector<int> idx(m, 0);
    Point best_s = ct;
    while (true) {
      Point s(m);
      for (Eigen::Index j = 0; j < m; ++j) s(j) = lo_t(j) - u + (hi_t(j) - lo_t(j) + 2.0 * u) * idx[j] / n;
      const double v = dist_at(s);
      if (v < best) {
        best = v;
        best_s = s;
      }
      Eigen::Index j = 0;
      while (j < m && ++idx[j] > n) idx[j++] = 0;
      if (j == m) break;
    }
    // coordinate-wise golden sweeps around the best grid point
    double radius = (hi_t - lo_t).maxCoeff() / n + 2.0 * u / n;
    for (int sweep = 0; sweep < 6; ++sweep) {
      for (Eigen::Index j = 0; j < m; ++j) {
        const double t = golden_min(
            [&](double v) {
              Point p = best_s;
              p(j) = v;
              return dist_at(p);
            },
            best_s(j) - radius, best_s(j) + radius);
        Point p = best_s;
        p(j) = t;
        const double v = dist_at(p);
        if (v < best) {
          best = v;
          best_s = p;
        }
      }
      radius *= 0.5;
    }
  }
  return best;
}

Point nontangential_point(const DomainDescriptor& domain, const Point& z, double r) {
  const int d = domain.dim();
  const double kappa = domain.kappa();
  if (!(r > 0.0 && r <= domain.r_loc() * (1.0 + 1e-12)))
    throw InputError("nontangential_point: radius must lie in (0, R_loc]");
  if (z.size() != d) throw InputError("point dimension does not match the domain");
  if (domain.has_graph_boundary()) {
    const double gap = z(d - 1) - domain.boundary()->value(tilde(z));
    if (std::abs(gap) > 1e-9 * (1.0 + std::abs(z(d - 1))))
      throw DomainError("nontangential_point: z is not a boundary point");
  } else if (domain.contains(z)) {
    throw DomainError("nontangential_point: z is not a boundary point");
  }
  const auto valid = [&](const Point& a) {
    return delta_D(domain, a) >= kappa * r * (1.0 - 1e-12) && (a - z).norm() <= (1.0 - kappa) * r;
  };
  if (domain.has_graph_boundary()) {
    const Point a = z + 0.5 * r * domain.inward_normal(z);
    if (valid(a)) return a;
  }
  // grid search over the cube around z at resolution kappa r / 4
  const double h = kappa * r / 4.0;
  const int n = static_cast<int>(std::ceil(2.0 * r / h));
  std::vector<int> idx(d, 0);
  Point best;
  double best_delta = -1.0;
  while (true) {
    Point a(d);
    for (int j = 0; j < d; ++j) a(j) = z(j) - r + h * idx[j];
    if ((a - z).norm() <= (1.0 - kappa) * r) {
      const double dl = delta_D(domain, a);
      if (dl > best_delta) {
        best_delta = dl;
        best = a;
      }
    }
    int j = 0;
    while (j < d && ++idx[j] > n) idx[j++] = 0;
    if (j == d) break;
  }
  if (best_delta >= kappa * r * (1.0 - 1e-12)) return best;
  std::ostringstream os;
  os << "kappa-fatness violated at r=" << r << ": no interior ball of radius kappa*r found";
  throw DomainError(os.str());
}

Point nontangential_point_at_infinity(const DomainDescriptor& domain, double r) {
  if (!domain.has_graph_boundary())
    throw DomainError("fatness at infinity requires a half-space-like or graph domain");
  if (!(r >= domain.r_loc())) throw InputError("nontangential_point_at_infinity: r must be >= R_loc");
  const int d = domain.dim();
  const double kappa = domain.kappa();
  Point a = Point::Zero(d);
  a(d - 1) = 2.0 * r;
  const double norm = a.norm();
  if (delta_D(domain, a) >= kappa * r && norm >= r * (1.0 + kappa) && norm < r / kappa) return a;
  std::ostringstream os;
  os << "fatness at infinity fails at r=" << r;
  throw DomainError(os.str());
}

EstimateWithError exterior_volume_ratio(const DomainDescriptor& domain, const Point& x,
                                        int n_samples, std::uint64_t seed) {
  if (n_samples < 1000) throw InputError("exterior_volume_ratio needs at least 1000 samples");
  if (!domain.contains(x)) throw DomainError("exterior_volume_ratio requires an interior point");
  const int d = domain.dim();
  const double delta = delta_D(domain, x);
  const Point z = boundary_projection(domain, x);
  std::mt19937_64 rng(seed);
  const auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  long outside = 0;
  Point g(d);
  for (int i = 0; i < n_samples; ++i) {
    for (int j = 0; j < d; j += 2) {
      const double u1 = uniform();
      const double u2 = uniform();
      const double rad = std::sqrt(-2.0 * std::log(u1));
      g(j) = rad * std::cos(2.0 * std::numbers::pi * u2);
      if (j + 1 < d) g(j + 1) = rad * std::sin(2.0 * std::numbers::pi * u2);
    }
    const double radius = delta * std::pow(uniform(), 1.0 / d);
    const Point p = z + radius * g / g.norm();
    if (!domain.contains(p)) ++outside;
  }
  const double vd = unit_ball_volume(d);
  const double p = static_cast<double>(outside) / n_samples;
  return {p * vd, 1.96 * std::sqrt(p * (1.0 - p) / n_samples) * vd};
}

// ---------------------------------------------------------------------------
// Regions

IntervalList normalize(IntervalList list) {
  list.erase(std::remove_if(list.begin(), list.end(), [](const Interval& i) { return !(i.hi > i.lo); }),
             list.end());
  std::sort(list.begin(), list.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  IntervalList out;
  for (const auto& iv : list) {
    if (!out.empty() && iv.lo <= out.back().hi)
      out.back().hi = std::max(out.back().hi, iv.hi);
    else
      out.push_back(iv);
  }
  return out;
}

IntervalList intersect(const IntervalList& a, const IntervalList& b) {
  const IntervalList na = normalize(a);
  const IntervalList nb = normalize(b);
  IntervalList out;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < na.size() && j < nb.size()) {
    const double lo = std::max(na[i].lo, nb[j].lo);
    const double hi = std::min(na[i].hi, nb[j].hi);
    if (hi > lo) out.push_back({lo, hi});
    if (na[i].hi < nb[j].hi)
      ++i;
    else
      ++j;
  }
  return out;
}

Region::Region(Box bbox, Membership contains, Fibers fibers, BoxTest may_intersect, BoxTest covers)
    : bbox_(std::move(bbox)),
      contains_(std::move(contains)),
      fibers_(std::move(fibers)),
      may_intersect_(std::move(may_intersect)),
      covers_(std::move(covers)) {}

Region Region::empty(int dim) {
  return Region(
      Box{Point::Zero(dim), Point::Zero(dim)}, [](const Point&) { return false; },
      [](const Point&) { return IntervalList{}; }, [](const Box&) { return false; });
}

Region Region::box(const Box& b) {
  const int m = b.dim() - 1;
  return Region(
      b, [b](const Point& x) { return b.contains(x); },
      [b, m](const Point& xt) {
        if ((xt.array() < b.lo.head(m).array()).any() || (xt.array() > b.hi.head(m).array()).any())
          return IntervalList{};
        return IntervalList{{b.lo(m), b.hi(m)}};
      },
      [](const Box&) { return true; },
      [b](const Box& q) { return (q.lo.array() >= b.lo.array()).all() && (q.hi.array() <= b.hi.array()).all(); });
}

Region Region::box_union(std::vector<Box> boxes) {
  if (boxes.empty()) throw InputError("box union needs at least one box");
  const int dim = boxes.front().dim();
  Box hull = boxes.front();
  for (const auto& b : boxes) {
    if (b.dim() != dim) throw InputError("box union: mixed dimensions");
    hull.lo = hull.lo.cwiseMin(b.lo);
    hull.hi = hull.hi.cwiseMax(b.hi);
  }
  const int m = dim - 1;
  auto shared = std::make_shared<std::vector<Box>>(std::move(boxes));
  return Region(
      hull,
      [shared](const Point& x) {
        return std::any_of(shared->begin(), shared->end(), [&](const Box& b) { return b.contains(x); });
      },
      [shared, m](const Point& xt) {
        IntervalList out;
        for (const auto& b : *shared) {
          if ((xt.array() < b.lo.head(m).array()).any() || (xt.array() > b.hi.head(m).array()).any())
            continue;
          out.push_back({b.lo(m), b.hi(m)});
        }
        return normalize(std::move(out));
      },
      [shared](const Box& q) {
        return std::any_of(shared->begin(), shared->end(), [&](const Box& b) { return overlaps(b, q); });
      },
      [shared](const Box& q) {
        return std::any_of(shared->begin(), shared->end(), [&](const Box& b) {
          return (q.lo.array() >= b.lo.array()).all() && (q.hi.array() <= b.hi.array()).all();
        });
      });
}

Region Region::annulus(const Point& center, double r_in, double r_out) {
  if (!(r_in >= 0.0 && r_out > r_in)) throw InputError("annulus needs 0 <= r_in < r_out");
  const auto dim = center.size();
  const auto m = dim - 1;
  Box bbox{(center.array() - r_out).matrix(), (center.array() + r_out).matrix()};
  return Region(
      bbox,
      [center, r_in, r_out](const Point& x) {
        const double r = (x - center).norm();
        return r >= r_in && r < r_out;
      },
      [center, r_in, r_out, m](const Point& xt) {
        const double rho2 = (xt - center.head(m)).squaredNorm();
        const double c = center(m);
        if (rho2 >= r_out * r_out) return IntervalList{};
        const double outer = std::sqrt(r_out * r_out - rho2);
        if (rho2 >= r_in * r_in) return IntervalList{{c - outer, c + outer}};
        const double inner = std::sqrt(r_in * r_in - rho2);
        return IntervalList{{c - outer, c - inner}, {c + inner, c + outer}};
      },
      [center, r_in, r_out](const Box& q) {
        if (distance_to_box(center, q) >= r_out) return false;
        const Point far = (q.lo - center).cwiseAbs().cwiseMax((q.hi - center).cwiseAbs());
        return far.norm() >= r_in;
      },
      [center, r_in, r_out](const Box& q) {
        const Point far = (q.lo - center).cwiseAbs().cwiseMax((q.hi - center).cwiseAbs());
        return far.norm() < r_out && distance_to_box(center, q) >= r_in;
      });
}

Region Region::intersect(const Region& other) const {
  Box b = mthin::intersect(bbox_, other.bbox_);
  if (b.empty()) return Region::empty(dim());
  const Region a = *this;
  const Region c = other;
  return Region(
      b, [a, c](const Point& x) { return a.contains(x) && c.contains(x); },
      [a, c](const Point& xt) { return mthin::intersect(a.fibers(xt), c.fibers(xt)); },
      [a, c](const Box& q) { return a.may_intersect(q) && c.may_intersect(q); },
      [a, c](const Box& q) { return a.covers(q) && c.covers(q); });
}

// ---------------------------------------------------------------------------
// SetDescriptor

namespace {

Region subgraph_region(const GraphFunction& h, const GraphFunction& f, int dim) {
  const auto [hmin, hmax] = h.bounds();
  const auto [fmin, fmax] = f.bounds();
  if (fmin < 0.0) throw InputError("set profile f must be nonnegative");
  const int m = dim - 1;
  Box bbox{Point::Constant(dim, -kInf), Point::Constant(dim, kInf)};
  bbox.lo(m) = hmin;
  bbox.hi(m) = hmax + fmax;
  return Region(
      bbox,
      [h, f, m](const Point& x) {
        const Point xt = x.head(m);
        const double hv = h.value(xt);
        return x(m) > hv && x(m) <= hv + f.value(xt);
      },
      [h, f](const Point& xt) {
        const double hv = h.value(xt);
        const double fv = f.value(xt);
        if (!(fv > 0.0)) return IntervalList{};
        return IntervalList{{hv, hv + fv}};
      },
      [h, f, m](const Box& q) {
        const Point lo = q.lo.head(m);
        const Point hi = q.hi.head(m);
        const auto hr = h.range_over(lo, hi);
        const auto fr = f.range_over(lo, hi);
        return q.hi(m) > hr.first && q.lo(m) <= hr.second + fr.second;
      },
      [h, f, m](const Box& q) {
        const Point lo = q.lo.head(m);
        const Point hi = q.hi.head(m);
        const auto hr = h.range_over(lo, hi);
        const auto fr = f.range_over(lo, hi);
        return q.lo(m) >= hr.second && q.hi(m) <= hr.first + fr.first;
      });
}

}  // namespace

SetDescriptor SetDescriptor::subgraph(const DomainDescriptor& domain, GraphFunction f) {
  if (!domain.has_graph_boundary())
    throw InputError("subgraph sets require a graph-type ambient domain");
  Region region = subgraph_region(*domain.boundary(), f, domain.dim());
  return SetDescriptor(LipschitzSubgraph{std::move(f)}, std::move(region));
}

SetDescriptor SetDescriptor::power_cusp(const DomainDescriptor& domain, double c, double p) {
  if (!domain.has_graph_boundary())
    throw InputError("power cusp sets require a graph-type ambient domain");
  if (!(c > 0.0)) throw InputError("power cusp needs c > 0");
  Region region = subgraph_region(*domain.boundary(), GraphFunction(PowerGraph{c, p}), domain.dim());
  return SetDescriptor(PowerCusp{c, p}, std::move(region));
}

SetDescriptor SetDescriptor::whitney_subfamily(std::vector<std::size_t> indices,
                                               std::vector<Box> cubes) {
  if (indices.size() != cubes.size()) throw InputError("whitney subfamily: index/cube mismatch");
  if (cubes.empty()) throw InputError("whitney subfamily must select at least one cube");
  Region region = Region::box_union(cubes);
  return SetDescriptor(WhitneySubfamily{std::move(indices), std::move(cubes)}, std::move(region));
}

SetDescriptor SetDescriptor::explicit_union(std::vector<Box> boxes, int dim) {
  if (boxes.empty()) return SetDescriptor(ExplicitUnion{}, Region::empty(dim));
  for (const auto& b : boxes)
    if (b.dim() != dim) throw InputError("explicit union: box dimension mismatch");
  Region region = Region::box_union(boxes);
  return SetDescriptor(ExplicitUnion{std::move(boxes)}, std::move(region));
}

std::optional<GraphFunction> SetDescriptor::profile_function() const {
  if (const auto* s = std::get_if<LipschitzSubgraph>(&kind_)) return s->f;
  if (const auto* p = std::get_if<PowerCusp>(&kind_)) return GraphFunction(PowerGraph{p->c, p->p});
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Whitney decomposition

Box WhitneyCube::box() const {
  Box b{Point(center.size()), Point(center.size())};
  for (Eigen::Index i = 0; i < center.size(); ++i) {
    b.lo(i) = std::ldexp(static_cast<double>(lattice[i]), exponent);
    b.hi(i) = std::ldexp(static_cast<double>(lattice[i] + 1), exponent);
  }
  return b;
}

bool interiors_overlap(const WhitneyCube& a, const WhitneyCube& b) {
  const int e = std::min(a.exponent, b.exponent);
  const int sa = a.exponent - e;
  const int sb = b.exponent - e;
  if (sa > 60 || sb > 60) throw RangeError("cube exponents too far apart for lattice comparison");
  for (std::size_t i = 0; i < a.lattice.size(); ++i) {
    const std::int64_t alo = a.lattice[i] * (std::int64_t{1} << sa);
    const std::int64_t ahi = (a.lattice[i] + 1) * (std::int64_t{1} << sa);
    const std::int64_t blo = b.lattice[i] * (std::int64_t{1} << sb);
    const std::int64_t bhi = (b.lattice[i] + 1) * (std::int64_t{1} << sb);
    if (!(alo < bhi && blo < ahi)) return false;
  }
  return true;
}

WhitneyDecomposition whitney_decompose(const DomainDescriptor& domain, const Box& window,
                                       double side_min, const Region* focus, std::size_t max_cubes) {
  const int d = domain.dim();
  if (window.dim() != d) throw InputError("window dimension does not match the domain");
  if (window.empty()) throw InputError("whitney window must have positive volume");
  int min_exp = 0;
  if (!(side_min > 0.0) || std::frexp(side_min, &min_exp) != 0.5)
    throw InputError("side_min must be a positive power of two");
  min_exp -= 1;  // side_min = 2^min_exp

  const double sqrt_d = std::sqrt(static_cast<double>(d));
  const double delta_up = delta_D(domain, window.center()) + 0.5 * window.diameter();
  int top = 0;
  if (delta_up > 3.0 * sqrt_d) top = static_cast<int>(std::ceil(std::log2(delta_up / (3.0 * sqrt_d))));
  top = std::max(top, min_exp);

  WhitneyDecomposition out;
  out.base_exponent = top;

  struct Pending {
    int exponent;
    std::vector<std::int64_t> lattice;
  };
  const auto make_box = [d](int e, const std::vector<std::int64_t>& k) {
    Box b{Point(d), Point(d)};
    for (int i = 0; i < d; ++i) {
      b.lo(i) = std::ldexp(static_cast<double>(k[i]), e);
      b.hi(i) = std::ldexp(static_cast<double>(k[i] + 1), e);
    }
    return b;
  };

  // top-level lattice cubes overlapping the window, lexicographic order
  std::vector<std::int64_t> first(d);
  std::vector<std::int64_t> last(d);
  for (int i = 0; i < d; ++i) {
    first[i] = static_cast<std::int64_t>(std::floor(std::ldexp(window.lo(i), -top)));
    last[i] = static_cast<std::int64_t>(std::ceil(std::ldexp(window.hi(i), -top))) - 1;
    if (last[i] - first[i] > 1'000'000) throw RangeError("whitney window too large for the base lattice");
  }
  std::vector<Pending> stack;
  {
    std::vector<std::int64_t> k = first;
    std::vector<Pending> roots;
    while (true) {
      roots.push_back({top, k});
      int i = d - 1;
      while (i >= 0 && ++k[i] > last[i]) {
        k[i] = first[i];
        --i;
      }
      if (i < 0) break;
    }
    stack.assign(roots.rbegin(), roots.rend());
  }

  std::set<std::pair<int, std::vector<std::int64_t>>> seen;
  const auto strictly_overlaps = [&](const Box& b) {
    return (b.lo.array() < window.hi.array()).all() && (window.lo.array() < b.hi.array()).all();
  };

  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    const Box b = make_box(cur.exponent, cur.lattice);
    if (!strictly_overlaps(b)) continue;
    if (focus && !focus->may_intersect(b)) continue;
    const auto dist = box_boundary_distance(domain, b);
    if (!dist) continue;
    const double side = std::ldexp(1.0, cur.exponent);
    const double diam = sqrt_d * side;
    if (*dist >= diam) {
      // climb to the maximal admissible ancestor; admissibility is inherited by
      // children, so that ancestor is the same whichever window we started from
      int e = cur.exponent;
      std::vector<std::int64_t> k = cur.lattice;
      double q_dist = *dist;
      while (true) {
        std::vector<std::int64_t> parent(d);
        for (int i = 0; i < d; ++i) parent[i] = k[i] >= 0 ? k[i] / 2 : -((1 - k[i]) / 2);
        const auto pd = box_boundary_distance(domain, make_box(e + 1, parent));
        if (!pd || *pd < sqrt_d * std::ldexp(1.0, e + 1)) break;
        ++e;
        k = std::move(parent);
        q_dist = *pd;
      }
      if (!seen.insert({e, k}).second) continue;
      const Box qb = make_box(e, k);
      WhitneyCube q;
      q.index = out.cubes.size();
      q.center = qb.center();
      q.side = std::ldexp(1.0, e);
      q.dist_boundary = q_dist;
      q.diam = sqrt_d * q.side;
      q.exponent = e;
      q.lattice = std::move(k);
      out.cubes.push_back(std::move(q));
      if (max_cubes && out.cubes.size() + out.unresolved_count >= max_cubes) {
        out.truncated = true;
        break;
      }
      continue;
    }
    if (cur.exponent - 1 < min_exp) {
      ++out.unresolved_count;
      out.unresolved_volume += intersect(b, window).volume();
      if (max_cubes && out.cubes.size() + out.unresolved_count >= max_cubes) {
        out.truncated = true;
        break;
      }
      continue;
    }
    // children pushed in reverse so they pop in lexicographic order
    const int children = 1 << d;
    for (int c = children - 1; c >= 0; --c) {
      Pending child{cur.exponent - 1, std::vector<std::int64_t>(d)};
      for (int i = 0; i < d; ++i) child.lattice[i] = 2 * cur.lattice[i] + ((c >> (d - 1 - i)) & 1);
      stack.push_back(std::move(child));
    }
  }
  out.empty_warning = out.cubes.empty();
  return out;
}

}  // namespace mthin
