#include "mthin/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mthin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> first_primes(int n) {
  std::vector<int> out;
  for (int c = 2; static_cast<int>(out.size()) < n; ++c) {
    bool prime = true;
    for (int p : out) {
      if (p * p > c) break;
      if (c % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) out.push_back(c);
  }
  return out;
}

double fiber_length(const IntervalList& fibers) {
  double s = 0.0;
  for (const auto& iv : fibers) s += iv.length();
  return s;
}

// Position at fraction u of the total length along the concatenated fibers.
double place_on_fibers(const IntervalList& fibers, double total, double u) {
  double remaining = u * total;
  for (const auto& iv : fibers) {
    if (remaining <= iv.length()) return iv.lo + remaining;
    remaining -= iv.length();
  }
  return fibers.back().hi;
}

}  // namespace

ScrambledHalton::ScrambledHalton(int dim, std::uint64_t seed) : bases_(first_primes(dim)) {
  std::mt19937_64 rng(seed);
  perms_.resize(bases_.size());
  for (std::size_t j = 0; j < bases_.size(); ++j) {
    const int b = bases_[j];
    perms_[j].resize(b);
    for (int i = 0; i < b; ++i) perms_[j][i] = i;
    // Fisher-Yates on digits 1..b-1
    for (int i = b - 1; i >= 2; --i) {
      const int k = 1 + static_cast<int>(uniform01(rng) * i);
      std::swap(perms_[j][i], perms_[j][std::min(k, i)]);
    }
  }
}

Point ScrambledHalton::next() {
  ++index_;
  Point p(static_cast<Eigen::Index>(bases_.size()));
  for (std::size_t j = 0; j < bases_.size(); ++j) {
    const int b = bases_[j];
    double f = 1.0;
    double r = 0.0;
    for (std::uint64_t i = index_; i > 0; i /= b) {
      f /= b;
      r += f * perms_[j][i % b];
    }
    p(static_cast<Eigen::Index>(j)) = r;
  }
  return p;
}

PointList sample_region(const Region& region, int n, std::uint64_t seed) {
  if (n < 1) throw InputError("sample_region needs n >= 1");
  if (region.is_empty()) throw NumericError("sampling: region is empty");
  if (!region.bounded()) throw InputError("sampling needs a bounded region");
  const int d = region.dim();
  const int m = d - 1;
  const Box& bb = region.bbox();
  Point lo = bb.lo.head(m);
  Point span = bb.hi.head(m) - lo;

  ScrambledHalton seq(d + 1, seed);
  const auto tilde_of = [&](const Point& u) -> Point { return lo + u.head(m).cwiseProduct(span); };

  // pilot pass: largest fiber length and the horizontal support
  ScrambledHalton pilot(m, seed ^ 0x9e3779b97f4a7c15ULL);
  double lmax = 0.0;
  Point smin = Point::Constant(m, kInf);
  Point smax = Point::Constant(m, -kInf);
  constexpr int kPilot = 1024;
  for (int i = 0; i < kPilot; ++i) {
    const Point xt = tilde_of(pilot.next());
    const double len = fiber_length(region.fibers(xt));
    if (!(len > 0.0)) continue;
    lmax = std::max(lmax, len);
    smin = smin.cwiseMin(xt);
    smax = smax.cwiseMax(xt);
  }
  if (lmax > 0.0) {
    const Point pad = span / std::pow(static_cast<double>(kPilot), 1.0 / std::max(m, 1));
    const Point new_lo = (smin - pad).cwiseMax(lo);
    const Point new_hi = (smax + pad).cwiseMin(lo + span);
    lo = new_lo;
    span = new_hi - new_lo;
  }

  PointList out;
  out.reserve(n);
  const long max_draws = 200L * n + 20000;
  for (long draw = 0; draw < max_draws && static_cast<int>(out.size()) < n; ++draw) {
    const Point u = seq.next();
    const Point xt = tilde_of(u);
    const IntervalList fibers = region.fibers(xt);
    const double len = fiber_length(fibers);
    if (!(len > 0.0)) continue;
    if (len > lmax) lmax = len;
    if (u(d) * lmax > len) continue;
    const Point x = make_point(xt, place_on_fibers(fibers, len, u(m)));
    if (!region.contains(x)) continue;
    out.push_back(x);
  }
  if (out.size() < 50) throw NumericError("sampling: fewer than 50 points accepted in the region");
  return out;
}

}  // namespace mthin
