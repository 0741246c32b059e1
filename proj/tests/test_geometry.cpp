#include "generators.hpp"
#include "mthin/geometry.hpp"
#include "mthin/quadrature.hpp"
#include "mthin/sampling.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace mthin;

namespace {

Point p2(double a, double b) {
  Point p(2);
  p << a, b;
  return p;
}

Box unit_box(int d) { return {Point::Zero(d), Point::Ones(d)}; }

using Key = std::pair<int, std::vector<std::int64_t>>;

std::map<Key, WhitneyCube> by_key(const WhitneyDecomposition& dec) {
  std::map<Key, WhitneyCube> out;
  for (const auto& c : dec.cubes) out.emplace(Key{c.exponent, c.lattice}, c);
  return out;
}

}  // namespace

TEST_CASE("graph functions") {
  const GraphFunction s(GraphFunction(SinusoidGraph{0.3, 2.0}));
  CHECK(s.value(Point::Constant(1, 0.25)) == doctest::Approx(0.3 * std::sin(0.5)));
  CHECK(s.gradient(Point::Constant(1, 0.25))(0) == doctest::Approx(0.6 * std::cos(0.5)));
  CHECK(s.lipschitz() == doctest::Approx(0.6));
  CHECK(s.gradient_lipschitz() == doctest::Approx(1.2));

  const GraphFunction q(GraphFunction(PowerGraph{2.0, 2.0}));
  CHECK(std::isinf(q.lipschitz()));
  Point xt(2);
  xt << 1.0, 1.0;
  CHECK(q.value(xt) == doctest::Approx(4.0));

  const GraphFunction t(TabulatedGraph{{0.0, 1.0, 2.0}, {0.0, 1.0, 0.5}, 1.0});
  CHECK(t.value(Point::Constant(1, 0.5)) == doctest::Approx(0.5));
  CHECK(t.value(Point::Constant(1, 5.0)) == doctest::Approx(0.5));
  CHECK_THROWS_AS(GraphFunction(TabulatedGraph{{0.0, 1.0}, {0.0, 3.0}, 1.0}), InputError);
}

TEST_CASE("property: range_over encloses sampled values") {
  auto r = gen::rng(5);
  const GraphFunction fs[] = {GraphFunction(SinusoidGraph{0.4, 3.0, 0.2, 0.5}), GraphFunction(PowerGraph{1.5, 0.5}),
                              GraphFunction(PowerGraph{1.0, 2.0})};
  for (const auto& f : fs) {
    for (int trial = 0; trial < 200; ++trial) {
      const Box b = gen::box(r, 1, -2.0, 2.0, 1.5);
      const auto [lo, hi] = f.range_over(b.lo, b.hi);
      for (int k = 0; k < 20; ++k) {
        const double v = f.value(Point::Constant(1, gen::uniform(r, b.lo(0), b.hi(0))));
        CHECK(v >= lo - 1e-12);
        CHECK(v <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("domain validation") {
  CHECK_THROWS_AS(DomainDescriptor::half_space(2, 0.5), InputError);
  CHECK_THROWS_AS(DomainDescriptor::half_space(2, 0.25, 0.75), InputError);
  CHECK_THROWS_AS(DomainDescriptor::half_space_like(GraphFunction(ConstantGraph{2.0}), 2), InputError);
  CHECK_THROWS_AS(DomainDescriptor::graph(GraphFunction(PowerGraph{1.0, 2.0}), 2), InputError);
  CHECK_THROWS_AS(DomainDescriptor::cube_union({Box{p2(0, 0), p2(1, 2)}}), InputError);
  CHECK_THROWS_AS(DomainDescriptor::cube_union({Box{p2(0, 0), p2(1, 1)}, Box{p2(0.5, 0.5), p2(1.5, 1.5)}}), InputError);
}

TEST_CASE("boundary distance oracles") {
  const auto H = DomainDescriptor::half_space(3);
  Point x(3);
  x << 0.3, -2.0, 0.7;
  CHECK(delta_D(H, x) == doctest::Approx(0.7));
  CHECK(delta_D(H, -x) == 0.0);

  const auto C = DomainDescriptor::half_space_like(GraphFunction(ConstantGraph{0.4}), 2);
  CHECK(delta_D(C, p2(5.0, 1.0)) == doctest::Approx(0.6));

  const auto U = DomainDescriptor::cube_union({Box{p2(0, 0), p2(1, 1)}, Box{p2(1, 0), p2(2, 1)}});
  CHECK(delta_D(U, p2(0.5, 0.5)) == doctest::Approx(0.5));
  CHECK(delta_D(U, p2(1.0, 0.5)) == 0.0);  // open cubes: the shared face is not in D
  CHECK(delta_D(U, p2(0.9, 0.5)) == doctest::Approx(0.1));
  CHECK(delta_D(U, p2(1.8, 0.3)) == doctest::Approx(0.2));
}

TEST_CASE("property: graph projection is nearest among sampled boundary points") {
  const auto G = DomainDescriptor::graph(GraphFunction(SinusoidGraph{0.3}), 2);
  const GraphFunction& h = *G.boundary();
  auto r = gen::rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const double s = gen::uniform(r, -3.0, 3.0);
    const Point x = p2(s, h.value(Point::Constant(1, s)) + gen::log_uniform(r, 1e-4, 2.0));
    const double d = delta_D(G, x);
    const Point z = boundary_projection(G, x);
    CHECK((z - x).norm() == doctest::Approx(d).epsilon(1e-8));
    CHECK(z(1) == doctest::Approx(h.value(Point::Constant(1, z(0)))).epsilon(1e-10));
    // brute force: coarse boundary grid, then a fine grid around its best point
    auto dist_at = [&](double t) { return (p2(t, h.value(Point::Constant(1, t))) - x).norm(); };
    double t_best = x(0);
    for (int k = -4000; k <= 4000; ++k) {
      const double t = x(0) + 2.5 * k / 4000.0;
      if (dist_at(t) < dist_at(t_best)) t_best = t;
    }
    double best = dist_at(t_best);
    for (int k = -20000; k <= 20000; ++k) best = std::min(best, dist_at(t_best + 1e-3 * k / 20000.0));
    CHECK(d <= best + 1e-12);
    CHECK(d >= best * (1 - 1e-6) - 1e-12);
  }
}

TEST_CASE("nontangential points satisfy the fatness conditions") {
  const auto G = DomainDescriptor::graph(GraphFunction(SinusoidGraph{0.3}), 2);
  auto r = gen::rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const double s = gen::uniform(r, -3.0, 3.0);
    const Point z = p2(s, G.boundary()->value(Point::Constant(1, s)));
    const double rad = gen::log_uniform(r, 1e-4, G.r_loc());
    const Point A = nontangential_point(G, z, rad);
    CHECK(delta_D(G, A) >= G.kappa() * rad * (1 - 1e-9));
    CHECK((A - z).norm() + G.kappa() * rad <= rad * (1 + 1e-9));
  }
  for (double rad : {0.5, 3.0, 100.0}) {
    const Point A = nontangential_point_at_infinity(G, rad);
    CHECK(delta_D(G, A) >= G.kappa() * rad * (1 - 1e-9));
    CHECK(A.norm() - G.kappa() * rad >= rad * (1 - 1e-9));
    CHECK(A.norm() < rad / G.kappa());
  }
}

TEST_CASE("exterior volume of the half-space is half a ball") {
  const auto H = DomainDescriptor::half_space(2);
  const auto e = exterior_volume_ratio(H, p2(0.0, 0.3), 20000, 4);
  CHECK(std::abs(e.estimate - M_PI / 2) <= 3 * e.half_width + 1e-3);
}

TEST_CASE("interval algebra") {
  const IntervalList a = normalize({{0, 1}, {0.5, 2}, {3, 4}});
  REQUIRE(a.size() == 2);
  CHECK(a[0].hi == 2);
  const IntervalList b = intersect(a, IntervalList{{1.5, 3.5}});
  REQUIRE(b.size() == 2);
  CHECK(b[0].length() == doctest::Approx(0.5));
  CHECK(b[1].length() == doctest::Approx(0.5));
}

TEST_CASE("region volumes match closed forms") {
  const Region ann = Region::annulus(p2(0.2, -0.1), 0.25, 0.5);
  CHECK(region_volume(ann).value == doctest::Approx(M_PI * (0.25 - 0.0625)).epsilon(1e-5));
  const Region u = Region::box_union({Box{p2(0, 0), p2(1, 1)}, Box{p2(0.5, 0.5), p2(2, 1)}});
  CHECK(region_volume(u).value == doctest::Approx(1.5).epsilon(1e-6));
  const auto H = DomainDescriptor::half_space(2);
  const auto cusp = SetDescriptor::power_cusp(H, 1.0, 2.0).region().intersect(Region::box(Box{p2(-1, 0), p2(1, 2)}));
  CHECK(region_volume(cusp).value == doctest::Approx(2.0 / 3.0).epsilon(1e-5));
  CHECK(Region::empty(2).is_empty());
}

TEST_CASE("property: covers is conservative") {
  const auto G = DomainDescriptor::graph(GraphFunction(SinusoidGraph{0.3}), 2);
  const Region regions[] = {
      Region::annulus(p2(0, 0), 0.3, 1.0),
      Region::box_union({Box{p2(0, 0), p2(1, 1)}, Box{p2(1, 0), p2(2, 0.5)}}),
      SetDescriptor::subgraph(G, GraphFunction(SinusoidGraph{0.2, 1.0, 0.0, 0.4})).region(),
      SetDescriptor::power_cusp(G, 1.0, 1.0).region().intersect(Region::annulus(p2(0, 0), 0.25, 0.5)),
  };
  auto r = gen::rng(17);
  int covered = 0;
  for (const auto& R : regions) {
    for (int trial = 0; trial < 2000; ++trial) {
      const Box b = gen::box(r, 2, -1.5, 1.5, 0.3);
      if (!R.covers(b)) continue;
      ++covered;
      CHECK(R.may_intersect(b));
      for (int k = 0; k < 10; ++k) {
        Point x(2);
        x << gen::uniform(r, b.lo(0), b.hi(0)), gen::uniform(r, b.lo(1), b.hi(1));
        CHECK(R.contains(x));
      }
    }
  }
  CHECK(covered > 50);
}

TEST_CASE("property: sampled points lie in the region and are reproducible") {
  const auto H = DomainDescriptor::half_space(2);
  const Region R = SetDescriptor::power_cusp(H, 1.0, 0.5).region().intersect(Region::annulus(p2(0, 0), 0.125, 0.25));
  const PointList a = sample_region(R, 400, 21);
  const PointList b = sample_region(R, 400, 21);
  REQUIRE(a.size() == 400);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(R.contains(a[i]));
    CHECK(a[i] == b[i]);
  }
  const PointList c = sample_region(R, 400, 22);
  CHECK(c[0] != a[0]);
}

TEST_CASE("property: Whitney cubes satisfy the predicate and are disjoint") {
  auto r = gen::rng(23);
  const DomainDescriptor domains[] = {
      DomainDescriptor::half_space(2),
      DomainDescriptor::graph(GraphFunction(SinusoidGraph{0.3}), 2),
      DomainDescriptor::half_space_like(GraphFunction(SinusoidGraph{0.5, 2.0, 0.0, 0.5}), 2),
      DomainDescriptor::cube_union({Box{p2(0, 0), p2(1, 1)}, Box{p2(1, 0), p2(2, 1)}}),
  };
  for (const auto& D : domains) {
    for (int trial = 0; trial < 3; ++trial) {
      Box w = gen::box(r, 2, -0.5, 1.0, 1.0);
      const auto dec = whitney_decompose(D, w, std::ldexp(1.0, -7));
      for (std::size_t i = 0; i < dec.cubes.size(); ++i) {
        const auto& c = dec.cubes[i];
        CHECK(c.index == i);
        CHECK(c.side == std::ldexp(1.0, c.exponent));
        CHECK(c.dist_boundary >= c.diam * (1 - 1e-12));
        CHECK(c.dist_boundary <= 4 * c.diam * (1 + 1e-12));
        CHECK(overlaps(c.box(), w));
        for (std::size_t j = i + 1; j < dec.cubes.size(); ++j) CHECK_FALSE(interiors_overlap(c, dec.cubes[j]));
      }
    }
  }
}

TEST_CASE("Whitney cubes are canonical across windows") {
  const auto G = DomainDescriptor::graph(GraphFunction(SinusoidGraph{0.3}), 2);
  const double side_min = std::ldexp(1.0, -8);
  const auto a = by_key(whitney_decompose(G, Box{p2(0, 0), p2(1, 1)}, side_min));
  const auto b = by_key(whitney_decompose(G, Box{p2(0.5, -0.5), p2(1.5, 0.75)}, side_min));
  int shared = 0;
  for (const auto& [key, cube] : a) {
    // a cube of one decomposition never partially overlaps a different cube of the other
    for (const auto& [kb, cb] : b) {
      if (key == kb) continue;
      CHECK_FALSE(interiors_overlap(cube, cb));
    }
    if (b.count(key)) ++shared;
  }
  CHECK(shared > 100);
}

TEST_CASE("Whitney coverage of interior points") {
  const auto H = DomainDescriptor::half_space(2);
  const double side_min = std::ldexp(1.0, -8);
  const auto dec = whitney_decompose(H, unit_box(2), side_min);
  auto r = gen::rng(29);
  for (int k = 0; k < 2000; ++k) {
    Point x = gen::point(r, 2, 0.0, 1.0);
    if (x(1) < 5 * std::sqrt(2.0) * side_min) continue;
    bool hit = false;
    for (const auto& c : dec.cubes) hit = hit || c.box().contains(x);
    CHECK(hit);
  }
  CHECK(dec.unresolved_volume < 0.05);
}

TEST_CASE("Whitney focus pruning and budget") {
  const auto H = DomainDescriptor::half_space(2);
  const Region focus = Region::annulus(p2(0.5, 0), 0.125, 0.25);
  const auto full = whitney_decompose(H, unit_box(2), std::ldexp(1.0, -8));
  const auto pruned = whitney_decompose(H, unit_box(2), std::ldexp(1.0, -8), &focus);
  CHECK(pruned.cubes.size() < full.cubes.size());
  for (const auto& c : pruned.cubes) CHECK(focus.may_intersect(c.box()));
  const auto capped = whitney_decompose(H, unit_box(2), std::ldexp(1.0, -8), nullptr, 100);
  CHECK(capped.truncated);
  CHECK_FALSE(full.truncated);
  CHECK_THROWS_AS(whitney_decompose(H, unit_box(2), 0.3), InputError);
}
