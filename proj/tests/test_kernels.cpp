#include "generators.hpp"
#include "mthin/kernels.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace mthin;

namespace {

Point p2(double a, double b) {
  Point p(2);
  p << a, b;
  return p;
}

// r^{alpha-d} (1 ^ (x_d/r)^alpha)^{1/2} (1 ^ (y_d/r)^alpha)^{1/2}
double halfspace_oracle(double alpha, const Point& x, const Point& y) {
  const int d = static_cast<int>(x.size());
  const double r = (x - y).norm();
  const double fx = std::sqrt(std::min(1.0, std::pow(x(d - 1) / r, alpha)));
  const double fy = std::sqrt(std::min(1.0, std::pow(y(d - 1) / r, alpha)));
  return std::pow(r, alpha - d) * fx * fy;
}

}  // namespace

TEST_CASE("property: free and half-space envelopes match closed forms") {
  auto r = gen::rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const int d = gen::integer(r, 2, 4);
    const double alpha = gen::uniform(r, 0.2, 1.9);
    const auto P = ScalingProfile::isotropic_stable(alpha, d);
    const Point x = gen::upper_point(r, d, 2.0, 1e-4, 3.0);
    const Point y = gen::upper_point(r, d, 2.0, 1e-4, 3.0);
    const double dist = (x - y).norm();
    CHECK(green_free(P, x, y).value == doctest::Approx(std::pow(dist, alpha - d)).epsilon(1e-10));
    const double hs = green_halfspace(P, x, y).value;
    CHECK(hs == doctest::Approx(halfspace_oracle(alpha, x, y)).epsilon(1e-10));
    CHECK(hs == doctest::Approx(green_halfspace(P, y, x).value).epsilon(1e-12));
    CHECK(hs <= green_free(P, x, y).value * (1 + 1e-12));
  }
}

TEST_CASE("C11 envelope on a shifted flat boundary equals the half-space one") {
  const auto P = ScalingProfile::isotropic_stable(1.2, 2);
  const auto D = DomainDescriptor::half_space_like(GraphFunction(ConstantGraph{0.5}), 2);
  auto r = gen::rng(37);
  for (int trial = 0; trial < 200; ++trial) {
    const Point x = gen::upper_point(r, 2, 2.0, 1e-3, 2.0);
    const Point y = gen::upper_point(r, 2, 2.0, 1e-3, 2.0);
    const Point shift = p2(0.0, 0.5);
    CHECK(green_c11(P, D, x + shift, y + shift).value == doctest::Approx(green_halfspace(P, x, y).value).epsilon(1e-10));
  }
}

TEST_CASE("missing global indices restrict the envelopes") {
  const ScalingProfile P(IsotropicStable{1.0}, 2, {0.5, 0.5});
  const auto H = DomainDescriptor::half_space(2);
  CHECK(green_free(P, p2(0, 1), p2(1, 1)).value == doctest::Approx(1.0));
  CHECK_THROWS_AS(green_free(P, p2(0, 1), p2(10, 1)), RangeError);
  CHECK_THROWS_AS(green_halfspace(P, p2(0, 1), p2(1, 1)), CapabilityError);
  CHECK_THROWS_AS(martin_infinity(P, H, p2(0, 1)), CapabilityError);
}

TEST_CASE("reference point normalization") {
  const auto P = ScalingProfile::isotropic_stable(1.0, 2);
  const auto H = DomainDescriptor::half_space(2);
  const auto ref = reference_point_finite(P, H, p2(0.3, 0.0));
  CHECK(ref.x0(0) == doctest::Approx(0.3));
  CHECK(ref.x0(1) == doctest::Approx(0.25));
  // cap = Phi(r)/r^d at r = delta(x0)/2
  CHECK(ref.cap == doctest::Approx(1.0 / 0.125));
  CHECK_THROWS_AS(reference_point_at(P, H, p2(0, 0.9)), DomainError);
  const auto inf = reference_point_infinity(P, H);
  CHECK(inf.at_infinity);
  CHECK(inf.x0(1) == 5.0);

  const auto U = DomainDescriptor::cube_union({Box{p2(0, 0), p2(1, 1)}});
  CHECK_THROWS_AS(reference_point_finite(P, U, p2(0.5, 0.0)), CapabilityError);
}

TEST_CASE("property: g is capped and the witness is admissible") {
  const auto P = ScalingProfile::isotropic_stable(1.0, 2);
  const auto G = DomainDescriptor::graph(GraphFunction(SinusoidGraph{0.3}), 2);
  const auto ref = reference_point_finite(P, G, p2(0.0, 0.0));
  auto r = gen::rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const double s = gen::uniform(r, -0.2, 0.2);
    const double h = G.boundary()->value(Point::Constant(1, s));
    const Point x = p2(s, h + gen::log_uniform(r, 1e-6, 0.5));
    const Point y = x + p2(gen::uniform(r, -1e-3, 1e-3), gen::log_uniform(r, 1e-6, 1e-3));
    const double gx = g_reference(P, G, ref, x);
    CHECK(gx > 0.0);
    CHECK(gx <= ref.cap);
    if (!G.contains(y)) continue;
    const Point A = find_witness(G, ref, x, y);
    CHECK(is_witness(G, ref, x, y, A));
  }
}

TEST_CASE("kappa-fat envelope requires a shared window and a valid witness") {
  const auto P = ScalingProfile::isotropic_stable(1.0, 2);
  const auto H = DomainDescriptor::half_space(2);
  const auto ref = reference_point_finite(P, H, p2(0.0, 0.0));
  const Point x = p2(0.0, 1e-5);
  const Point far = p2(0.3, 1e-5);
  CHECK_THROWS_AS(green_kappa_fat(P, H, ref, x, far, ref.x0), CapabilityError);
  const Point y = p2(2e-5, 3e-5);
  CHECK_THROWS_AS(green_kappa_fat(P, H, ref, x, y, p2(0.0, 0.4)), InputError);
  const Point A = find_witness(H, ref, x, y);
  CHECK(green_kappa_fat(P, H, ref, x, y, A).value > 0.0);
}

TEST_CASE("property: Martin envelopes") {
  auto r = gen::rng(43);
  const auto H = DomainDescriptor::half_space(2);
  for (double alpha : {0.6, 1.0, 1.7}) {
    const auto P = ScalingProfile::isotropic_stable(alpha, 2);
    // envelope form is Phi(delta)^{1/2} = delta^{alpha/2}
    for (int trial = 0; trial < 100; ++trial) {
      const Point x = gen::upper_point(r, 2, 50.0, 1e-4, 1e3);
      CHECK(martin_infinity(P, H, x).value == doctest::Approx(std::pow(x(1), alpha / 2)).epsilon(1e-10));
    }
    // the Green form agrees with the envelope up to a bounded factor far away
    double lo = INFINITY, hi = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      Point x = gen::upper_point(r, 2, 1e4, 1.0, 1e4);
      if (x.norm() < 30.0) continue;
      const double ratio = martin_infinity(P, H, x, MartinInfinityForm::GreenTimesNorm).value /
                           martin_infinity(P, H, x).value;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    CHECK(hi / lo < 4.0);
    CHECK_THROWS_AS(martin_infinity(P, H, p2(1, 1), MartinInfinityForm::GreenTimesNorm), RangeError);
  }
}

TEST_CASE("Martin kernel at a finite point decays like the Poisson kernel") {
  const auto P = ScalingProfile::isotropic_stable(1.0, 2);
  const auto H = DomainDescriptor::half_space(2);
  const Point z = p2(0.0, 0.0);
  const auto ref = reference_point_finite(P, H, z);
  // along the normal: delta^{alpha/2} |x - z|^{-d}, slope alpha/2 - d
  const double a = martin_finite(P, H, ref, p2(0, 1e-3), z).value;
  const double b = martin_finite(P, H, ref, p2(0, 2e-3), z).value;
  CHECK(std::log2(b / a) == doctest::Approx(0.5 - 2.0));
  const Point x = p2(1e-6, 2e-6);
  const double kf = martin_finite(P, H, ref, x, z, MartinForm::KappaFat).value;
  const double c11 = martin_finite(P, H, ref, x, z).value;
  CHECK(kf / c11 > 1e-2);
  CHECK(kf / c11 < 1e2);
}

TEST_CASE("pair kernels") {
  const auto P = ScalingProfile::isotropic_stable(1.0, 2);
  const auto H = DomainDescriptor::half_space(2);
  CHECK(free_kernel(P)(p2(0, 1), p2(0, 101)) == doctest::Approx(0.01));
  CHECK(domain_kernel(P, H)(p2(0, 1), p2(0, 2)) == doctest::Approx(green_halfspace(P, p2(0, 1), p2(0, 2)).value));
  const auto U = DomainDescriptor::cube_union({Box{p2(0, 0), p2(1, 1)}});
  CHECK_THROWS_AS(domain_kernel(P, U), CapabilityError);
  CHECK(std::string(to_string(Provenance::KappaFatFactorized)) == "KappaFatFactorized");
}
