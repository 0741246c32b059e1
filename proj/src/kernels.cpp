#include "mthin/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mthin {

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::FreeSpace:
      return "FreeSpace";
    case Provenance::HalfSpaceBoundary:
      return "HalfSpaceBoundary";
    case Provenance::KappaFatFactorized:
      return "KappaFatFactorized";
    case Provenance::MartinFinite:
      return "MartinFinite";
    case Provenance::MartinInfinity:
      return "MartinInfinity";
  }
  return "?";
}

namespace {

double free_value(const ScalingProfile& profile, double r) {
  return phi(profile, r) / std::pow(r, profile.dimension());
}

void require_global(const ScalingProfile& profile, const char* what) {
  if (!profile.has_global())
    throw CapabilityError(std::string(what) + " requires global scaling indices");
}

void require_graph(const DomainDescriptor& domain, const char* what) {
  if (!domain.has_graph_boundary())
    throw CapabilityError(std::string(what) + " requires a half-space, half-space-like or graph domain");
}

double boundary_factor(const ScalingProfile& profile, double delta, double phi_r) {
  if (!(delta > 0.0)) return 0.0;
  return std::sqrt(std::min(1.0, phi(profile, delta) / phi_r));
}

ReferencePoint make_reference(const ScalingProfile& profile, const DomainDescriptor& domain,
                              const Point& x0, bool at_infinity) {
  const double dx0 = delta_D(domain, x0);
  if (!(dx0 > 0.0)) throw DomainError("reference point must lie in D");
  return {x0, free_value(profile, 0.5 * dx0), at_infinity};
}

}  // namespace

ReferencePoint reference_point_finite(const ScalingProfile& profile, const DomainDescriptor& domain,
                                      const Point& z) {
  require_graph(domain, "default reference point");
  const Point x0 = z + 0.5 * domain.r_loc() * domain.inward_normal(z);
  return reference_point_at(profile, domain, x0);
}

ReferencePoint reference_point_infinity(const ScalingProfile& profile, const DomainDescriptor& domain) {
  Point x0 = Point::Zero(domain.dim());
  x0(domain.dim() - 1) = 5.0;
  if (!domain.contains(x0)) throw DomainError("x0 = (0, 5) is not in the domain");
  return make_reference(profile, domain, x0, true);
}

ReferencePoint reference_point_at(const ScalingProfile& profile, const DomainDescriptor& domain,
                                  const Point& x0) {
  const double dx0 = delta_D(domain, x0);
  const double r = domain.r_loc();
  if (!(dx0 > domain.kappa() * r && dx0 < r)) {
    std::ostringstream os;
    os << "reference point needs kappa*R < delta(x0) < R (delta(x0) = " << dx0 << ")";
    throw DomainError(os.str());
  }
  return make_reference(profile, domain, x0, false);
}

KernelEnvelope green_free(const ScalingProfile& profile, const Point& x, const Point& y, double window) {
  const double r = (x - y).norm();
  if (!(r > 0.0)) throw DomainError("green kernel is singular at x = y");
  if (!profile.has_global() && r > window)
    throw RangeError("free Green envelope beyond the local window needs global scaling indices");
  return {free_value(profile, r), 1.0, Provenance::FreeSpace};
}

KernelEnvelope green_halfspace(const ScalingProfile& profile, const Point& x, const Point& y) {
  require_global(profile, "half-space Green envelope");
  const int d = profile.dimension();
  if (x(d - 1) <= 0.0 || y(d - 1) <= 0.0) throw DomainError("half-space Green envelope needs x, y in H");
  const double r = (x - y).norm();
  if (!(r > 0.0)) throw DomainError("green kernel is singular at x = y");
  const double pr = phi(profile, r);
  const double v = pr / std::pow(r, d) * boundary_factor(profile, x(d - 1), pr) *
                   boundary_factor(profile, y(d - 1), pr);
  return {v, 1.0, Provenance::HalfSpaceBoundary};
}

KernelEnvelope green_c11(const ScalingProfile& profile, const DomainDescriptor& domain,
                         const Point& x, const Point& y) {
  require_global(profile, "C^{1,1} Green envelope");
  require_graph(domain, "C^{1,1} Green envelope");
  if (domain.kind() == DomainKind::HalfSpace) return green_halfspace(profile, x, y);
  const double dx = delta_D(domain, x);
  const double dy = delta_D(domain, y);
  if (!(dx > 0.0 && dy > 0.0)) throw DomainError("C^{1,1} Green envelope needs x, y in D");
  const double r = (x - y).norm();
  if (!(r > 0.0)) throw DomainError("green kernel is singular at x = y");
  const double pr = phi(profile, r);
  const double v = pr / std::pow(r, domain.dim()) * boundary_factor(profile, dx, pr) *
                   boundary_factor(profile, dy, pr);
  return {v, 1.0, Provenance::HalfSpaceBoundary};
}

double g_reference(const ScalingProfile& profile, const DomainDescriptor& domain,
                   const ReferencePoint& ref, const Point& x) {
  if (!domain.contains(x)) throw DomainError("g is evaluated on points of D");
  if (!domain.has_graph_boundary() || !profile.has_global())
    throw CapabilityError("no computable Green representative for this domain/profile");
  if ((x - ref.x0).norm() == 0.0) return ref.cap;
  return std::min(green_c11(profile, domain, x, ref.x0).value, ref.cap);
}

double witness_scale(const DomainDescriptor& domain, const Point& x, const Point& y) {
  return std::max({delta_D(domain, x), delta_D(domain, y), (x - y).norm()});
}

bool is_witness(const DomainDescriptor& domain, const ReferencePoint& ref, const Point& x,
                const Point& y, const Point& A) {
  const double r = witness_scale(domain, x, y);
  const double eps1 = domain.kappa() * domain.r_loc() / 24.0;
  if (r >= eps1) return (A - ref.x0).norm() == 0.0;
  return delta_D(domain, A) > 0.5 * domain.kappa() * r && std::max((x - A).norm(), (y - A).norm()) < 5.0 * r;
}

Point find_witness(const DomainDescriptor& domain, const ReferencePoint& ref, const Point& x,
                   const Point& y) {
  const double r = witness_scale(domain, x, y);
  const double eps1 = domain.kappa() * domain.r_loc() / 24.0;
  if (r >= eps1) return ref.x0;
  const Point z = boundary_projection(domain, x);
  return nontangential_point(domain, z, 2.0 * r);
}

KernelEnvelope green_kappa_fat(const ScalingProfile& profile, const DomainDescriptor& domain,
                               const ReferencePoint& ref, const Point& x, const Point& y,
                               const Point& A) {
  const double r = (x - y).norm();
  if (!(r > 0.0)) throw DomainError("green kernel is singular at x = y");
  const double window = std::ldexp(domain.kappa() * domain.kappa() * domain.r_loc(), -7);
  const auto shares_window = [&](const Point& p, const Point& q) {
    const Point z = boundary_projection(domain, p);
    return (p - z).norm() < window && (q - z).norm() < window;
  };
  if (!shares_window(x, y) && !shares_window(y, x))
    throw CapabilityError("kappa-fat Green envelope: points lie in different localization windows");
  if (!is_witness(domain, ref, x, y, A)) throw InputError("kappa-fat Green envelope: invalid witness A");
  const double ga = g_reference(profile, domain, ref, A);
  const double v = g_reference(profile, domain, ref, x) * g_reference(profile, domain, ref, y) *
                   phi(profile, r) / (ga * ga * std::pow(r, domain.dim()));
  return {v, 1.0, Provenance::KappaFatFactorized};
}

KernelEnvelope martin_finite(const ScalingProfile& profile, const DomainDescriptor& domain,
                             const ReferencePoint& ref, const Point& x, const Point& z,
                             MartinForm form) {
  const int d = domain.dim();
  const double r = (x - z).norm();
  if (!(r > 0.0)) throw DomainError("Martin kernel is singular at x = z");
  if (form == MartinForm::C11) {
    require_graph(domain, "C^{1,1} Martin envelope");
    const double dx = delta_D(domain, x);
    if (!(dx > 0.0)) throw DomainError("Martin kernel is evaluated on points of D");
    const double v = std::sqrt(phi(profile, dx)) * std::pow((ref.x0 - z).norm() / r, d);
    return {v, 1.0, Provenance::MartinFinite};
  }
  const double window = std::ldexp(domain.kappa() * domain.kappa() * domain.r_loc(), -7);
  if (!(r < window)) throw RangeError("kappa-fat Martin envelope: x outside the localization window");
  const Point A = nontangential_point(domain, z, r);
  const double ga = g_reference(profile, domain, ref, A);
  const double v = g_reference(profile, domain, ref, x) * phi(profile, r) / (ga * ga * std::pow(r, d));
  return {v, 1.0, Provenance::MartinFinite};
}

KernelEnvelope martin_infinity(const ScalingProfile& profile, const DomainDescriptor& domain,
                               const Point& x, MartinInfinityForm form) {
  require_global(profile, "Martin kernel at infinity");
  require_graph(domain, "Martin kernel at infinity");
  const double dx = delta_D(domain, x);
  if (!(dx > 0.0)) throw DomainError("Martin kernel is evaluated on points of D");
  if (form == MartinInfinityForm::Envelope)
    return {std::sqrt(phi(profile, dx)), 1.0, Provenance::MartinInfinity};
  if (x.norm() < 30.0) throw RangeError("Martin kernel at infinity: |x| >= 30 required for the Green form");
  Point x0 = Point::Zero(domain.dim());
  x0(domain.dim() - 1) = 5.0;
  const double v = green_c11(profile, domain, x, x0).value * std::pow(x.norm(), domain.dim());
  return {v, 1.0, Provenance::MartinInfinity};
}

PairKernel free_kernel(const ScalingProfile& profile) {
  return [profile](const Point& x, const Point& y) { return green_free(profile, x, y, std::numeric_limits<double>::infinity()).value; };
}

PairKernel domain_kernel(const ScalingProfile& profile, const DomainDescriptor& domain) {
  require_global(profile, "domain Green kernel");
  require_graph(domain, "domain Green kernel");
  return [profile, domain](const Point& x, const Point& y) { return green_c11(profile, domain, x, y).value; };
}

}  // namespace mthin
