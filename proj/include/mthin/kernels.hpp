#pragma once

#include "mthin/geometry.hpp"
#include "mthin/scaling.hpp"

#include <functional>

namespace mthin {

enum class Provenance { FreeSpace, HalfSpaceBoundary, KappaFatFactorized, MartinFinite, MartinInfinity };

const char* to_string(Provenance p);

/// Representative of a comparability class. Class constants are carried as
/// metadata only; computations use the representative.
struct KernelEnvelope {
  double value;
  double class_constant = 1.0;
  Provenance provenance;
};

/// x0 and the cap applied to g = min(G_D(., x0), cap).
struct ReferencePoint {
  Point x0;
  double cap;
  bool at_infinity = false;
};

/// x0 = z + (R_loc / 2) n(z), cap = Phi(r)/r^d at r = delta_D(x0)/2.
ReferencePoint reference_point_finite(const ScalingProfile& profile, const DomainDescriptor& domain,
                                      const Point& z);
/// x0 = (0, ..., 0, 5), cap as in the finite case.
ReferencePoint reference_point_infinity(const ScalingProfile& profile, const DomainDescriptor& domain);
/// Caller-chosen x0 (used for perturbation runs); checks the finite-mode normalization.
ReferencePoint reference_point_at(const ScalingProfile& profile, const DomainDescriptor& domain,
                                  const Point& x0);

/// Phi(|x-y|)/|x-y|^d. Without global indices only |x-y| <= window is allowed.
KernelEnvelope green_free(const ScalingProfile& profile, const Point& x, const Point& y,
                          double window = 4.0);

/// Free envelope with both boundary factors (1 ^ Phi(x_d)/Phi(|x-y|))^{1/2}.
KernelEnvelope green_halfspace(const ScalingProfile& profile, const Point& x, const Point& y);

/// Same product form with delta_D for half-space-like and graph domains.
KernelEnvelope green_c11(const ScalingProfile& profile, const DomainDescriptor& domain,
                         const Point& x, const Point& y);

/// g(x) = min(G_D(x, x0), cap) using the C^{1,1} envelope.
double g_reference(const ScalingProfile& profile, const DomainDescriptor& domain,
                   const ReferencePoint& ref, const Point& x);

/// r(x, y) = max(delta(x), delta(y), |x - y|).
double witness_scale(const DomainDescriptor& domain, const Point& x, const Point& y);
/// True iff A is admissible for the pair (x, y).
bool is_witness(const DomainDescriptor& domain, const ReferencePoint& ref, const Point& x,
                const Point& y, const Point& A);
/// Deterministic admissible point: x0 at large scales, otherwise a nontangential
/// point above the projection of x.
Point find_witness(const DomainDescriptor& domain, const ReferencePoint& ref, const Point& x,
                   const Point& y);

/// g(x) g(y) Phi(|x-y|) / (g(A)^2 |x-y|^d). Both points must share one
/// localization window B(z, 2^-7 kappa^2 R).
KernelEnvelope green_kappa_fat(const ScalingProfile& profile, const DomainDescriptor& domain,
                               const ReferencePoint& ref, const Point& x, const Point& y,
                               const Point& A);

enum class MartinForm { KappaFat, C11 };

KernelEnvelope martin_finite(const ScalingProfile& profile, const DomainDescriptor& domain,
                             const ReferencePoint& ref, const Point& x, const Point& z,
                             MartinForm form = MartinForm::C11);

enum class MartinInfinityForm { Envelope, GreenTimesNorm };

/// Phi(delta_D(x))^{1/2}, or G_D(x, x0) |x|^d for |x| >= 30.
KernelEnvelope martin_infinity(const ScalingProfile& profile, const DomainDescriptor& domain,
                               const Point& x, MartinInfinityForm form = MartinInfinityForm::Envelope);

using PairKernel = std::function<double(const Point&, const Point&)>;

PairKernel free_kernel(const ScalingProfile& profile);
/// C^{1,1} envelope for graph-type domains (requires global indices).
PairKernel domain_kernel(const ScalingProfile& profile, const DomainDescriptor& domain);

}  // namespace mthin
