#pragma once

#include "mthin/core.hpp"

#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace mthin {

struct StableComponent {
  double alpha;
  double weight;
};

/// Psi(t) = t^alpha.
struct IsotropicStable {
  double alpha;
};

/// Psi(t) = sum_i w_i t^{alpha_i}.
struct StableMixture {
  std::vector<StableComponent> components;
};

/// (t, Psi(t)) samples on a log-spaced grid, interpolated log-log.
struct TabulatedMonotone {
  std::vector<double> t;
  std::vector<double> psi;
};

using ExponentFamily = std::variant<IsotropicStable, StableMixture, TabulatedMonotone>;

/// Weak scaling indices and constants. Local regime (t >= 1, lambda >= 1):
///   a_lo lambda^{2 delta_lo} Psi(t) <= Psi(lambda t) <= a_hi lambda^{2 delta_hi} Psi(t).
/// Global regime (t <= 1, lambda <= 1) uses the same fields with the roles of the
/// exponents swapped, matching the small-argument condition.
struct ScalingIndices {
  double delta_lo;
  double delta_hi;
  double a_lo = 1.0;
  double a_hi = 1.0;
};

/// A radial Levy exponent with declared scaling behaviour in dimension d.
class ScalingProfile {
 public:
  ScalingProfile(ExponentFamily family, int dimension, ScalingIndices local,
                 std::optional<ScalingIndices> global = std::nullopt);

  /// Stable profile with delta = alpha/2 and unit constants in both regimes.
  static ScalingProfile isotropic_stable(double alpha, int dimension);
  /// Mixture with indices alpha_min/2, alpha_max/2 in both regimes.
  static ScalingProfile stable_mixture(std::vector<StableComponent> components, int dimension);

  const ExponentFamily& family() const { return family_; }
  int dimension() const { return dimension_; }
  const ScalingIndices& local() const { return local_; }
  const std::optional<ScalingIndices>& global() const { return global_; }
  bool has_global() const { return global_.has_value(); }
  bool is_stable() const { return std::holds_alternative<IsotropicStable>(family_); }
  /// Stable exponent alpha, or nothing for other families.
  std::optional<double> stable_alpha() const;

 private:
  ExponentFamily family_;
  int dimension_;
  ScalingIndices local_;
  std::optional<ScalingIndices> global_;
};

double psi(const ScalingProfile& profile, double t);
/// Running supremum sup_{s <= r} Psi(s).
double psi_star(const ScalingProfile& profile, double r);
/// Phi(r) = 1 / Psi*(1/r).
double phi(const ScalingProfile& profile, double r);
/// Smallest r with Phi(r) >= v, to relative tolerance 1e-10.
double phi_inverse(const ScalingProfile& profile, double v);

struct RegimeCheck {
  bool tested = false;
  bool pass = true;
  double a_lo = 0.0;  // tightest constant in the lower envelope
  double a_hi = 0.0;  // tightest constant in the upper envelope
  double exponent_lo = 0.0;  // smallest observed log-ratio slope
  double exponent_hi = 0.0;  // largest observed log-ratio slope
};

struct ScalingCertificate {
  RegimeCheck local;
  RegimeCheck global;
  bool pass() const { return local.pass && global.pass; }
};

/// Grid verification of the declared weak scaling envelopes with slack 1.01.
ScalingCertificate check_weak_scaling(const ScalingProfile& profile, double t_min, double t_max,
                                      int grid_size);

/// Comparison value Psi(1/r)/r^d of the Levy density j(r), reported as (lower, upper).
/// Beyond r_cut only the global form 1/(r^d Phi(r)) is available, and only under
/// declared global indices.
std::pair<double, double> levy_density_envelope(const ScalingProfile& profile, double r,
                                                double r_cut);

}  // namespace mthin
