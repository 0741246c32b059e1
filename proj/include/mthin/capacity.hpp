#pragma once

#include "mthin/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mthin {

struct DiscreteMeasure {
  PointList points;
  Eigen::VectorXd weights;
};

/// Result of minimizing mu^T M mu over the probability simplex.
template <typename Scalar>
struct SimplexMinimum {
  VectorX<Scalar> weights;
  Scalar energy;
  Scalar lower_bound;  // min over the support of (M mu)_i
  Scalar upper_bound;  // max over the support of (M mu)_i
  long iterations;
  bool certified;
};

struct SolverOptions {
  double gap_tol = 1e-6;
  long max_iterations = 100000;
  double support_threshold = 1e-10;
};

/// Frank-Wolfe with away steps and exact line search for min mu^T M mu on the
/// simplex. Stops once both the Frank-Wolfe gap and the away gap fall below
/// gap_tol * energy.
template <typename Derived>
SimplexMinimum<typename Derived::Scalar> equilibrium_energy(const Eigen::MatrixBase<Derived>& M,
                                                            const SolverOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = M.rows();
  if (n == 0 || M.cols() != n) throw InputError("equilibrium_energy needs a nonempty square matrix");
  if (!M.allFinite()) throw InputError("equilibrium_energy: non-finite matrix entries");
  VectorX<Scalar> mu = VectorX<Scalar>::Constant(n, Scalar(1) / Scalar(n));
  VectorX<Scalar> g = M * mu;
  Scalar energy = mu.dot(g);
  long it = 0;
  bool certified = false;
  for (; it < opt.max_iterations; ++it) {
    if (it % 256 == 255) {
      g.noalias() = M * mu;
      energy = mu.dot(g);
    }
    Eigen::Index s = 0;
    g.minCoeff(&s);
    Eigen::Index v = -1;
    Scalar gv = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mu(i) > Scalar(0) && g(i) > gv) {
        gv = g(i);
        v = i;
      }
    }
    const Scalar fw_gap = energy - g(s);
    const Scalar away_gap = gv - energy;
    if (Scalar(2) * fw_gap <= Scalar(opt.gap_tol) * energy &&
        Scalar(2) * away_gap <= Scalar(opt.gap_tol) * energy) {
      certified = true;
      break;
    }
    if (fw_gap >= away_gap) {
      const Scalar slope = g(s) - energy;
      const Scalar curv = M(s, s) - Scalar(2) * g(s) + energy;
      Scalar gamma = curv > Scalar(0) ? std::min(Scalar(1), -slope / curv) : Scalar(1);
      gamma = std::max(gamma, Scalar(0));
      mu *= Scalar(1) - gamma;
      mu(s) += gamma;
      g = (Scalar(1) - gamma) * g + gamma * M.col(s);
    } else {
      const Scalar mv = mu(v);
      const Scalar gamma_max = mv < Scalar(1) ? mv / (Scalar(1) - mv) : std::numeric_limits<Scalar>::infinity();
      const Scalar slope = energy - gv;
      const Scalar curv = energy - Scalar(2) * gv + M(v, v);
      Scalar gamma = curv > Scalar(0) ? -slope / curv : gamma_max;
      gamma = std::clamp(gamma, Scalar(0), gamma_max);
      if (!std::isfinite(static_cast<double>(gamma))) break;
      mu *= Scalar(1) + gamma;
      mu(v) -= gamma;
      if (gamma == gamma_max) mu(v) = Scalar(0);
      g = (Scalar(1) + gamma) * g - gamma * M.col(v);
    }
    mu = mu.cwiseMax(Scalar(0));
    mu /= mu.sum();
    energy = mu.dot(g);
  }
  g.noalias() = M * mu;
  energy = mu.dot(g);
  Scalar lo = std::numeric_limits<Scalar>::infinity();
  Scalar hi = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mu(i) > Scalar(opt.support_threshold)) {
      lo = std::min(lo, g(i));
      hi = std::max(hi, g(i));
    }
  }
  // the bracket contains the energy by construction; guard against rounding
  lo = std::min(lo, energy);
  hi = std::max(hi, energy);
  return {mu, energy, lo, hi, it, certified};
}

struct EnergyResult {
  double energy = 0.0;
  double capacity = 0.0;
  double lower_bound = 0.0;  // bracket for the energy
  double upper_bound = 0.0;
  double capacity_lower = 0.0;  // transported bracket 1/upper, 1/lower
  double capacity_upper = 0.0;
  DiscreteMeasure minimizer;
  long iterations = 0;
  int n_points = 0;
  bool certified = false;
  std::vector<std::string> flags;
};

/// M_ij = kernel(p_i, p_j); M_ii = kernel(p_i, p_i + rho_i e_1) with rho_i half
/// the nearest-neighbour distance.
Eigen::MatrixXd assemble_kernel_matrix(const PairKernel& kernel, const PointList& points);

enum class KernelChoice {
  Free,    // G
  Domain,  // C^{1,1} envelope of G_D
};

/// Kernel matrix of G or G_D with boundary distances cached per point.
Eigen::MatrixXd green_matrix(const ScalingProfile& profile, const DomainDescriptor* domain,
                             const PointList& points, KernelChoice choice);

EnergyResult energy_from_matrix(const Eigen::MatrixXd& M, PointList points, const SolverOptions& opt = {});

/// Capacity of a finite cloud (at least two points).
EnergyResult capacity_of_points(const PairKernel& kernel, PointList points, const SolverOptions& opt = {});

/// Capacity of a compact region from n quasi-uniform samples.
EnergyResult capacity_of(const PairKernel& kernel, const Region& K, int n, std::uint64_t seed = 1,
                         const SolverOptions& opt = {});

/// Closed ball of radius r centred at the origin of R^d with the free kernel.
EnergyResult ball_capacity(const ScalingProfile& profile, double r, int n, std::uint64_t seed = 1);

using UFunction = std::function<double(const Point&)>;

/// u = g for the given reference point.
UFunction reference_function(const ScalingProfile& profile, const DomainDescriptor& domain,
                             const ReferencePoint& ref);

/// gamma_u(E) as the capacity for k_u = G/(u(x)u(y)). An empty u means u = 1.
EnergyResult green_energy_gamma_u(const ScalingProfile& profile, const DomainDescriptor& domain,
                                  const UFunction& u, const Region& E, int n, std::uint64_t seed = 1,
                                  KernelChoice choice = KernelChoice::Domain,
                                  const SolverOptions& opt = {});

/// Same on a fixed cloud, so callers can reuse samples.
EnergyResult green_energy_gamma_u_points(const ScalingProfile& profile, const DomainDescriptor& domain,
                                         const UFunction& u, PointList points,
                                         KernelChoice choice = KernelChoice::Domain,
                                         const SolverOptions& opt = {});

struct SigmaResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
  bool divergent = false;
};

/// Integral of u^2 Psi(1/delta_D) over E.
SigmaResult sigma_u(const ScalingProfile& profile, const DomainDescriptor& domain, const UFunction& u,
                    const Region& E, double rel_tol = 1e-4);

struct CubeRatio {
  std::size_t index;
  double cap_free;
  double cap_domain;
  double ratio;        // Cap / Cap_D
  double sigma;        // sigma_u(Q)
  double gamma;        // gamma_u(Q)
  double sigma_ratio;  // sigma / gamma
};

struct ComparabilityReport {
  std::vector<CubeRatio> cubes;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  double min_sigma_ratio = 0.0;
  double max_sigma_ratio = 0.0;
  std::size_t one_sided_violations = 0;  // cubes with Cap > 1.05 Cap_D
};

ComparabilityReport comparability_diagnostic(const ScalingProfile& profile, const DomainDescriptor& domain,
                                             const ReferencePoint& ref,
                                             const std::vector<WhitneyCube>& cubes, int n,
                                             std::uint64_t seed = 1);

struct QuasiAdditivityReport {
  double gamma_union = 0.0;
  double gamma_sum = 0.0;
  double ratio = 0.0;
  bool subadditive = true;  // ratio <= 1.05
  std::size_t pieces = 0;
};

QuasiAdditivityReport quasi_additivity_diagnostic(const ScalingProfile& profile,
                                                  const DomainDescriptor& domain, const UFunction& u,
                                                  const Region& E, const std::vector<WhitneyCube>& cubes,
                                                  int n, std::uint64_t seed = 1);

}  // namespace mthin
