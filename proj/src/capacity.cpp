#include "mthin/capacity.hpp"

#include "mthin/quadrature.hpp"
#include "mthin/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mthin {

namespace {

std::vector<double> half_nearest_neighbour(const PointList& points) {
  const std::size_t n = points.size();
  if (n < 2) throw InputError("kernel matrix needs at least two points");
  std::vector<double> rho(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = (points[i] - points[j]).norm();
      if (!(r > 0.0)) throw InputError("kernel matrix: duplicate points");
      rho[i] = std::min(rho[i], r);
      rho[j] = std::min(rho[j], r);
    }
  }
  for (auto& r : rho) r *= 0.5;
  return rho;
}

Point diagonal_partner(const Point& p, double rho) {
  Point q = p;
  q(0) += rho;
  return q;
}

}  // namespace

Eigen::MatrixXd assemble_kernel_matrix(const PairKernel& kernel, const PointList& points) {
  const auto rho = half_nearest_neighbour(points);
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd M(n, n);
  parallel_for(points.size(), [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    M(ii, ii) = kernel(points[i], diagonal_partner(points[i], rho[i]));
    for (std::size_t j = i + 1; j < points.size(); ++j) M(ii, static_cast<Eigen::Index>(j)) = kernel(points[i], points[j]);
  });
  M.triangularView<Eigen::StrictlyLower>() = M.transpose().triangularView<Eigen::StrictlyLower>();
  return M;
}

Eigen::MatrixXd green_matrix(const ScalingProfile& profile, const DomainDescriptor* domain,
                             const PointList& points, KernelChoice choice) {
  const int d = profile.dimension();
  const auto rho = half_nearest_neighbour(points);
  const std::size_t n = points.size();
  Eigen::MatrixXd M(n, n);
  const auto freev = [&](double r) { return phi(profile, r) / std::pow(r, d); };
  if (choice == KernelChoice::Free) {
    parallel_for(n, [&](std::size_t i) {
      const auto ii = static_cast<Eigen::Index>(i);
      M(ii, ii) = freev(rho[i]);
      for (std::size_t j = i + 1; j < n; ++j)
        M(ii, static_cast<Eigen::Index>(j)) = freev((points[i] - points[j]).norm());
    });
  } else {
    if (!domain) throw InputError("domain kernel requires a domain");
    if (!profile.has_global()) throw CapabilityError("domain Green kernel requires global scaling indices");
    if (!domain->has_graph_boundary())
      throw CapabilityError("domain Green kernel requires a half-space, half-space-like or graph domain");
    std::vector<double> phi_delta(n);
    std::vector<double> phi_delta_partner(n);
    parallel_for(n, [&](std::size_t i) {
      const double di = delta_D(*domain, points[i]);
      if (!(di > 0.0)) throw DomainError("domain kernel: sample point outside D");
      phi_delta[i] = phi(profile, di);
      const double dq = delta_D(*domain, diagonal_partner(points[i], rho[i]));
      phi_delta_partner[i] = dq > 0.0 ? phi(profile, dq) : phi_delta[i];
    });
    const auto value = [&](double r, double pa, double pb) {
      const double pr = phi(profile, r);
      return pr / std::pow(r, d) * std::sqrt(std::min(1.0, pa / pr)) * std::sqrt(std::min(1.0, pb / pr));
    };
    parallel_for(n, [&](std::size_t i) {
      const auto ii = static_cast<Eigen::Index>(i);
      M(ii, ii) = value(rho[i], phi_delta[i], phi_delta_partner[i]);
      for (std::size_t j = i + 1; j < n; ++j)
        M(ii, static_cast<Eigen::Index>(j)) = value((points[i] - points[j]).norm(), phi_delta[i], phi_delta[j]);
    });
  }
  M.triangularView<Eigen::StrictlyLower>() = M.transpose().triangularView<Eigen::StrictlyLower>();
  return M;
}

EnergyResult energy_from_matrix(const Eigen::MatrixXd& M, PointList points, const SolverOptions& opt) {
  const auto sol = equilibrium_energy(M, opt);
  EnergyResult out;
  out.energy = sol.energy;
  out.capacity = 1.0 / sol.energy;
  out.lower_bound = sol.lower_bound;
  out.upper_bound = sol.upper_bound;
  out.capacity_lower = 1.0 / sol.upper_bound;
  out.capacity_upper = 1.0 / sol.lower_bound;
  out.iterations = sol.iterations;
  out.certified = sol.certified;
  out.n_points = static_cast<int>(points.size());
  out.minimizer = {std::move(points), sol.weights};
  if (!out.certified) out.flags.emplace_back("uncertified");
  return out;
}

EnergyResult capacity_of_points(const PairKernel& kernel, PointList points, const SolverOptions& opt) {
  const Eigen::MatrixXd M = assemble_kernel_matrix(kernel, points);
  return energy_from_matrix(M, std::move(points), opt);
}

EnergyResult capacity_of(const PairKernel& kernel, const Region& K, int n, std::uint64_t seed,
                         const SolverOptions& opt) {
  if (n < 50) throw InputError("capacity_of needs at least 50 points");
  return capacity_of_points(kernel, sample_region(K, n, seed), opt);
}

EnergyResult ball_capacity(const ScalingProfile& profile, double r, int n, std::uint64_t seed) {
  if (!(r > 0.0)) throw InputError("ball radius must be positive");
  if (n < 50) throw InputError("ball capacity needs at least 50 points");
  const Region ball = Region::annulus(Point::Zero(profile.dimension()), 0.0, r);
  PointList pts = sample_region(ball, n, seed);
  const Eigen::MatrixXd M = green_matrix(profile, nullptr, pts, KernelChoice::Free);
  return energy_from_matrix(M, std::move(pts));
}

UFunction reference_function(const ScalingProfile& profile, const DomainDescriptor& domain,
                             const ReferencePoint& ref) {
  return [profile, domain, ref](const Point& x) { return g_reference(profile, domain, ref, x); };
}

EnergyResult green_energy_gamma_u_points(const ScalingProfile& profile, const DomainDescriptor& domain,
                                         const UFunction& u, PointList points, KernelChoice choice,
                                         const SolverOptions& opt) {
  Eigen::MatrixXd M = green_matrix(profile, &domain, points, choice);
  if (u) {
    Eigen::VectorXd inv(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double v = u(points[i]);
      if (!(v > 0.0) || !std::isfinite(v)) throw InputError("u vanishes on E: k_u blows up");
      inv(static_cast<Eigen::Index>(i)) = 1.0 / v;
    }
    M = inv.asDiagonal() * M * inv.asDiagonal();
  }
  return energy_from_matrix(M, std::move(points), opt);
}

EnergyResult green_energy_gamma_u(const ScalingProfile& profile, const DomainDescriptor& domain,
                                  const UFunction& u, const Region& E, int n, std::uint64_t seed,
                                  KernelChoice choice, const SolverOptions& opt) {
  if (n < 50) throw InputError("green energy needs at least 50 points");
  return green_energy_gamma_u_points(profile, domain, u, sample_region(E, n, seed), choice, opt);
}

SigmaResult sigma_u(const ScalingProfile& profile, const DomainDescriptor& domain, const UFunction& u,
                    const Region& E, double rel_tol) {
  const auto integrand = [&](const Point& x) {
    const double dx = delta_D(domain, x);
    if (!(dx > 0.0)) return 0.0;
    const double uv = u ? u(x) : 1.0;
    return uv * uv * psi(profile, 1.0 / dx);
  };
  SigmaResult out;
  if (!domain.has_graph_boundary()) {
    const auto r = integrate_region(E, integrand, rel_tol);
    return {r.value, r.error, r.converged, false};
  }
  // truncations {x_d >= h + t} expose a non-integrable boundary singularity
  const GraphFunction h = *domain.boundary();
  const int m = domain.dim() - 1;
  std::vector<double> values;
  QuadratureResult last;
  for (int k = 1; k <= 4; ++k) {
    const double t = std::ldexp(1.0, -8 * k);
    Box everything{Point::Constant(domain.dim(), -std::numeric_limits<double>::infinity()),
                   Point::Constant(domain.dim(), std::numeric_limits<double>::infinity())};
    const Region above(
        everything, [h, t, m](const Point& x) { return x(m) >= h.value(x.head(m)) + t; },
        [h, t](const Point& xt) {
          return IntervalList{{h.value(xt) + t, std::numeric_limits<double>::max()}};
        },
        [](const Box&) { return true; });
    last = integrate_region(E.intersect(above), integrand, rel_tol);
    values.push_back(last.value);
  }
  const double d1 = values[2] - values[1];
  const double d2 = values[3] - values[2];
  out.value = values[3];
  out.error = last.error + std::abs(d2);
  out.converged = last.converged;
  out.divergent = d2 > 10.0 * rel_tol * std::abs(values[3]) && d2 >= 0.5 * d1;
  return out;
}

ComparabilityReport comparability_diagnostic(const ScalingProfile& profile, const DomainDescriptor& domain,
                                             const ReferencePoint& ref,
                                             const std::vector<WhitneyCube>& cubes, int n,
                                             std::uint64_t seed) {
  ComparabilityReport rep;
  rep.cubes.resize(cubes.size());
  const UFunction g = reference_function(profile, domain, ref);
  parallel_for(cubes.size(), [&](std::size_t i) {
    const Region q = Region::box(cubes[i].box());
    const PointList pts = sample_region(q, n, seed + i);
    const auto cap = green_energy_gamma_u_points(profile, domain, {}, pts, KernelChoice::Free);
    const auto cap_d = green_energy_gamma_u_points(profile, domain, {}, pts, KernelChoice::Domain);
    const auto gam = green_energy_gamma_u_points(profile, domain, g, pts, KernelChoice::Domain);
    const auto sig = sigma_u(profile, domain, g, q);
    rep.cubes[i] = {cubes[i].index, cap.capacity, cap_d.capacity, cap.capacity / cap_d.capacity,
                    sig.value,      gam.capacity, sig.value / gam.capacity};
  });
  if (!rep.cubes.empty()) {
    rep.min_ratio = rep.max_ratio = rep.cubes.front().ratio;
    rep.min_sigma_ratio = rep.max_sigma_ratio = rep.cubes.front().sigma_ratio;
  }
  for (const auto& c : rep.cubes) {
    rep.min_ratio = std::min(rep.min_ratio, c.ratio);
    rep.max_ratio = std::max(rep.max_ratio, c.ratio);
    rep.min_sigma_ratio = std::min(rep.min_sigma_ratio, c.sigma_ratio);
    rep.max_sigma_ratio = std::max(rep.max_sigma_ratio, c.sigma_ratio);
    if (c.ratio > 1.05) ++rep.one_sided_violations;
  }
  return rep;
}

QuasiAdditivityReport quasi_additivity_diagnostic(const ScalingProfile& profile,
                                                  const DomainDescriptor& domain, const UFunction& u,
                                                  const Region& E, const std::vector<WhitneyCube>& cubes,
                                                  int n, std::uint64_t seed) {
  QuasiAdditivityReport rep;
  rep.gamma_union = green_energy_gamma_u(profile, domain, u, E, n, seed).capacity;
  std::vector<double> parts(cubes.size(), 0.0);
  parallel_for(cubes.size(), [&](std::size_t i) {
    const Region piece = E.intersect(Region::box(cubes[i].box()));
    if (piece.is_empty() || !(region_volume(piece, 1e-4).value > 0.0)) return;
    parts[i] = green_energy_gamma_u(profile, domain, u, piece, n, seed + 1 + i).capacity;
  });
  for (double p : parts) {
    rep.gamma_sum += p;
    if (p > 0.0) ++rep.pieces;
  }
  rep.ratio = rep.gamma_union / rep.gamma_sum;
  rep.subadditive = rep.ratio <= 1.05;
  return rep;
}

}  // namespace mthin
