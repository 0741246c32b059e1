#include "mthin/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mthin {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void validate_indices(const ScalingIndices& idx, const char* which) {
  if (!(idx.delta_lo > 0.0 && idx.delta_lo <= idx.delta_hi && idx.delta_hi < 1.0)) {
    std::ostringstream os;
    os << which << " scaling indices must satisfy 0 < delta_lo <= delta_hi < 1 (got "
       << idx.delta_lo << ", " << idx.delta_hi << ")";
    throw InputError(os.str());
  }
  if (!(idx.a_lo > 0.0 && idx.a_hi > 0.0)) {
    throw InputError(std::string(which) + " scaling constants must be positive");
  }
}

void validate_family(const ExponentFamily& family) {
  std::visit(overloaded{
                 [](const IsotropicStable& s) {
                   if (!(s.alpha > 0.0 && s.alpha < 2.0))
                     throw InputError("stable exponent alpha must lie in (0, 2)");
                 },
                 [](const StableMixture& m) {
                   if (m.components.empty()) throw InputError("stable mixture has no components");
                   for (const auto& c : m.components) {
                     if (!(c.alpha > 0.0 && c.alpha < 2.0))
                       throw InputError("mixture exponent alpha must lie in (0, 2)");
                     if (!(c.weight > 0.0)) throw InputError("mixture weights must be positive");
                   }
                 },
                 [](const TabulatedMonotone& tab) {
                   if (tab.t.size() != tab.psi.size())
                     throw InputError("tabulated profile: column length mismatch");
                   if (tab.t.size() < 16)
                     throw InputError("tabulated profile needs at least 16 rows");
                   for (std::size_t i = 0; i < tab.t.size(); ++i) {
                     if (!(tab.t[i] > 0.0) || !(tab.psi[i] > 0.0))
                       throw InputError("tabulated profile: t and Psi(t) must be positive");
                     if (i > 0 && !(tab.t[i] > tab.t[i - 1]))
                       throw InputError("tabulated profile: t must be strictly increasing");
                   }
                 },
             },
             family);
}

double tabulated_psi(const TabulatedMonotone& tab, double t) {
  const double eps = 1e-12;
  if (t < tab.t.front() * (1.0 - eps) || t > tab.t.back() * (1.0 + eps)) {
    std::ostringstream os;
    os << "tabulated profile evaluated at t=" << t << " outside grid [" << tab.t.front() << ", "
       << tab.t.back() << "]";
    throw RangeError(os.str());
  }
  t = std::clamp(t, tab.t.front(), tab.t.back());
  const auto it = std::upper_bound(tab.t.begin(), tab.t.end(), t);
  std::size_t hi = static_cast<std::size_t>(it - tab.t.begin());
  if (hi >= tab.t.size()) hi = tab.t.size() - 1;
  const std::size_t lo = hi - 1;
  const double lt0 = std::log(tab.t[lo]);
  const double lt1 = std::log(tab.t[hi]);
  const double w = (std::log(t) - lt0) / (lt1 - lt0);
  return std::exp((1.0 - w) * std::log(tab.psi[lo]) + w * std::log(tab.psi[hi]));
}

}  // namespace

ScalingProfile::ScalingProfile(ExponentFamily family, int dimension, ScalingIndices local,
                               std::optional<ScalingIndices> global)
    : family_(std::move(family)), dimension_(dimension), local_(local), global_(global) {
  if (dimension_ < 2) throw InputError("dimension must be at least 2");
  validate_family(family_);
  validate_indices(local_, "local");
  if (global_) validate_indices(*global_, "global");
}

ScalingProfile ScalingProfile::isotropic_stable(double alpha, int dimension) {
  const ScalingIndices idx{alpha / 2.0, alpha / 2.0, 1.0, 1.0};
  return ScalingProfile(IsotropicStable{alpha}, dimension, idx, idx);
}

ScalingProfile ScalingProfile::stable_mixture(std::vector<StableComponent> components,
                                              int dimension) {
  double amin = std::numeric_limits<double>::infinity();
  double amax = 0.0;
  for (const auto& c : components) {
    amin = std::min(amin, c.alpha);
    amax = std::max(amax, c.alpha);
  }
  const ScalingIndices idx{amin / 2.0, amax / 2.0, 1.0, 1.0};
  return ScalingProfile(StableMixture{std::move(components)}, dimension, idx, idx);
}

std::optional<double> ScalingProfile::stable_alpha() const {
  if (const auto* s = std::get_if<IsotropicStable>(&family_)) return s->alpha;
  return std::nullopt;
}

double psi(const ScalingProfile& profile, double t) {
  if (!(t > 0.0)) throw DomainError("psi requires t > 0");
  return std::visit(overloaded{
                        [t](const IsotropicStable& s) { return std::pow(t, s.alpha); },
                        [t](const StableMixture& m) {
                          double sum = 0.0;
                          for (const auto& c : m.components) sum += c.weight * std::pow(t, c.alpha);
                          return sum;
                        },
                        [t](const TabulatedMonotone& tab) { return tabulated_psi(tab, t); },
                    },
                    profile.family());
}

double psi_star(const ScalingProfile& profile, double r) {
  if (!(r > 0.0)) throw DomainError("psi_star requires r > 0");
  if (const auto* tab = std::get_if<TabulatedMonotone>(&profile.family())) {
    double best = tabulated_psi(*tab, r);
    for (std::size_t i = 0; i < tab->t.size() && tab->t[i] <= r; ++i) best = std::max(best, tab->psi[i]);
    return best;
  }
  // closed-form families are increasing
  return psi(profile, r);
}

double phi(const ScalingProfile& profile, double r) {
  if (!(r > 0.0)) throw DomainError("phi requires r > 0");
  if (const auto alpha = profile.stable_alpha()) return std::pow(r, *alpha);
  return 1.0 / psi_star(profile, 1.0 / r);
}

double phi_inverse(const ScalingProfile& profile, double v) {
  if (!(v > 0.0)) throw DomainError("phi_inverse requires v > 0");
  const auto eval = [&](double r) {
    try {
      return phi(profile, r);
    } catch (const RangeError&) {
      std::ostringstream os;
      os << "phi_inverse: value " << v << " outside the achievable range of phi";
      throw RangeError(os.str());
    }
  };
  double lo = 1.0;
  double hi = 1.0;
  int steps = 0;
  if (eval(1.0) >= v) {
    while (eval(lo) >= v) {
      hi = lo;
      lo *= 0.5;
      if (++steps > 200) throw RangeError("phi_inverse: value below the range of phi");
    }
  } else {
    while (eval(hi) < v) {
      lo = hi;
      hi *= 2.0;
      if (++steps > 200) throw RangeError("phi_inverse: value above the range of phi");
    }
  }
  // invariant: phi(lo) < v <= phi(hi)
  while (hi / lo - 1.0 > 1e-10) {
    const double mid = std::sqrt(lo * hi);
    if (eval(mid) >= v)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

namespace {

// Checks a <= ratio / lambda^{2 delta} envelopes over pairs (t_i, t_j) of a log grid.
RegimeCheck check_regime(const ScalingProfile& profile, double lo, double hi, int n,
                         bool local_regime) {
  RegimeCheck out;
  if (!(hi > lo)) return out;
  const auto& idx = local_regime ? profile.local() : *profile.global();
  // local: lower exponent delta_lo, upper delta_hi (lambda >= 1);
  // global: lower exponent delta_hi, upper delta_lo (lambda <= 1).
  const double lower_exp = 2.0 * (local_regime ? idx.delta_lo : idx.delta_hi);
  const double upper_exp = 2.0 * (local_regime ? idx.delta_hi : idx.delta_lo);
  std::vector<double> grid(n);
  std::vector<double> values(n);
  for (int i = 0; i < n; ++i) {
    grid[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
    values[i] = psi(profile, grid[i]);
  }
  out.tested = true;
  out.a_lo = std::numeric_limits<double>::infinity();
  out.a_hi = 0.0;
  out.exponent_lo = std::numeric_limits<double>::infinity();
  out.exponent_hi = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      // local regime uses lambda = t_j / t_i >= 1, global lambda <= 1
      if (local_regime ? (j < i) : (j > i)) continue;
      const double lambda = grid[j] / grid[i];
      const double ratio = values[j] / values[i];
      out.a_lo = std::min(out.a_lo, ratio / std::pow(lambda, lower_exp));
      out.a_hi = std::max(out.a_hi, ratio / std::pow(lambda, upper_exp));
      const double slope = std::log(ratio) / std::log(lambda);
      out.exponent_lo = std::min(out.exponent_lo, slope);
      out.exponent_hi = std::max(out.exponent_hi, slope);
    }
  }
  constexpr double slack = 1.01;
  out.pass = out.a_lo * slack >= idx.a_lo && out.a_hi <= idx.a_hi * slack;
  return out;
}

}  // namespace

ScalingCertificate check_weak_scaling(const ScalingProfile& profile, double t_min, double t_max,
                                      int grid_size) {
  if (grid_size < 16) throw InputError("check_weak_scaling: grid_size must be at least 16");
  if (!(t_min > 0.0 && t_min < t_max)) throw InputError("check_weak_scaling: need 0 < t_min < t_max");
  ScalingCertificate cert;
  cert.local = check_regime(profile, std::max(1.0, t_min), t_max, grid_size, true);
  if (profile.has_global()) cert.global = check_regime(profile, t_min, std::min(1.0, t_max), grid_size, false);
  return cert;
}

std::pair<double, double> levy_density_envelope(const ScalingProfile& profile, double r,
                                                double r_cut) {
  if (!(r > 0.0)) throw DomainError("levy_density_envelope requires r > 0");
  const int d = profile.dimension();
  if (r > r_cut) {
    if (!profile.has_global())
      throw RangeError("levy_density_envelope: r beyond the local cutoff and no global indices");
    const double value = 1.0 / (std::pow(r, d) * phi(profile, r));
    return {value, value};
  }
  const double value = psi(profile, 1.0 / r) / std::pow(r, d);
  return {value, value};
}

}  // namespace mthin
