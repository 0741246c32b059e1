#pragma once

#include "mthin/capacity.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mthin {

enum class Verdict { Convergent, Divergent, Indeterminate };
enum class Method { WienerSeries, AikawaSum, AikawaC11, IntegralTest, GraphTest };
enum class Mode { FiniteAt, Infinity };

const char* to_string(Verdict v);
const char* to_string(Method m);
const char* to_string(Mode m);

struct TailFit {
  std::string model = "none";  // "geometric", "power", "zero" or "none"
  double exponent = 0.0;       // log2 q for geometric tails, -p for power tails
  double ratio = 0.0;          // q = 2^slope of log2(term) against the index
  double residual = 0.0;       // RMS residual of the chosen model, log2 units
  int points = 0;
};

struct TailOutcome {
  Verdict verdict = Verdict::Indeterminate;
  TailFit fit;
  std::vector<std::string> notes;
};

struct TailOptions {
  double margin = 0.05;
  double residual_threshold = 1.0;
  int min_terms = 8;
};

/// Classifies a nonnegative series from its last half. Geometric and power-law
/// models are both fitted; the power model wins when its residual is less than
/// half the geometric one.
TailOutcome tail_verdict(const std::vector<double>& indices, const std::vector<double>& terms,
                         const TailOptions& opt = {});

struct ShellFamily {
  Mode mode;
  Point z;  // unused at infinity
  int n_min;
  int n_max;

  /// {2^{-n-1} <= |x - z| < 2^{-n}} or {2^n <= |x| < 2^{n+1}}.
  Region annulus(int n) const;
  /// E_n or E^n.
  Region shell(const SetDescriptor& E, int n) const;
};

ShellFamily build_shells(Mode mode, const Point& z, int n_min, int n_max);

struct CriterionBudget {
  int n_min = 0;
  int n_max = 0;
  std::size_t cube_count = 0;
  int n_points = 0;
};

struct CriterionReport {
  Method method = Method::WienerSeries;
  Mode mode = Mode::FiniteAt;
  std::optional<Point> z;
  std::vector<double> indices;
  std::vector<double> terms;
  std::vector<double> partial_sums;
  TailFit tail_fit;
  Verdict verdict = Verdict::Indeterminate;
  CriterionBudget budget;
  std::vector<std::string> flags;  // hypothesis checks and resolution warnings
  std::vector<std::string> notes;
};

enum class IntegralForm { Full, Simplified };

struct CriterionOptions {
  std::optional<int> n_min;  // defaults: [3, 24] finite, [1, 20] at infinity
  std::optional<int> n_max;
  int n_points = 600;        // per-shell point budget for Green energies
  int n_points_max = 4096;   // ceiling for thin shells
  int cube_points = 50;      // points per partially covered Whitney cube
  std::size_t cube_budget = std::size_t{1} << 18;
  double rel_tol = 1e-6;
  std::uint64_t seed = 1;
  IntegralForm form = IntegralForm::Simplified;
  bool hardy_check = true;
  TailOptions tail;
};

CriterionReport wiener_series_finite(const ScalingProfile& profile, const DomainDescriptor& domain,
                                     const ReferencePoint& ref, const SetDescriptor& E, const Point& z,
                                     const CriterionOptions& opt = {});

CriterionReport wiener_series_infinity(const ScalingProfile& profile, const DomainDescriptor& domain,
                                       const ReferencePoint& ref, const SetDescriptor& E,
                                       const CriterionOptions& opt = {});

/// Whitney cubes are built per shell and merged; cube terms are aggregated by
/// dyadic distance class before the tail fit.
CriterionReport aikawa_sum_finite(const ScalingProfile& profile, const DomainDescriptor& domain,
                                  const ReferencePoint& ref, const SetDescriptor& E, const Point& z,
                                  const CriterionOptions& opt = {});

CriterionReport aikawa_sum_c11(const ScalingProfile& profile, const DomainDescriptor& domain,
                               const SetDescriptor& E, const Point& z, const CriterionOptions& opt = {});

CriterionReport aikawa_sum_infinity(const ScalingProfile& profile, const DomainDescriptor& domain,
                                    const ReferencePoint& ref, const SetDescriptor& E,
                                    const CriterionOptions& opt = {});

CriterionReport integral_test_finite(const ScalingProfile& profile, const DomainDescriptor& domain,
                                     const ReferencePoint& ref, const SetDescriptor& E, const Point& z,
                                     const CriterionOptions& opt = {});

CriterionReport integral_test_infinity(const ScalingProfile& profile, const DomainDescriptor& domain,
                                       const ReferencePoint& ref, const SetDescriptor& E,
                                       const CriterionOptions& opt = {});

/// Integral of f(x~)|x~|^{-d} over |x~| < 1 (finite, at 0) or |x~| > 1 (infinity).
CriterionReport graph_test(const GraphFunction& f, Mode mode, int dim, const CriterionOptions& opt = {});

/// Exterior-volume check of the local Hardy condition on boundary points near z
/// (a grid along the boundary at infinity when z is empty). Returns the flags raised.
std::vector<std::string> hardy_check(const DomainDescriptor& domain, const std::optional<Point>& z,
                                     std::uint64_t seed = 1);

}  // namespace mthin
