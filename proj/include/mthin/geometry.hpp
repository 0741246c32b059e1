#pragma once

#include "mthin/core.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

namespace mthin {

// ---------------------------------------------------------------------------
// Functions R^{d-1} -> R used as boundary graphs h and set profiles f.

struct ConstantGraph {
  double value;
};

/// offset + amplitude * sin(frequency * x[axis] + phase)
struct SinusoidGraph {
  double amplitude;
  double frequency = 1.0;
  double phase = 0.0;
  double offset = 0.0;
  int axis = 0;
};

/// c |x|^p with c > 0, p >= 0.
struct PowerGraph {
  double c;
  double p;
};

/// Piecewise-linear data along axis 0 (other coordinates ignored), constant
/// extension outside the table.
struct TabulatedGraph {
  std::vector<double> x;
  std::vector<double> y;
  double lipschitz;
};

class GraphFunction {
 public:
  using Kind = std::variant<ConstantGraph, SinusoidGraph, PowerGraph, TabulatedGraph>;

  GraphFunction(Kind kind);  // NOLINT: implicit from a family is convenient

  const Kind& kind() const { return kind_; }
  double value(const Point& xt) const;
  Point gradient(const Point& xt) const;
  Eigen::MatrixXd hessian(const Point& xt) const;
  /// Lipschitz constant of the function; infinite for superlinear power growth.
  double lipschitz() const;
  /// Lipschitz constant of the gradient (0 when piecewise linear).
  double gradient_lipschitz() const;
  /// Global bounds (may be infinite).
  std::pair<double, double> bounds() const;
  /// Conservative range over the closed box lo <= x <= hi in R^{d-1}.
  std::pair<double, double> range_over(const Point& lo, const Point& hi) const;

 private:
  Kind kind_;
};

// ---------------------------------------------------------------------------

enum class DomainKind { HalfSpace, HalfSpaceLike, Graph, CubeUnion };

/// An open set D in R^d with declared fatness constant and localization radius.
class DomainDescriptor {
 public:
  static DomainDescriptor half_space(int dim, double kappa = 0.25, double r_loc = 0.5);
  /// {x_d > h(x~)} with 0 <= h <= 1, so that H_1 is inside D inside H.
  static DomainDescriptor half_space_like(GraphFunction h, int dim, double kappa = 0.25,
                                          double r_loc = 0.5);
  /// {x_d > h(x~)} for bounded C^{1,1} h.
  static DomainDescriptor graph(GraphFunction h, int dim, double kappa = 0.25, double r_loc = 0.5);
  /// Union of open axis-aligned cubes with pairwise disjoint interiors.
  static DomainDescriptor cube_union(std::vector<Box> cubes, double kappa = 0.25,
                                     double r_loc = 0.5);

  DomainKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double kappa() const { return kappa_; }
  double r_loc() const { return r_loc_; }
  /// Boundary graph h (h = 0 for the half-space); empty for cube unions.
  const std::optional<GraphFunction>& boundary() const { return boundary_; }
  bool has_graph_boundary() const { return boundary_.has_value(); }
  const std::vector<Box>& cubes() const { return cubes_; }

  bool contains(const Point& x) const;
  /// Unit inward normal at a boundary point of a graph-type domain.
  Point inward_normal(const Point& z) const;

 private:
  DomainDescriptor(DomainKind kind, int dim, double kappa, double r_loc);

  DomainKind kind_;
  int dim_;
  double kappa_;
  double r_loc_;
  std::optional<GraphFunction> boundary_;
  std::vector<Box> cubes_;
};

/// dist(x, D^c); zero outside D and on the boundary.
double delta_D(const DomainDescriptor& domain, const Point& x);

/// Nearest boundary point z_x with |z_x - x| = delta_D(x).
Point boundary_projection(const DomainDescriptor& domain, const Point& x);

/// Distance from a closed box to the boundary, or nullopt when the box lies
/// entirely outside D. Returns 0 when the box meets the complement.
std::optional<double> box_boundary_distance(const DomainDescriptor& domain, const Box& box);

/// Point A with B(A, kappa r) inside D and inside B(z, r).
Point nontangential_point(const DomainDescriptor& domain, const Point& z, double r);

/// Point A with B(A, kappa r) inside D minus the closed ball B(0, r), and |A| < r / kappa.
Point nontangential_point_at_infinity(const DomainDescriptor& domain, double r);

struct EstimateWithError {
  double estimate;
  double half_width;
};

/// Monte Carlo estimate of |D^c intersect B(z_x, delta)| / delta^d with a 95% half-width.
EstimateWithError exterior_volume_ratio(const DomainDescriptor& domain, const Point& x,
                                        int n_samples, std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Regions: Borel sets with a vertical-fiber description used for sampling,
// quadrature and set algebra.

struct Interval {
  double lo;
  double hi;
  double length() const { return hi > lo ? hi - lo : 0.0; }
};
using IntervalList = std::vector<Interval>;

IntervalList intersect(const IntervalList& a, const IntervalList& b);
/// Sorted, merged union.
IntervalList normalize(IntervalList list);

class Region {
 public:
  using Membership = std::function<bool(const Point&)>;
  using Fibers = std::function<IntervalList(const Point&)>;
  using BoxTest = std::function<bool(const Box&)>;

  Region(Box bbox, Membership contains, Fibers fibers, BoxTest may_intersect,
         BoxTest covers = nullptr);

  static Region empty(int dim);
  static Region box(const Box& b);
  static Region box_union(std::vector<Box> boxes);
  /// {a <= |x - center| < b}
  static Region annulus(const Point& center, double r_in, double r_out);

  int dim() const { return bbox_.dim(); }
  const Box& bbox() const { return bbox_; }
  bool bounded() const { return bbox_.lo.allFinite() && bbox_.hi.allFinite(); }
  bool is_empty() const { return bbox_.empty(); }
  bool contains(const Point& x) const { return contains_(x); }
  IntervalList fibers(const Point& xt) const { return fibers_(xt); }
  /// Conservative: false only if the box certainly misses the region.
  bool may_intersect(const Box& b) const { return !is_empty() && overlaps(bbox_, b) && may_intersect_(b); }

  /// Conservative: true only if the box certainly lies inside the region (up to
  /// its boundary).
  bool covers(const Box& b) const { return covers_ && covers_(b); }

  Region intersect(const Region& other) const;

 private:
  Box bbox_;
  Membership contains_;
  Fibers fibers_;
  BoxTest may_intersect_;
  BoxTest covers_;
};

struct LipschitzSubgraph {
  GraphFunction f;
};
struct PowerCusp {
  double c;
  double p;
};
struct WhitneySubfamily {
  std::vector<std::size_t> indices;
  std::vector<Box> cubes;
};
struct ExplicitUnion {
  std::vector<Box> boxes;
};

/// A Borel subset E of an ambient domain. Subgraph variants are
/// {h(x~) < x_d <= h(x~) + f(x~)} over the ambient boundary graph h.
class SetDescriptor {
 public:
  using Kind = std::variant<LipschitzSubgraph, PowerCusp, WhitneySubfamily, ExplicitUnion>;

  static SetDescriptor subgraph(const DomainDescriptor& domain, GraphFunction f);
  static SetDescriptor power_cusp(const DomainDescriptor& domain, double c, double p);
  static SetDescriptor whitney_subfamily(std::vector<std::size_t> indices, std::vector<Box> cubes);
  static SetDescriptor explicit_union(std::vector<Box> boxes, int dim);

  const Kind& kind() const { return kind_; }
  const Region& region() const { return region_; }
  /// f for subgraph-type sets.
  std::optional<GraphFunction> profile_function() const;
  bool is_whitney_subfamily() const { return std::holds_alternative<WhitneySubfamily>(kind_); }

 private:
  SetDescriptor(Kind kind, Region region) : kind_(std::move(kind)), region_(std::move(region)) {}
  Kind kind_;
  Region region_;
};

// ---------------------------------------------------------------------------

struct WhitneyCube {
  std::size_t index;
  Point center;
  double side;
  double dist_boundary;
  double diam;
  int exponent;                      // side = 2^exponent
  std::vector<std::int64_t> lattice;  // cube = lattice * side + [0, side]^d

  Box box() const;
};

struct WhitneyDecomposition {
  std::vector<WhitneyCube> cubes;
  std::size_t unresolved_count = 0;
  double unresolved_volume = 0.0;  // "unresolved boundary mass"
  bool empty_warning = false;
  bool truncated = false;  // cube budget exhausted
  int base_exponent = 0;
};

/// Dyadic Whitney decomposition of window intersect D down to side_min. Every
/// emitted cube is the maximal dyadic cube with dist >= diam containing it, so
/// decompositions of different windows agree on shared cubes. When a focus
/// region is given, cubes that certainly miss it are pruned. A nonzero
/// max_cubes stops the subdivision once that many cubes have been produced.
WhitneyDecomposition whitney_decompose(const DomainDescriptor& domain, const Box& window,
                                       double side_min, const Region* focus = nullptr,
                                       std::size_t max_cubes = 0);

/// True iff the dyadic cubes a and b overlap in their interiors (integer test).
bool interiors_overlap(const WhitneyCube& a, const WhitneyCube& b);

}  // namespace mthin
