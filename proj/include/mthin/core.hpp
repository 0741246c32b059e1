#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mthin {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Point = VectorX<double>;
using PointList = std::vector<Point>;

/// Axis-aligned closed box [lo, hi] in R^d.
struct Box {
  Point lo;
  Point hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Point& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
  bool empty() const { return (hi.array() <= lo.array()).any(); }
  double volume() const { return empty() ? 0.0 : (hi - lo).prod(); }
  Point center() const { return 0.5 * (lo + hi); }
  double diameter() const { return (hi - lo).norm(); }
};

Box intersect(const Box& a, const Box& b);
bool overlaps(const Box& a, const Box& b);
/// Euclidean distance from x to the box (0 inside).
double distance_to_box(const Point& x, const Box& b);

/// Error categories map onto CLI exit codes: input/domain -> 2,
/// capability -> 3, numeric non-convergence -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 2; }
};

class InputError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class CapabilityError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 3; }
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, Point best = {})
      : Error(what), best_candidate(std::move(best)) {}
  int exit_code() const override { return 4; }
  Point best_candidate;
};

/// Runs fn(i) for i in [0, n) across hardware threads. Results must be
/// written to disjoint slots so output does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Tail of a point: the first d-1 coordinates.
inline Point tilde(const Point& x) { return x.head(x.size() - 1); }

inline Point make_point(const Point& xt, double xd) {
  Point x(xt.size() + 1);
  x.head(xt.size()) = xt;
  x(xt.size()) = xd;
  return x;
}

/// Volume of the unit ball in R^d.
double unit_ball_volume(int d);
/// Surface measure of the unit sphere S^{d-1} in R^d.
double unit_sphere_area(int d);

}  // namespace mthin
