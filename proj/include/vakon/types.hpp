#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vakon {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A configuration point: dense coordinate vector of the configuration space.
using ConfigPoint = Vector;

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// Tolerances and iteration limits shared by every solver in the library.
/// Finite-difference steps are relative: the step used at coordinate x is
/// step * (1 + |x|).
struct SolverSettings {
  Scalar newton_tol = 1e-10;
  int max_iter = 50;
  Scalar fd_step_first = 1.4901161193847656e-08;   // sqrt(eps)
  Scalar fd_step_second = 6.0554544523933395e-06;  // cbrt(eps)
  Scalar singular_tol = 1e-12;
  int backtrack_max = 30;
};

/// Partition of configuration indices into actuated and unactuated degrees
/// of freedom. Indices are 0-based, each must appear in exactly one list.
struct DofSplit {
  int n = 0;
  std::vector<int> actuated;
  std::vector<int> unactuated;
};

/// Validation report for a DofSplit: empty `violations` means valid.
struct SplitReport {
  bool valid = true;
  std::vector<std::string> violations;
};

SplitReport validate_split(const DofSplit& split);

/// Throwing convenience wrapper around validate_split.
void require_valid_split(const DofSplit& split);

/// Rows of `v` selected by `idx`, in the order given.
Vector select_rows(const Vector& v, const std::vector<int>& idx);

/// Uniformly spaced sequence of configuration points with step h.
/// Construction rejects empty sequences, mixed dimensions, non-finite
/// entries and h <= 0.
class DiscretePath {
 public:
  DiscretePath(std::vector<ConfigPoint> points, Scalar h);

  int size() const { return static_cast<int>(points_.size()); }
  int dim() const { return static_cast<int>(points_.front().size()); }
  Scalar h() const { return h_; }
  const ConfigPoint& operator[](int k) const { return points_.at(k); }
  const std::vector<ConfigPoint>& points() const { return points_; }

 private:
  std::vector<ConfigPoint> points_;
  Scalar h_;
};

/// Sequence of constraint multipliers, one per constraint window.
/// All entries share a common length m (m = 0 is allowed).
class MultiplierSeq {
 public:
  explicit MultiplierSeq(std::vector<Vector> lams);

  int size() const { return static_cast<int>(lams_.size()); }
  int m() const { return lams_.empty() ? 0 : static_cast<int>(lams_.front().size()); }
  const Vector& operator[](int k) const { return lams_.at(k); }
  const std::vector<Vector>& values() const { return lams_; }

 private:
  std::vector<Vector> lams_;
};

/// Contiguous window path[k], ..., path[k+width-1]; throws std::out_of_range
/// (naming k, width and the path length) when the window does not fit.
std::vector<ConfigPoint> window(const DiscretePath& path, int k, int width);

}  // namespace vakon
