#include "vakon/types.hpp"

#include <algorithm>
#include <sstream>

namespace vakon {

SplitReport validate_split(const DofSplit& split) {
  SplitReport report;
  auto complain = [&](std::string msg) {
    report.valid = false;
    report.violations.push_back(std::move(msg));
  };

  if (split.n <= 0) complain("n must be positive, got " + std::to_string(split.n));
  if (split.actuated.empty()) complain("actuated index list is empty");
  if (split.unactuated.empty()) complain("unactuated index list is empty");

  std::vector<int> seen(std::max(split.n, 0), 0);
  auto scan = [&](const std::vector<int>& idx, const char* label) {
    for (int i : idx) {
      if (i < 0 || i >= split.n) {
        complain(std::string(label) + " index " + std::to_string(i) + " outside [0," +
                 std::to_string(split.n) + ")");
      } else {
        ++seen[i];
      }
    }
  };
  scan(split.actuated, "actuated");
  scan(split.unactuated, "unactuated");

  for (int i = 0; i < static_cast<int>(seen.size()); ++i) {
    if (seen[i] == 0) complain("index " + std::to_string(i) + " missing from both lists");
    if (seen[i] > 1) complain("index " + std::to_string(i) + " listed more than once");
  }
  return report;
}

void require_valid_split(const DofSplit& split) {
  SplitReport report = validate_split(split);
  if (report.valid) return;
  std::ostringstream msg;
  msg << "invalid dof split:";
  for (const auto& v : report.violations) msg << " " << v << ";";
  throw std::invalid_argument(msg.str());
}

Vector select_rows(const Vector& v, const std::vector<int>& idx) {
  Vector out(static_cast<int>(idx.size()));
  for (int i = 0; i < out.size(); ++i) out[i] = v(idx[i]);
  return out;
}

DiscretePath::DiscretePath(std::vector<ConfigPoint> points, Scalar h)
    : points_(std::move(points)), h_(h) {
  if (points_.empty()) throw std::invalid_argument("DiscretePath: empty point sequence");
  if (!(h_ > 0)) throw std::invalid_argument("DiscretePath: h must be positive, got " + std::to_string(h_));
  const auto n = points_.front().size();
  for (std::size_t k = 0; k < points_.size(); ++k) {
    if (points_[k].size() != n)
      throw std::invalid_argument("DiscretePath: point " + std::to_string(k) + " has dimension " +
                                  std::to_string(points_[k].size()) + ", expected " + std::to_string(n));
    if (!all_finite(points_[k]))
      throw std::invalid_argument("DiscretePath: point " + std::to_string(k) + " has non-finite entries");
  }
}

MultiplierSeq::MultiplierSeq(std::vector<Vector> lams) : lams_(std::move(lams)) {
  if (lams_.empty()) return;
  const auto m = lams_.front().size();
  for (std::size_t k = 0; k < lams_.size(); ++k) {
    if (lams_[k].size() != m)
      throw std::invalid_argument("MultiplierSeq: entry " + std::to_string(k) + " has length " +
                                  std::to_string(lams_[k].size()) + ", expected " + std::to_string(m));
    if (!all_finite(lams_[k]))
      throw std::invalid_argument("MultiplierSeq: entry " + std::to_string(k) + " has non-finite entries");
  }
}

std::vector<ConfigPoint> window(const DiscretePath& path, int k, int width) {
  if (width <= 0) throw std::out_of_range("window: width must be positive, got " + std::to_string(width));
  if (k < 0 || k + width > path.size())
    throw std::out_of_range("window: [" + std::to_string(k) + ", " + std::to_string(k + width) +
                            ") does not fit in path of length " + std::to_string(path.size()));
  return {path.points().begin() + k, path.points().begin() + k + width};
}

}  // namespace vakon
