#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "vakon/types.hpp"

using namespace vakon;

namespace {

ConfigPoint pt(Scalar a, Scalar b) {
  ConfigPoint q(2);
  q << a, b;
  return q;
}

}  // namespace

TEST_CASE("validate_split accepts the standard two-dof partition") {
  DofSplit split{2, {0}, {1}};
  SplitReport report = validate_split(split);
  CHECK(report.valid);
  CHECK(report.violations.empty());
  CHECK_NOTHROW(require_valid_split(split));
}

TEST_CASE("validate_split rejects overlapping index lists") {
  DofSplit split{2, {0}, {0}};
  SplitReport report = validate_split(split);
  CHECK_FALSE(report.valid);
  CHECK_FALSE(report.violations.empty());
  CHECK_THROWS_AS(require_valid_split(split), std::invalid_argument);
}

TEST_CASE("validate_split rejects partitions that skip an index") {
  DofSplit split{3, {0}, {2}};
  SplitReport report = validate_split(split);
  CHECK_FALSE(report.valid);
  CHECK_FALSE(report.violations.empty());
}

TEST_CASE("validate_split requires both lists nonempty") {
  DofSplit split{2, {0, 1}, {}};
  CHECK_FALSE(validate_split(split).valid);
  DofSplit split2{2, {}, {0, 1}};
  CHECK_FALSE(validate_split(split2).valid);
}

TEST_CASE("select_rows picks coordinates in the requested order") {
  Vector v(3);
  v << 10.0, 20.0, 30.0;
  Vector out = select_rows(v, {2, 0});
  REQUIRE(out.size() == 2);
  CHECK(out(0) == 30.0);
  CHECK(out(1) == 10.0);
}

TEST_CASE("DiscretePath stores points and step") {
  std::vector<ConfigPoint> pts = {pt(0, 0), pt(1, 2), pt(2, 4)};
  DiscretePath path(pts, 0.5);
  CHECK(path.size() == 3);
  CHECK(path.dim() == 2);
  CHECK(path.h() == 0.5);
  CHECK(path[1](1) == 2.0);
}

TEST_CASE("DiscretePath rejects mixed dimensions and bad steps") {
  ConfigPoint q3(3);
  q3 << 1, 2, 3;
  std::vector<ConfigPoint> mixed = {pt(0, 0), q3};
  CHECK_THROWS_AS(DiscretePath(mixed, 0.1), std::invalid_argument);

  std::vector<ConfigPoint> pts = {pt(0, 0), pt(1, 1)};
  CHECK_THROWS_AS(DiscretePath(pts, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(DiscretePath(pts, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(DiscretePath({}, 0.1), std::invalid_argument);
}

TEST_CASE("MultiplierSeq enforces a uniform entry length") {
  Vector a(1), b(1);
  a << 0.5;
  b << -0.25;
  MultiplierSeq seq({a, b});
  CHECK(seq.size() == 2);
  CHECK(seq.m() == 1);
  CHECK(seq[1](0) == -0.25);

  Vector c(2);
  c << 1, 2;
  CHECK_THROWS_AS(MultiplierSeq({a, c}), std::invalid_argument);
}

TEST_CASE("MultiplierSeq allows zero-length multipliers") {
  MultiplierSeq seq({Vector(0), Vector(0)});
  CHECK(seq.size() == 2);
  CHECK(seq.m() == 0);
}

TEST_CASE("window returns the requested contiguous points") {
  std::vector<ConfigPoint> pts;
  for (int k = 0; k < 5; ++k) pts.push_back(pt(k, 2 * k));
  DiscretePath path(pts, 0.1);

  auto w0 = window(path, 0, 3);
  REQUIRE(w0.size() == 3);
  CHECK(w0[0] == path[0]);
  CHECK(w0[2] == path[2]);

  auto w2 = window(path, 2, 3);
  CHECK(w2[0] == path[2]);
  CHECK(w2[2] == path[4]);
}

TEST_CASE("window agrees with direct indexing for every valid placement") {
  std::vector<ConfigPoint> pts;
  for (int k = 0; k < 6; ++k) pts.push_back(pt(0.3 * k, 1.0 - 0.2 * k));
  DiscretePath path(pts, 0.2);
  for (int width = 1; width <= path.size(); ++width) {
    for (int k = 0; k + width <= path.size(); ++k) {
      auto w = window(path, k, width);
      REQUIRE(static_cast<int>(w.size()) == width);
      for (int j = 0; j < width; ++j) CHECK(w[j] == path[k + j]);
    }
  }
}

TEST_CASE("window rejects out-of-range placements") {
  std::vector<ConfigPoint> pts;
  for (int k = 0; k < 5; ++k) pts.push_back(pt(k, k));
  DiscretePath path(pts, 0.1);
  CHECK_THROWS_AS(window(path, 3, 3), std::out_of_range);
  CHECK_THROWS_AS(window(path, -1, 2), std::out_of_range);
}

TEST_CASE("solver settings default to the documented values") {
  SolverSettings s;
  CHECK(s.newton_tol == 1e-10);
  CHECK(s.max_iter == 50);
  CHECK(s.fd_step_first == doctest::Approx(1.4901161193847656e-08).epsilon(1e-12));
  CHECK(s.fd_step_second == doctest::Approx(6.0554544523933395e-06).epsilon(1e-12));
  CHECK(s.singular_tol == 1e-12);
  CHECK(s.backtrack_max == 30);
}
