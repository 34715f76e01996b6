#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vakon/types.hpp"

namespace vakon::experiments {

/// One trajectory CSV row. Optional cells are written as empty fields at
/// the indices where the quantity is undefined.
struct TrajRow {
  int k = 0;
  Scalar t = 0, x = 0, theta = 0;
  std::optional<Scalar> u, lambda, H, res_stat, res_con;
};

using TrajTable = std::vector<TrajRow>;

inline constexpr const char* kCsvHeader = "k,t,x,theta,u,lambda,H,res_stat,res_con";

/// Writes the table with 17 significant digits so that parsing the output
/// reproduces every double bitwise.
void write_csv(std::ostream& os, const TrajTable& table);
void write_csv_file(const std::string& path, const TrajTable& table);

/// Parses a table produced by write_csv; rejects unexpected headers or
/// malformed rows.
TrajTable read_csv(std::istream& is);
TrajTable read_csv_file(const std::string& path);

/// A named polyline for the SVG plot.
struct Series {
  std::string label;
  std::vector<std::pair<Scalar, Scalar>> points;
};

/// Deterministic static line plot (fixed palette and layout, no timestamps
/// or other run-dependent content).
void write_svg(std::ostream& os, const std::string& title, const std::string& x_label,
               const std::string& y_label, const std::vector<Series>& series);
void write_svg_file(const std::string& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<Series>& series);

}  // namespace vakon::experiments
