#include "vakon/table_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vakon::experiments {

namespace {

std::string format_full(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_cell(const std::optional<Scalar>& v) {
  return v ? format_full(*v) : std::string();
}

Scalar parse_number(const std::string& field, int line_no, const char* column) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw std::invalid_argument("csv line " + std::to_string(line_no) + ": column '" + column +
                                "' is not a number: '" + field + "'");
  }
  return value;
}

std::optional<Scalar> parse_optional(const std::string& field, int line_no, const char* column) {
  if (field.empty()) return std::nullopt;
  return parse_number(field, line_no, column);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string format_tick(Scalar v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void write_csv(std::ostream& os, const TrajTable& table) {
  os << kCsvHeader << '\n';
  for (const TrajRow& row : table) {
    os << row.k << ',' << format_full(row.t) << ',' << format_full(row.x) << ','
       << format_full(row.theta) << ',' << format_cell(row.u) << ',' << format_cell(row.lambda)
       << ',' << format_cell(row.H) << ',' << format_cell(row.res_stat) << ','
       << format_cell(row.res_con) << '\n';
  }
}

void write_csv_file(const std::string& path, const TrajTable& table) {
  std::ofstream os(path);
  if (!os) throw std::invalid_argument("cannot open for writing: " + path);
  write_csv(os, table);
  if (!os) throw std::runtime_error("failed while writing: " + path);
}

TrajTable read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("csv: missing header line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) {
    throw std::invalid_argument("csv: unexpected header '" + line + "'");
  }
  TrajTable table;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_fields(line);
    if (f.size() != 9) {
      throw std::invalid_argument("csv line " + std::to_string(line_no) + ": expected 9 fields, got " +
                                  std::to_string(f.size()));
    }
    TrajRow row;
    row.k = static_cast<int>(parse_number(f[0], line_no, "k"));
    row.t = parse_number(f[1], line_no, "t");
    row.x = parse_number(f[2], line_no, "x");
    row.theta = parse_number(f[3], line_no, "theta");
    row.u = parse_optional(f[4], line_no, "u");
    row.lambda = parse_optional(f[5], line_no, "lambda");
    row.H = parse_optional(f[6], line_no, "H");
    row.res_stat = parse_optional(f[7], line_no, "res_stat");
    row.res_con = parse_optional(f[8], line_no, "res_con");
    table.push_back(row);
  }
  return table;
}

TrajTable read_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open for reading: " + path);
  return read_csv(is);
}

void write_svg(std::ostream& os, const std::string& title, const std::string& x_label,
               const std::string& y_label, const std::vector<Series>& series) {
  constexpr int kWidth = 880;
  constexpr int kHeight = 560;
  constexpr double kLeft = 80, kRight = 840, kTop = 60, kBottom = 500;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const Series& s : series) {
    for (const auto& [px, py] : s.points) {
      xmin = std::min(xmin, px);
      xmax = std::max(xmax, px);
      ymin = std::min(ymin, py);
      ymax = std::max(ymax, py);
    }
  }
  if (!std::isfinite(xmin)) {  // no data at all
    xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  }
  if (xmax - xmin <= 0) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin <= 0) {
    ymin -= 0.5;
    ymax += 0.5;
  }

  const auto map_x = [&](double v) { return kLeft + (v - xmin) / (xmax - xmin) * (kRight - kLeft); };
  const auto map_y = [&](double v) { return kBottom - (v - ymin) / (ymax - ymin) * (kBottom - kTop); };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" fill=\"white\"/>\n";
  os << "  <text x=\"" << kWidth / 2 << "\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\""
     << " font-size=\"18\">" << escape_xml(title) << "</text>\n";

  // Grid: five divisions on each axis, labelled at machine-independent positions.
  for (int i = 0; i <= 5; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 5.0;
    const double fy = ymin + (ymax - ymin) * i / 5.0;
    const double gx = map_x(fx);
    const double gy = map_y(fy);
    os << "  <line x1=\"" << format_tick(gx) << "\" y1=\"" << kTop << "\" x2=\"" << format_tick(gx)
       << "\" y2=\"" << kBottom << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    os << "  <line x1=\"" << kLeft << "\" y1=\"" << format_tick(gy) << "\" x2=\"" << kRight
       << "\" y2=\"" << format_tick(gy) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    os << "  <text x=\"" << format_tick(gx) << "\" y=\"" << kBottom + 20
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << format_tick(fx)
       << "</text>\n";
    os << "  <text x=\"" << kLeft - 8 << "\" y=\"" << format_tick(gy + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << format_tick(fy)
       << "</text>\n";
  }
  os << "  <rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kRight - kLeft
     << "\" height=\"" << kBottom - kTop << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "  <text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" << escape_xml(x_label)
     << "</text>\n";
  os << "  <text x=\"20\" y=\"" << (kTop + kBottom) / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" transform=\"rotate(-90 20 "
     << (kTop + kBottom) / 2 << ")\">" << escape_xml(y_label) << "</text>\n";

  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  constexpr int kPaletteSize = 6;
  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % kPaletteSize];
    os << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t pi = 0; pi < series[si].points.size(); ++pi) {
      if (pi) os << ' ';
      os << format_tick(map_x(series[si].points[pi].first)) << ','
         << format_tick(map_y(series[si].points[pi].second));
    }
    os << "\"/>\n";
    const double ly = kTop + 18 + 18 * static_cast<double>(si);
    os << "  <line x1=\"" << kRight - 150 << "\" y1=\"" << format_tick(ly - 4) << "\" x2=\""
       << kRight - 120 << "\" y2=\"" << format_tick(ly - 4) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "  <text x=\"" << kRight - 112 << "\" y=\"" << format_tick(ly)
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape_xml(series[si].label)
       << "</text>\n";
  }
  os << "</svg>\n";
}

void write_svg_file(const std::string& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<Series>& series) {
  std::ofstream os(path);
  if (!os) throw std::invalid_argument("cannot open for writing: " + path);
  write_svg(os, title, x_label, y_label, series);
  if (!os) throw std::runtime_error("failed while writing: " + path);
}

}  // namespace vakon::experiments
