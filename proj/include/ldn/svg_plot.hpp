#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace ldn {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::size_t pos = 0;
  auto next_line = [&](std::string& line) {
    if (pos >= text.size()) return false;
    const auto nl = text.find('\n', pos);
    line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos
                                                                    : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return cells;
  };
  std::string line;
  if (!next_line(line) || line.empty()) throw std::invalid_argument("csv: missing header row");
  t.header = split(line);
  while (next_line(line)) {
    if (line.empty()) continue;  // tolerate a trailing blank line
    auto cells = split(line);
    if (cells.size() != t.header.size())
      throw std::invalid_argument("csv: row has " + std::to_string(cells.size()) +
                                  " cells, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

namespace detail {

inline bool parse_cell(const std::string& cell, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(cell, &used);
    return used == cell.size();
  } catch (const std::exception&) {
    return false;
  }
}

inline std::string fixed2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace detail

// Static line chart: first column is the x axis, every other column whose
// cells all parse as numbers becomes one polyline. Same input, same bytes.
inline std::string render_metrics_svg(const CsvTable& table) {
  if (table.header.empty()) throw std::invalid_argument("svg: empty header");
  const std::size_t cols = table.header.size();
  const std::size_t n = table.rows.size();

  std::vector<std::vector<double>> numeric(cols);
  std::vector<bool> is_numeric(cols, true);
  for (std::size_t c = 0; c < cols; ++c) {
    numeric[c].resize(n);
    for (std::size_t r = 0; r < n; ++r)
      if (!detail::parse_cell(table.rows[r][c], numeric[c][r])) {
        is_numeric[c] = false;
        break;
      }
  }
  if (n > 0 && !is_numeric[0])
    throw std::invalid_argument("svg: first column must be numeric (it is the x axis)");

  std::vector<std::size_t> series;
  for (std::size_t c = 1; c < cols; ++c)
    if (is_numeric[c] && n > 0) series.push_back(c);

  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  if (n > 0) {
    x_lo = *std::min_element(numeric[0].begin(), numeric[0].end());
    x_hi = *std::max_element(numeric[0].begin(), numeric[0].end());
    if (!series.empty()) {
      y_lo = numeric[series[0]][0];
      y_hi = y_lo;
      for (std::size_t c : series)
        for (double v : numeric[c]) {
          y_lo = std::min(y_lo, v);
          y_hi = std::max(y_hi, v);
        }
    }
  }
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  constexpr double kw = 800.0, kh = 480.0;
  constexpr double ml = 70.0, mr = 160.0, mt = 24.0, mb = 48.0;
  const double pw = kw - ml - mr, ph = kh - mt - mb;
  auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return mt + ph - (y - y_lo) / (y_hi - y_lo) * ph; };

  static constexpr std::array<const char*, 8> palette = {
      "#1667b8", "#c83c2e", "#2d8a44", "#8a4fb0",
      "#c98018", "#188a8a", "#b03a72", "#5b5b20"};

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"480\" "
         "viewBox=\"0 0 800 480\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"480\" fill=\"#ffffff\"/>\n";

  // Axes and ticks.
  svg += "<g stroke=\"#333333\" stroke-width=\"1\">\n";
  svg += "<line x1=\"" + detail::fixed2(ml) + "\" y1=\"" + detail::fixed2(mt) + "\" x2=\"" +
         detail::fixed2(ml) + "\" y2=\"" + detail::fixed2(mt + ph) + "\"/>\n";
  svg += "<line x1=\"" + detail::fixed2(ml) + "\" y1=\"" + detail::fixed2(mt + ph) +
         "\" x2=\"" + detail::fixed2(ml + pw) + "\" y2=\"" + detail::fixed2(mt + ph) +
         "\"/>\n";
  svg += "</g>\n";
  svg += "<g font-family=\"monospace\" font-size=\"11\" fill=\"#333333\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x_lo + (x_hi - x_lo) * i / 4.0;
    const double fy = y_lo + (y_hi - y_lo) * i / 4.0;
    svg += "<line x1=\"" + detail::fixed2(px(fx)) + "\" y1=\"" + detail::fixed2(mt + ph) +
           "\" x2=\"" + detail::fixed2(px(fx)) + "\" y2=\"" + detail::fixed2(mt + ph + 5) +
           "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + detail::fixed2(px(fx)) + "\" y=\"" + detail::fixed2(mt + ph + 18) +
           "\" text-anchor=\"middle\">" + detail::tick_label(fx) + "</text>\n";
    svg += "<line x1=\"" + detail::fixed2(ml - 5) + "\" y1=\"" + detail::fixed2(py(fy)) +
           "\" x2=\"" + detail::fixed2(ml) + "\" y2=\"" + detail::fixed2(py(fy)) +
           "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + detail::fixed2(ml - 8) + "\" y=\"" + detail::fixed2(py(fy) + 4) +
           "\" text-anchor=\"end\">" + detail::tick_label(fy) + "</text>\n";
  }
  svg += "<text x=\"" + detail::fixed2(ml + pw / 2) + "\" y=\"" + detail::fixed2(kh - 10) +
         "\" text-anchor=\"middle\">" + table.header[0] + "</text>\n";
  svg += "</g>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const std::size_t c = series[s];
    svg += "<polyline fill=\"none\" stroke=\"";
    svg += palette[s % palette.size()];
    svg += "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t r = 0; r < n; ++r) {
      if (r > 0) svg += ' ';
      svg += detail::fixed2(px(numeric[0][r]));
      svg += ',';
      svg += detail::fixed2(py(numeric[c][r]));
    }
    svg += "\"/>\n";
  }

  // Legend.
  svg += "<g font-family=\"monospace\" font-size=\"12\">\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double ly = mt + 14.0 + 18.0 * static_cast<double>(s);
    svg += "<rect x=\"" + detail::fixed2(ml + pw + 16) + "\" y=\"" + detail::fixed2(ly - 9) +
           "\" width=\"12\" height=\"12\" fill=\"" + palette[s % palette.size()] + "\"/>\n";
    svg += "<text x=\"" + detail::fixed2(ml + pw + 34) + "\" y=\"" + detail::fixed2(ly + 1) +
           "\" fill=\"#222222\">" + table.header[series[s]] + "</text>\n";
  }
  svg += "</g>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace ldn
