#include "bdt/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace bdt {

MeanSd mean_sd(const std::vector<double>& values) {
  MeanSd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

std::string format_fixed(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
  return buf;
}

std::string format_fold_table(const std::string& title, const std::vector<std::string>& headers,
                              const std::vector<std::vector<double>>& columns,
                              const std::vector<int>& precision) {
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  std::vector<std::vector<std::string>> cells(rows + 1);
  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    width[c] = headers[c].size();
    for (std::size_t r = 0; r < rows; ++r) {
      cells[r].push_back(format_fixed(columns[c][r], precision[c]));
      width[c] = std::max(width[c], cells[r].back().size());
    }
    const auto ms = mean_sd(columns[c]);
    cells[rows].push_back(format_fixed(ms.mean, precision[c]) + " ± " +
                          format_fixed(ms.sd, precision[c]));
    // "±" is two bytes but one column wide.
    width[c] = std::max(width[c], cells[rows].back().size() - 1);
  }

  std::ostringstream out;
  out << title << '\n';
  auto pad = [](const std::string& s, std::size_t w, std::size_t extra = 0) {
    return std::string(w + extra > s.size() ? w + extra - s.size() : 0, ' ') + s;
  };
  out << pad("Fold", 4);
  for (std::size_t c = 0; c < headers.size(); ++c) out << "  " << pad(headers[c], width[c]);
  out << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    out << pad(std::to_string(r + 1), 4);
    for (std::size_t c = 0; c < headers.size(); ++c) out << "  " << pad(cells[r][c], width[c]);
    out << '\n';
  }
  out << pad("", 4);
  for (std::size_t c = 0; c < headers.size(); ++c)
    out << "  " << pad(cells[rows][c], width[c], 1);
  out << '\n';
  return out.str();
}

}  // namespace bdt
