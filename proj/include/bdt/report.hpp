#pragma once

#include <string>
#include <vector>

namespace bdt {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for fewer than two values
};

MeanSd mean_sd(const std::vector<double>& values);

// Plain-text fold table: one row per fold plus a "mean ± sd" footer per column.
// `precision` gives the decimals printed for each column.
std::string format_fold_table(const std::string& title, const std::vector<std::string>& headers,
                              const std::vector<std::vector<double>>& columns,
                              const std::vector<int>& precision);

std::string format_fixed(double value, int precision);

}  // namespace bdt
