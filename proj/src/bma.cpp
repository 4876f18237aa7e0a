#include "bdt/bma.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bdt/errors.hpp"
#include "bdt/report.hpp"

namespace bdt {

double Prediction::entropy_bits() const {
  double h = 0.0;
  for (double q : p)
    if (q > 0.0) h -= q * std::log2(q);
  return h;
}

Prediction predict(const Ensemble& ensemble, std::span<const double> x) {
  if (ensemble.size() == 0) throw ValidationError("predict: empty ensemble");
  if (x.size() != ensemble.meta.n_features)
    throw ValidationError("predict: input has " + std::to_string(x.size()) +
                          " features, ensemble expects " +
                          std::to_string(ensemble.meta.n_features));
  const auto prior = ensemble.meta.prior();
  double sum0 = 0.0, sum1 = 0.0;
  for (const auto& tree : ensemble.trees) {
    const auto leaf = route(tree, x);
    const auto q = leaf_predictive(tree.node(leaf).leaf().counts, prior);
    sum0 += q[0];
    sum1 += q[1];
  }
  const double n = static_cast<double>(ensemble.size());
  return Prediction{{sum0 / n, sum1 / n}};
}

EvalReport evaluate(const Ensemble& ensemble, const Dataset& test) {
  EvalReport report;
  report.per_point.reserve(test.rows());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.rows(); ++i) {
    const auto pred = predict(ensemble, test.row(i));
    if (pred.label() == test.label(i)) ++correct;
    report.entropy_bits += pred.entropy_bits();
    report.per_point.push_back({test.label(i), pred});
  }
  const double n = static_cast<double>(test.rows());
  report.performance_pct = 100.0 * static_cast<double>(correct) / n;
  report.entropy_per_row = report.entropy_bits / n;
  report.max_train_loglik = max_loglikelihood(ensemble);
  return report;
}

double max_loglikelihood(const Ensemble& ensemble) {
  if (ensemble.logliks.empty()) throw ValidationError("max_loglikelihood: empty ensemble");
  return *std::max_element(ensemble.logliks.begin(), ensemble.logliks.end());
}

std::string eval_reports_to_csv(const std::vector<EvalReport>& folds) {
  std::ostringstream out;
  out << "# " << kLoglikNote << "\n";
  out << "fold,test_rows,performance_pct,entropy_bits,entropy_per_row,max_train_loglik\n";
  out.precision(10);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& r = folds[f];
    out << f + 1 << ',' << r.per_point.size() << ',' << r.performance_pct << ','
        << r.entropy_bits << ',' << r.entropy_per_row << ',' << r.max_train_loglik << '\n';
  }
  return out.str();
}

std::string format_eval_table(const std::vector<EvalReport>& folds, const std::string& title) {
  std::vector<double> loglik, perf, entropy;
  for (const auto& r : folds) {
    loglik.push_back(r.max_train_loglik);
    perf.push_back(r.performance_pct);
    entropy.push_back(r.entropy_bits);
  }
  return format_fold_table(title + "\n(" + kLoglikNote + ")",
                           {"Loglikelihood", "Performance, %", "Entropy"},
                           {loglik, perf, entropy}, {2, 2, 2});
}

}  // namespace bdt
