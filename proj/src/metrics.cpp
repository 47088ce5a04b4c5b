#include "qmda/metrics.hpp"

#include <cmath>

namespace qmda {

double precision_bits(const Eigen::VectorXd& probs) {
  const double s = static_cast<double>(probs.size());
  double d = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (p > 0.0) d += p * std::log2(s * p);
  }
  return d;
}

IgnoranceResult ignorance_bits(const Eigen::VectorXd& probs, int true_bin,
                               double floor) {
  if (true_bin < 0 || true_bin >= probs.size())
    throw ParameterError("ignorance_bits: bin index out of range");
  IgnoranceResult r;
  const double p = probs[true_bin];
  if (p < floor) {
    r.clamped = true;
    r.bits = -std::log2(floor);
  } else {
    r.bits = -std::log2(p);
  }
  return r;
}

MetricsSummary summarize(const MetricsSeries& series, double burn_in) {
  if (series.times.size() == 0)
    throw ParameterError("summarize: empty series");
  if (burn_in >= series.times[series.times.size() - 1])
    throw ParameterError("summarize: burn-in exceeds the series span");

  const double useful_threshold = std::log2(static_cast<double>(series.s));
  MetricsSummary sum;
  sum.burn_in = burn_in;
  bool in_excursion = false;
  for (Eigen::Index i = 0; i < series.times.size(); ++i) {
    if (series.times[i] <= burn_in) continue;
    ++sum.n_reports;
    sum.mean_precision += series.precision[i];
    sum.mean_ignorance += series.ignorance[i];
    sum.n_clamped += series.clamped[i] != 0 ? 1 : 0;
    const bool non_useful = series.ignorance[i] >= useful_threshold;
    if (non_useful) {
      ++sum.n_non_useful;
      if (!in_excursion) ++sum.n_excursions;
    }
    in_excursion = non_useful;
  }
  if (sum.n_reports > 0) {
    sum.mean_precision /= static_cast<double>(sum.n_reports);
    sum.mean_ignorance /= static_cast<double>(sum.n_reports);
    sum.useful_fraction =
        1.0 - static_cast<double>(sum.n_non_useful) /
                  static_cast<double>(sum.n_reports);
  }
  return sum;
}

}  // namespace qmda
