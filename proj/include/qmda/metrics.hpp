#pragma once

#include <Eigen/Dense>

#include "qmda/errors.hpp"

namespace qmda {

/// Precision D = sum_i P_i log2(S P_i), the KL divergence of the bin
/// distribution from uniform, in bits. Zero-probability terms contribute 0.
double precision_bits(const Eigen::VectorXd& probs);

struct IgnoranceResult {
  double bits = 0.0;
  bool clamped = false;
};

/// Ignorance E = -log2 max(P_{true_bin}, floor), in bits.
IgnoranceResult ignorance_bits(const Eigen::VectorXd& probs, int true_bin,
                               double floor);

struct MetricsSeries {
  int s = 0;
  Eigen::VectorXd times;
  Eigen::VectorXd precision;
  Eigen::VectorXd ignorance;
  Eigen::VectorXi clamped;
  double useful_fraction = 0.0;  // share of reports with E < log2(S)
};

struct MetricsSummary {
  double burn_in = 0.0;
  long n_reports = 0;
  double mean_precision = 0.0;
  double mean_ignorance = 0.0;
  double useful_fraction = 0.0;
  long n_non_useful = 0;   // reports with E >= log2(S)
  long n_excursions = 0;   // maximal runs of such reports
  long n_clamped = 0;
};

/// Post-burn-in means and usefulness statistics (E < log2 S is "useful").
MetricsSummary summarize(const MetricsSeries& series, double burn_in);

}  // namespace qmda
