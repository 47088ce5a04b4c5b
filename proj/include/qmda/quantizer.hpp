#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qmda/errors.hpp"
#include "qmda/kernel_basis.hpp"

namespace qmda {

// Equal-mass quantile partition of the observable's range built from
// training values: S bins, boundaries xi_1..xi_{S-1}, per-bin training
// indices and conditional means.
struct QuantilePartition {
  int s = 0;
  Eigen::VectorXd boundaries;  // size S-1, nondecreasing
  std::vector<std::vector<Eigen::Index>> index_sets;
  Eigen::VectorXd cond_means;  // size S, nondecreasing
  bool ties_split = false;     // an equal-value run crossed a bin boundary
};

// What the assimilation phase needs from a partition: bin edges for the
// affiliation map, conditional means and stationary masses for reporting.
struct PartitionSpec {
  int s = 0;
  Eigen::VectorXd boundaries;  // S-1
  Eigen::VectorXd cond_means;  // S
  Eigen::VectorXd masses;      // S, sums to 1
};

struct ProjectorSet {
  std::vector<Eigen::MatrixXd> mats;  // S matrices, each L x L symmetric
};

/// Fraction of samples with h(x_n) <= a.
double empirical_cdf(const Eigen::VectorXd& h_values, double a);

/// Sort by (value, index) and split into S consecutive blocks of size
/// floor(N/S) or ceil(N/S), larger blocks first. Boundary xi_k is the
/// smallest value of block k.
QuantilePartition build_partition(const Eigen::VectorXd& h_values, int s);

/// Largest i with xi_i <= a (xi_0 = -inf); values above the top boundary
/// clamp to S-1. Total by construction.
int affiliation(const QuantilePartition& partition, double a);
int affiliation(const PartitionSpec& partition, double a);

PartitionSpec to_partition_spec(const QuantilePartition& partition,
                                Eigen::Index n_total);

/// E_i[j,k] = (1/N) sum_{n in N_i} phi_j(x_n) phi_k(x_n).
ProjectorSet projector_matrices(const EigenBasis& basis,
                                const QuantilePartition& partition);

}  // namespace qmda
