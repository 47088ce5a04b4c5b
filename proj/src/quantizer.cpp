#include "qmda/quantizer.hpp"

#include <algorithm>
#include <numeric>

namespace qmda {

double empirical_cdf(const Eigen::VectorXd& h_values, double a) {
  if (h_values.size() == 0) return 0.0;
  const Eigen::Index count = (h_values.array() <= a).count();
  return static_cast<double>(count) / static_cast<double>(h_values.size());
}

QuantilePartition build_partition(const Eigen::VectorXd& h_values, int s) {
  const Eigen::Index n = h_values.size();
  if (s < 1) throw ParameterError("build_partition: S must be >= 1");
  if (n < s) throw ParameterError("build_partition: fewer samples than bins");
  {
    std::vector<double> uniq(h_values.data(), h_values.data() + n);
    std::sort(uniq.begin(), uniq.end());
    const auto distinct = std::unique(uniq.begin(), uniq.end()) - uniq.begin();
    if (distinct < s)
      throw ParameterError("build_partition: S exceeds distinct value count");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return h_values[a] < h_values[b];
                   });

  QuantilePartition part;
  part.s = s;
  part.boundaries.resize(s - 1);
  part.cond_means.resize(s);
  part.index_sets.resize(static_cast<std::size_t>(s));

  const Eigen::Index base = n / s;
  const Eigen::Index rem = n % s;
  Eigen::Index at = 0;
  for (int i = 0; i < s; ++i) {
    const Eigen::Index size = base + (i < rem ? 1 : 0);
    auto& bin = part.index_sets[static_cast<std::size_t>(i)];
    bin.assign(order.begin() + at, order.begin() + at + size);
    if (i > 0) {
      part.boundaries[i - 1] = h_values[order[static_cast<std::size_t>(at)]];
      if (h_values[order[static_cast<std::size_t>(at)]] ==
          h_values[order[static_cast<std::size_t>(at - 1)]])
        part.ties_split = true;
    }
    double mean = 0.0;
    for (const Eigen::Index idx : bin) mean += h_values[idx];
    part.cond_means[i] = mean / static_cast<double>(size);
    at += size;
  }
  return part;
}

namespace {

int affiliation_impl(const Eigen::VectorXd& boundaries, int s, double a) {
  // Largest i with xi_i <= a; upper_bound counts boundaries <= a.
  const double* begin = boundaries.data();
  const double* end = begin + boundaries.size();
  const int i = static_cast<int>(std::upper_bound(begin, end, a) - begin);
  return std::min(i, s - 1);
}

}  // namespace

int affiliation(const QuantilePartition& partition, double a) {
  return affiliation_impl(partition.boundaries, partition.s, a);
}

int affiliation(const PartitionSpec& partition, double a) {
  return affiliation_impl(partition.boundaries, partition.s, a);
}

PartitionSpec to_partition_spec(const QuantilePartition& partition,
                                Eigen::Index n_total) {
  PartitionSpec spec;
  spec.s = partition.s;
  spec.boundaries = partition.boundaries;
  spec.cond_means = partition.cond_means;
  spec.masses.resize(partition.s);
  for (int i = 0; i < partition.s; ++i)
    spec.masses[i] =
        static_cast<double>(partition.index_sets[static_cast<std::size_t>(i)].size()) /
        static_cast<double>(n_total);
  return spec;
}

ProjectorSet projector_matrices(const EigenBasis& basis,
                                const QuantilePartition& partition) {
  const Eigen::Index n = basis.n();
  const Eigen::Index l = basis.l();
  ProjectorSet set;
  set.mats.reserve(static_cast<std::size_t>(partition.s));
  for (int i = 0; i < partition.s; ++i) {
    const auto& bin = partition.index_sets[static_cast<std::size_t>(i)];
    if (bin.empty())
      throw DegeneratePartitionError("projector_matrices: empty bin " +
                                     std::to_string(i));
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(bin.size()), l);
    for (Eigen::Index k = 0; k < rows.rows(); ++k)
      rows.row(k) = basis.values.row(bin[static_cast<std::size_t>(k)]);
    Eigen::MatrixXd e(l, l);
    e.noalias() = rows.transpose() * rows;
    e /= static_cast<double>(n);
    // rows^T rows is symmetric only up to GEMM rounding
    e = ((e + e.transpose()) / 2.0).eval();
    set.mats.push_back(std::move(e));
  }
  return set;
}

}  // namespace qmda
