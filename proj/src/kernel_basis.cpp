#include "qmda/kernel_basis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "arpack_eigs.hpp"

namespace qmda {

int default_neighbor_count(Eigen::Index n, int k_b) {
  const auto frac = static_cast<Eigen::Index>(std::ceil(0.08 * static_cast<double>(n)));
  const Eigen::Index r = std::max<Eigen::Index>(frac, k_b + 1);
  return static_cast<int>(std::min<Eigen::Index>(r, n - 1));
}

SparseSymmetricGraph knn_graph(const Eigen::MatrixXd& points, int r) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw ParameterError("knn_graph: need at least 2 points");
  if (r < 1 || r >= n) throw ParameterError("knn_graph: need 1 <= r < n");

  const Eigen::VectorXd sq = points.rowwise().squaredNorm();

  // Directed r-nearest lists (self excluded), each row sorted by column.
  std::vector<std::int32_t> dir_col(static_cast<std::size_t>(n) * r);
  std::vector<double> dir_val(static_cast<std::size_t>(n) * r);

  const Eigen::Index block = 256;
  Eigen::MatrixXd gram;
  for (Eigen::Index b0 = 0; b0 < n; b0 += block) {
    const Eigen::Index bn = std::min(block, n - b0);
    gram.noalias() = points.middleRows(b0, bn) * points.transpose();
#pragma omp parallel
    {
      std::vector<std::pair<double, std::int32_t>> cand(
          static_cast<std::size_t>(n));
#pragma omp for schedule(static)
      for (Eigen::Index bi = 0; bi < bn; ++bi) {
        const Eigen::Index i = b0 + bi;
        for (Eigen::Index j = 0; j < n; ++j) {
          const double d2 = std::max(0.0, sq[i] + sq[j] - 2.0 * gram(bi, j));
          cand[static_cast<std::size_t>(j)] = {d2, static_cast<std::int32_t>(j)};
        }
        cand[static_cast<std::size_t>(i)].first =
            std::numeric_limits<double>::infinity();
        std::nth_element(cand.begin(), cand.begin() + (r - 1), cand.end());
        std::sort(cand.begin(), cand.begin() + r,
                  [](const auto& a, const auto& b) {
                    return a.second < b.second;
                  });
        for (int k = 0; k < r; ++k) {
          dir_col[static_cast<std::size_t>(i) * r + k] = cand[k].second;
          dir_val[static_cast<std::size_t>(i) * r + k] = cand[k].first;
        }
      }
    }
  }

  // Transpose of the directed graph, rows sorted by construction.
  std::vector<std::int64_t> t_ptr(static_cast<std::size_t>(n) + 1, 0);
  for (std::size_t k = 0; k < dir_col.size(); ++k) ++t_ptr[dir_col[k] + 1];
  std::partial_sum(t_ptr.begin(), t_ptr.end(), t_ptr.begin());
  std::vector<std::int32_t> t_col(dir_col.size());
  std::vector<double> t_val(dir_col.size());
  {
    std::vector<std::int64_t> cursor(t_ptr.begin(), t_ptr.end() - 1);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 0; k < r; ++k) {
        const std::int32_t j = dir_col[static_cast<std::size_t>(i) * r + k];
        const std::int64_t at = cursor[static_cast<std::size_t>(j)]++;
        t_col[static_cast<std::size_t>(at)] = static_cast<std::int32_t>(i);
        t_val[static_cast<std::size_t>(at)] =
            dir_val[static_cast<std::size_t>(i) * r + k];
      }
  }

  // Union of the directed lists and their transpose, plus the self-pair.
  SparseSymmetricGraph g;
  g.d2.n = n;
  g.d2.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  std::vector<std::vector<std::int32_t>> merged_col(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> merged_val(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::int32_t* ac = &dir_col[static_cast<std::size_t>(i) * r];
    const double* av = &dir_val[static_cast<std::size_t>(i) * r];
    const std::int64_t bb = t_ptr[static_cast<std::size_t>(i)];
    const std::int64_t be = t_ptr[static_cast<std::size_t>(i) + 1];
    auto& mc = merged_col[static_cast<std::size_t>(i)];
    auto& mv = merged_val[static_cast<std::size_t>(i)];
    mc.reserve(static_cast<std::size_t>(r + (be - bb) + 1));
    mv.reserve(mc.capacity());
    int ka = 0;
    std::int64_t kb = bb;
    bool self_done = false;
    auto push = [&](std::int32_t c, double v) {
      if (!self_done && c > i) {
        mc.push_back(static_cast<std::int32_t>(i));
        mv.push_back(0.0);
        self_done = true;
      }
      if (c == i) return;  // self inserted separately with exact 0
      mc.push_back(c);
      mv.push_back(v);
    };
    while (ka < r || kb < be) {
      if (ka < r && (kb >= be || ac[ka] <= t_col[static_cast<std::size_t>(kb)])) {
        double v = av[ka];
        if (kb < be && ac[ka] == t_col[static_cast<std::size_t>(kb)]) {
          // Edge listed from both endpoints; the two distance computations
          // can differ in the last bits, so pick one symmetrically.
          v = std::min(v, t_val[static_cast<std::size_t>(kb)]);
          ++kb;
        }
        push(ac[ka], v);
        ++ka;
      } else {
        push(t_col[static_cast<std::size_t>(kb)], t_val[static_cast<std::size_t>(kb)]);
        ++kb;
      }
    }
    if (!self_done) {
      mc.push_back(static_cast<std::int32_t>(i));
      mv.push_back(0.0);
    }
    g.d2.row_ptr[static_cast<std::size_t>(i) + 1] =
        static_cast<std::int64_t>(mc.size());
  }
  std::partial_sum(g.d2.row_ptr.begin(), g.d2.row_ptr.end(),
                   g.d2.row_ptr.begin());
  g.d2.col.resize(static_cast<std::size_t>(g.d2.row_ptr[static_cast<std::size_t>(n)]));
  g.d2.val.resize(g.d2.col.size());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    std::int64_t at = g.d2.row_ptr[static_cast<std::size_t>(i)];
    const auto& mc = merged_col[static_cast<std::size_t>(i)];
    const auto& mv = merged_val[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < mc.size(); ++k, ++at) {
      g.d2.col[static_cast<std::size_t>(at)] = mc[k];
      g.d2.val[static_cast<std::size_t>(at)] = mv[k];
    }
  }
  return g;
}

BandwidthField bandwidth_field(const SparseSymmetricGraph& graph, int k_b) {
  const Eigen::Index n = graph.d2.n;
  if (k_b < 1) throw ParameterError("bandwidth_field: k_b must be >= 1");

  BandwidthField bw;
  bw.sigma.resize(n);
  bool degenerate = false;
  bool short_row = false;
#pragma omp parallel reduction(|| : degenerate, short_row)
  {
    std::vector<double> d2s;
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      d2s.clear();
      for (std::int64_t k = graph.d2.row_ptr[static_cast<std::size_t>(i)];
           k < graph.d2.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
        if (graph.d2.col[static_cast<std::size_t>(k)] != i)
          d2s.push_back(graph.d2.val[static_cast<std::size_t>(k)]);
      if (d2s.empty()) {
        degenerate = true;
        bw.sigma[i] = 0.0;
        continue;
      }
      if (static_cast<int>(d2s.size()) < k_b) {
        short_row = true;
        continue;
      }
      std::nth_element(d2s.begin(), d2s.begin() + (k_b - 1), d2s.end());
      const double mean =
          std::accumulate(d2s.begin(), d2s.begin() + k_b, 0.0) / k_b;
      bw.sigma[i] = std::sqrt(mean);
      if (bw.sigma[i] <= 0.0) degenerate = true;
    }
  }
  if (short_row)
    throw ParameterError("bandwidth_field: k_b exceeds a neighbor list; need k_b <= r");
  if (degenerate)
    throw DegenerateBandwidthError("bandwidth_field: isolated or duplicate point");
  return bw;
}

Eigen::VectorXd log_spaced_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2)
    throw ParameterError("log_spaced_grid: need 0 < lo < hi and count >= 2");
  Eigen::VectorXd g(count);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < count; ++i)
    g[i] = std::exp(llo + (lhi - llo) * i / (count - 1));
  return g;
}

EpsilonScan tune_epsilon(const SparseSymmetricGraph& graph,
                         const BandwidthField& sigma,
                         const Eigen::VectorXd& grid) {
  if (grid.size() < 3)
    throw ParameterError("tune_epsilon: grid needs at least 3 points");
  if (std::log10(grid[grid.size() - 1] / grid[0]) < 4.0 - 1e-9)
    throw ParameterError("tune_epsilon: grid must span at least 4 decades");

  const Eigen::Index n = graph.d2.n;
  EpsilonScan scan;
  scan.grid = grid;
  scan.t_values.resize(grid.size());
  for (Eigen::Index gi = 0; gi < grid.size(); ++gi) {
    const double eps = grid[gi];
    double total = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : total)
    for (Eigen::Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::int64_t k = graph.d2.row_ptr[static_cast<std::size_t>(i)];
           k < graph.d2.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
        const Eigen::Index j = graph.d2.col[static_cast<std::size_t>(k)];
        acc += std::exp(-graph.d2.val[static_cast<std::size_t>(k)] /
                        (eps * sigma.sigma[i] * sigma.sigma[j]));
      }
      total += acc;
    }
    scan.t_values[gi] = total / (static_cast<double>(n) * static_cast<double>(n));
  }

  scan.slopes.resize(grid.size());
  scan.slopes.setZero();
  int best = -1;
  for (Eigen::Index i = 1; i + 1 < grid.size(); ++i) {
    const double slope =
        (std::log(scan.t_values[i + 1]) - std::log(scan.t_values[i - 1])) /
        (std::log(grid[i + 1]) - std::log(grid[i - 1]));
    scan.slopes[i] = slope;
    if (best < 0 || slope > scan.slopes[best]) best = static_cast<int>(i);
  }
  scan.star_index = best;
  scan.epsilon_star = grid[best];
  scan.slope_at_star = scan.slopes[best];
  scan.boundary_warning = (best == 1 || best == grid.size() - 2);
  return scan;
}

SymmetricCsr assemble_kernel(const SparseSymmetricGraph& graph,
                             const BandwidthField& sigma, double epsilon) {
  if (!(epsilon > 0.0))
    throw ParameterError("assemble_kernel: epsilon must be positive");
  SymmetricCsr k = graph.d2;
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < k.n; ++i)
    for (std::int64_t p = k.row_ptr[static_cast<std::size_t>(i)];
         p < k.row_ptr[static_cast<std::size_t>(i) + 1]; ++p) {
      const Eigen::Index j = k.col[static_cast<std::size_t>(p)];
      k.val[static_cast<std::size_t>(p)] =
          std::exp(-k.val[static_cast<std::size_t>(p)] /
                   (epsilon * sigma.sigma[i] * sigma.sigma[j]));
    }
  return k;
}

MarkovKernelMatrix bistochastic_normalize(const SymmetricCsr& kernel,
                                          double tol, int max_iter) {
  const Eigen::Index n = kernel.n;
  if (n == 0) throw ParameterError("bistochastic_normalize: empty matrix");
  if (!kernel.pattern_connected())
    throw ErgodicityError("bistochastic_normalize: kernel graph is disconnected");

  const Eigen::VectorXd rs = kernel.row_sums();
  if ((rs.array() <= 0.0).any())
    throw NormalizationFailedError("bistochastic_normalize: zero row sum");

  // Damped symmetric Sinkhorn: s <- s / sqrt(s .* (K s)).
  Eigen::VectorXd s = rs.array().rsqrt();
  Eigen::VectorXd ks(n);
  double err = 0.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    kernel.multiply(s.data(), ks.data());
    const Eigen::ArrayXd r = s.array() * ks.array();
    err = (r - 1.0).abs().maxCoeff();
    if (err < tol) break;
    s = s.array() / r.sqrt();
  }
  if (err >= tol)
    throw NormalizationFailedError(
        "bistochastic_normalize: no convergence after " +
        std::to_string(max_iter) + " iterations (err=" + std::to_string(err) +
        ")");

  MarkovKernelMatrix m;
  m.p = kernel;
  m.scaling = s;
  m.iterations = it;
  m.row_sum_error = err;
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::int64_t k = m.p.row_ptr[static_cast<std::size_t>(i)];
         k < m.p.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
      m.p.val[static_cast<std::size_t>(k)] *=
          s[i] * s[m.p.col[static_cast<std::size_t>(k)]];
  return m;
}

EigenBasis eigenbasis(const MarkovKernelMatrix& p, int l, double tol,
                      EigsMethod method) {
  const Eigen::Index n = p.p.n;
  if (l < 1 || l > n) throw ParameterError("eigenbasis: need 1 <= L <= N");

  const bool use_dense = method == EigsMethod::dense ||
                         (method == EigsMethod::automatic &&
                          (n <= 1024 || 2 * l + 2 >= n));

  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;
  if (use_dense) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.p.dense());
    if (es.info() != Eigen::Success)
      throw EigensolveError("eigenbasis: dense eigensolver failed");
    evals.resize(l);
    evecs.resize(n, l);
    for (int j = 0; j < l; ++j) {
      evals[j] = es.eigenvalues()[n - 1 - j];
      evecs.col(j) = es.eigenvectors().col(n - 1 - j);
    }
  } else {
    auto res = detail::eigs_sym_largest(p.p, l, tol, 300 * l);
    evals = std::move(res.eigenvalues);
    evecs = std::move(res.vectors);
  }

  if (evals[l - 1] < -1e-8)
    throw EigensolveError("eigenbasis: negative eigenvalue among the top L; reduce L");
  if ((evals.array() > 1.0 + 1e-8).any())
    throw EigensolveError("eigenbasis: eigenvalue above 1; kernel not Markov");
  if (std::abs(evals[0] - 1.0) > 1e-8)
    throw EigensolveError("eigenbasis: leading eigenvalue is not 1");
  if (l >= 2 && evals[1] > 1.0 - 1e-10)
    throw ErgodicityError("eigenbasis: leading eigenvalue is not simple");

  EigenBasis basis;
  basis.eigenvalues = evals.cwiseMax(0.0).cwiseMin(1.0);
  basis.values = std::move(evecs);
  basis.values *= std::sqrt(static_cast<double>(n));

  // Deterministic sign convention: largest-magnitude entry positive
  // (first such index on ties); column 0 becomes the +1 constant.
  for (int j = 0; j < l; ++j) {
    Eigen::Index imax = 0;
    basis.values.col(j).cwiseAbs().maxCoeff(&imax);
    if (basis.values(imax, j) < 0.0) basis.values.col(j) *= -1.0;
  }
  const double const_dev = (basis.values.col(0).array() - 1.0).abs().maxCoeff();
  if (const_dev > 1e-6)
    throw ErgodicityError("eigenbasis: leading eigenvector is not constant");
  return basis;
}

KernelBasisResult build_basis(const Eigen::MatrixXd& points, int l,
                              const KernelBasisParams& prm) {
  const Eigen::Index n = points.rows();
  const int r = prm.r > 0 ? prm.r : default_neighbor_count(n, prm.k_b);

  KernelBasisResult out;
  out.r = r;
  MarkovKernelMatrix markov;
  {
    SymmetricCsr kernel;
    {
      const SparseSymmetricGraph graph = knn_graph(points, r);
      const BandwidthField sigma = bandwidth_field(graph, prm.k_b);
      out.scan = tune_epsilon(
          graph, sigma, log_spaced_grid(prm.eps_lo, prm.eps_hi, prm.eps_grid));
      kernel = assemble_kernel(graph, sigma, out.scan.epsilon_star);
    }
    markov = bistochastic_normalize(kernel, prm.sinkhorn_tol,
                                    prm.sinkhorn_max_iter);
  }
  out.sinkhorn_iterations = markov.iterations;
  out.row_sum_error = markov.row_sum_error;
  out.basis = eigenbasis(markov, l, prm.eigs_tol);
  return out;
}

}  // namespace qmda
