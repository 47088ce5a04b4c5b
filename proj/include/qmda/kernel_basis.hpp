#pragma once

#include <Eigen/Dense>

#include "qmda/errors.hpp"
#include "qmda/sparse.hpp"

namespace qmda {

// kNN graph over the data points; values hold squared Euclidean distances.
// Symmetric: a pair is kept when either endpoint lists the other. Self-pairs
// are present with distance 0.
struct SparseSymmetricGraph {
  SymmetricCsr d2;
};

struct BandwidthField {
  Eigen::VectorXd sigma;  // strictly positive, one entry per point
};

struct EpsilonScan {
  Eigen::VectorXd grid;      // candidate epsilon values, log-spaced
  Eigen::VectorXd t_values;  // kernel sums T(eps)
  Eigen::VectorXd slopes;    // centered d log T / d log eps (interior points)
  int star_index = -1;
  double epsilon_star = 0.0;
  double slope_at_star = 0.0;
  bool boundary_warning = false;  // maximum slope sits at the grid edge
};

// Bistochastically normalized kernel: symmetric, nonnegative, unit row sums.
struct MarkovKernelMatrix {
  SymmetricCsr p;
  Eigen::VectorXd scaling;  // s with P = diag(s) K diag(s)
  int iterations = 0;
  double row_sum_error = 0.0;
};

// Orthonormal basis of L2(mu_N): column j holds phi_j at the N samples,
// normalized so that (1/N) sum_n phi_j(x_n) phi_k(x_n) = delta_jk.
// Eigenvalues are nonincreasing with lambda_0 = 1 and phi_0 = +1.
struct EigenBasis {
  Eigen::MatrixXd values;       // N x L
  Eigen::VectorXd eigenvalues;  // L
  Eigen::Index n() const { return values.rows(); }
  Eigen::Index l() const { return values.cols(); }
};

/// Default sparsification from the training size: max(ceil(0.08 n), k_b + 1).
int default_neighbor_count(Eigen::Index n, int k_b);

SparseSymmetricGraph knn_graph(const Eigen::MatrixXd& points, int r);

/// sigma(y) = sqrt(mean squared distance from y to its k_b nearest
/// neighbors, self excluded).
BandwidthField bandwidth_field(const SparseSymmetricGraph& graph, int k_b);

Eigen::VectorXd log_spaced_grid(double lo, double hi, int count);

/// Scan T(eps) = (1/N^2) sum_retained exp(-d^2/(eps sigma sigma')) over the
/// grid and pick the epsilon maximizing d log T / d log eps.
EpsilonScan tune_epsilon(const SparseSymmetricGraph& graph,
                         const BandwidthField& sigma,
                         const Eigen::VectorXd& grid);

SymmetricCsr assemble_kernel(const SparseSymmetricGraph& graph,
                             const BandwidthField& sigma, double epsilon);

/// Symmetric Sinkhorn scaling: returns P = diag(s) K diag(s) with every row
/// sum within tol of 1. Throws ErgodicityError on a disconnected pattern and
/// NormalizationFailedError when the iteration does not converge.
MarkovKernelMatrix bistochastic_normalize(const SymmetricCsr& kernel,
                                          double tol = 1e-12,
                                          int max_iter = 2000);

enum class EigsMethod { automatic, dense, arpack };

/// Top-l eigenpairs of P, rescaled by sqrt(N) into the (1/N)-weighted inner
/// product and sign-fixed (column 0 is the positive constant).
EigenBasis eigenbasis(const MarkovKernelMatrix& p, int l, double tol = 1e-10,
                      EigsMethod method = EigsMethod::automatic);

struct KernelBasisParams {
  int k_b = 32;
  int r = 0;  // 0 = default_neighbor_count
  double eps_lo = 1e-4;
  double eps_hi = 1e4;
  int eps_grid = 64;
  double sinkhorn_tol = 1e-12;
  int sinkhorn_max_iter = 2000;
  double eigs_tol = 1e-10;
};

struct KernelBasisResult {
  EigenBasis basis;
  EpsilonScan scan;
  int r = 0;
  int sinkhorn_iterations = 0;
  double row_sum_error = 0.0;
};

/// Full pipeline: kNN graph -> bandwidths -> epsilon tuning -> kernel ->
/// bistochastic normalization -> truncated eigendecomposition.
KernelBasisResult build_basis(const Eigen::MatrixXd& points, int l,
                              const KernelBasisParams& prm = {});

}  // namespace qmda
