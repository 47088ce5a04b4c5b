#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace qmda {

// Symmetric sparse matrix in CSR layout; both (i,j) and (j,i) are stored,
// columns sorted within each row.
struct SymmetricCsr {
  Eigen::Index n = 0;
  std::vector<std::int64_t> row_ptr;  // size n+1
  std::vector<std::int32_t> col;
  std::vector<double> val;

  std::int64_t nnz() const { return static_cast<std::int64_t>(col.size()); }

  // y = A x
  void multiply(const double* x, double* y) const;
  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;

  Eigen::VectorXd row_sums() const;
  Eigen::MatrixXd dense() const;
  bool pattern_connected() const;
};

}  // namespace qmda
