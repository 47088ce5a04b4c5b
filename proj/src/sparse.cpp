#include "qmda/sparse.hpp"

#include <queue>

namespace qmda {

void SymmetricCsr::multiply(const double* x, double* y) const {
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      acc += val[static_cast<std::size_t>(k)] *
             x[col[static_cast<std::size_t>(k)]];
    y[i] = acc;
  }
}

Eigen::VectorXd SymmetricCsr::multiply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(n);
  multiply(x.data(), y.data());
  return y;
}

Eigen::VectorXd SymmetricCsr::row_sums() const {
  Eigen::VectorXd s(n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      acc += val[static_cast<std::size_t>(k)];
    s[i] = acc;
  }
  return s;
}

Eigen::MatrixXd SymmetricCsr::dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      d(i, col[static_cast<std::size_t>(k)]) = val[static_cast<std::size_t>(k)];
  return d;
}

bool SymmetricCsr::pattern_connected() const {
  if (n == 0) return true;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<Eigen::Index> frontier;
  frontier.push(0);
  seen[0] = 1;
  Eigen::Index reached = 1;
  while (!frontier.empty()) {
    const Eigen::Index i = frontier.front();
    frontier.pop();
    for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      const Eigen::Index j = col[static_cast<std::size_t>(k)];
      if (!seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = 1;
        ++reached;
        frontier.push(j);
      }
    }
  }
  return reached == n;
}

}  // namespace qmda
