#pragma once

#include <Eigen/Dense>

#include "qmda/sparse.hpp"

namespace qmda::detail {

struct SymEigsResult {
  Eigen::VectorXd eigenvalues;  // descending
  Eigen::MatrixXd vectors;      // n x nev, unit 2-norm columns
};

// Largest-algebraic eigenpairs of a symmetric sparse matrix via ARPACK's
// implicitly restarted Lanczos (dsaupd/dseupd). Deterministic start vector.
SymEigsResult eigs_sym_largest(const SymmetricCsr& a, int nev, double tol,
                               int max_iter);

}  // namespace qmda::detail
