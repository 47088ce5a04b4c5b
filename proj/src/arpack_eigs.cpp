#include "arpack_eigs.hpp"

#include <random>
#include <string>
#include <vector>

#include "qmda/errors.hpp"

extern "C" {
void dsaupd_(int* ido, const char* bmat, const int* n, const char* which,
             const int* nev, const double* tol, double* resid, const int* ncv,
             double* v, const int* ldv, int* iparam, int* ipntr, double* workd,
             double* workl, const int* lworkl, int* info);
void dseupd_(const int* rvec, const char* howmny, int* select, double* d,
             double* z, const int* ldz, const double* sigma, const char* bmat,
             const int* n, const char* which, const int* nev, const double* tol,
             double* resid, const int* ncv, double* v, const int* ldv,
             int* iparam, int* ipntr, double* workd, double* workl,
             const int* lworkl, int* info);
}

namespace qmda::detail {

SymEigsResult eigs_sym_largest(const SymmetricCsr& a, int nev, double tol,
                               int max_iter) {
  const int n = static_cast<int>(a.n);
  if (nev < 1 || nev >= n)
    throw ParameterError("eigs_sym_largest: need 1 <= nev < n");

  const int ncv = std::min(n, std::max(2 * nev + 1, 20));
  if (ncv <= nev)
    throw ParameterError("eigs_sym_largest: subspace too small; use dense path");

  int ido = 0, info = 1;  // info=1: user-supplied start vector
  const double arpack_tol = tol;
  std::vector<double> resid(static_cast<std::size_t>(n));
  {
    // Fixed seed keeps runs reproducible independent of the experiment seed.
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (double& x : resid) x = u(rng);
  }
  std::vector<double> v(static_cast<std::size_t>(n) * ncv);
  std::vector<double> workd(3 * static_cast<std::size_t>(n));
  const int lworkl = ncv * (ncv + 8);
  std::vector<double> workl(static_cast<std::size_t>(lworkl));
  int iparam[11] = {};
  int ipntr[11] = {};
  iparam[0] = 1;  // exact shifts
  iparam[2] = max_iter;
  iparam[6] = 1;  // standard eigenproblem

  while (true) {
    dsaupd_(&ido, "I", &n, "LA", &nev, &arpack_tol, resid.data(), &ncv,
            v.data(), &n, iparam, ipntr, workd.data(), workl.data(), &lworkl,
            &info);
    if (ido == 1 || ido == -1) {
      a.multiply(&workd[ipntr[0] - 1], &workd[ipntr[1] - 1]);
      continue;
    }
    break;
  }
  if (info < 0)
    throw EigensolveError("ARPACK dsaupd failed, info=" + std::to_string(info));
  if (info == 1)
    throw EigensolveError(
        "ARPACK did not converge within the iteration limit (" +
        std::to_string(max_iter) + ")");

  const int rvec = 1;
  std::vector<int> select(static_cast<std::size_t>(ncv));
  std::vector<double> d(static_cast<std::size_t>(nev));
  std::vector<double> z(static_cast<std::size_t>(n) * nev);
  const double sigma = 0.0;
  int ierr = 0;
  dseupd_(&rvec, "A", select.data(), d.data(), z.data(), &n, &sigma, "I", &n,
          "LA", &nev, &arpack_tol, resid.data(), &ncv, v.data(), &n, iparam,
          ipntr, workd.data(), workl.data(), &lworkl, &ierr);
  if (ierr != 0)
    throw EigensolveError("ARPACK dseupd failed, info=" + std::to_string(ierr));

  // dseupd returns ascending order; flip to descending.
  SymEigsResult res;
  res.eigenvalues.resize(nev);
  res.vectors.resize(n, nev);
  for (int j = 0; j < nev; ++j) {
    res.eigenvalues[j] = d[static_cast<std::size_t>(nev - 1 - j)];
    res.vectors.col(j) = Eigen::Map<const Eigen::VectorXd>(
        &z[static_cast<std::size_t>(nev - 1 - j) * n], n);
  }
  return res;
}

}  // namespace qmda::detail
