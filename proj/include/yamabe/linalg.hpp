#pragma once

// Small sparse/banded symmetric linear algebra used by the elliptic module.

#include <cstddef>
#include <span>
#include <vector>

namespace yamabe::linalg {

// Symmetric matrix in compressed-row form storing both triangles.
struct SymmetricCsr {
  std::size_t n = 0;
  std::vector<std::size_t> row_start;  // size n + 1
  std::vector<std::size_t> col;
  std::vector<double> val;

  void multiply(std::span<const double> x, std::span<double> y) const;
  double diagonal(std::size_t i) const;
  std::size_t bandwidth() const;
};

// Cholesky factorization L L^T of a symmetric positive definite band matrix.
// Throws INDEFINITE_OPERATOR when a pivot is not positive.
class BandedCholesky {
 public:
  explicit BandedCholesky(const SymmetricCsr& a);

  void solve(std::span<double> b) const;
  std::size_t size() const { return n_; }
  std::size_t bandwidth() const { return bw_; }

 private:
  double& at(std::size_t i, std::size_t j) { return band_[i * (bw_ + 1) + (bw_ - (i - j))]; }
  double at(std::size_t i, std::size_t j) const { return band_[i * (bw_ + 1) + (bw_ - (i - j))]; }

  std::size_t n_ = 0;
  std::size_t bw_ = 0;
  std::vector<double> band_;  // row i holds columns i-bw .. i
};

// L D L^T factorization of a symmetric M-matrix (non-positive off-diagonals)
// with non-negative row sums, parameterized by its off-diagonal entries and
// row sums so that every pivot and Schur complement entry is a sum of terms of
// one sign.  Solves with a non-negative right-hand side are subtraction-free
// and accurate componentwise even when the entries span many orders of
// magnitude.  row_sums must be supplied exactly (not recomputed from the
// diagonal).  Throws M_MATRIX_VIOLATION on a sign violation.
class MMatrixLdl {
 public:
  MMatrixLdl(const SymmetricCsr& a, std::span<const double> row_sums);

  void solve(std::span<double> b) const;
  std::size_t size() const { return n_; }

 private:
  double& at(std::size_t i, std::size_t j) { return band_[i * bw_ + (bw_ - (i - j))]; }
  double at(std::size_t i, std::size_t j) const { return band_[i * bw_ + (bw_ - (i - j))]; }

  std::size_t n_ = 0;
  std::size_t bw_ = 0;
  std::vector<double> band_;  // row i holds L(i, i-bw .. i-1)
  std::vector<double> pivot_;
};

struct CgResult {
  int iterations = 0;
  double relative_residual = 0;
  bool converged = false;
};

// Jacobi-preconditioned conjugate gradients.  Throws INDEFINITE_OPERATOR when
// a search direction has non-positive energy.
CgResult preconditioned_cg(const SymmetricCsr& a, std::span<const double> b, std::span<double> x,
                           double tol, int max_iter);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace yamabe::linalg
