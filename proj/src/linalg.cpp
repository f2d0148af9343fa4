#include "yamabe/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "yamabe/error.hpp"

namespace yamabe::linalg {

void SymmetricCsr::multiply(std::span<const double> x, std::span<double> y) const {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t p = row_start[i]; p < row_start[i + 1]; ++p) s += val[p] * x[col[p]];
    y[i] = s;
  }
}

double SymmetricCsr::diagonal(std::size_t i) const {
  for (std::size_t p = row_start[i]; p < row_start[i + 1]; ++p)
    if (col[p] == i) return val[p];
  return 0.0;
}

std::size_t SymmetricCsr::bandwidth() const {
  std::size_t bw = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = row_start[i]; p < row_start[i + 1]; ++p)
      if (col[p] < i) bw = std::max(bw, i - col[p]);
  return bw;
}

BandedCholesky::BandedCholesky(const SymmetricCsr& a) : n_(a.n), bw_(a.bandwidth()) {
  band_.assign(n_ * (bw_ + 1), 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t p = a.row_start[i]; p < a.row_start[i + 1]; ++p)
      if (a.col[p] <= i) at(i, a.col[p]) = a.val[p];

  for (std::size_t j = 0; j < n_; ++j) {
    const std::size_t j0 = j > bw_ ? j - bw_ : 0;
    double d = at(j, j);
    for (std::size_t k = j0; k < j; ++k) d -= at(j, k) * at(j, k);
    if (!(d > 0.0))
      fail(ErrorCode::kIndefiniteOperator,
           "non-positive pivot " + num(d) + " at row " + std::to_string(j));
    const double ljj = std::sqrt(d);
    at(j, j) = ljj;
    const std::size_t iend = std::min(n_, j + bw_ + 1);
    for (std::size_t i = j + 1; i < iend; ++i) {
      const std::size_t k0 = i > bw_ ? i - bw_ : 0;
      double s = at(i, j);
      for (std::size_t k = std::max(k0, j0); k < j; ++k) s -= at(i, k) * at(j, k);
      at(i, j) = s / ljj;
    }
  }
}

void BandedCholesky::solve(std::span<double> b) const {
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t k0 = i > bw_ ? i - bw_ : 0;
    double s = b[i];
    for (std::size_t k = k0; k < i; ++k) s -= at(i, k) * b[k];
    b[i] = s / at(i, i);
  }
  for (std::size_t ii = n_; ii-- > 0;) {
    const std::size_t kend = std::min(n_, ii + bw_ + 1);
    double s = b[ii];
    for (std::size_t k = ii + 1; k < kend; ++k) s -= at(k, ii) * b[k];
    b[ii] = s / at(ii, ii);
  }
}

MMatrixLdl::MMatrixLdl(const SymmetricCsr& a, std::span<const double> row_sums)
    : n_(a.n), bw_(std::max<std::size_t>(a.bandwidth(), 1)) {
  if (row_sums.size() != n_) fail(ErrorCode::kInvalidArgument, "row sum vector has the wrong length");
  band_.assign(n_ * bw_, 0.0);
  pivot_.assign(n_, 0.0);
  std::vector<double> s(row_sums.begin(), row_sums.end());
  for (std::size_t i = 0; i < n_; ++i) {
    if (!(s[i] >= 0.0)) fail(ErrorCode::kMMatrixViolation, "negative row sum at row " + std::to_string(i));
    for (std::size_t p = a.row_start[i]; p < a.row_start[i + 1]; ++p) {
      const std::size_t j = a.col[p];
      if (j == i) continue;
      if (a.val[p] > 0.0) fail(ErrorCode::kMMatrixViolation, "positive off-diagonal at row " + std::to_string(i));
      if (j < i) at(i, j) = a.val[p];
    }
  }
  // Right-looking elimination on the lower band; the pivot of row k is its
  // row sum plus the magnitudes of the remaining off-diagonals.
  for (std::size_t k = 0; k < n_; ++k) {
    const std::size_t iend = std::min(n_, k + bw_ + 1);
    double d = s[k];
    for (std::size_t i = k + 1; i < iend; ++i) d -= at(i, k);
    if (!(d > 0.0)) fail(ErrorCode::kIndefiniteOperator, "zero pivot at row " + std::to_string(k));
    pivot_[k] = d;
    for (std::size_t i = k + 1; i < iend; ++i) {
      const double aik = at(i, k);
      if (aik == 0.0) continue;
      s[i] -= aik * s[k] / d;
      for (std::size_t j = k + 1; j < i; ++j) at(i, j) -= aik * at(j, k) / d;
    }
    for (std::size_t i = k + 1; i < iend; ++i) at(i, k) /= d;
  }
}

void MMatrixLdl::solve(std::span<double> b) const {
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t k0 = i > bw_ ? i - bw_ : 0;
    double s = b[i];
    for (std::size_t k = k0; k < i; ++k) s -= at(i, k) * b[k];
    b[i] = s;
  }
  for (std::size_t i = 0; i < n_; ++i) b[i] /= pivot_[i];
  for (std::size_t ii = n_; ii-- > 0;) {
    const std::size_t kend = std::min(n_, ii + bw_ + 1);
    double s = b[ii];
    for (std::size_t k = ii + 1; k < kend; ++k) s -= at(k, ii) * b[k];
    b[ii] = s;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

CgResult preconditioned_cg(const SymmetricCsr& a, std::span<const double> b, std::span<double> x,
                           double tol, int max_iter) {
  const std::size_t n = a.n;
  std::vector<double> r(n), z(n), p(n), q(n), inv_diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.diagonal(i);
    if (!(d > 0.0)) fail(ErrorCode::kIndefiniteOperator, "non-positive diagonal entry");
    inv_diag[i] = 1.0 / d;
  }
  a.multiply(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  const double bnorm = std::max(norm2(b), 1e-300);
  CgResult res;
  res.relative_residual = norm2(r) / bnorm;
  if (res.relative_residual <= tol) {
    res.converged = true;
    return res;
  }
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    a.multiply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) fail(ErrorCode::kIndefiniteOperator, "search direction with non-positive energy");
    const double alpha = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    res.iterations = it;
    res.relative_residual = norm2(r) / bnorm;
    if (res.relative_residual <= tol) {
      res.converged = true;
      return res;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return res;
}

}  // namespace yamabe::linalg
