#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace underdet {

// Dense row-major matrix of doubles. Deliberately minimal: the problem
// sizes here (parameter counts up to a few hundred, image dimension 784)
// never justify anything fancier than plain loops.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

// Symmetric matrix. Mirrored entries are made bit-identical at
// construction: entry (i,j) and (j,i) are both set to their average.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim) : m_(dim, dim) {}
  explicit SymMatrix(const Matrix& a);

  std::size_t dim() const { return m_.rows; }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  void set(std::size_t i, std::size_t j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }
  const Matrix& matrix() const { return m_; }

  double frobenius_norm() const;
  bool all_finite() const;

 private:
  Matrix m_;
};

// Eigendecomposition result. Column k of `eigenvectors` pairs with
// eigenvalues[k]; eigenvalues are sorted by decreasing magnitude and each
// eigenvector's largest-magnitude entry is made positive so the
// decomposition is unique and platform independent.
struct Spectrum {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

struct PCAModel {
  std::vector<double> mean;  // d
  Matrix components;         // k x d, rows orthonormal
  std::size_t k() const { return components.rows; }
};

struct degenerate_variance_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct convergence_error : std::runtime_error {
  double residual;
  convergence_error(const std::string& what, double r) : std::runtime_error(what), residual(r) {}
};

// Cyclic Jacobi rotations; converged when the off-diagonal Frobenius norm
// drops below 1e-12 or after 100 sweeps.
Spectrum eigh_symmetric(const SymMatrix& a);

double pearson(std::span<const double> x, std::span<const double> y);

// Rank correlation; ties get the average of the ranks they occupy.
double spearman(std::span<const double> x, std::span<const double> y);

// Top-k eigenvectors of the sample covariance (1/(n-1) normalization) of
// the rows of x, found by power iteration with Gram-Schmidt deflation
// (tolerance 1e-9, at most 1000 iterations per component). Throws
// convergence_error carrying the achieved residual if an iteration stalls.
PCAModel pca_fit(const Matrix& x, std::size_t k);

std::vector<double> pca_project(const PCAModel& model, std::span<const double> x);

}  // namespace underdet
