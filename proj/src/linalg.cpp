#include "underdet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "underdet/rng.hpp"

namespace underdet {

SymMatrix::SymMatrix(const Matrix& a) {
  if (a.rows != a.cols) throw std::invalid_argument("SymMatrix: input must be square");
  m_ = Matrix(a.rows, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = i; j < a.rows; ++j) {
      double v = 0.5 * (a(i, j) + a(j, i));
      m_(i, j) = v;
      m_(j, i) = v;
    }
}

double SymMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : m_.data) s += v * v;
  return std::sqrt(s);
}

bool SymMatrix::all_finite() const {
  for (double v : m_.data)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

double offdiag_frobenius(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// One Jacobi rotation zeroing a(p,q). a is kept symmetric, v accumulates
// the rotations so its columns end up as eigenvectors.
void jacobi_rotate(Matrix& a, Matrix& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
  double t;
  if (std::isinf(tau)) {
    t = 0.0;
  } else if (tau >= 0.0) {
    t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
  } else {
    t = -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
  }
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  const double s = t * c;

  const std::size_t n = a.rows;
  a(p, p) -= t * apq;
  a(q, q) += t * apq;
  a(p, q) = 0.0;
  a(q, p) = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == p || k == q) continue;
    const double akp = a(k, p);
    const double akq = a(k, q);
    a(k, p) = c * akp - s * akq;
    a(p, k) = a(k, p);
    a(k, q) = s * akp + c * akq;
    a(q, k) = a(k, q);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

// Make the largest-magnitude entry of each column positive (first such
// entry wins on ties), in place.
void fix_column_signs(Matrix& u) {
  for (std::size_t j = 0; j < u.cols; ++j) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < u.rows; ++i) {
      double m = std::abs(u(i, j));
      if (m > best) {
        best = m;
        arg = i;
      }
    }
    if (u(arg, j) < 0.0)
      for (std::size_t i = 0; i < u.rows; ++i) u(i, j) = -u(i, j);
  }
}

}  // namespace

Spectrum eigh_symmetric(const SymMatrix& input) {
  if (!input.all_finite()) throw std::invalid_argument("eigh_symmetric: non-finite input");
  const std::size_t n = input.dim();
  Matrix a = input.matrix();
  Matrix v = Matrix::identity(n);

  for (int sweep = 0; sweep < 100; ++sweep) {
    if (offdiag_frobenius(a) < 1e-12) break;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) jacobi_rotate(a, v, p, q);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return std::abs(a(i, i)) > std::abs(a(j, j));
  });

  Spectrum spec;
  spec.eigenvalues.resize(n);
  spec.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    spec.eigenvalues[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) spec.eigenvectors(i, j) = v(i, order[j]);
  }
  fix_column_signs(spec.eigenvectors);
  return spec;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw degenerate_variance_error("pearson: input with zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  return pearson(rx, ry);
}

namespace {

// Covariance-matrix action on v without forming the d x d matrix:
// C v = Xc^T (Xc v) / (n - 1), with Xc the centered data.
std::vector<double> covariance_apply(const Matrix& xc, std::span<const double> v) {
  const std::size_t n = xc.rows, d = xc.cols;
  std::vector<double> xv(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* row = &xc.data[i * d];
    for (std::size_t j = 0; j < d; ++j) s += row[j] * v[j];
    xv[i] = s;
  }
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &xc.data[i * d];
    const double w = xv[i];
    for (std::size_t j = 0; j < d; ++j) out[j] += row[j] * w;
  }
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (double& o : out) o *= inv;
  return out;
}

void orthogonalize_against(std::vector<double>& v, const Matrix& components, std::size_t count) {
  for (std::size_t r = 0; r < count; ++r) {
    double dot = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) dot += v[j] * components(r, j);
    for (std::size_t j = 0; j < v.size(); ++j) v[j] -= dot * components(r, j);
  }
}

double normalize(std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  const double nrm = std::sqrt(s);
  if (nrm > 0.0)
    for (double& e : v) e /= nrm;
  return nrm;
}

}  // namespace

PCAModel pca_fit(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows, d = x.cols;
  if (n <= k) throw std::invalid_argument("pca_fit: need more samples than components");
  if (d < k) throw std::invalid_argument("pca_fit: k exceeds feature dimension");

  PCAModel model;
  model.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) model.mean[j] += x(i, j);
  for (double& m : model.mean) m /= static_cast<double>(n);

  Matrix xc(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) xc(i, j) = x(i, j) - model.mean[j];

  constexpr double kTol = 1e-9;
  constexpr int kMaxIters = 1000;
  model.components = Matrix(k, d);

  for (std::size_t comp = 0; comp < k; ++comp) {
    Rng rng(Rng::split(0x50434146u, comp));  // fixed start vectors, deterministic
    std::vector<double> v(d);
    for (double& e : v) e = rng.uniform(-1.0, 1.0);
    orthogonalize_against(v, model.components, comp);
    normalize(v);

    double residual = 0.0;
    bool converged = false;
    for (int it = 0; it < kMaxIters; ++it) {
      std::vector<double> w = covariance_apply(xc, v);
      orthogonalize_against(w, model.components, comp);
      const double wn = normalize(w);
      if (wn == 0.0) {
        // remaining directions are in the null space; v already qualifies
        converged = true;
        break;
      }
      double diff = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double e = w[j] - v[j];
        diff += e * e;
      }
      residual = std::sqrt(diff);
      v = std::move(w);
      if (residual < kTol) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw convergence_error("pca_fit: power iteration did not converge for component " +
                                  std::to_string(comp),
                              residual);
    for (std::size_t j = 0; j < d; ++j) model.components(comp, j) = v[j];
  }

  // same sign convention as eigh_symmetric, per row
  for (std::size_t r = 0; r < k; ++r) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double m = std::abs(model.components(r, j));
      if (m > best) {
        best = m;
        arg = j;
      }
    }
    if (model.components(r, arg) < 0.0)
      for (std::size_t j = 0; j < d; ++j) model.components(r, j) = -model.components(r, j);
  }
  return model;
}

std::vector<double> pca_project(const PCAModel& model, std::span<const double> x) {
  if (x.size() != model.mean.size())
    throw std::invalid_argument("pca_project: dimension mismatch");
  const std::size_t k = model.k(), d = model.mean.size();
  std::vector<double> out(k, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += model.components(r, j) * (x[j] - model.mean[j]);
    out[r] = s;
  }
  return out;
}

}  // namespace underdet
