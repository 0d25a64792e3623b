#include "underdet/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace underdet {

namespace {

constexpr double kHalfPi = 1.5707963267948966192313216916398;
constexpr double kPi = 3.141592653589793238462643383279502884;

// gate positions per trainable index
std::vector<std::vector<int>> occurrences(const CircuitTemplate& tpl) {
  std::vector<std::vector<int>> occ(tpl.n_trainable);
  for (int gi = 0; gi < static_cast<int>(tpl.gates.size()); ++gi) {
    const GateOp& g = tpl.gates[gi];
    if (g.is_rotation() && g.angle.kind == AngleSource::Kind::Trainable)
      occ[g.angle.index].push_back(gi);
  }
  return occ;
}

}  // namespace

std::vector<double> grad_prediction(const CircuitTemplate& tpl, std::span<const double> theta,
                                    std::span<const double> x, ShotConfig cfg, Rng& rng) {
  const auto occ = occurrences(tpl);
  const PrefixCircuit pc(tpl, theta, x);
  const int end = pc.n_gates();
  auto eval_single = [&](int gate, double delta) {
    Statevector s = pc.prefix(gate);
    pc.evolve(s, gate, end, gate, delta);
    return sample_expectation_z(s, 0, cfg, rng);
  };
  std::vector<double> grad(tpl.n_trainable, 0.0);
  for (int i = 0; i < tpl.n_trainable; ++i) {
    for (int gi : occ[i]) {
      const double fp = eval_single(gi, kHalfPi);
      const double fm = eval_single(gi, -kHalfPi);
      grad[i] += 0.5 * (fp - fm);
    }
  }
  return grad;
}

SymMatrix hessian_prediction(const CircuitTemplate& tpl, std::span<const double> theta,
                             std::span<const double> x, ShotConfig cfg, Rng& rng) {
  const auto occ = occurrences(tpl);
  const int m = tpl.n_trainable;
  SymMatrix h(m);

  const PrefixCircuit pc(tpl, theta, x);
  const int end = pc.n_gates();
  auto eval_single = [&](int gate, double delta) {
    Statevector s = pc.prefix(gate);
    pc.evolve(s, gate, end, gate, delta);
    return sample_expectation_z(s, 0, cfg, rng);
  };

  // four-point stencil on two distinct gates, reusing the evolution up to
  // the second shifted gate for both of its branches
  auto cross = [&](int gp, int gq) {
    const int lo = std::min(gp, gq), hi = std::max(gp, gq);
    double acc = 0.0;
    for (double slo : {kHalfPi, -kHalfPi}) {
      Statevector mid = pc.prefix(lo);
      pc.evolve(mid, lo, hi, lo, slo);
      for (double shi : {kHalfPi, -kHalfPi}) {
        Statevector fin = mid;
        pc.evolve(fin, hi, end, hi, shi);
        const double f = sample_expectation_z(fin, 0, cfg, rng);
        acc += (slo > 0) == (shi > 0) ? f : -f;
      }
    }
    return 0.25 * acc;
  };

  const double f0 = sample_expectation_z(pc.prefix(end), 0, cfg, rng);
  for (int i = 0; i < m; ++i) {
    // diagonal: single-gate second derivative plus cross terms between
    // distinct occurrences of the same parameter
    double d = 0.0;
    for (std::size_t a = 0; a < occ[i].size(); ++a) {
      const double fp = eval_single(occ[i][a], kPi);
      const double fm = eval_single(occ[i][a], -kPi);
      d += 0.25 * (fp - 2.0 * f0 + fm);
      for (std::size_t b = a + 1; b < occ[i].size(); ++b) d += 2.0 * cross(occ[i][a], occ[i][b]);
    }
    h.set(i, i, d);
    for (int j = i + 1; j < m; ++j) {
      double v = 0.0;
      for (int gp : occ[i])
        for (int gq : occ[j]) v += cross(gp, gq);
      h.set(i, j, v);
    }
  }
  return h;
}

SymMatrix assemble_mse_loss_hessian(
    std::size_t n_params, std::size_t n_points,
    const std::function<double(std::size_t)>& predict_k,
    const std::function<double(std::size_t)>& target_k,
    const std::function<std::vector<double>(std::size_t)>& grad_k,
    const std::function<SymMatrix(std::size_t)>& hess_k) {
  if (n_points == 0) throw std::invalid_argument("loss hessian: empty dataset");
  Matrix acc(n_params, n_params);
  for (std::size_t k = 0; k < n_points; ++k) {
    const double residual = predict_k(k) - target_k(k);
    const std::vector<double> g = grad_k(k);
    const SymMatrix hy = hess_k(k);
    for (std::size_t i = 0; i < n_params; ++i)
      for (std::size_t j = 0; j < n_params; ++j)
        acc(i, j) += g[i] * g[j] + residual * hy(i, j);
  }
  const double scale = 2.0 / static_cast<double>(n_points);
  for (double& v : acc.data) v *= scale;
  return SymMatrix(acc);  // mirrors entries exactly
}

SymMatrix hessian_loss(const CircuitTemplate& tpl, std::span<const double> theta,
                       const Dataset& dataset, ShotConfig cfg, Rng& rng) {
  return assemble_mse_loss_hessian(
      tpl.n_trainable, dataset.size(),
      [&](std::size_t k) {
        return predict_sampled(tpl, theta, dataset.points[k].x, cfg, rng);
      },
      [&](std::size_t k) { return dataset.points[k].y; },
      [&](std::size_t k) { return grad_prediction(tpl, theta, dataset.points[k].x, cfg, rng); },
      [&](std::size_t k) {
        return hessian_prediction(tpl, theta, dataset.points[k].x, cfg, rng);
      });
}

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> theta, double step) {
  if (step <= 0.0) throw std::invalid_argument("fd_gradient: step must be positive");
  std::vector<double> t(theta.begin(), theta.end());
  std::vector<double> grad(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double orig = t[i];
    t[i] = orig + step;
    const double fp = f(t);
    t[i] = orig - step;
    const double fm = f(t);
    t[i] = orig;
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

SymMatrix fd_hessian(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> theta, double step) {
  if (step <= 0.0) throw std::invalid_argument("fd_hessian: step must be positive");
  std::vector<double> t(theta.begin(), theta.end());
  const std::size_t n = t.size();
  SymMatrix h(n);
  const double f0 = f(t);
  for (std::size_t i = 0; i < n; ++i) {
    const double oi = t[i];
    t[i] = oi + step;
    const double fp = f(t);
    t[i] = oi - step;
    const double fm = f(t);
    t[i] = oi;
    h.set(i, i, (fp - 2.0 * f0 + fm) / (step * step));
    for (std::size_t j = i + 1; j < n; ++j) {
      const double oj = t[j];
      t[i] = oi + step;
      t[j] = oj + step;
      const double fpp = f(t);
      t[j] = oj - step;
      const double fpm = f(t);
      t[i] = oi - step;
      t[j] = oj + step;
      const double fmp = f(t);
      t[j] = oj - step;
      const double fmm = f(t);
      t[i] = oi;
      t[j] = oj;
      h.set(i, j, (fpp - fpm - fmp + fmm) / (4.0 * step * step));
    }
  }
  return h;
}

}  // namespace underdet
