#pragma once

#include <functional>
#include <span>
#include <vector>

#include "underdet/data.hpp"
#include "underdet/linalg.hpp"
#include "underdet/qsim.hpp"

namespace underdet {

// d y / d theta_i by the parameter-shift rule: for every gate fed by
// trainable index i, (f(+pi/2 on that gate) - f(-pi/2 on that gate)) / 2,
// summed over the gate occurrences. Exact for the rotation gate set used
// here. With finite shots every evaluation is sampled, so the result is an
// unbiased estimate.
std::vector<double> grad_prediction(const CircuitTemplate& tpl, std::span<const double> theta,
                                    std::span<const double> x, ShotConfig cfg, Rng& rng);

// Second derivatives by the double-shift rule, summed over occurrence
// pairs: +-pi/2 four-point stencils across distinct gates and the
// [f(+pi) - 2 f + f(-pi)] / 4 form on a single gate.
SymMatrix hessian_prediction(const CircuitTemplate& tpl, std::span<const double> theta,
                             std::span<const double> x, ShotConfig cfg, Rng& rng);

// Hessian of the MSE training loss at theta:
//   H = (2/N) sum_k [ g_k g_k^T + (y_hat_k - y_k) * Hy_k ]
// assembled from grad_prediction and hessian_prediction and symmetrized.
SymMatrix hessian_loss(const CircuitTemplate& tpl, std::span<const double> theta,
                       const Dataset& dataset, ShotConfig cfg, Rng& rng);

// Shared Eq.-of-motion for the MSE loss Hessian over any differentiable
// model family; the PQC and MLP paths both funnel through this.
SymMatrix assemble_mse_loss_hessian(
    std::size_t n_params, std::size_t n_points,
    const std::function<double(std::size_t)>& predict_k,
    const std::function<double(std::size_t)>& target_k,
    const std::function<std::vector<double>(std::size_t)>& grad_k,
    const std::function<SymMatrix(std::size_t)>& hess_k);

// Central finite differences; verification oracles, not production paths.
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> theta, double step);
SymMatrix fd_hessian(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> theta, double step);

}  // namespace underdet
