#include "underdet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace underdet {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
}  // namespace

double mse_loss(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw std::invalid_argument("mse_loss: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("mse_loss: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - targets[i];
    s += r * r;
  }
  return s / static_cast<double>(predictions.size());
}

void adam_step(std::vector<double>& theta, std::span<const double> grad, AdamState& state,
               double lr) {
  if (grad.size() != theta.size()) throw std::invalid_argument("adam_step: dimension mismatch");
  if (state.m.empty()) {
    state.m.assign(theta.size(), 0.0);
    state.v.assign(theta.size(), 0.0);
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * grad[i];
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
  }
}

TrainedModel train(const CircuitTemplate& tpl, const Dataset& dataset, const TrainConfig& cfg) {
  if (dataset.points.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw std::invalid_argument("train: epochs and batch_size must be >= 1");
  tpl.validate();

  Rng rng(cfg.seed);
  TrainedModel model;
  model.tpl = tpl;
  model.theta.resize(tpl.n_trainable);
  for (double& t : model.theta) t = rng.uniform(0.0, kTwoPi);

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  AdamState adam;
  std::vector<double> batch_grad(tpl.n_trainable);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sq = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
      for (std::size_t bi = start; bi < stop; ++bi) {
        const LabeledPoint& pt = dataset.points[order[bi]];
        const double yhat = predict_sampled(tpl, model.theta, pt.x, cfg.shots, rng);
        const double residual = yhat - pt.y;
        epoch_sq += residual * residual;
        const std::vector<double> g = grad_prediction(tpl, model.theta, pt.x, cfg.shots, rng);
        for (int i = 0; i < tpl.n_trainable; ++i) batch_grad[i] += 2.0 * residual * g[i];
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (double& g : batch_grad) g *= inv;
      adam_step(model.theta, batch_grad, adam, cfg.lr);
    }
    const double epoch_loss = epoch_sq / static_cast<double>(n);
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
    model.report.loss_history.push_back(epoch_loss);
  }

  double final_sq = 0.0;
  for (const LabeledPoint& pt : dataset.points) {
    const double r = predict_sampled(tpl, model.theta, pt.x, cfg.shots, rng) - pt.y;
    final_sq += r * r;
  }
  model.report.final_train_loss = final_sq / static_cast<double>(n);
  return model;
}

Ensemble train_ensemble(const CircuitTemplate& tpl, const Dataset& dataset,
                        const TrainConfig& cfg, int n_members) {
  if (n_members < 2) throw std::invalid_argument("train_ensemble: need at least 2 members");
  Ensemble ens;
  for (int k = 0; k < n_members; ++k) {
    TrainConfig member_cfg = cfg;
    member_cfg.seed = Rng::split(cfg.seed, static_cast<std::uint64_t>(k));
    ens.seeds.push_back(member_cfg.seed);
    try {
      ens.members.push_back(train(tpl, dataset, member_cfg));
    } catch (const std::exception& e) {
      throw std::runtime_error("train_ensemble: member " + std::to_string(k) +
                               " failed: " + e.what());
    }
  }
  return ens;
}

EnsemblePrediction summarize_members(std::vector<double> per_member) {
  EnsemblePrediction out;
  out.per_member = std::move(per_member);
  const std::size_t n = out.per_member.size();
  if (n == 0) throw std::invalid_argument("ensemble_predict: empty ensemble");
  out.mean = std::accumulate(out.per_member.begin(), out.per_member.end(), 0.0) /
             static_cast<double>(n);
  const bool all_equal = std::all_of(out.per_member.begin(), out.per_member.end(),
                                     [&](double v) { return v == out.per_member.front(); });
  if (all_equal) {
    out.mean = out.per_member.front();
    out.stddev = 0.0;  // exact, so std == 0 iff all members agree
    return out;
  }
  double sq = 0.0;
  for (double v : out.per_member) {
    const double d = v - out.mean;
    sq += d * d;
  }
  out.stddev = std::sqrt(sq / static_cast<double>(n));
  return out;
}

EnsemblePrediction ensemble_predict(const Ensemble& ens, std::span<const double> x) {
  std::vector<double> preds;
  preds.reserve(ens.members.size());
  for (const TrainedModel& m : ens.members) preds.push_back(predict(m.tpl, m.theta, x));
  return summarize_members(std::move(preds));
}

EnsemblePrediction ensemble_predict(const Ensemble& ens, std::span<const double> x,
                                    ShotConfig cfg, std::span<Rng> member_rngs) {
  if (member_rngs.size() != ens.members.size())
    throw std::invalid_argument("ensemble_predict: one rng per member required");
  std::vector<double> preds;
  preds.reserve(ens.members.size());
  for (std::size_t k = 0; k < ens.members.size(); ++k)
    preds.push_back(
        predict_sampled(ens.members[k].tpl, ens.members[k].theta, x, cfg, member_rngs[k]));
  return summarize_members(std::move(preds));
}

double classification_accuracy(const TrainedModel& model, const Dataset& dataset) {
  if (dataset.points.empty()) throw std::invalid_argument("accuracy: empty dataset");
  std::size_t hits = 0;
  for (const LabeledPoint& pt : dataset.points) {
    const double yhat = predict(model.tpl, model.theta, pt.x);
    if ((yhat >= 0.0 ? 1.0 : -1.0) == pt.y) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

// --- MLP ------------------------------------------------------------------

std::size_t MLPModel::n_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    n += static_cast<std::size_t>(widths[l + 1]) * widths[l] + widths[l + 1];
  return n;
}

namespace {

// forward pass keeping pre-activations and activations for backprop
struct ForwardTrace {
  std::vector<std::vector<double>> activations;  // a[0] = input, a[L] = output
};

ForwardTrace mlp_forward(const MLPModel& m, std::span<const double> x) {
  ForwardTrace tr;
  tr.activations.emplace_back(x.begin(), x.end());
  const std::size_t n_layers = m.weights.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Matrix& w = m.weights[l];
    std::vector<double> z(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
      double s = m.biases[l][r];
      for (std::size_t c = 0; c < w.cols; ++c) s += w(r, c) * tr.activations[l][c];
      z[r] = l + 1 < n_layers ? std::tanh(s) : s;  // linear output layer
    }
    tr.activations.push_back(std::move(z));
  }
  return tr;
}

}  // namespace

double MLPModel::predict(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != widths.front())
    throw std::invalid_argument("mlp predict: input dimension mismatch");
  return mlp_forward(*this, x).activations.back()[0];
}

std::vector<double> MLPModel::grad_prediction(std::span<const double> x) const {
  const ForwardTrace tr = mlp_forward(*this, x);
  const std::size_t n_layers = weights.size();

  // reverse pass: delta[l] = d output / d z_l (post-activation sensitivity
  // folded in for tanh layers)
  std::vector<std::vector<double>> delta(n_layers);
  delta[n_layers - 1] = {1.0};
  for (std::size_t l = n_layers - 1; l-- > 0;) {
    const Matrix& w = weights[l + 1];
    delta[l].assign(w.cols, 0.0);
    for (std::size_t c = 0; c < w.cols; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < w.rows; ++r) s += delta[l + 1][r] * w(r, c);
      const double a = tr.activations[l + 1][c];
      delta[l][c] = s * (1.0 - a * a);  // tanh'
    }
  }

  std::vector<double> grad;
  grad.reserve(n_params());
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Matrix& w = weights[l];
    for (std::size_t r = 0; r < w.rows; ++r)
      for (std::size_t c = 0; c < w.cols; ++c) grad.push_back(delta[l][r] * tr.activations[l][c]);
    for (std::size_t r = 0; r < w.rows; ++r) grad.push_back(delta[l][r]);
  }
  return grad;
}

std::vector<double> MLPModel::flatten() const {
  std::vector<double> flat;
  flat.reserve(n_params());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.insert(flat.end(), weights[l].data.begin(), weights[l].data.end());
    flat.insert(flat.end(), biases[l].begin(), biases[l].end());
  }
  return flat;
}

void MLPModel::unflatten(std::span<const double> flat) {
  std::size_t pos = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    std::copy_n(flat.begin() + pos, weights[l].data.size(), weights[l].data.begin());
    pos += weights[l].data.size();
    std::copy_n(flat.begin() + pos, biases[l].size(), biases[l].begin());
    pos += biases[l].size();
  }
}

MLPModel train_mlp(const Dataset& dataset, const MLPConfig& cfg) {
  if (dataset.points.empty()) throw std::invalid_argument("train_mlp: empty dataset");
  if (cfg.widths.size() < 2) throw std::invalid_argument("train_mlp: need at least two layers");
  if (cfg.widths.front() != dataset.feature_dim)
    throw std::invalid_argument("train_mlp: input width must match feature dimension");

  Rng rng(cfg.seed);
  MLPModel model;
  model.widths = cfg.widths;
  for (std::size_t l = 0; l + 1 < cfg.widths.size(); ++l) {
    Matrix w(cfg.widths[l + 1], cfg.widths[l]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.widths[l]));
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(cfg.widths[l + 1], 0.0);
  }

  const std::size_t n = dataset.size();
  std::vector<double> theta = model.flatten();
  AdamState adam;
  std::vector<double> grad(theta.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (const LabeledPoint& pt : dataset.points) {
      const double yhat = model.predict(pt.x);
      const double residual = yhat - pt.y;
      loss += residual * residual;
      const std::vector<double> g = model.grad_prediction(pt.x);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += 2.0 * residual * g[i];
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (double& g : grad) g *= inv;
    if (!std::isfinite(loss))
      throw std::runtime_error("train_mlp: non-finite loss at epoch " + std::to_string(epoch));
    adam_step(theta, grad, adam, cfg.lr);
    model.unflatten(theta);
  }
  return model;
}

MLPEnsemble train_mlp_ensemble(const Dataset& dataset, const MLPConfig& cfg, int n_members) {
  if (n_members < 2) throw std::invalid_argument("train_mlp_ensemble: need at least 2 members");
  MLPEnsemble ens;
  for (int k = 0; k < n_members; ++k) {
    MLPConfig member_cfg = cfg;
    member_cfg.seed = Rng::split(cfg.seed, static_cast<std::uint64_t>(k));
    ens.seeds.push_back(member_cfg.seed);
    ens.members.push_back(train_mlp(dataset, member_cfg));
  }
  return ens;
}

SymMatrix mlp_loss_hessian(const MLPModel& model, const Dataset& dataset, double fd_step) {
  MLPModel work = model;
  std::vector<double> theta = work.flatten();
  const std::size_t n_params = theta.size();

  // central difference of the exact backprop gradient
  auto prediction_hessian = [&](std::span<const double> x) {
    SymMatrix h(n_params);
    Matrix raw(n_params, n_params);
    for (std::size_t i = 0; i < n_params; ++i) {
      const double orig = theta[i];
      theta[i] = orig + fd_step;
      work.unflatten(theta);
      const std::vector<double> gp = work.grad_prediction(x);
      theta[i] = orig - fd_step;
      work.unflatten(theta);
      const std::vector<double> gm = work.grad_prediction(x);
      theta[i] = orig;
      for (std::size_t j = 0; j < n_params; ++j) raw(i, j) = (gp[j] - gm[j]) / (2.0 * fd_step);
    }
    work.unflatten(theta);
    return SymMatrix(raw);
  };

  return assemble_mse_loss_hessian(
      n_params, dataset.size(), [&](std::size_t k) { return model.predict(dataset.points[k].x); },
      [&](std::size_t k) { return dataset.points[k].y; },
      [&](std::size_t k) { return model.grad_prediction(dataset.points[k].x); },
      [&](std::size_t k) { return prediction_hessian(dataset.points[k].x); });
}

}  // namespace underdet
