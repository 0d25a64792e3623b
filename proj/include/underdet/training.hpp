#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "underdet/autodiff.hpp"
#include "underdet/data.hpp"
#include "underdet/qsim.hpp"

namespace underdet {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double lr = 0.01;
  std::uint64_t seed = 0;
  ShotConfig shots = ShotConfig::analytic();
};

struct TrainReport {
  double final_train_loss = 0.0;
  std::optional<double> test_accuracy;
  std::vector<double> loss_history;  // epoch means of the batch losses
};

struct TrainedModel {
  CircuitTemplate tpl;
  std::vector<double> theta;
  TrainReport report;
};

struct Ensemble {
  std::vector<TrainedModel> members;
  std::vector<std::uint64_t> seeds;
};

struct EnsemblePrediction {
  double mean = 0.0;
  double stddev = 0.0;  // population std; exactly 0 iff all members agree
  std::vector<double> per_member;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
};

double mse_loss(std::span<const double> predictions, std::span<const double> targets);

// Standard Adam with bias correction; beta1 = 0.9, beta2 = 0.999,
// eps = 1e-8.
void adam_step(std::vector<double>& theta, std::span<const double> grad, AdamState& state,
               double lr);

// Initializes theta ~ U[0, 2pi) from the config seed, reshuffles the data
// each epoch with the same stream, and takes one Adam step per batch using
// parameter-shift gradients of the MSE loss. With finite shots every
// circuit evaluation is sampled. Fully deterministic in (template,
// dataset, config).
TrainedModel train(const CircuitTemplate& tpl, const Dataset& dataset, const TrainConfig& cfg);

// Member k trains with seed split(cfg.seed, k); members are independent.
Ensemble train_ensemble(const CircuitTemplate& tpl, const Dataset& dataset,
                        const TrainConfig& cfg, int n_members);

EnsemblePrediction ensemble_predict(const Ensemble& ens, std::span<const double> x);
EnsemblePrediction ensemble_predict(const Ensemble& ens, std::span<const double> x,
                                    ShotConfig cfg, std::span<Rng> member_rngs);

// sign(prediction) against +-1 labels
double classification_accuracy(const TrainedModel& model, const Dataset& dataset);

// population mean/std helper shared by the report pipeline
EnsemblePrediction summarize_members(std::vector<double> per_member);

// --- classical baseline -------------------------------------------------

struct MLPConfig {
  std::vector<int> widths = {1, 16, 16, 1};  // tanh hidden layers, linear output
  double lr = 1e-3;
  int epochs = 2000;  // full batch
  std::uint64_t seed = 0;
};

// Fully connected network. Parameters flatten in fixed order: for each
// layer, weight matrix row-major, then biases.
struct MLPModel {
  std::vector<int> widths;
  std::vector<Matrix> weights;              // per layer, out x in
  std::vector<std::vector<double>> biases;  // per layer

  std::size_t n_params() const;
  double predict(std::span<const double> x) const;
  // d prediction / d parameters, flattened
  std::vector<double> grad_prediction(std::span<const double> x) const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
};

struct MLPEnsemble {
  std::vector<MLPModel> members;
  std::vector<std::uint64_t> seeds;
};

// Weights init U[-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero;
// full-batch Adam on the MSE loss.
MLPModel train_mlp(const Dataset& dataset, const MLPConfig& cfg);

MLPEnsemble train_mlp_ensemble(const Dataset& dataset, const MLPConfig& cfg, int n_members);

// MSE loss Hessian for the MLP, assembled like the circuit path; the
// per-point prediction Hessian comes from central differences of the
// analytic gradient (the gradient itself is exact backprop).
SymMatrix mlp_loss_hessian(const MLPModel& model, const Dataset& dataset, double fd_step = 1e-4);

}  // namespace underdet
