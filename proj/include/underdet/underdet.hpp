#pragma once

#include <span>
#include <vector>

#include "underdet/linalg.hpp"
#include "underdet/training.hpp"

namespace underdet {

// Basis of the flat subspace of a loss landscape: the M-m eigenvector
// columns with the smallest |eigenvalue|, ordered by ascending magnitude.
struct FlatProjector {
  int m = 0;
  Matrix basis;  // M x (M - m)
};

FlatProjector flat_projector(const Spectrum& spectrum, int m);

// ||basis^T g||_2: how much of a prediction gradient lies in the flat
// subspace. Zero means the prediction is pinned down by the training loss;
// large values flag underdetermined inputs.
double extrapolation_score(const FlatProjector& proj, std::span<const double> g);

// Mean of per-member scores; each member's gradient must be paired with
// the projector built from that member's own Hessian.
double mean_extrapolation_score(std::span<const FlatProjector> projectors,
                                const std::vector<std::vector<double>>& member_grads);

// Convenience over a trained circuit ensemble with analytic gradients.
double mean_extrapolation_score(const Ensemble& ens, std::span<const FlatProjector> projectors,
                                std::span<const double> x);

// K parameter vectors theta* + eps * unit(sum_i c_i xi_i) with c standard
// normal over the kept (small-|lambda|) directions; each sample sits at
// distance exactly eps from theta*. eps = 0 returns K copies of theta*.
std::vector<std::vector<double>> local_ensemble_sample(const TrainedModel& model,
                                                       const Spectrum& spectrum, int m, double eps,
                                                       int K, Rng& rng);

// Sorted |eigenvalue| list for export plus a diagnostic cut-off
// suggestion (largest relative gap); the suggestion is never applied
// automatically.
struct SpectrumReport {
  std::vector<double> magnitudes;  // nonincreasing
  int suggested_m = 0;
};

SpectrumReport spectrum_report(const Spectrum& spectrum);

}  // namespace underdet
