#include "underdet/underdet.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace underdet {

FlatProjector flat_projector(const Spectrum& spectrum, int m) {
  const int total = static_cast<int>(spectrum.eigenvalues.size());
  if (m < 0 || m > total)
    throw std::invalid_argument("flat_projector: m must be in [0, M], got " + std::to_string(m));
  FlatProjector proj;
  proj.m = m;
  const int kept = total - m;
  proj.basis = Matrix(total, kept);
  // spectrum columns are sorted by decreasing |lambda|; reading the tail
  // backwards gives the kept columns in ascending magnitude
  for (int c = 0; c < kept; ++c) {
    const int src = total - 1 - c;
    for (int r = 0; r < total; ++r) proj.basis(r, c) = spectrum.eigenvectors(r, src);
  }
  return proj;
}

double extrapolation_score(const FlatProjector& proj, std::span<const double> g) {
  if (g.size() != proj.basis.rows)
    throw std::invalid_argument("extrapolation_score: gradient dimension mismatch");
  if (proj.m == 0) {
    // identity projection; computing it directly keeps E_0 == ||g|| exact
    double sum_sq = 0.0;
    for (double v : g) sum_sq += v * v;
    return std::sqrt(sum_sq);
  }
  double sum_sq = 0.0;
  for (std::size_t c = 0; c < proj.basis.cols; ++c) {
    double dot = 0.0;
    for (std::size_t r = 0; r < proj.basis.rows; ++r) dot += proj.basis(r, c) * g[r];
    sum_sq += dot * dot;
  }
  return std::sqrt(sum_sq);
}

double mean_extrapolation_score(std::span<const FlatProjector> projectors,
                                const std::vector<std::vector<double>>& member_grads) {
  if (projectors.size() != member_grads.size())
    throw std::invalid_argument("mean_extrapolation_score: projector/gradient count mismatch");
  if (projectors.empty()) throw std::invalid_argument("mean_extrapolation_score: no members");
  double acc = 0.0;
  for (std::size_t k = 0; k < projectors.size(); ++k)
    acc += extrapolation_score(projectors[k], member_grads[k]);
  return acc / static_cast<double>(projectors.size());
}

double mean_extrapolation_score(const Ensemble& ens, std::span<const FlatProjector> projectors,
                                std::span<const double> x) {
  if (projectors.size() != ens.members.size())
    throw std::invalid_argument("mean_extrapolation_score: one projector per member required");
  Rng unused(0);
  std::vector<std::vector<double>> grads;
  grads.reserve(ens.members.size());
  for (const TrainedModel& member : ens.members)
    grads.push_back(
        grad_prediction(member.tpl, member.theta, x, ShotConfig::analytic(), unused));
  return mean_extrapolation_score(projectors, grads);
}

std::vector<std::vector<double>> local_ensemble_sample(const TrainedModel& model,
                                                       const Spectrum& spectrum, int m, double eps,
                                                       int K, Rng& rng) {
  const int total = static_cast<int>(spectrum.eigenvalues.size());
  if (m >= total)
    throw std::invalid_argument("local_ensemble_sample: no flat directions left at m = M");
  if (K < 1) throw std::invalid_argument("local_ensemble_sample: K must be >= 1");
  if (eps < 0.0) throw std::invalid_argument("local_ensemble_sample: eps must be >= 0");

  const FlatProjector proj = flat_projector(spectrum, m);
  const int kept = total - m;
  std::vector<std::vector<double>> samples;
  samples.reserve(K);
  for (int s = 0; s < K; ++s) {
    std::vector<double> c(kept);
    for (double& ci : c) ci = rng.gaussian(0.0, 1.0);
    double norm = 0.0;
    for (double ci : c) norm += ci * ci;
    norm = std::sqrt(norm);
    std::vector<double> theta = model.theta;
    if (eps > 0.0 && norm > 0.0) {
      const double scale = eps / norm;  // orthonormal columns: |basis c| = |c|
      for (int r = 0; r < total; ++r) {
        double d = 0.0;
        for (int col = 0; col < kept; ++col) d += proj.basis(r, col) * c[col];
        theta[r] += scale * d;
      }
    }
    samples.push_back(std::move(theta));
  }
  return samples;
}

SpectrumReport spectrum_report(const Spectrum& spectrum) {
  SpectrumReport rep;
  rep.magnitudes.reserve(spectrum.eigenvalues.size());
  for (double ev : spectrum.eigenvalues) rep.magnitudes.push_back(std::abs(ev));
  // diagnostic m: cut at the largest relative gap between neighbours
  double best_ratio = -1.0;
  for (std::size_t i = 0; i + 1 < rep.magnitudes.size(); ++i) {
    const double hi = rep.magnitudes[i] + 1e-300;
    const double lo = rep.magnitudes[i + 1] + 1e-300;
    if (hi / lo > best_ratio) {
      best_ratio = hi / lo;
      rep.suggested_m = static_cast<int>(i) + 1;
    }
  }
  return rep;
}

}  // namespace underdet
