#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "underdet/data.hpp"
#include "underdet/training.hpp"
#include "underdet/underdet.hpp"

namespace underdet {

inline constexpr const char* kVersion = "0.1.0";

// Fixed sub-stream indices hung off the experiment seed. Everything random
// in a run derives from Rng::split(seed, stream), so a report is
// reproducible from the seed echoed in its summary.
inline constexpr std::uint64_t kDataStream = 1;
inline constexpr std::uint64_t kTrainStream = 2;
inline constexpr std::uint64_t kScoreStream = 3;

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unset numeric fields (-1 / empty lists) resolve to per-experiment
// defaults; the summary echoes the resolved values.
struct ExperimentConfig {
  std::string experiment;  // iris-correlation | sine-ood | linear-ood | noise-sweep | fmnist-rotation
  std::uint64_t seed = 1;
  int members = -1;
  int m = -1;
  std::vector<long> shots;     // noise-sweep grid; 0 = analytic
  std::vector<double> angles;  // rotation grid, degrees
  int epochs = -1;
  int batch = -1;
  double lr = -1.0;
  std::string out = ".";
  std::string images;  // IDX paths for fmnist-rotation
  std::string labels;
  std::string family = "pqc";  // pqc | mlp (1-d tasks only)
  int train_points = -1;       // per class for fmnist-rotation
  int test_points = -1;
  int class_a = 0;  // fmnist-rotation class pair
  int class_b = 1;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct CsvTable {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Deterministic payload: summary.json plus one CSV per table. Wall-clock
// goes to a separate run_info.json so the payload is bit-identical across
// reruns of the same config.
struct RunReport {
  std::string dir_name;  // "{experiment}_{seed}"
  nlohmann::json summary;
  std::vector<CsvTable> tables;
  double wall_clock_s = 0.0;
};

std::string format_double(double v);  // %.17g, round-trip exact
void write_report(const RunReport& report, const std::string& out_root);

// Best single-threshold classifier on a scalar score: scans midpoints of
// the sorted unique values plus the two all-one-class sentinels, both
// orientations. orientation +1 predicts true when score > threshold, -1
// when score < threshold. Ties keep the smaller threshold (orientation +1
// checked first).
struct ThresholdClassifier {
  double accuracy = 0.0;
  double threshold = 0.0;
  int orientation = 1;
};
ThresholdClassifier threshold_classifier_accuracy(std::span<const double> scores,
                                                  const std::vector<bool>& labels);

RunReport run_iris_correlation(const ExperimentConfig& cfg);
RunReport run_ood_1d(const ExperimentConfig& cfg, const std::string& task);
RunReport run_noise_sweep(const ExperimentConfig& cfg);
RunReport run_fmnist_rotation(const ExperimentConfig& cfg);

// dispatches on cfg.experiment
RunReport run_experiment(const ExperimentConfig& cfg);

}  // namespace underdet
