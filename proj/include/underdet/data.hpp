#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "underdet/linalg.hpp"
#include "underdet/rng.hpp"

namespace underdet {

struct LabeledPoint {
  std::vector<double> x;
  double y = 0.0;
  bool in_train_domain = true;
};

// Min/max used for feature normalization plus the declared target range;
// kept with the dataset so test data is always mapped with the statistics
// recorded at training time.
struct NormalizationRecord {
  std::vector<double> feature_min;
  std::vector<double> feature_max;
  double target_lo = 0.0;
  double target_hi = 0.0;
};

struct Dataset {
  std::vector<LabeledPoint> points;
  int feature_dim = 0;
  NormalizationRecord norm;

  std::size_t size() const { return points.size(); }
};

// 28x28 grayscale image, row-major, values in [0, 1].
struct ImageRecord {
  std::vector<double> pixels;
  int label = -1;
};
inline constexpr int kImageSide = 28;
inline constexpr int kImagePixels = kImageSide * kImageSide;

double sine_target(double x);
double linear_target(double x);
bool in_1d_train_domain(double x);

// Train x uniform over [-1,0] u [1,2] (equal mass per unit length), test x
// uniform over [-3,4]; y = sin(4x) + N(0, noise_std).
std::pair<Dataset, Dataset> gen_sine(int n_train, int n_test, Rng& rng, double noise_std = 0.25);

// Same domains, y = x/4 + N(0, noise_std); default noise variance 1/16.
std::pair<Dataset, Dataset> gen_linear(int n_train, int n_test, Rng& rng, double noise_std = 0.25);

// The bundled two-class Iris table (100 rows).
std::string_view iris_csv();

// Parses the CSV asset, min-max normalizes each feature to [0, pi] over
// all 100 rows, maps labels setosa -> -1 / versicolor -> +1, and splits
// stratified train/test by seeded shuffle (default 10/90).
std::pair<Dataset, Dataset> load_iris_binary(std::string_view csv_text, Rng& rng,
                                             double train_fraction = 0.10);

// IDX containers, big-endian, optionally gzip-compressed (transparently
// detected). Images require magic 0x803 and 28x28 payload; labels 0x801.
std::vector<ImageRecord> load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);
std::vector<ImageRecord> load_image_label_pair(const std::string& images_path,
                                               const std::string& labels_path);

// Rotation about the image center (13.5, 13.5) with bilinear
// interpolation; source pixels outside the frame read as 0 and the result
// is clamped to [0, 1].
ImageRecord rotate_image(const ImageRecord& img, double angle_degrees);

struct FmnistPrepared {
  Dataset train;                    // k PCA features normalized to [0, pi], labels +-1
  PCAModel pca;                     // fit on the training subsample only
  NormalizationRecord feature_norm; // training min/max of the PCA features
  std::vector<ImageRecord> test_images;
  int class_a = 0;
  int class_b = 1;
};

// Subsamples the two classes (seeded), fits PCA on the training images
// only, and normalizes projected features to [0, pi] with training
// statistics. class_a maps to -1, class_b to +1.
FmnistPrepared prepare_fmnist(const std::vector<ImageRecord>& records, int class_a, int class_b,
                              int k, Rng& rng, int n_train_per_class = 500,
                              int n_test_per_class = 200);

// PCA projection + the recorded min-max map. No clamping: shifted inputs
// may legitimately land outside [0, pi].
std::vector<double> featurize_image(const ImageRecord& img, const PCAModel& pca,
                                    const NormalizationRecord& norm);

}  // namespace underdet
