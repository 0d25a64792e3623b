#include "underdet/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "underdet/iris_csv.hpp"

namespace underdet {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

double sine_target(double x) { return std::sin(4.0 * x); }
double linear_target(double x) { return 0.25 * x; }
bool in_1d_train_domain(double x) { return (x >= -1.0 && x <= 0.0) || (x >= 1.0 && x <= 2.0); }

namespace {

std::pair<Dataset, Dataset> gen_1d(int n_train, int n_test, Rng& rng, double noise_std,
                                   double (*target)(double)) {
  if (n_train < 1 || n_test < 1) throw std::invalid_argument("gen_1d: need at least one point");
  auto draw_y = [&](double x) {
    double y = target(x);
    if (noise_std > 0.0) y += rng.gaussian(0.0, noise_std);
    return y;
  };
  Dataset train, test;
  train.feature_dim = test.feature_dim = 1;
  train.norm.target_lo = test.norm.target_lo = -1.0;
  train.norm.target_hi = test.norm.target_hi = 1.0;
  for (int i = 0; i < n_train; ++i) {
    double u = rng.next_double() * 2.0;  // two unit-length intervals, equal mass
    double x = u < 1.0 ? -1.0 + u : u;
    train.points.push_back({{x}, draw_y(x), true});
  }
  for (int i = 0; i < n_test; ++i) {
    double x = rng.uniform(-3.0, 4.0);
    test.points.push_back({{x}, draw_y(x), in_1d_train_domain(x)});
  }
  return {std::move(train), std::move(test)};
}

}  // namespace

std::pair<Dataset, Dataset> gen_sine(int n_train, int n_test, Rng& rng, double noise_std) {
  return gen_1d(n_train, n_test, rng, noise_std, &sine_target);
}

std::pair<Dataset, Dataset> gen_linear(int n_train, int n_test, Rng& rng, double noise_std) {
  return gen_1d(n_train, n_test, rng, noise_std, &linear_target);
}

std::string_view iris_csv() { return detail::kIrisCsv; }

std::pair<Dataset, Dataset> load_iris_binary(std::string_view csv_text, Rng& rng,
                                             double train_fraction) {
  std::istringstream in{std::string(csv_text)};
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("iris: empty csv");

  std::vector<std::vector<double>> features;
  std::vector<double> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::vector<double> f(4);
    std::string cell;
    for (int j = 0; j < 4; ++j) {
      if (!std::getline(row, cell, ',')) throw std::runtime_error("iris: short row");
      std::size_t pos = 0;
      f[j] = std::stod(cell, &pos);
      if (pos != cell.size()) throw std::runtime_error("iris: bad numeric cell '" + cell + "'");
    }
    if (!std::getline(row, cell)) throw std::runtime_error("iris: missing class cell");
    double y;
    if (cell == "setosa")
      y = -1.0;
    else if (cell == "versicolor")
      y = 1.0;
    else
      throw std::runtime_error("iris: unknown class '" + cell + "'");
    features.push_back(std::move(f));
    labels.push_back(y);
  }
  const std::size_t n = features.size();
  if (n < 2) throw std::runtime_error("iris: too few rows");

  // full-set min/max, then map to [0, pi]
  std::vector<double> lo(4, 1e300), hi(4, -1e300);
  for (const auto& f : features)
    for (int j = 0; j < 4; ++j) {
      lo[j] = std::min(lo[j], f[j]);
      hi[j] = std::max(hi[j], f[j]);
    }
  for (auto& f : features)
    for (int j = 0; j < 4; ++j)
      f[j] = hi[j] == lo[j] ? 0.0 : (f[j] - lo[j]) / (hi[j] - lo[j]) * kPi;

  NormalizationRecord norm{lo, hi, -1.0, 1.0};

  // stratified split: shuffle each class, first fraction goes to train
  Dataset train, test;
  train.feature_dim = test.feature_dim = 4;
  train.norm = test.norm = norm;
  for (double cls : {-1.0, 1.0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == cls) idx.push_back(i);
    rng.shuffle(idx);
    const std::size_t n_train =
        static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(idx.size())));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      Dataset& dst = r < n_train ? train : test;
      dst.points.push_back({features[idx[r]], labels[idx[r]], true});
    }
  }
  return {std::move(train), std::move(test)};
}

namespace {

// gzread handles both plain and gzip files (detects the 1f 8b prefix).
std::vector<unsigned char> read_file_maybe_gz(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("idx: cannot open " + path);
  std::vector<unsigned char> bytes;
  unsigned char buf[1 << 16];
  int got;
  while ((got = gzread(f, buf, sizeof buf)) > 0) bytes.insert(bytes.end(), buf, buf + got);
  const bool bad = got < 0;
  gzclose(f);
  if (bad) throw std::runtime_error("idx: read error in " + path);
  return bytes;
}

std::uint32_t be32(const unsigned char* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

}  // namespace

std::vector<ImageRecord> load_idx_images(const std::string& path) {
  const auto bytes = read_file_maybe_gz(path);
  if (bytes.size() < 4) throw std::runtime_error("idx images: truncated header in " + path);
  if (be32(&bytes[0]) != 0x00000803u)
    throw std::runtime_error("idx images: bad magic in " + path);
  if (bytes.size() < 16) throw std::runtime_error("idx images: truncated header in " + path);
  const std::uint32_t count = be32(&bytes[4]);
  const std::uint32_t rows = be32(&bytes[8]);
  const std::uint32_t cols = be32(&bytes[12]);
  if (rows != kImageSide || cols != kImageSide)
    throw std::runtime_error("idx images: expected 28x28 payload in " + path);
  const std::size_t need = 16 + std::size_t(count) * kImagePixels;
  if (bytes.size() < need) throw std::runtime_error("idx images: truncated data in " + path);

  std::vector<ImageRecord> out(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    out[i].pixels.resize(kImagePixels);
    const unsigned char* src = &bytes[16 + std::size_t(i) * kImagePixels];
    for (int p = 0; p < kImagePixels; ++p) out[i].pixels[p] = src[p] / 255.0;
  }
  return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
  const auto bytes = read_file_maybe_gz(path);
  if (bytes.size() < 4) throw std::runtime_error("idx labels: truncated header in " + path);
  if (be32(&bytes[0]) != 0x00000801u)
    throw std::runtime_error("idx labels: bad magic in " + path);
  if (bytes.size() < 8) throw std::runtime_error("idx labels: truncated header in " + path);
  const std::uint32_t count = be32(&bytes[4]);
  if (bytes.size() < 8 + std::size_t(count))
    throw std::runtime_error("idx labels: truncated data in " + path);
  std::vector<int> out(count);
  for (std::uint32_t i = 0; i < count; ++i) out[i] = bytes[8 + i];
  return out;
}

std::vector<ImageRecord> load_image_label_pair(const std::string& images_path,
                                               const std::string& labels_path) {
  std::vector<ImageRecord> images = load_idx_images(images_path);
  const std::vector<int> labels = load_idx_labels(labels_path);
  if (images.size() != labels.size())
    throw std::runtime_error("idx: image/label count mismatch (" + std::to_string(images.size()) +
                             " vs " + std::to_string(labels.size()) + ")");
  for (std::size_t i = 0; i < images.size(); ++i) images[i].label = labels[i];
  return images;
}

ImageRecord rotate_image(const ImageRecord& img, double angle_degrees) {
  if (!std::isfinite(angle_degrees)) throw std::invalid_argument("rotate_image: non-finite angle");
  const double a = angle_degrees * kPi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double cr = (kImageSide - 1) / 2.0;  // 13.5

  ImageRecord out;
  out.label = img.label;
  out.pixels.assign(kImagePixels, 0.0);
  for (int r = 0; r < kImageSide; ++r)
    for (int c = 0; c < kImageSide; ++c) {
      const double dr = r - cr, dc = c - cr;
      const double sr = cr + ca * dr + sa * dc;  // inverse rotation
      const double sc = cr - sa * dr + ca * dc;
      const int r0 = static_cast<int>(std::floor(sr));
      const int c0 = static_cast<int>(std::floor(sc));
      const double fr = sr - r0, fc = sc - c0;
      auto at = [&](int rr, int cc) -> double {
        if (rr < 0 || rr >= kImageSide || cc < 0 || cc >= kImageSide) return 0.0;
        return img.pixels[rr * kImageSide + cc];
      };
      const double v = (1 - fr) * ((1 - fc) * at(r0, c0) + fc * at(r0, c0 + 1)) +
                       fr * ((1 - fc) * at(r0 + 1, c0) + fc * at(r0 + 1, c0 + 1));
      out.pixels[r * kImageSide + c] = std::clamp(v, 0.0, 1.0);
    }
  return out;
}

FmnistPrepared prepare_fmnist(const std::vector<ImageRecord>& records, int class_a, int class_b,
                              int k, Rng& rng, int n_train_per_class, int n_test_per_class) {
  if (class_a == class_b) throw std::invalid_argument("prepare_fmnist: classes must differ");
  FmnistPrepared prep;
  prep.class_a = class_a;
  prep.class_b = class_b;

  std::vector<std::size_t> train_idx;
  for (int cls : {class_a, class_b}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].label == cls) idx.push_back(i);
    if (idx.empty())
      throw std::invalid_argument("prepare_fmnist: class " + std::to_string(cls) +
                                  " not present in the data");
    if (idx.size() < std::size_t(n_train_per_class + n_test_per_class))
      throw std::invalid_argument("prepare_fmnist: class " + std::to_string(cls) +
                                  " has too few images for the requested subsample");
    rng.shuffle(idx);
    for (int i = 0; i < n_train_per_class; ++i) train_idx.push_back(idx[i]);
    for (int i = 0; i < n_test_per_class; ++i)
      prep.test_images.push_back(records[idx[n_train_per_class + i]]);
  }

  Matrix x(train_idx.size(), kImagePixels);
  for (std::size_t i = 0; i < train_idx.size(); ++i)
    for (int p = 0; p < kImagePixels; ++p) x(i, p) = records[train_idx[i]].pixels[p];
  prep.pca = pca_fit(x, k);

  std::vector<std::vector<double>> feats(train_idx.size());
  prep.feature_norm.feature_min.assign(k, 1e300);
  prep.feature_norm.feature_max.assign(k, -1e300);
  prep.feature_norm.target_lo = -1.0;
  prep.feature_norm.target_hi = 1.0;
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    feats[i] = pca_project(prep.pca, records[train_idx[i]].pixels);
    for (int j = 0; j < k; ++j) {
      prep.feature_norm.feature_min[j] = std::min(prep.feature_norm.feature_min[j], feats[i][j]);
      prep.feature_norm.feature_max[j] = std::max(prep.feature_norm.feature_max[j], feats[i][j]);
    }
  }

  prep.train.feature_dim = k;
  prep.train.norm = prep.feature_norm;
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    std::vector<double> f(k);
    for (int j = 0; j < k; ++j) {
      const double lo = prep.feature_norm.feature_min[j];
      const double hi = prep.feature_norm.feature_max[j];
      f[j] = hi == lo ? 0.0 : (feats[i][j] - lo) / (hi - lo) * kPi;
    }
    const double y = records[train_idx[i]].label == class_a ? -1.0 : 1.0;
    prep.train.points.push_back({std::move(f), y, true});
  }
  return prep;
}

std::vector<double> featurize_image(const ImageRecord& img, const PCAModel& pca,
                                    const NormalizationRecord& norm) {
  std::vector<double> proj = pca_project(pca, img.pixels);
  for (std::size_t j = 0; j < proj.size(); ++j) {
    const double lo = norm.feature_min[j], hi = norm.feature_max[j];
    proj[j] = hi == lo ? 0.0 : (proj[j] - lo) / (hi - lo) * kPi;
  }
  return proj;
}

}  // namespace underdet
