#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "underdet/data.hpp"

using namespace underdet;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::string temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "underdet_data_tests";
  std::filesystem::create_directories(dir);
  return dir.string();
}

ImageRecord pattern_image() {
  ImageRecord img;
  img.label = 3;
  img.pixels.assign(kImagePixels, 0.0);
  for (int r = 0; r < kImageSide; ++r)
    for (int c = 0; c < kImageSide; ++c) {
      double v = 0.02 * r + 0.013 * c;                      // smooth ramp
      if (r >= 6 && r <= 12 && c >= 15 && c <= 22) v = 0.9; // bright box
      if (c == 9) v = 0.65;                                 // vertical line
      img.pixels[r * kImageSide + c] = std::min(1.0, v);
    }
  return img;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("target functions") {
  CHECK(sine_target(kPi / 8) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(linear_target(4.0) == 1.0);
  CHECK(linear_target(0.0) == 0.0);
  CHECK(in_1d_train_domain(-0.5));
  CHECK(in_1d_train_domain(1.5));
  CHECK_FALSE(in_1d_train_domain(0.5));
  CHECK_FALSE(in_1d_train_domain(3.0));
}

TEST_CASE("noise-free generators hit the target function exactly") {
  Rng rng(5);
  auto [train_set, test_set] = gen_sine(50, 30, rng, 0.0);
  for (const LabeledPoint& pt : train_set.points) {
    CHECK(pt.y == sine_target(pt.x[0]));
    CHECK(in_1d_train_domain(pt.x[0]));
    CHECK(pt.in_train_domain);
  }
  for (const LabeledPoint& pt : test_set.points) {
    CHECK(pt.y == sine_target(pt.x[0]));
    CHECK(pt.x[0] >= -3.0);
    CHECK(pt.x[0] <= 4.0);
    CHECK(pt.in_train_domain == in_1d_train_domain(pt.x[0]));
  }

  Rng rng2(6);
  auto [ltrain, ltest] = gen_linear(20, 10, rng2, 0.0);
  for (const LabeledPoint& pt : ltrain.points) CHECK(pt.y == linear_target(pt.x[0]));
}

TEST_CASE("sine noise is centered") {
  Rng rng(7);
  auto [train_set, test_set] = gen_sine(100000, 1, rng);
  double mean = 0.0;
  for (const LabeledPoint& pt : train_set.points) mean += pt.y - sine_target(pt.x[0]);
  mean /= static_cast<double>(train_set.size());
  CHECK(std::abs(mean) < 0.01);
}

TEST_CASE("linear noise variance is 1/16") {
  Rng rng(8);
  auto [train_set, test_set] = gen_linear(100000, 1, rng);
  double mean = 0.0, sq = 0.0;
  for (const LabeledPoint& pt : train_set.points) {
    const double r = pt.y - linear_target(pt.x[0]);
    mean += r;
    sq += r * r;
  }
  mean /= static_cast<double>(train_set.size());
  const double var = sq / static_cast<double>(train_set.size()) - mean * mean;
  CHECK(std::abs(var - 1.0 / 16.0) < 0.003);
}

TEST_CASE("generators are seed deterministic") {
  Rng a(9), b(9);
  auto [ta, sa] = gen_sine(40, 20, a);
  auto [tb, sb] = gen_sine(40, 20, b);
  for (std::size_t i = 0; i < ta.points.size(); ++i) {
    CHECK(ta.points[i].x == tb.points[i].x);
    CHECK(ta.points[i].y == tb.points[i].y);
  }
}

TEST_CASE("iris loader splits, normalizes and maps labels") {
  Rng rng(10);
  auto [train_set, test_set] = load_iris_binary(iris_csv(), rng);
  CHECK(train_set.size() == 10);
  CHECK(test_set.size() == 90);
  CHECK(train_set.feature_dim == 4);

  int train_neg = 0;
  for (const LabeledPoint& pt : train_set.points)
    if (pt.y == -1.0) ++train_neg;
  CHECK(train_neg == 5);  // stratified

  int total_neg = 0;
  double lo[4] = {1e9, 1e9, 1e9, 1e9}, hi[4] = {-1e9, -1e9, -1e9, -1e9};
  auto scan = [&](const Dataset& d) {
    for (const LabeledPoint& pt : d.points) {
      if (pt.y == -1.0) ++total_neg;
      for (int j = 0; j < 4; ++j) {
        CHECK(pt.x[j] >= 0.0);
        CHECK(pt.x[j] <= kPi);
        lo[j] = std::min(lo[j], pt.x[j]);
        hi[j] = std::max(hi[j], pt.x[j]);
      }
    }
  };
  scan(train_set);
  scan(test_set);
  CHECK(total_neg == 50);
  for (int j = 0; j < 4; ++j) {
    CHECK(lo[j] == 0.0);  // full-set min-max reaches both ends exactly
    CHECK(hi[j] == kPi);
  }

  Rng rng2(10);
  auto [t2, s2] = load_iris_binary(iris_csv(), rng2);
  CHECK(t2.points[0].x == train_set.points[0].x);  // deterministic split
}

TEST_CASE("iris loader rejects malformed input") {
  Rng rng(1);
  CHECK_THROWS(load_iris_binary("h\n1,2,3,setosa\n", rng));          // short row
  CHECK_THROWS(load_iris_binary("h\n1,2,3,x,setosa\n", rng));        // bad numeric
  CHECK_THROWS(load_iris_binary("h\n1,2,3,4,virginica\n", rng));     // unknown class
  CHECK_THROWS(load_iris_binary("", rng));                           // empty
}

TEST_CASE("idx image round trip, plain and gzipped") {
  const std::string dir = temp_dir();
  Rng rng(11);
  std::vector<std::vector<unsigned char>> images(3, std::vector<unsigned char>(kImagePixels));
  for (auto& img : images)
    for (auto& b : img) b = static_cast<unsigned char>(rng.next_below(256));
  const std::vector<int> labels{7, 0, 9};

  for (bool gz : {false, true}) {
    const std::string ipath = dir + (gz ? "/imgs.idx.gz" : "/imgs.idx");
    const std::string lpath = dir + (gz ? "/lbls.idx.gz" : "/lbls.idx");
    testsup::write_idx_images(ipath, images, gz);
    testsup::write_idx_labels(lpath, labels, gz);

    const auto records = load_image_label_pair(ipath, lpath);
    REQUIRE(records.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(records[i].label == labels[i]);
      for (int p = 0; p < kImagePixels; ++p)
        CHECK(records[i].pixels[p] == images[i][p] / 255.0);
    }
  }
}

TEST_CASE("idx loader rejects corrupt containers") {
  const std::string dir = temp_dir();
  std::vector<std::vector<unsigned char>> one(1, std::vector<unsigned char>(kImagePixels, 0));
  const std::string img_path = dir + "/ok_images.idx";
  const std::string lbl_path = dir + "/ok_labels.idx";
  testsup::write_idx_images(img_path, one);
  testsup::write_idx_labels(lbl_path, {4, 5});

  // label magic fed to the image loader
  CHECK_THROWS_WITH_AS(load_idx_images(lbl_path), doctest::Contains("magic"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(load_idx_labels(img_path), doctest::Contains("magic"),
                       std::runtime_error);

  // image/label count mismatch
  CHECK_THROWS_WITH_AS(load_image_label_pair(img_path, lbl_path),
                       doctest::Contains("mismatch"), std::runtime_error);

  // truncation: drop the tail of a valid image file
  std::vector<unsigned char> bytes;
  {
    gzFile f = gzopen(img_path.c_str(), "rb");
    unsigned char buf[4096];
    int got;
    while ((got = gzread(f, buf, sizeof buf)) > 0) bytes.insert(bytes.end(), buf, buf + got);
    gzclose(f);
  }
  bytes.resize(bytes.size() - 10);
  const std::string trunc_path = dir + "/trunc.idx";
  testsup::write_bytes(trunc_path, bytes, false);
  CHECK_THROWS_WITH_AS(load_idx_images(trunc_path), doctest::Contains("truncated"),
                       std::runtime_error);

  // a single all-zero image loads as a single all-zero record
  const auto zero_records = load_idx_images(img_path);
  REQUIRE(zero_records.size() == 1);
  for (double p : zero_records[0].pixels) CHECK(p == 0.0);

  CHECK_THROWS(load_idx_images(dir + "/does_not_exist.idx"));
}

TEST_CASE("idx loader rejects non-28x28 payloads") {
  const std::string dir = temp_dir();
  std::vector<unsigned char> bytes;
  testsup::put_be32(bytes, 0x00000803u);
  testsup::put_be32(bytes, 1);
  testsup::put_be32(bytes, 27);
  testsup::put_be32(bytes, 28);
  bytes.resize(bytes.size() + 27 * 28, 0);
  const std::string path = dir + "/odd.idx";
  testsup::write_bytes(path, bytes, false);
  CHECK_THROWS_WITH_AS(load_idx_images(path), doctest::Contains("28x28"), std::runtime_error);
}

TEST_CASE("rotation identities") {
  const ImageRecord img = pattern_image();

  const ImageRecord same = rotate_image(img, 0.0);
  CHECK(same.pixels == img.pixels);  // bit exact at angle 0
  CHECK(same.label == img.label);

  const ImageRecord full = rotate_image(img, 360.0);
  for (int p = 0; p < kImagePixels; ++p) CHECK(std::abs(full.pixels[p] - img.pixels[p]) < 1e-6);

  const ImageRecord twice = rotate_image(rotate_image(img, 90.0), 90.0);
  const ImageRecord once = rotate_image(img, 180.0);
  double max_diff = 0.0;
  for (int p = 0; p < kImagePixels; ++p)
    max_diff = std::max(max_diff, std::abs(twice.pixels[p] - once.pixels[p]));
  CHECK(max_diff < 0.02);

  CHECK_THROWS_AS(rotate_image(img, std::nan("")), std::invalid_argument);
}

TEST_CASE("rotation keeps shape and range and zeroes out-of-frame sources") {
  ImageRecord ones;
  ones.pixels.assign(kImagePixels, 1.0);
  const ImageRecord rot = rotate_image(ones, 45.0);
  CHECK(rot.pixels.size() == kImagePixels);
  for (double p : rot.pixels) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  // corners sample from outside the original frame
  CHECK(rot.pixels[0] == 0.0);
  CHECK(rot.pixels[kImageSide - 1] == 0.0);
  CHECK(rot.pixels[kImagePixels - 1] == 0.0);
}

TEST_CASE("prepare_fmnist builds a normalized training set with shared statistics") {
  Rng gen_rng(12);
  std::vector<ImageRecord> records;
  for (int i = 0; i < 80; ++i) {
    for (int cls : {0, 1}) {
      const auto bytes = testsup::synth_image(cls, gen_rng);
      ImageRecord rec;
      rec.label = cls;
      rec.pixels.resize(kImagePixels);
      for (int p = 0; p < kImagePixels; ++p) rec.pixels[p] = bytes[p] / 255.0;
      records.push_back(std::move(rec));
    }
  }

  Rng rng(13);
  const FmnistPrepared prep = prepare_fmnist(records, 0, 1, 7, rng, 40, 15);
  CHECK(prep.train.size() == 80);
  CHECK(prep.test_images.size() == 30);
  CHECK(prep.train.feature_dim == 7);
  int neg = 0;
  for (const LabeledPoint& pt : prep.train.points) {
    if (pt.y == -1.0) ++neg;
    for (double f : pt.x) {
      CHECK(f >= 0.0);
      CHECK(f <= kPi);
    }
  }
  CHECK(neg == 40);

  // the training mean image projects to the origin of the PCA frame
  ImageRecord mean_img;
  mean_img.pixels = prep.pca.mean;
  const auto feat = featurize_image(mean_img, prep.pca, prep.feature_norm);
  for (int j = 0; j < 7; ++j) {
    const double lo = prep.feature_norm.feature_min[j];
    const double hi = prep.feature_norm.feature_max[j];
    const double want = (0.0 - lo) / (hi - lo) * kPi;
    CHECK(feat[j] == doctest::Approx(want).epsilon(1e-9));
  }

  Rng rng2(13);
  const FmnistPrepared again = prepare_fmnist(records, 0, 1, 7, rng2, 40, 15);
  CHECK(again.train.points[0].x == prep.train.points[0].x);  // seeded subsample

  CHECK_THROWS_AS(prepare_fmnist(records, 0, 0, 7, rng, 10, 5), std::invalid_argument);
  CHECK_THROWS_WITH_AS(prepare_fmnist(records, 0, 9, 7, rng, 10, 5),
                       doctest::Contains("not present"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(prepare_fmnist(records, 0, 1, 7, rng, 80, 20),
                       doctest::Contains("too few"), std::invalid_argument);
}

}  // TEST_SUITE
