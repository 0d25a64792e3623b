#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "underdet/experiments.hpp"

using namespace underdet;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& tag) {
  const auto dir = fs::temp_directory_path() / ("underdet_exp_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const CsvTable& table_named(const RunReport& rep, const std::string& name) {
  for (const CsvTable& t : rep.tables)
    if (t.name == name) return t;
  FAIL(("missing table " + name).c_str());
  static CsvTable dummy;
  return dummy;
}

std::vector<double> column_as_doubles(const CsvTable& t, const std::string& col) {
  std::size_t idx = t.header.size();
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == col) idx = i;
  REQUIRE(idx < t.header.size());
  std::vector<double> out;
  for (const auto& row : t.rows) out.push_back(std::stod(row[idx]));
  return out;
}

ExperimentConfig tiny_iris_cfg(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.experiment = "iris-correlation";
  cfg.seed = seed;
  cfg.members = 2;
  cfg.epochs = 2;
  return cfg;
}

ExperimentConfig tiny_sine_cfg(std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.experiment = "sine-ood";
  cfg.seed = seed;
  cfg.members = 2;
  cfg.epochs = 3;
  cfg.train_points = 40;
  cfg.test_points = 30;
  return cfg;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("threshold classifier on the documented examples") {
  // perfectly separated
  const auto sep = threshold_classifier_accuracy(std::vector<double>{0.1, 0.2, 5.0, 6.0},
                                                 {false, false, true, true});
  CHECK(sep.accuracy == 1.0);

  // spec example: scores (1,2,3,4), labels (F,F,T,T)
  const auto ex = threshold_classifier_accuracy(std::vector<double>{1, 2, 3, 4},
                                                {false, false, true, true});
  CHECK(ex.accuracy == 1.0);
  CHECK(ex.threshold == doctest::Approx(2.5));
  CHECK(ex.orientation == 1);

  // all scores identical: the best threshold degenerates to the majority class
  const auto ident = threshold_classifier_accuracy(std::vector<double>{3, 3, 3, 3, 3},
                                                   {true, true, false, true, true});
  CHECK(ident.accuracy == doctest::Approx(0.8));

  CHECK_THROWS_AS(
      threshold_classifier_accuracy(std::vector<double>{1, 2}, {true, true}),
      std::invalid_argument);
  CHECK_THROWS_AS(threshold_classifier_accuracy({}, {}), std::invalid_argument);
}

TEST_CASE("threshold classifier equals an independent exhaustive scan") {
  Rng rng(15);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + rng.next_below(30);
    std::vector<double> scores(n);
    std::vector<bool> labels(n);
    bool has_t = false, has_f = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = rng.uniform(-1, 1);
      labels[i] = rng.next_double() < 0.5;
      (labels[i] ? has_t : has_f) = true;
    }
    if (!has_t || !has_f) continue;

    const auto got = threshold_classifier_accuracy(scores, labels);

    // oracle: evaluate every candidate directly
    double best = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      // thresholds between every adjacent pair of sorted scores plus sentinels
      std::vector<double> sorted = scores;
      std::sort(sorted.begin(), sorted.end());
      double t;
      if (i == 0)
        t = sorted.front() - 1;
      else if (i == n)
        t = sorted.back() + 1;
      else
        t = 0.5 * (sorted[i - 1] + sorted[i]);
      for (int orient : {1, -1}) {
        std::size_t hits = 0;
        for (std::size_t k = 0; k < n; ++k) {
          const bool pred = orient > 0 ? scores[k] > t : scores[k] < t;
          if (pred == static_cast<bool>(labels[k])) ++hits;
        }
        best = std::max(best, static_cast<double>(hits) / static_cast<double>(n));
      }
    }
    CHECK(got.accuracy == doctest::Approx(best));

    // never worse than the majority-class prior
    std::size_t pos = 0;
    for (bool b : labels)
      if (b) ++pos;
    const double prior =
        std::max(pos, n - pos) / static_cast<double>(n);
    CHECK(got.accuracy >= prior - 1e-12);
  }
}

TEST_CASE("config json round trip honours every field") {
  ExperimentConfig cfg;
  cfg.experiment = "noise-sweep";
  cfg.seed = 42;
  cfg.members = 7;
  cfg.m = 4;
  cfg.shots = {32, 0};
  cfg.angles = {0, 45};
  cfg.epochs = 9;
  cfg.batch = 16;
  cfg.lr = 0.25;
  cfg.out = "/tmp/x";
  cfg.images = "a.idx";
  cfg.labels = "b.idx";
  cfg.family = "mlp";
  cfg.train_points = 55;
  cfg.test_points = 44;
  cfg.class_a = 2;
  cfg.class_b = 5;

  const ExperimentConfig rt = config_from_json(config_to_json(cfg));
  CHECK(rt.experiment == cfg.experiment);
  CHECK(rt.seed == cfg.seed);
  CHECK(rt.members == cfg.members);
  CHECK(rt.m == cfg.m);
  CHECK(rt.shots == cfg.shots);
  CHECK(rt.angles == cfg.angles);
  CHECK(rt.epochs == cfg.epochs);
  CHECK(rt.batch == cfg.batch);
  CHECK(rt.lr == cfg.lr);
  CHECK(rt.images == cfg.images);
  CHECK(rt.labels == cfg.labels);
  CHECK(rt.family == cfg.family);
  CHECK(rt.train_points == cfg.train_points);
  CHECK(rt.test_points == cfg.test_points);
  CHECK(rt.class_a == cfg.class_a);
  CHECK(rt.class_b == cfg.class_b);

  // "analytic" is accepted in shot lists
  const auto j = nlohmann::json::parse(R"({"shots": [64, "analytic"]})");
  const ExperimentConfig parsed = config_from_json(j);
  CHECK(parsed.shots == std::vector<long>{64, 0});
}

TEST_CASE("iris run produces correlated tables and a recomputable summary") {
  const RunReport rep = run_iris_correlation(tiny_iris_cfg(3));

  const CsvTable& eig = table_named(rep, "eigenvalues");
  CHECK(eig.rows.size() == 2 * 12);
  const CsvTable& scores = table_named(rep, "scores");
  CHECK(scores.rows.size() == 90);
  const CsvTable& members = table_named(rep, "members");
  CHECK(members.rows.size() == 2);

  // summary statistics must be recomputable from the emitted tables
  const auto mean_scores = column_as_doubles(scores, "mean_score");
  const auto stds = column_as_doubles(scores, "pred_std");
  CHECK(rep.summary.at("pearson_r").get<double>() ==
        doctest::Approx(pearson(mean_scores, stds)).epsilon(1e-9));
  CHECK(rep.summary.at("config").at("members").get<int>() == 2);
}

TEST_CASE("iris run with one member surfaces the degenerate correlation as a config error") {
  ExperimentConfig cfg = tiny_iris_cfg(3);
  cfg.members = 1;
  CHECK_THROWS_AS(run_iris_correlation(cfg), config_error);
}

TEST_CASE("sine ood run separates domains and recomputes its classifier") {
  const RunReport rep = run_ood_1d(tiny_sine_cfg(5), "sine");

  const CsvTable& points = table_named(rep, "points");
  CHECK(points.rows.size() == 30);
  const auto xs = column_as_doubles(points, "x");
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) CHECK(xs[i] <= xs[i + 1]);  // sorted

  const auto scores = column_as_doubles(points, "mean_score");
  const auto flags = column_as_doubles(points, "in_train_domain");
  std::vector<bool> in_domain;
  for (double f : flags) in_domain.push_back(f != 0.0);
  const auto cls = threshold_classifier_accuracy(scores, in_domain);
  CHECK(rep.summary.at("score_classifier").at("accuracy").get<double>() ==
        doctest::Approx(cls.accuracy).epsilon(1e-9));

  const CsvTable& train = table_named(rep, "train");
  CHECK(train.rows.size() == 40);
}

TEST_CASE("mlp family runs the same harness") {
  ExperimentConfig cfg = tiny_sine_cfg(6);
  cfg.family = "mlp";
  cfg.epochs = 60;
  const RunReport rep = run_ood_1d(cfg, "sine");
  CHECK(rep.summary.at("config").at("m").get<int>() == 10);
  CHECK(table_named(rep, "points").rows.size() == 30);
  CHECK(rep.dir_name == "sine-ood_mlp_6");
}

TEST_CASE("unknown experiment and family are config errors") {
  ExperimentConfig cfg;
  cfg.experiment = "mystery";
  CHECK_THROWS_AS(run_experiment(cfg), config_error);
  ExperimentConfig bad_family = tiny_sine_cfg(1);
  bad_family.family = "svm";
  CHECK_THROWS_AS(run_ood_1d(bad_family, "sine"), config_error);
}

TEST_CASE("noise sweep analytic setting reproduces the ood run") {
  ExperimentConfig sweep_cfg = tiny_sine_cfg(9);
  sweep_cfg.experiment = "noise-sweep";
  sweep_cfg.shots = {8, 0};
  const RunReport sweep = run_noise_sweep(sweep_cfg);

  const RunReport ood = run_ood_1d(tiny_sine_cfg(9), "sine");

  const CsvTable& sweep_pts = table_named(sweep, "points_analytic");
  const CsvTable& ood_pts = table_named(ood, "points");
  REQUIRE(sweep_pts.rows.size() == ood_pts.rows.size());
  CHECK(sweep_pts.rows == ood_pts.rows);  // exact, cell for cell

  const CsvTable& sweep_table = table_named(sweep, "sweep");
  CHECK(sweep_table.rows.size() == 2);
  CHECK(table_named(sweep, "points_8").rows.size() == 30);
  CHECK(sweep.summary.at("settings").size() == 2);
}

TEST_CASE("noise sweep validates the shot grid") {
  ExperimentConfig cfg = tiny_sine_cfg(2);
  cfg.experiment = "noise-sweep";
  cfg.shots = {-3};
  CHECK_THROWS_AS(run_noise_sweep(cfg), config_error);
}

TEST_CASE("fmnist rotation runs end to end on a synthetic wardrobe") {
  const std::string dir = fresh_dir("fmnist");
  const auto [images_path, labels_path] = testsup::write_synth_wardrobe(dir, 60);

  ExperimentConfig cfg;
  cfg.experiment = "fmnist-rotation";
  cfg.seed = 4;
  cfg.members = 1;
  cfg.epochs = 2;
  cfg.train_points = 25;
  cfg.test_points = 10;
  cfg.angles = {0, 90};
  cfg.images = images_path;
  cfg.labels = labels_path;

  const RunReport rep = run_fmnist_rotation(cfg);
  CHECK(table_named(rep, "angles").rows.size() == 2);
  CHECK(table_named(rep, "scores_by_angle").rows.size() == 2 * 20);
  CHECK(table_named(rep, "spectrum").rows.size() == 70);
  CHECK(rep.summary.contains("spearman_angle_score"));
  CHECK(rep.summary.contains("mean_score_at_0"));
  CHECK(rep.summary.contains("mean_score_at_90"));

  // per-angle means recompute from the per-image table
  const CsvTable& per_image = table_named(rep, "scores_by_angle");
  const auto angles = column_as_doubles(per_image, "angle_degrees");
  const auto img_scores = column_as_doubles(per_image, "mean_score");
  double sum0 = 0.0;
  int n0 = 0;
  for (std::size_t i = 0; i < angles.size(); ++i)
    if (angles[i] == 0.0) {
      sum0 += img_scores[i];
      ++n0;
    }
  const auto angle_means = column_as_doubles(table_named(rep, "angles"), "mean_score");
  CHECK(angle_means[0] == doctest::Approx(sum0 / n0).epsilon(1e-9));

  ExperimentConfig missing = cfg;
  missing.images.clear();
  CHECK_THROWS_AS(run_fmnist_rotation(missing), config_error);
}

TEST_CASE("reports rerun bit-identically and write stable files") {
  const RunReport a = run_ood_1d(tiny_sine_cfg(11), "sine");
  const RunReport b = run_ood_1d(tiny_sine_cfg(11), "sine");
  CHECK(a.summary == b.summary);
  REQUIRE(a.tables.size() == b.tables.size());
  for (std::size_t t = 0; t < a.tables.size(); ++t) CHECK(a.tables[t].rows == b.tables[t].rows);

  const std::string d1 = fresh_dir("w1");
  const std::string d2 = fresh_dir("w2");
  write_report(a, d1);
  write_report(b, d2);
  for (const char* name : {"points.csv", "train.csv", "members.csv", "summary.json"}) {
    const auto p1 = fs::path(d1) / a.dir_name / name;
    const auto p2 = fs::path(d2) / b.dir_name / name;
    CHECK(slurp(p1) == slurp(p2));  // byte identical
  }
  CHECK(fs::exists(fs::path(d1) / a.dir_name / "run_info.json"));
}

}  // TEST_SUITE
