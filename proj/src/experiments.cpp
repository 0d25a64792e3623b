#include "underdet/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace underdet {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string cell(double v) { return format_double(v); }
std::string cell(int v) { return std::to_string(v); }
std::string cell(std::uint64_t v) { return std::to_string(v); }
std::string cell(bool v) { return v ? "1" : "0"; }

std::string shots_tag(long shots) { return shots == 0 ? "analytic" : std::to_string(shots); }

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

int resolve(int value, int fallback) { return value < 0 ? fallback : value; }
double resolve(double value, double fallback) { return value < 0.0 ? fallback : value; }

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
  };
  get("experiment", cfg.experiment);
  get("seed", cfg.seed);
  get("members", cfg.members);
  get("m", cfg.m);
  get("epochs", cfg.epochs);
  get("batch", cfg.batch);
  get("lr", cfg.lr);
  get("out", cfg.out);
  get("images", cfg.images);
  get("labels", cfg.labels);
  get("family", cfg.family);
  get("train_points", cfg.train_points);
  get("test_points", cfg.test_points);
  get("class_a", cfg.class_a);
  get("class_b", cfg.class_b);
  if (j.contains("shots")) {
    cfg.shots.clear();
    for (const auto& s : j.at("shots")) {
      if (s.is_string() && s.get<std::string>() == "analytic")
        cfg.shots.push_back(0);
      else
        cfg.shots.push_back(s.get<long>());
    }
  }
  if (j.contains("angles")) cfg.angles = j.at("angles").get<std::vector<double>>();
  return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  return nlohmann::json{{"experiment", cfg.experiment},
                        {"seed", cfg.seed},
                        {"members", cfg.members},
                        {"m", cfg.m},
                        {"shots", cfg.shots},
                        {"angles", cfg.angles},
                        {"epochs", cfg.epochs},
                        {"batch", cfg.batch},
                        {"lr", cfg.lr},
                        {"out", cfg.out},
                        {"images", cfg.images},
                        {"labels", cfg.labels},
                        {"family", cfg.family},
                        {"train_points", cfg.train_points},
                        {"test_points", cfg.test_points},
                        {"class_a", cfg.class_a},
                        {"class_b", cfg.class_b}};
}

void write_report(const RunReport& report, const std::string& out_root) {
  const fs::path dir = fs::path(out_root) / report.dir_name;
  fs::create_directories(dir);
  for (const CsvTable& t : report.tables) {
    std::ofstream f(dir / (t.name + ".csv"), std::ios::binary);
    if (!f) throw std::runtime_error("write_report: cannot write " + t.name + ".csv");
    for (std::size_t i = 0; i < t.header.size(); ++i)
      f << (i ? "," : "") << t.header[i];
    f << '\n';
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
      f << '\n';
    }
  }
  {
    std::ofstream f(dir / "summary.json", std::ios::binary);
    f << report.summary.dump(2) << '\n';
  }
  {
    // non-deterministic metadata lives outside the reproducible payload
    nlohmann::json info{{"wall_clock_s", report.wall_clock_s}, {"version", kVersion}};
    std::ofstream f(dir / "run_info.json", std::ios::binary);
    f << info.dump(2) << '\n';
  }
}

ThresholdClassifier threshold_classifier_accuracy(std::span<const double> scores,
                                                  const std::vector<bool>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("threshold classifier: score/label count mismatch");
  if (scores.empty()) throw std::invalid_argument("threshold classifier: empty input");
  const bool any_true = std::find(labels.begin(), labels.end(), true) != labels.end();
  const bool any_false = std::find(labels.begin(), labels.end(), false) != labels.end();
  if (!any_true || !any_false)
    throw std::invalid_argument("threshold classifier: single-class input");

  std::vector<double> uniq(scores.begin(), scores.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  std::vector<double> candidates;
  candidates.push_back(uniq.front() - 1.0);
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i)
    candidates.push_back(0.5 * (uniq[i] + uniq[i + 1]));
  candidates.push_back(uniq.back() + 1.0);

  ThresholdClassifier best;
  best.accuracy = -1.0;
  for (double t : candidates) {
    for (int orientation : {1, -1}) {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = orientation > 0 ? scores[i] > t : scores[i] < t;
        if (predicted == static_cast<bool>(labels[i])) ++hits;
      }
      const double acc = static_cast<double>(hits) / static_cast<double>(scores.size());
      if (acc > best.accuracy) best = {acc, t, orientation};
    }
  }
  return best;
}

// --- shared pipeline pieces -------------------------------------------------

namespace {

// Trained members with per-member Hessian spectra, flat projectors and the
// continuation of each member's scoring rng (hessian draws come first,
// then test-point draws in evaluation order).
struct AnalyzedEnsemble {
  Ensemble ens;
  std::vector<Spectrum> spectra;
  std::vector<FlatProjector> projectors;
  std::vector<Rng> score_rngs;
  ShotConfig shots = ShotConfig::analytic();
};

AnalyzedEnsemble analyze_pqc_ensemble(const CircuitTemplate& tpl, const Dataset& train,
                                      const TrainConfig& cfg, int n_members, int m,
                                      std::uint64_t score_base) {
  AnalyzedEnsemble a;
  a.shots = cfg.shots;
  if (n_members >= 2) {
    a.ens = train_ensemble(tpl, train, cfg, n_members);
  } else {
    TrainConfig mc = cfg;
    mc.seed = Rng::split(cfg.seed, 0);
    a.ens.seeds.push_back(mc.seed);
    a.ens.members.push_back(underdet::train(tpl, train, mc));
  }
  for (int k = 0; k < n_members; ++k) {
    a.score_rngs.emplace_back(Rng::split(score_base, static_cast<std::uint64_t>(k)));
    const SymMatrix h =
        hessian_loss(tpl, a.ens.members[k].theta, train, cfg.shots, a.score_rngs.back());
    a.spectra.push_back(eigh_symmetric(h));
    a.projectors.push_back(flat_projector(a.spectra.back(), m));
  }
  return a;
}

struct PointEval {
  double mean_score = 0.0;
  double mean_pred = 0.0;
  double pred_std = 0.0;
  std::vector<double> member_scores;
};

PointEval eval_point(AnalyzedEnsemble& a, std::span<const double> x) {
  PointEval ev;
  std::vector<double> preds;
  for (std::size_t k = 0; k < a.ens.members.size(); ++k) {
    const TrainedModel& member = a.ens.members[k];
    const std::vector<double> g =
        grad_prediction(member.tpl, member.theta, x, a.shots, a.score_rngs[k]);
    ev.member_scores.push_back(extrapolation_score(a.projectors[k], g));
    preds.push_back(predict_sampled(member.tpl, member.theta, x, a.shots, a.score_rngs[k]));
  }
  ev.mean_score = mean_of(ev.member_scores);
  const EnsemblePrediction ep = summarize_members(std::move(preds));
  ev.mean_pred = ep.mean;
  ev.pred_std = ep.stddev;
  return ev;
}

struct AnalyzedMlp {
  MLPEnsemble ens;
  std::vector<Spectrum> spectra;
  std::vector<FlatProjector> projectors;
};

AnalyzedMlp analyze_mlp_ensemble(const Dataset& train, const MLPConfig& cfg, int n_members,
                                 int m) {
  AnalyzedMlp a;
  a.ens = train_mlp_ensemble(train, cfg, n_members);
  for (int k = 0; k < n_members; ++k) {
    const SymMatrix h = mlp_loss_hessian(a.ens.members[k], train);
    a.spectra.push_back(eigh_symmetric(h));
    a.projectors.push_back(flat_projector(a.spectra.back(), m));
  }
  return a;
}

PointEval eval_point_mlp(const AnalyzedMlp& a, std::span<const double> x) {
  PointEval ev;
  std::vector<double> preds;
  for (std::size_t k = 0; k < a.ens.members.size(); ++k) {
    const std::vector<double> g = a.ens.members[k].grad_prediction(x);
    ev.member_scores.push_back(extrapolation_score(a.projectors[k], g));
    preds.push_back(a.ens.members[k].predict(x));
  }
  ev.mean_score = mean_of(ev.member_scores);
  const EnsemblePrediction ep = summarize_members(std::move(preds));
  ev.mean_pred = ep.mean;
  ev.pred_std = ep.stddev;
  return ev;
}

struct OodRow {
  double x = 0.0, y = 0.0;
  bool in_domain = false;
  double mean_pred = 0.0, pred_std = 0.0, mean_score = 0.0;
};

struct OodResult {
  std::vector<OodRow> rows;  // sorted by x
  ThresholdClassifier acc_score, acc_std;
  double in_mean_score = 0.0, out_mean_score = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_losses;
  Dataset train;
};

struct OodParams {
  std::string task;    // sine | linear
  std::string family;  // pqc | mlp
  std::uint64_t seed = 1;
  int members = 10;
  int m = 5;
  int epochs = 30;
  int batch = 32;
  double lr = 0.05;
  int n_train = 200;
  int n_test = 100;
  ShotConfig shots = ShotConfig::analytic();
  std::uint64_t score_base = 0;
};

OodResult ood_1d_core(const OodParams& p) {
  Rng data_rng(Rng::split(p.seed, kDataStream));
  auto [train_set, test_set] = p.task == "sine"
                                   ? gen_sine(p.n_train, p.n_test, data_rng)
                                   : gen_linear(p.n_train, p.n_test, data_rng);

  std::vector<std::size_t> order(test_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return test_set.points[i].x[0] < test_set.points[j].x[0];
  });

  OodResult res;
  res.train = train_set;
  const std::uint64_t train_base = Rng::split(p.seed, kTrainStream);

  auto collect = [&](auto&& eval) {
    for (std::size_t oi : order) {
      const LabeledPoint& pt = test_set.points[oi];
      const PointEval ev = eval(pt.x);
      res.rows.push_back(
          {pt.x[0], pt.y, pt.in_train_domain, ev.mean_pred, ev.pred_std, ev.mean_score});
    }
  };

  if (p.family == "pqc") {
    const CircuitTemplate tpl = build_template("sine1d");
    TrainConfig cfg;
    cfg.epochs = p.epochs;
    cfg.batch_size = p.batch;
    cfg.lr = p.lr;
    cfg.seed = train_base;
    cfg.shots = p.shots;
    AnalyzedEnsemble a = analyze_pqc_ensemble(tpl, train_set, cfg, p.members, p.m, p.score_base);
    res.seeds = a.ens.seeds;
    for (const TrainedModel& mm : a.ens.members)
      res.final_losses.push_back(mm.report.final_train_loss);
    collect([&](std::span<const double> x) { return eval_point(a, x); });
  } else if (p.family == "mlp") {
    if (!p.shots.is_analytic())
      throw config_error("shot noise applies to the pqc family only");
    MLPConfig cfg;
    cfg.lr = p.lr;
    cfg.epochs = p.epochs;
    cfg.seed = train_base;
    AnalyzedMlp a = analyze_mlp_ensemble(train_set, cfg, p.members, p.m);
    res.seeds = a.ens.seeds;
    for (const MLPModel& mm : a.ens.members) {
      std::vector<double> preds, targets;
      for (const LabeledPoint& pt : train_set.points) {
        preds.push_back(mm.predict(pt.x));
        targets.push_back(pt.y);
      }
      res.final_losses.push_back(mse_loss(preds, targets));
    }
    collect([&](std::span<const double> x) { return eval_point_mlp(a, x); });
  } else {
    throw config_error("unknown family '" + p.family + "' (expected pqc or mlp)");
  }

  std::vector<double> scores, stds;
  std::vector<bool> in_domain;
  double in_sum = 0.0, out_sum = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (const OodRow& r : res.rows) {
    scores.push_back(r.mean_score);
    stds.push_back(r.pred_std);
    in_domain.push_back(r.in_domain);
    if (r.in_domain) {
      in_sum += r.mean_score;
      ++n_in;
    } else {
      out_sum += r.mean_score;
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0)
    throw config_error("test grid contains a single domain class; increase test_points");
  res.in_mean_score = in_sum / static_cast<double>(n_in);
  res.out_mean_score = out_sum / static_cast<double>(n_out);
  res.acc_score = threshold_classifier_accuracy(scores, in_domain);
  res.acc_std = threshold_classifier_accuracy(stds, in_domain);
  return res;
}

CsvTable ood_points_table(const std::string& name, const OodResult& res) {
  CsvTable t{name, {"x", "y", "in_train_domain", "mean_prediction", "pred_std", "mean_score"}, {}};
  for (const OodRow& r : res.rows)
    t.rows.push_back({cell(r.x), cell(r.y), cell(r.in_domain), cell(r.mean_pred),
                      cell(r.pred_std), cell(r.mean_score)});
  return t;
}

CsvTable train_points_table(const Dataset& train) {
  CsvTable t{"train", {"x", "y"}, {}};
  for (const LabeledPoint& pt : train.points) t.rows.push_back({cell(pt.x[0]), cell(pt.y)});
  return t;
}

nlohmann::json classifier_json(const ThresholdClassifier& c) {
  return nlohmann::json{
      {"accuracy", c.accuracy}, {"threshold", c.threshold}, {"orientation", c.orientation}};
}

}  // namespace

// --- experiments --------------------------------------------------------

RunReport run_iris_correlation(const ExperimentConfig& user_cfg) {
  Timer timer;
  ExperimentConfig cfg = user_cfg;
  cfg.experiment = "iris-correlation";
  cfg.members = resolve(cfg.members, 20);
  cfg.m = resolve(cfg.m, 6);
  cfg.epochs = resolve(cfg.epochs, 30);
  cfg.batch = resolve(cfg.batch, 8);
  cfg.lr = resolve(cfg.lr, 0.07);
  cfg.family = "pqc";
  if (cfg.members < 1) throw config_error("iris-correlation: members must be >= 1");

  Rng data_rng(Rng::split(cfg.seed, kDataStream));
  auto [train_set, test_set] = load_iris_binary(iris_csv(), data_rng);

  const CircuitTemplate tpl = build_template("iris");
  if (cfg.m > tpl.n_trainable) throw config_error("iris-correlation: m exceeds parameter count");
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch;
  tc.lr = cfg.lr;
  tc.seed = Rng::split(cfg.seed, kTrainStream);
  AnalyzedEnsemble a = analyze_pqc_ensemble(tpl, train_set, tc, cfg.members, cfg.m,
                                            Rng::split(cfg.seed, kScoreStream));

  for (std::size_t k = 0; k < a.ens.members.size(); ++k)
    a.ens.members[k].report.test_accuracy = classification_accuracy(a.ens.members[k], test_set);

  RunReport rep;
  rep.dir_name = cfg.experiment + "_" + std::to_string(cfg.seed);

  CsvTable eig{"eigenvalues", {"member", "rank", "eigenvalue", "abs_eigenvalue"}, {}};
  for (std::size_t k = 0; k < a.spectra.size(); ++k)
    for (std::size_t r = 0; r < a.spectra[k].eigenvalues.size(); ++r)
      eig.rows.push_back({cell(static_cast<int>(k)), cell(static_cast<int>(r)),
                          cell(a.spectra[k].eigenvalues[r]),
                          cell(std::abs(a.spectra[k].eigenvalues[r]))});
  rep.tables.push_back(std::move(eig));

  CsvTable scores{"scores",
                  {"point", "f0", "f1", "f2", "f3", "label", "mean_score", "pred_std",
                   "mean_prediction"},
                  {}};
  std::vector<double> mean_scores, pred_stds;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const LabeledPoint& pt = test_set.points[i];
    const PointEval ev = eval_point(a, pt.x);
    mean_scores.push_back(ev.mean_score);
    pred_stds.push_back(ev.pred_std);
    scores.rows.push_back({cell(static_cast<int>(i)), cell(pt.x[0]), cell(pt.x[1]),
                           cell(pt.x[2]), cell(pt.x[3]), cell(pt.y), cell(ev.mean_score),
                           cell(ev.pred_std), cell(ev.mean_pred)});
  }
  rep.tables.push_back(std::move(scores));

  CsvTable members{"members", {"member", "seed", "final_train_loss", "test_accuracy"}, {}};
  double min_acc = 1.0;
  for (std::size_t k = 0; k < a.ens.members.size(); ++k) {
    const TrainedModel& mm = a.ens.members[k];
    min_acc = std::min(min_acc, *mm.report.test_accuracy);
    members.rows.push_back({cell(static_cast<int>(k)), cell(a.ens.seeds[k]),
                            cell(mm.report.final_train_loss), cell(*mm.report.test_accuracy)});
  }
  rep.tables.push_back(std::move(members));

  double r;
  try {
    r = pearson(mean_scores, pred_stds);
  } catch (const degenerate_variance_error&) {
    throw config_error(
        "iris-correlation: ensemble prediction spread is degenerate; "
        "at least 2 members are required for the correlation");
  }

  rep.summary = nlohmann::json{{"experiment", cfg.experiment},
                               {"config", config_to_json(cfg)},
                               {"pearson_r", r},
                               {"min_test_accuracy", min_acc},
                               {"all_members_full_test_accuracy", min_acc == 1.0},
                               {"n_test_points", test_set.size()},
                               {"version", kVersion}};
  rep.wall_clock_s = timer.seconds();
  return rep;
}

RunReport run_ood_1d(const ExperimentConfig& user_cfg, const std::string& task) {
  Timer timer;
  if (task != "sine" && task != "linear") throw config_error("unknown 1-d task '" + task + "'");
  ExperimentConfig cfg = user_cfg;
  cfg.experiment = task + "-ood";
  const bool mlp = cfg.family == "mlp";
  cfg.members = resolve(cfg.members, 10);
  cfg.m = resolve(cfg.m, mlp ? 10 : 5);
  cfg.epochs = resolve(cfg.epochs, mlp ? 2000 : 30);
  cfg.batch = resolve(cfg.batch, 32);
  cfg.lr = resolve(cfg.lr, mlp ? 1e-3 : 0.05);
  cfg.train_points = resolve(cfg.train_points, 200);
  cfg.test_points = resolve(cfg.test_points, 100);
  if (cfg.members < 2) throw config_error(cfg.experiment + ": members must be >= 2");

  OodParams p;
  p.task = task;
  p.family = cfg.family;
  p.seed = cfg.seed;
  p.members = cfg.members;
  p.m = cfg.m;
  p.epochs = cfg.epochs;
  p.batch = cfg.batch;
  p.lr = cfg.lr;
  p.n_train = cfg.train_points;
  p.n_test = cfg.test_points;
  p.score_base = Rng::split(cfg.seed, kScoreStream);
  const OodResult res = ood_1d_core(p);

  RunReport rep;
  rep.dir_name = cfg.experiment + "_" + cfg.family + "_" + std::to_string(cfg.seed);
  rep.tables.push_back(ood_points_table("points", res));
  rep.tables.push_back(train_points_table(res.train));
  CsvTable members{"members", {"member", "seed", "final_train_loss"}, {}};
  for (std::size_t k = 0; k < res.seeds.size(); ++k)
    members.rows.push_back(
        {cell(static_cast<int>(k)), cell(res.seeds[k]), cell(res.final_losses[k])});
  rep.tables.push_back(std::move(members));

  rep.summary = nlohmann::json{{"experiment", cfg.experiment},
                               {"config", config_to_json(cfg)},
                               {"score_classifier", classifier_json(res.acc_score)},
                               {"std_classifier", classifier_json(res.acc_std)},
                               {"in_domain_mean_score", res.in_mean_score},
                               {"out_domain_mean_score", res.out_mean_score},
                               {"separated", res.in_mean_score < res.out_mean_score},
                               {"version", kVersion}};
  rep.wall_clock_s = timer.seconds();
  return rep;
}

RunReport run_noise_sweep(const ExperimentConfig& user_cfg) {
  Timer timer;
  ExperimentConfig cfg = user_cfg;
  cfg.experiment = "noise-sweep";
  cfg.family = "pqc";
  cfg.members = resolve(cfg.members, 10);
  cfg.m = resolve(cfg.m, 5);
  cfg.epochs = resolve(cfg.epochs, 30);
  cfg.batch = resolve(cfg.batch, 32);
  cfg.lr = resolve(cfg.lr, 0.05);
  cfg.train_points = resolve(cfg.train_points, 200);
  cfg.test_points = resolve(cfg.test_points, 100);
  if (cfg.shots.empty()) cfg.shots = {32, 128, 512, 2048, 0};
  if (cfg.members < 2) throw config_error("noise-sweep: members must be >= 2");
  for (long s : cfg.shots)
    if (s < 0) throw config_error("noise-sweep: shot counts must be >= 0 (0 = analytic)");

  RunReport rep;
  rep.dir_name = cfg.experiment + "_" + std::to_string(cfg.seed);
  const std::uint64_t score_root = Rng::split(cfg.seed, kScoreStream);

  CsvTable sweep{"sweep",
                 {"shots", "score_accuracy", "std_accuracy", "score_threshold", "std_threshold",
                  "in_domain_mean_score", "out_domain_mean_score", "score_wins"},
                 {}};
  CsvTable members{"members", {"shots", "member", "seed", "final_train_loss"}, {}};
  nlohmann::json settings = nlohmann::json::array();
  int score_wins = 0;
  double in_score_32 = std::nan(""), in_score_analytic = std::nan("");
  bool have_train_table = false;

  for (std::size_t s = 0; s < cfg.shots.size(); ++s) {
    OodParams p;
    p.task = "sine";
    p.family = "pqc";
    p.seed = cfg.seed;
    p.members = cfg.members;
    p.m = cfg.m;
    p.epochs = cfg.epochs;
    p.batch = cfg.batch;
    p.lr = cfg.lr;
    p.n_train = cfg.train_points;
    p.n_test = cfg.test_points;
    p.shots = cfg.shots[s] == 0 ? ShotConfig::analytic() : ShotConfig::finite(cfg.shots[s]);
    p.score_base = Rng::split(score_root, s);
    const OodResult res = ood_1d_core(p);

    if (!have_train_table) {
      rep.tables.push_back(train_points_table(res.train));
      have_train_table = true;
    }
    rep.tables.push_back(ood_points_table("points_" + shots_tag(cfg.shots[s]), res));
    const bool wins = res.acc_score.accuracy >= res.acc_std.accuracy;
    if (wins) ++score_wins;
    sweep.rows.push_back({shots_tag(cfg.shots[s]), cell(res.acc_score.accuracy),
                          cell(res.acc_std.accuracy), cell(res.acc_score.threshold),
                          cell(res.acc_std.threshold), cell(res.in_mean_score),
                          cell(res.out_mean_score), cell(wins)});
    for (std::size_t k = 0; k < res.seeds.size(); ++k)
      members.rows.push_back({shots_tag(cfg.shots[s]), cell(static_cast<int>(k)),
                              cell(res.seeds[k]), cell(res.final_losses[k])});
    settings.push_back(nlohmann::json{{"shots", cfg.shots[s]},
                                      {"score_accuracy", res.acc_score.accuracy},
                                      {"std_accuracy", res.acc_std.accuracy},
                                      {"in_domain_mean_score", res.in_mean_score},
                                      {"out_domain_mean_score", res.out_mean_score},
                                      {"score_wins", wins}});
    if (cfg.shots[s] == 32) in_score_32 = res.in_mean_score;
    if (cfg.shots[s] == 0) in_score_analytic = res.in_mean_score;
  }
  rep.tables.push_back(std::move(sweep));
  rep.tables.push_back(std::move(members));

  nlohmann::json summary{{"experiment", cfg.experiment},
                         {"config", config_to_json(cfg)},
                         {"settings", settings},
                         {"score_wins", score_wins},
                         {"n_settings", cfg.shots.size()},
                         {"score_wins_majority", 2 * score_wins > static_cast<int>(cfg.shots.size())},
                         {"version", kVersion}};
  if (!std::isnan(in_score_32) && !std::isnan(in_score_analytic)) {
    summary["in_domain_score_at_32"] = in_score_32;
    summary["in_domain_score_analytic"] = in_score_analytic;
    summary["noise_inflates_in_domain_score"] = in_score_32 > in_score_analytic;
  }
  rep.summary = std::move(summary);
  rep.wall_clock_s = timer.seconds();
  return rep;
}

RunReport run_fmnist_rotation(const ExperimentConfig& user_cfg) {
  Timer timer;
  ExperimentConfig cfg = user_cfg;
  cfg.experiment = "fmnist-rotation";
  cfg.family = "pqc";
  cfg.members = resolve(cfg.members, 1);
  cfg.m = resolve(cfg.m, 25);
  cfg.epochs = resolve(cfg.epochs, 30);
  cfg.batch = resolve(cfg.batch, 32);
  cfg.lr = resolve(cfg.lr, 0.05);
  cfg.train_points = resolve(cfg.train_points, 500);
  cfg.test_points = resolve(cfg.test_points, 200);
  if (cfg.angles.empty()) cfg.angles = {0, 15, 30, 45, 60, 75, 90};
  if (cfg.members < 1) throw config_error("fmnist-rotation: members must be >= 1");
  if (cfg.images.empty() || cfg.labels.empty())
    throw config_error("fmnist-rotation: --images and --labels IDX paths are required");

  const std::vector<ImageRecord> records = load_image_label_pair(cfg.images, cfg.labels);
  Rng data_rng(Rng::split(cfg.seed, kDataStream));
  const FmnistPrepared prep = prepare_fmnist(records, cfg.class_a, cfg.class_b, 7, data_rng,
                                             cfg.train_points, cfg.test_points);

  const CircuitTemplate tpl = build_template("fmnist");
  if (cfg.m > tpl.n_trainable) throw config_error("fmnist-rotation: m exceeds parameter count");
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch;
  tc.lr = cfg.lr;
  tc.seed = Rng::split(cfg.seed, kTrainStream);
  AnalyzedEnsemble a = analyze_pqc_ensemble(tpl, prep.train, tc, cfg.members, cfg.m,
                                            Rng::split(cfg.seed, kScoreStream));

  RunReport rep;
  rep.dir_name = cfg.experiment + "_" + std::to_string(cfg.seed);

  CsvTable spectrum{"spectrum", {"member", "rank", "abs_eigenvalue"}, {}};
  for (std::size_t k = 0; k < a.spectra.size(); ++k) {
    const SpectrumReport sr = spectrum_report(a.spectra[k]);
    for (std::size_t r = 0; r < sr.magnitudes.size(); ++r)
      spectrum.rows.push_back(
          {cell(static_cast<int>(k)), cell(static_cast<int>(r)), cell(sr.magnitudes[r])});
  }
  rep.tables.push_back(std::move(spectrum));

  CsvTable angle_table{"angles", {"angle_degrees", "mean_score", "n_images"}, {}};
  CsvTable per_image{"scores_by_angle",
                     {"angle_degrees", "image_index", "label", "mean_score", "mean_prediction"},
                     {}};
  std::vector<double> angle_scores;
  for (double angle : cfg.angles) {
    double acc_score = 0.0;
    for (std::size_t i = 0; i < prep.test_images.size(); ++i) {
      const ImageRecord rotated = rotate_image(prep.test_images[i], angle);
      const std::vector<double> feat = featurize_image(rotated, prep.pca, prep.feature_norm);
      const PointEval ev = eval_point(a, feat);
      acc_score += ev.mean_score;
      per_image.rows.push_back({cell(angle), cell(static_cast<int>(i)),
                                cell(prep.test_images[i].label), cell(ev.mean_score),
                                cell(ev.mean_pred)});
    }
    const double mean_score = acc_score / static_cast<double>(prep.test_images.size());
    angle_scores.push_back(mean_score);
    angle_table.rows.push_back(
        {cell(angle), cell(mean_score), cell(static_cast<int>(prep.test_images.size()))});
  }
  rep.tables.push_back(std::move(angle_table));
  rep.tables.push_back(std::move(per_image));

  CsvTable members{"members", {"member", "seed", "final_train_loss"}, {}};
  for (std::size_t k = 0; k < a.ens.members.size(); ++k)
    members.rows.push_back({cell(static_cast<int>(k)), cell(a.ens.seeds[k]),
                            cell(a.ens.members[k].report.final_train_loss)});
  rep.tables.push_back(std::move(members));

  const double rho = spearman(cfg.angles, angle_scores);
  nlohmann::json summary{{"experiment", cfg.experiment},
                         {"config", config_to_json(cfg)},
                         {"spearman_angle_score", rho},
                         {"suggested_m", spectrum_report(a.spectra[0]).suggested_m},
                         {"version", kVersion}};
  for (std::size_t i = 0; i < cfg.angles.size(); ++i) {
    if (cfg.angles[i] == 0.0) summary["mean_score_at_0"] = angle_scores[i];
    if (cfg.angles[i] == 90.0) summary["mean_score_at_90"] = angle_scores[i];
  }
  if (summary.contains("mean_score_at_0") && summary.contains("mean_score_at_90"))
    summary["score_increases_under_rotation"] =
        summary["mean_score_at_90"].get<double>() > summary["mean_score_at_0"].get<double>();
  rep.summary = std::move(summary);
  rep.wall_clock_s = timer.seconds();
  return rep;
}

RunReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "iris-correlation") return run_iris_correlation(cfg);
  if (cfg.experiment == "sine-ood") return run_ood_1d(cfg, "sine");
  if (cfg.experiment == "linear-ood") return run_ood_1d(cfg, "linear");
  if (cfg.experiment == "noise-sweep") return run_noise_sweep(cfg);
  if (cfg.experiment == "fmnist-rotation") return run_fmnist_rotation(cfg);
  throw config_error("unknown experiment '" + cfg.experiment +
                     "' (expected iris-correlation, sine-ood, linear-ood, noise-sweep or "
                     "fmnist-rotation)");
}

}  // namespace underdet
