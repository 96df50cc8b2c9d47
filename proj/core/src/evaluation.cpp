#include "accelcal/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "accelcal/calib_iterative.hpp"
#include "accelcal/calib_ls.hpp"
#include "accelcal/errors.hpp"
#include "accelcal/rng.hpp"
#include "accelcal/tdist.hpp"

namespace accelcal {

namespace {
using nlohmann::json;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kLeastSquares: return "least-squares";
    case Method::kIterative: return "iterative";
    case Method::kOfbenet: return "ofbenet";
  }
  throw std::invalid_argument("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
  if (name == "least-squares" || name == "ls") return Method::kLeastSquares;
  if (name == "iterative" || name == "math-model") return Method::kIterative;
  if (name == "ofbenet") return Method::kOfbenet;
  throw std::invalid_argument("method_from_name: unknown method '" + name + "'");
}

double rmse(const std::vector<Vec3>& truths, const std::vector<Vec3>& predictions) {
  if (truths.empty() || truths.size() != predictions.size()) {
    throw std::invalid_argument("rmse: empty or mismatched inputs");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const Vec3 e = truths[i] - predictions[i];
    acc += dot(e, e);
  }
  return std::sqrt(acc / static_cast<double>(truths.size()));
}

double max_error(const std::vector<Vec3>& truths, const std::vector<Vec3>& predictions) {
  if (truths.empty() || truths.size() != predictions.size()) {
    throw std::invalid_argument("max_error: empty or mismatched inputs");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const Vec3 e = truths[i] - predictions[i];
    worst = std::max({worst, std::abs(e.x), std::abs(e.y), std::abs(e.z)});
  }
  return worst;
}

PairedTTest paired_t_test(const std::vector<double>& errors_a,
                          const std::vector<double>& errors_b) {
  const std::size_t n = errors_a.size();
  if (n < 2 || errors_b.size() != n) {
    throw std::invalid_argument("paired_t_test: need two equal series of length >= 2");
  }
  double mean_d = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_d += errors_a[i] - errors_b[i];
  mean_d /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dev = (errors_a[i] - errors_b[i]) - mean_d;
    ss += dev * dev;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) {
    throw DegenerateVarianceError(
        "paired_t_test: zero variance of differences (methods are identical)");
  }
  PairedTTest result;
  result.dof = n - 1;
  result.t = mean_d / (sd / std::sqrt(static_cast<double>(n)));
  result.p = student_t_two_sided_p(result.t, static_cast<double>(result.dof));
  return result;
}

namespace {

Tensor2 window_to_tensor(const std::vector<Vec3>& window) {
  Tensor2 t(window.size(), 3);
  for (std::size_t i = 0; i < window.size(); ++i) {
    t(i, 0) = window[i].x;
    t(i, 1) = window[i].y;
    t(i, 2) = window[i].z;
  }
  return t;
}

std::vector<Vec3> leading_window(const Recording& rec, std::size_t window_len) {
  if (rec.segment.size() < window_len) {
    throw InsufficientDataError("evaluate: recording '" + rec.id + "' shorter than the window");
  }
  return {rec.segment.samples.begin(),
          rec.segment.samples.begin() + static_cast<long>(window_len)};
}

struct FoldOutput {
  std::vector<MethodResult> results;
};

FoldOutput evaluate_fold(const std::vector<Recording>& recordings,
                         const std::map<std::string, std::size_t>& index_of,
                         const FoldSplit& fold, const EvaluationConfig& config) {
  FoldOutput out;

  // Recording-granularity validation split for early stopping.
  std::vector<std::string> train_ids = fold.train_ids;
  {
    SplitMix64 rng(derive_seed(config.seed, "val-split", fold.fold_index));
    for (std::size_t i = train_ids.size(); i > 1; --i) {
      std::swap(train_ids[i - 1], train_ids[rng.next_below(i)]);
    }
  }
  const std::size_t val_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(
             static_cast<double>(train_ids.size()) * config.val_fraction)));
  std::vector<std::string> val_ids(train_ids.begin(),
                                   train_ids.begin() + static_cast<long>(val_count));
  train_ids.erase(train_ids.begin(), train_ids.begin() + static_cast<long>(val_count));

  const bool wants_net =
      std::find(config.methods.begin(), config.methods.end(), Method::kOfbenet) !=
      config.methods.end();

  std::optional<NetworkParameters> net;
  std::string net_failure;
  if (wants_net) {
    try {
      std::vector<WindowedExample> train_set, val_set;
      for (const auto& id : train_ids) {
        auto w = window_recording(recordings[index_of.at(id)], config.window_len);
        train_set.insert(train_set.end(), std::make_move_iterator(w.begin()),
                         std::make_move_iterator(w.end()));
      }
      for (const auto& id : val_ids) {
        auto w = window_recording(recordings[index_of.at(id)], config.window_len);
        val_set.insert(val_set.end(), std::make_move_iterator(w.begin()),
                       std::make_move_iterator(w.end()));
      }
      TrainingConfig tc = config.training;
      tc.seed = derive_seed(config.seed, "train", fold.fold_index);
      const NetworkParameters init =
          init_parameters(config.network, derive_seed(config.seed, "init", fold.fold_index));
      net = train(init, train_set, val_set, tc).params;
    } catch (const Error& e) {
      net_failure = e.what();
    }
  }

  for (Method m : config.methods) {
    MethodResult res;
    res.method = method_name(m);
    res.fold = fold.fold_index;
    try {
      if (m == Method::kOfbenet && !net_failure.empty()) throw Error(net_failure);

      // Pooled diagnostic mode: solve each power cycle's test recordings as
      // one multi-orientation problem.
      std::map<std::string, std::vector<Vec3>> pooled;
      if (config.pool_test_orientations && m != Method::kOfbenet) {
        for (const auto& id : fold.test_ids) {
          const Recording& rec = recordings[index_of.at(id)];
          const auto win = leading_window(rec, config.window_len);
          Vec3 sum{};
          for (const Vec3& s : win) sum += s;
          pooled[rec.power_cycle_id].push_back(sum / static_cast<double>(win.size()));
        }
      }

      for (const auto& id : fold.test_ids) {
        const Recording& rec = recordings[index_of.at(id)];
        if (!rec.label_bias) {
          throw StateError("evaluate: recording '" + rec.id + "' is unlabeled");
        }
        const auto win = leading_window(rec, config.window_len);

        Vec3 prediction{};
        if (m == Method::kOfbenet) {
          prediction = forward(*net, window_to_tensor(win)).bhat;
        } else {
          std::vector<Vec3> measurements;
          if (config.pool_test_orientations) {
            measurements = pooled.at(rec.power_cycle_id);
          } else if (config.per_sample_baselines) {
            measurements = win;
          } else {
            Vec3 sum{};
            for (const Vec3& s : win) sum += s;
            measurements = {sum / static_cast<double>(win.size())};
          }
          if (m == Method::kLeastSquares) {
            prediction = solve_trf({measurements, config.g}).bias;
          } else {
            IterativeConfig ic;
            ic.allow_min_norm_fallback = true;
            const CalibrationResult r = solve_iterative(measurements, ic, config.g);
            res.used_min_norm_fallback = res.used_min_norm_fallback || r.used_min_norm_fallback;
            prediction = r.bias;
          }
        }
        res.signal_ids.push_back(id);
        res.predictions.push_back(prediction);
        res.truths.push_back(*rec.label_bias);
      }
    } catch (const std::exception& e) {
      res.failed = true;
      res.failure_reason = e.what();
      res.signal_ids.clear();
      res.predictions.clear();
      res.truths.clear();
    }
    out.results.push_back(std::move(res));
  }
  return out;
}

}  // namespace

EvaluationReport run_cross_validation(const std::vector<Recording>& recordings,
                                      const EvaluationConfig& config) {
  if (recordings.empty()) throw std::invalid_argument("run_cross_validation: no recordings");

  std::vector<std::string> ids;
  std::vector<std::string> device_of;
  std::map<std::string, std::size_t> index_of;
  bool multi_device = false;
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    ids.push_back(recordings[i].id);
    device_of.push_back(recordings[i].device_id);
    index_of[recordings[i].id] = i;
    if (recordings[i].device_id != recordings[0].device_id) multi_device = true;
  }

  const auto folds =
      make_folds(ids, config.folds, config.test_fraction, config.seed,
                 multi_device ? device_of : std::vector<std::string>{});

  std::vector<FoldOutput> outputs(folds.size());
  if (config.parallel_folds) {
    std::vector<std::future<FoldOutput>> futures;
    futures.reserve(folds.size());
    for (const FoldSplit& fold : folds) {
      futures.push_back(std::async(std::launch::async, [&recordings, &index_of, &fold,
                                                        &config] {
        return evaluate_fold(recordings, index_of, fold, config);
      }));
    }
    for (std::size_t f = 0; f < futures.size(); ++f) outputs[f] = futures[f].get();
  } else {
    for (std::size_t f = 0; f < folds.size(); ++f) {
      outputs[f] = evaluate_fold(recordings, index_of, folds[f], config);
    }
  }

  std::vector<MethodResult> all;
  for (auto& o : outputs) {
    for (auto& r : o.results) all.push_back(std::move(r));
  }
  return aggregate_report(std::move(all), config.dataset_label);
}

EvaluationReport aggregate_report(std::vector<MethodResult> fold_results,
                                  const std::string& dataset_label) {
  // Deterministic ordering regardless of how folds were produced.
  std::stable_sort(fold_results.begin(), fold_results.end(),
                   [](const MethodResult& a, const MethodResult& b) {
                     return a.fold != b.fold ? a.fold < b.fold : a.method < b.method;
                   });

  EvaluationReport report;
  report.dataset_label = dataset_label;

  std::vector<std::string> methods;
  for (const auto& r : fold_results) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }
  std::sort(methods.begin(), methods.end());

  for (const auto& m : methods) {
    MethodSummary s;
    s.method = m;
    for (const auto& r : fold_results) {
      if (r.method != m) continue;
      if (r.failed) {
        s.failed_folds.push_back(r.fold);
        continue;
      }
      s.folds.push_back(r.fold);
      s.fold_rmse.push_back(rmse(r.truths, r.predictions));
      s.fold_max_error.push_back(max_error(r.truths, r.predictions));
    }
    if (!s.fold_rmse.empty()) {
      double acc = 0.0;
      for (double v : s.fold_rmse) acc += v;
      s.mean_rmse = acc / static_cast<double>(s.fold_rmse.size());
      double ss = 0.0;
      for (double v : s.fold_rmse) ss += (v - s.mean_rmse) * (v - s.mean_rmse);
      s.std_rmse = s.fold_rmse.size() > 1
                       ? std::sqrt(ss / static_cast<double>(s.fold_rmse.size() - 1))
                       : 0.0;
      s.max_error = *std::max_element(s.fold_max_error.begin(), s.fold_max_error.end());
    }
    report.methods.push_back(std::move(s));
  }

  // Pairwise tests on per-fold RMSE, restricted to folds both methods passed.
  for (std::size_t a = 0; a < report.methods.size(); ++a) {
    for (std::size_t b = 0; b < report.methods.size(); ++b) {
      if (a == b) continue;
      // Emit each unordered pair once. Method names are sorted, so "ofbenet"
      // always lands on the compared side and improvement percentages are
      // relative to the baseline.
      if (report.methods[a].method >= report.methods[b].method) continue;
      const MethodSummary& base = report.methods[a];
      const MethodSummary& comp = report.methods[b];

      PairReport pair;
      pair.method_a = base.method;
      pair.method_b = comp.method;
      std::vector<double> ea, eb;
      for (std::size_t i = 0; i < base.folds.size(); ++i) {
        const auto it = std::find(comp.folds.begin(), comp.folds.end(), base.folds[i]);
        if (it == comp.folds.end()) continue;
        ea.push_back(base.fold_rmse[i]);
        eb.push_back(comp.fold_rmse[static_cast<std::size_t>(it - comp.folds.begin())]);
      }
      if (ea.size() >= 2) {
        try {
          const PairedTTest t = paired_t_test(ea, eb);
          pair.t = t.t;
          pair.p = t.p;
          pair.dof = t.dof;
        } catch (const DegenerateVarianceError&) {
          pair.degenerate = true;
          pair.dof = ea.size() - 1;
        }
        double mean_a = 0.0, mean_b = 0.0;
        for (double v : ea) mean_a += v;
        for (double v : eb) mean_b += v;
        mean_a /= static_cast<double>(ea.size());
        mean_b /= static_cast<double>(eb.size());
        pair.improvement_percent = mean_a > 0.0 ? 100.0 * (mean_a - mean_b) / mean_a : 0.0;
        report.pairs.push_back(std::move(pair));
      }
    }
  }

  report.fold_results = std::move(fold_results);
  return report;
}

namespace {

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json method_result_to_json(const MethodResult& r) {
  json j;
  j["method"] = r.method;
  j["fold"] = r.fold;
  j["failed"] = r.failed;
  if (r.failed) j["failure_reason"] = r.failure_reason;
  j["used_min_norm_fallback"] = r.used_min_norm_fallback;
  j["signal_ids"] = r.signal_ids;
  json preds = json::array(), truths = json::array();
  for (const Vec3& v : r.predictions) preds.push_back(vec3_to_json(v));
  for (const Vec3& v : r.truths) truths.push_back(vec3_to_json(v));
  j["predictions"] = std::move(preds);
  j["truths"] = std::move(truths);
  return j;
}

MethodResult method_result_from_json(const json& j) {
  MethodResult r;
  r.method = j.at("method").get<std::string>();
  r.fold = j.at("fold").get<std::size_t>();
  r.failed = j.value("failed", false);
  r.failure_reason = j.value("failure_reason", std::string{});
  r.used_min_norm_fallback = j.value("used_min_norm_fallback", false);
  r.signal_ids = j.at("signal_ids").get<std::vector<std::string>>();
  for (const json& v : j.at("predictions")) r.predictions.push_back(vec3_from_json(v));
  for (const json& v : j.at("truths")) r.truths.push_back(vec3_from_json(v));
  return r;
}

void write_json_to(const json& j, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
  if (!f) throw Error("write failed for " + path.string());
}

}  // namespace

void write_report_json(const EvaluationReport& report, const std::filesystem::path& path) {
  json j;
  j["dataset"] = report.dataset_label;
  json methods = json::array();
  for (const auto& m : report.methods) {
    json jm;
    jm["method"] = m.method;
    jm["folds"] = m.folds;
    jm["fold_rmse"] = m.fold_rmse;
    jm["fold_max_error"] = m.fold_max_error;
    jm["mean_rmse"] = m.mean_rmse;
    jm["std_rmse"] = m.std_rmse;
    jm["max_error"] = m.max_error;
    jm["failed_folds"] = m.failed_folds;
    methods.push_back(std::move(jm));
  }
  j["methods"] = std::move(methods);
  json pairs = json::array();
  for (const auto& p : report.pairs) {
    json jp;
    jp["baseline"] = p.method_a;
    jp["method"] = p.method_b;
    jp["degenerate"] = p.degenerate;
    if (!p.degenerate) {
      jp["t"] = p.t;
      jp["p"] = p.p;
    }
    jp["dof"] = p.dof;
    jp["improvement_percent"] = p.improvement_percent;
    pairs.push_back(std::move(jp));
  }
  j["pairs"] = std::move(pairs);
  write_json_to(j, path);
}

void write_fold_results_json(const EvaluationReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::map<std::size_t, json> per_fold;
  for (const auto& r : report.fold_results) {
    per_fold[r.fold].push_back(method_result_to_json(r));
  }
  for (const auto& [fold, arr] : per_fold) {
    write_json_to(arr, dir / ("results_fold" + std::to_string(fold) + ".json"));
  }
}

std::vector<MethodResult> read_fold_results_json(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("results_fold", 0) == 0 && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("read_fold_results_json: no results_fold*.json in " +
                                 dir.string());
  std::vector<MethodResult> out;
  for (const auto& file : files) {
    std::ifstream f(file, std::ios::binary);
    if (!f) throw Error("read_fold_results_json: cannot open " + file.string());
    const json arr = json::parse(f);
    for (const json& j : arr) out.push_back(method_result_from_json(j));
  }
  return out;
}

void write_figure_csvs(const EvaluationReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  char buf[32];
  const auto fmt = [&buf](double v) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };

  std::ofstream rm(dir / "rmse_mean_std.csv", std::ios::binary | std::ios::trunc);
  rm << "dataset,method,mean_rmse,std_rmse\n";
  for (const auto& m : report.methods) {
    rm << report.dataset_label << ',' << m.method << ',' << fmt(m.mean_rmse) << ','
       << fmt(m.std_rmse) << '\n';
  }

  std::ofstream me(dir / "max_errors.csv", std::ios::binary | std::ios::trunc);
  me << "dataset,method,max_error\n";
  for (const auto& m : report.methods) {
    me << report.dataset_label << ',' << m.method << ',' << fmt(m.max_error) << '\n';
  }

  std::ofstream tt(dir / "ttest.csv", std::ios::binary | std::ios::trunc);
  tt << "dataset,baseline,method,t,p,dof,degenerate\n";
  for (const auto& p : report.pairs) {
    tt << report.dataset_label << ',' << p.method_a << ',' << p.method_b << ',';
    if (p.degenerate) {
      tt << ",,";
    } else {
      tt << fmt(p.t) << ',' << fmt(p.p) << ',';
    }
    tt << p.dof << ',' << (p.degenerate ? "true" : "false") << '\n';
  }
}

}  // namespace accelcal
