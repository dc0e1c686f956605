/*
 * Copyright 2026 The pxattack Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef PXATTACK_HARNESS_HPP_
#define PXATTACK_HARNESS_HPP_

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "pxattack/attack.hpp"
#include "pxattack/baselines.hpp"
#include "pxattack/classifier.hpp"
#include "pxattack/external.hpp"
#include "pxattack/metrics.hpp"
#include "pxattack/png.hpp"
#include "pxattack/superpixel.hpp"

namespace pxattack {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ModelSpec {
  fs::path toy;          // toy weights file, or
  std::string external;  // shell command / http:// URL
  std::size_t classes = 0;
  double timeout_seconds = 30.0;
};

struct ExperimentConfig {
  std::string attack = "superpixel";  // superpixel | square | signhunter
  double epsilon = 4.0 / 255.0;
  std::size_t max_iters = 1000;
  std::uint64_t seed = 0;
  fs::path dataset;
  ModelSpec model;
  bool early_stop = true;
  fs::path output_dir;
  std::vector<std::size_t> checkpoints;
  std::size_t segment_ratio = 4;
  SlicParams slic{1, 10.0, true, 10};
  SquareParams square;
  LossKind loss = LossKind::kCw;
  std::size_t jobs = 1;
  bool clean_query = true;
  std::size_t limit = 0;  // 0: every manifest entry
};

inline void validate(const ExperimentConfig& c) {
  if (!(c.epsilon > 0.0)) throw Error(ErrorCode::kOutOfRange, "epsilon must be > 0");
  if (c.max_iters < 1) throw Error(ErrorCode::kOutOfRange, "max_iters must be >= 1");
  for (auto t : c.checkpoints) {
    if (t < 1 || t > c.max_iters) {
      throw Error(ErrorCode::kOutOfRange, "checkpoint " + std::to_string(t) + " outside [1, max_iters]");
    }
  }
  if (c.attack != "superpixel" && c.attack != "square" && c.attack != "signhunter") {
    throw Error(ErrorCode::kOutOfRange, "unknown attack '" + c.attack + "'");
  }
  if (c.model.toy.empty() == c.model.external.empty()) {
    throw Error(ErrorCode::kMalformed, "model needs exactly one of \"toy\" or \"command\"/\"url\"");
  }
  if (c.segment_ratio < 2) throw Error(ErrorCode::kOutOfRange, "segment_ratio must be >= 2");
  if (c.jobs < 1) throw Error(ErrorCode::kOutOfRange, "jobs must be >= 1");
}

/// Parses a version-1 JSON config. Relative paths resolve against `base_dir`.
inline ExperimentConfig parse_config(const nlohmann::json& j, const fs::path& base_dir) {
  ExperimentConfig c;
  const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
  try {
    if (j.value("version", 0) != 1) throw Error(ErrorCode::kMalformed, "config \"version\" must be 1");
    c.attack = j.value("attack", c.attack);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.seed = j.value("seed", c.seed);
    c.dataset = resolve(j.at("dataset").get<std::string>());
    const auto& m = j.at("model");
    if (m.contains("toy")) c.model.toy = resolve(m["toy"].get<std::string>());
    if (m.contains("command")) c.model.external = m["command"].get<std::string>();
    if (m.contains("url")) c.model.external = m["url"].get<std::string>();
    c.model.classes = m.value("classes", c.model.classes);
    c.model.timeout_seconds = m.value("timeout_seconds", c.model.timeout_seconds);
    c.early_stop = j.value("early_stop", c.early_stop);
    if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>());
    c.checkpoints = j.value("checkpoints", c.checkpoints);
    if (j.contains("superpixel")) {
      const auto& s = j["superpixel"];
      c.segment_ratio = s.value("segment_ratio", c.segment_ratio);
      c.slic.alpha = s.value("alpha", c.slic.alpha);
      c.slic.enforce_connectivity = s.value("enforce_connectivity", c.slic.enforce_connectivity);
      c.slic.kmeans_iters = s.value("kmeans_iters", c.slic.kmeans_iters);
    }
    if (j.contains("square")) c.square.p_init = j["square"].value("p_init", c.square.p_init);
    const auto loss = j.value("loss", std::string("cw"));
    if (loss == "cw") {
      c.loss = LossKind::kCw;
    } else if (loss == "ce") {
      c.loss = LossKind::kCrossEntropy;
    } else {
      throw Error(ErrorCode::kMalformed, "loss must be \"cw\" or \"ce\"");
    }
    c.jobs = j.value("jobs", c.jobs);
    c.clean_query = j.value("clean_query", c.clean_query);
    c.limit = j.value("limit", c.limit);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformed, std::string("config: ") + e.what());
  }
  if (c.checkpoints.empty()) c.checkpoints = {c.max_iters};
  std::sort(c.checkpoints.begin(), c.checkpoints.end());
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformed, path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Dataset manifest: CSV "path,label", labels 1-based, optional header row.
// ---------------------------------------------------------------------------

struct DatasetEntry {
  fs::path path;
  std::size_t label = 0;  // 0-based
};

inline std::vector<DatasetEntry> load_manifest(const fs::path& manifest) {
  std::istringstream in(detail::read_file(manifest));
  std::vector<DatasetEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::kMalformed, manifest.string() + ":" + std::to_string(line_no) + ": expected path,label");
    }
    const std::string path = line.substr(0, comma);
    const std::string label = line.substr(comma + 1);
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), value);
    if (ec != std::errc() || ptr != label.data() + label.size()) {
      if (line_no == 1) continue;  // header
      throw Error(ErrorCode::kMalformed, manifest.string() + ":" + std::to_string(line_no) + ": bad label");
    }
    if (value < 1) throw Error(ErrorCode::kOutOfRange, "labels are 1-based");
    const fs::path p = fs::path(path).is_absolute() ? fs::path(path) : manifest.parent_path() / path;
    out.push_back({p, value - 1});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation cache keyed by (image, n, alpha, connectivity, iterations)
// ---------------------------------------------------------------------------

class SegmentationCache {
 public:
  using Key = std::tuple<std::string, std::size_t, double, bool, std::size_t>;

  std::shared_ptr<const SegmentMap> get(const std::string& image_key, const LabTensor& lab,
                                        const SlicParams& params) {
    const Key key{image_key, params.max_segments, params.alpha, params.enforce_connectivity,
                  params.kmeans_iters};
    {
      std::lock_guard lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    auto seg = std::make_shared<const SegmentMap>(slic(lab, params));
    std::lock_guard lock(mutex_);
    return cache_.try_emplace(key, std::move(seg)).first->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::map<Key, std::shared_ptr<const SegmentMap>> cache_;
};

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct ImageResult {
  std::size_t image_id = 0;
  bool clean_correct = true;
  bool success = false;
  std::optional<std::size_t> first_success_iter;
  double final_loss = 0.0;
  std::size_t queries = 0;
  std::size_t anomalies = 0;
  bool error = false;
  std::string error_message;
};

struct Report {
  ExperimentConfig config;
  std::vector<ImageResult> rows;
  std::size_t clean_queries = 0;
  double segmentation_seconds = 0.0;
  double model_query_seconds = 0.0;
  double total_seconds = 0.0;

  /// Percentage of images with first_success_iter <= t.
  double success_rate_percent(std::size_t t) const {
    if (rows.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& r : rows) {
      if (r.first_success_iter && *r.first_success_iter <= t) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(rows.size());
  }

  double other_seconds() const {
    return std::max(0.0, total_seconds - segmentation_seconds - model_query_seconds);
  }
};

inline std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(0, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t i = next++; i < count; i = next++) fn(w, i);
    });
  }
  for (auto& t : workers) t.join();
}

// One classifier per worker for external models (each its own connection);
// toy models are immutable and shared.
class ModelPool {
 public:
  ModelPool(const ModelSpec& spec, std::size_t workers) {
    if (!spec.toy.empty()) {
      shared_ = std::make_unique<ToyModel>(load_toy_model(spec.toy));
      return;
    }
    const auto timeout = std::chrono::milliseconds(static_cast<long long>(spec.timeout_seconds * 1000.0));
    for (std::size_t w = 0; w < workers; ++w) {
      external_.push_back(connect_external(spec.external, timeout, spec.classes));
    }
  }

  Classifier& for_worker(std::size_t w) {
    if (shared_) return *shared_;
    return *external_.at(w);
  }

 private:
  std::unique_ptr<ToyModel> shared_;
  std::vector<std::unique_ptr<ExternalClassifier>> external_;
};

}  // namespace detail

/// Attacks one image with the configured attack.
inline AttackTrace run_attack(const ExperimentConfig& config, Classifier& model, const ImageTensor& image,
                              std::size_t label, Rng& rng, const Segmenter& segments = {}) {
  if (config.attack == "superpixel") {
    VersatileSearchConfig vs;
    vs.epsilon = config.epsilon;
    vs.max_iters = config.max_iters;
    vs.segment_ratio = config.segment_ratio;
    vs.slic = config.slic;
    vs.early_stop = config.early_stop;
    vs.loss = config.loss;
    return versatile_search(model, image, label, vs, rng, segments);
  }
  if (config.attack == "square") {
    SquareParams sp = config.square;
    sp.early_stop = config.early_stop;
    sp.loss = config.loss;
    return square_attack(model, image, label, config.epsilon, config.max_iters, sp, rng);
  }
  SignHunterParams sh{config.early_stop, config.loss};
  return signhunter(model, image, label, config.epsilon, config.max_iters, sh, rng);
}

inline void emit_report(const Report& report, const fs::path& dir);

/// Runs the configured attack on every manifest image. Image i uses the RNG
/// stream seed ^ i. Images the model already misclassifies (clean CW loss
/// > 0) count as successes at iteration 0 without spending attack queries.
/// Per-image model failures are recorded and the run continues. Writes the
/// report files when config.output_dir is set.
inline Report run_experiment(const ExperimentConfig& config, SegmentationCache* cache = nullptr) {
  validate(config);
  const auto wall_start = detail::Clock::now();
  auto entries = load_manifest(config.dataset);
  if (config.limit > 0 && entries.size() > config.limit) entries.resize(config.limit);
  for (const auto& e : entries) {
    if (!fs::exists(e.path)) throw Error(ErrorCode::kIo, "missing image " + e.path.string());
  }
  SegmentationCache local_cache;
  if (cache == nullptr) cache = &local_cache;

  const std::size_t jobs = std::max<std::size_t>(1, std::min(config.jobs, entries.size()));
  detail::ModelPool pool(config.model, jobs);

  Report report;
  report.config = config;
  report.rows.resize(entries.size());
  std::vector<double> seg_time(entries.size(), 0.0), query_time(entries.size(), 0.0);
  std::vector<std::size_t> clean_queries(entries.size(), 0);

  detail::parallel_for(entries.size(), jobs, [&](std::size_t worker, std::size_t i) {
    ImageResult& row = report.rows[i];
    row.image_id = i;
    Classifier& model = pool.for_worker(worker);
    try {
      const ImageTensor image = load_image(entries[i].path);
      if (config.clean_query) {
        const auto start = detail::Clock::now();
        const auto probs = model.predict(image);
        query_time[i] += detail::seconds_since(start);
        clean_queries[i] = 1;
        const double margin = cw_loss(probs, entries[i].label);
        if (margin > 0.0) {
          row.clean_correct = false;
          row.success = true;
          row.first_success_iter = 0;
          row.final_loss = attack_loss(config.loss, probs, entries[i].label);
          return;
        }
      }
      Rng rng = image_rng(config.seed, i);
      Segmenter segments;
      if (config.attack == "superpixel") {
        auto lab = std::make_shared<const LabTensor>(image_to_lab(image));
        const std::string key = entries[i].path.string();
        segments = [cache, lab, key, params = config.slic](std::size_t n) {
          SlicParams p = params;
          p.max_segments = n;
          return *cache->get(key, *lab, p);
        };
      }
      const AttackTrace trace = run_attack(config, model, image, entries[i].label, rng, segments);
      row.success = trace.success;
      row.first_success_iter = trace.first_success_iter;
      row.final_loss = trace.best_loss;
      row.queries = trace.queries;
      row.anomalies = trace.anomalies;
      row.error = trace.error;
      row.error_message = trace.error_message;
      seg_time[i] += trace.segmentation_seconds;
      query_time[i] += trace.query_seconds;
    } catch (const std::exception& e) {
      row.error = true;
      row.error_message = e.what();
    }
  });

  for (std::size_t i = 0; i < entries.size(); ++i) {
    report.segmentation_seconds += seg_time[i];
    report.model_query_seconds += query_time[i];
    report.clean_queries += clean_queries[i];
  }
  report.total_seconds = detail::seconds_since(wall_start);
  if (!config.output_dir.empty()) emit_report(report, config.output_dir);
  return report;
}

/// Writes summary.json, per_image.csv, curve.csv and timing.csv into `dir`.
inline void emit_report(const Report& report, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& cfg = report.config;

  std::ostringstream per_image;
  per_image << "image_id,clean_correct,success,first_success_iter,final_loss,queries\n";
  for (const auto& r : report.rows) {
    per_image << r.image_id << ',' << (r.clean_correct ? 1 : 0) << ',' << (r.success ? 1 : 0) << ','
              << (r.first_success_iter ? std::to_string(*r.first_success_iter) : std::string()) << ','
              << format_number(r.final_loss) << ',' << r.queries << '\n';
  }
  detail::write_file(dir / "per_image.csv", per_image.str());

  std::ostringstream curve;
  curve << "iteration,success_rate_percent\n";
  if (!report.rows.empty()) {
    for (std::size_t t = 0; t <= cfg.max_iters; ++t) {
      curve << t << ',' << format_number(report.success_rate_percent(t)) << '\n';
    }
  }
  detail::write_file(dir / "curve.csv", curve.str());

  std::ostringstream timing;
  timing << "phase,seconds\n"
         << "segmentation," << format_number(report.segmentation_seconds) << '\n'
         << "model_query," << format_number(report.model_query_seconds) << '\n'
         << "other," << format_number(report.other_seconds()) << '\n';
  detail::write_file(dir / "timing.csv", timing.str());

  nlohmann::ordered_json s;
  s["version"] = 1;
  s["attack"] = cfg.attack;
  s["epsilon"] = cfg.epsilon;
  s["max_iters"] = cfg.max_iters;
  s["seed"] = cfg.seed;
  s["early_stop"] = cfg.early_stop;
  s["images"] = report.rows.size();
  std::size_t clean_correct = 0, errors = 0, anomalies = 0, queries = 0;
  nlohmann::json error_list = nlohmann::json::array();
  for (const auto& r : report.rows) {
    clean_correct += r.clean_correct ? 1 : 0;
    anomalies += r.anomalies;
    queries += r.queries;
    if (r.error) {
      ++errors;
      error_list.push_back({{"image_id", r.image_id}, {"message", r.error_message}});
    }
  }
  s["clean_queries"] = report.clean_queries;
  s["clean_accuracy_percent"] =
      report.rows.empty() ? 0.0 : 100.0 * static_cast<double>(clean_correct) / static_cast<double>(report.rows.size());
  s["attack_queries"] = queries;
  nlohmann::ordered_json rates;
  for (auto t : cfg.checkpoints) rates[std::to_string(t)] = report.success_rate_percent(t);
  s["success_rate_percent"] = rates;
  s["anomalies"] = anomalies;
  s["errors"] = errors;
  s["error_details"] = error_list;
  detail::write_file(dir / "summary.json", s.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Update-area analysis
// ---------------------------------------------------------------------------

struct AreaAnalysisRow {
  double alpha = 0.0;
  bool connectivity = true;
  double icv = 0.0;
  double compactness = 0.0;
  double success_rate_percent = 0.0;
};

/// Segment budgets reached by a T-iteration schedule: 1 (the whole image),
/// then r, r^2, ... capped at H*W, until the pending areas cover T draws.
inline std::vector<std::size_t> schedule_budgets(const Shape& shape, std::size_t ratio, std::size_t max_iters,
                                                 const std::function<std::size_t(std::size_t)>& areas_at) {
  std::vector<std::size_t> budgets{1};
  std::size_t used = 1, n = 1;
  while (used < max_iters) {
    n = std::min(n * ratio, shape.pixels());
    budgets.push_back(n);
    used += areas_at(n);
  }
  return budgets;
}

/// For every (alpha, connectivity) setting: mean ICV and CO over the update
/// areas of the full schedule (averaged per image, then over images) and
/// the superpixel attack's success rate at max_iters.
inline std::vector<AreaAnalysisRow> area_analysis(const ExperimentConfig& base, const std::vector<double>& alphas,
                                                  const std::vector<bool>& connectivity,
                                                  SegmentationCache* cache = nullptr) {
  SegmentationCache local_cache;
  if (cache == nullptr) cache = &local_cache;
  auto entries = load_manifest(base.dataset);
  if (base.limit > 0 && entries.size() > base.limit) entries.resize(base.limit);

  std::vector<AreaAnalysisRow> rows;
  for (double alpha : alphas) {
    for (bool conn : connectivity) {
      ExperimentConfig cfg = base;
      cfg.attack = "superpixel";
      cfg.slic.alpha = alpha;
      cfg.slic.enforce_connectivity = conn;
      if (!base.output_dir.empty()) {
        cfg.output_dir = base.output_dir / ("alpha_" + format_number(alpha) + (conn ? "_connected" : "_free"));
      }
      const Report report = run_experiment(cfg, cache);

      std::vector<double> icvs(entries.size()), cos(entries.size());
      detail::parallel_for(entries.size(), cfg.jobs, [&](std::size_t, std::size_t i) {
        const ImageTensor image = load_image(entries[i].path);
        const LabTensor lab = image_to_lab(image);
        const std::string key = entries[i].path.string();
        const auto seg_at = [&](std::size_t n) {
          SlicParams p = cfg.slic;
          p.max_segments = n;
          return cache->get(key, lab, p);
        };
        AreaMetrics metrics;
        const auto budgets = schedule_budgets(image.shape(), cfg.segment_ratio, cfg.max_iters, [&](std::size_t n) {
          return seg_at(n)->segment_count() * image.channels();
        });
        for (std::size_t n : budgets) {
          if (n == 1) {
            metrics.add(lab, SegmentMap::single(image.height(), image.width()), 1);
          } else {
            metrics.add(lab, *seg_at(n), image.channels());
          }
        }
        icvs[i] = metrics.icv();
        cos[i] = metrics.compactness();
      });
      AreaAnalysisRow row{alpha, conn, 0.0, 0.0, report.success_rate_percent(cfg.max_iters)};
      for (std::size_t i = 0; i < entries.size(); ++i) {
        row.icv += icvs[i];
        row.compactness += cos[i];
      }
      if (!entries.empty()) {
        row.icv /= static_cast<double>(entries.size());
        row.compactness /= static_cast<double>(entries.size());
      }
      rows.push_back(row);
    }
  }
  if (!base.output_dir.empty()) {
    fs::create_directories(base.output_dir);
    std::ostringstream out;
    out << "alpha,connectivity,icv,co,success_rate_percent\n";
    for (const auto& r : rows) {
      out << format_number(r.alpha) << ',' << (r.connectivity ? 1 : 0) << ',' << format_number(r.icv) << ','
          << format_number(r.compactness) << ',' << format_number(r.success_rate_percent) << '\n';
    }
    detail::write_file(base.output_dir / "area_analysis.csv", out.str());
  }
  return rows;
}

}  // namespace pxattack

#endif  // PXATTACK_HARNESS_HPP_
