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


// pxattack: run attacks, area analyses, segmentation and metrics from the
// command line.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pxattack/pxattack.hpp"

namespace {

std::vector<double> parse_alphas(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw pxattack::Error(pxattack::ErrorCode::kMalformed, "bad alpha value '" + item + "'");
    }
  }
  return out;
}

void print_report(const pxattack::Report& report) {
  nlohmann::ordered_json j;
  j["images"] = report.rows.size();
  nlohmann::ordered_json rates;
  for (auto t : report.config.checkpoints) rates[std::to_string(t)] = report.success_rate_percent(t);
  j["success_rate_percent"] = rates;
  j["segmentation_seconds"] = report.segmentation_seconds;
  j["model_query_seconds"] = report.model_query_seconds;
  j["total_seconds"] = report.total_seconds;
  std::cout << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box L-infinity attacks with superpixel update areas"};
  app.require_subcommand(1);

  std::string config_path;
  std::size_t jobs = 0;
  std::string out_dir;

  auto* run = app.add_subcommand("run", "Attack every image of a dataset manifest");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--jobs", jobs, "Images attacked in parallel (overrides config)");
  run->add_option("--out", out_dir, "Output directory (overrides config)");

  std::string alphas_text = "-1000,-100,-10,-1,-0.1,0.1,1,10,100,1000";
  std::string connectivity = "both";
  auto* area = app.add_subcommand("area-analysis", "ICV / CO / success rate per SLIC setting");
  area->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  area->add_option("--alphas", alphas_text, "Comma-separated alpha values");
  area->add_option("--connectivity", connectivity, "on, off or both")->check(CLI::IsMember({"on", "off", "both"}));
  area->add_option("--jobs", jobs, "Images attacked in parallel (overrides config)");
  area->add_option("--out", out_dir, "Output directory (overrides config)");

  std::string image_path, seg_path;
  std::size_t segments = 64, iters = 10;
  double alpha = 10.0;
  bool no_connectivity = false;
  auto* segment = app.add_subcommand("segment", "Segment an image and write an i32 rtf label map");
  segment->add_option("--image", image_path, "PNG or rtf image")->required()->check(CLI::ExistingFile);
  segment->add_option("--n", segments, "Maximum number of segments")->check(CLI::PositiveNumber);
  segment->add_option("--alpha", alpha, "Spatial weight (may be negative)");
  segment->add_option("--iters", iters, "k-means iterations")->check(CLI::PositiveNumber);
  segment->add_flag("--no-connectivity", no_connectivity, "Skip connectivity enforcement");
  segment->add_option("--out", seg_path, "Output .rtf")->required();

  auto* metrics = app.add_subcommand("metrics", "ICV and CO of a segmentation");
  metrics->add_option("--image", image_path, "PNG or rtf image")->required()->check(CLI::ExistingFile);
  metrics->add_option("--seg", seg_path, "Segment map (.rtf, i32)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = pxattack::load_config(config_path);
      if (jobs > 0) cfg.jobs = jobs;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      print_report(pxattack::run_experiment(cfg));
    } else if (*area) {
      auto cfg = pxattack::load_config(config_path);
      if (jobs > 0) cfg.jobs = jobs;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      std::vector<bool> flags;
      if (connectivity != "off") flags.push_back(true);
      if (connectivity != "on") flags.push_back(false);
      const auto rows = pxattack::area_analysis(cfg, parse_alphas(alphas_text), flags);
      std::cout << "alpha,connectivity,icv,co,success_rate_percent\n";
      for (const auto& r : rows) {
        std::cout << pxattack::format_number(r.alpha) << ',' << (r.connectivity ? 1 : 0) << ','
                  << pxattack::format_number(r.icv) << ',' << pxattack::format_number(r.compactness) << ','
                  << pxattack::format_number(r.success_rate_percent) << "\n";
      }
    } else if (*segment) {
      const auto img = pxattack::load_image(image_path);
      pxattack::SlicParams params{segments, alpha, !no_connectivity, iters};
      const auto seg = pxattack::slic(img, params);
      pxattack::save_segment_map(seg, seg_path);
      std::cout << "{\"segments\":" << seg.segment_count() << "}\n";
    } else if (*metrics) {
      const auto img = pxattack::load_image(image_path);
      const auto seg = pxattack::load_segment_map(seg_path);
      const auto lab = pxattack::image_to_lab(img);
      nlohmann::ordered_json j;
      j["segments"] = seg.segment_count();
      j["icv"] = pxattack::icv(lab, seg);
      j["co"] = pxattack::compactness(seg);
      std::cout << j.dump() << "\n";
    }
  } catch (const pxattack::Error& e) {
    std::cerr << "pxattack: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pxattack: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
