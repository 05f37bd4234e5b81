// Copyright 2026 The maploc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// maploc command-line harness.
//
//   maploc eval-maploc --bundle B [--config C] --out report.json
//   maploc eval-depth  --bundle B [--config C] --out report.json
//   maploc eval-pose   --bundle B [--config C] --out report.json
//   maploc align       --bundle B [--config C] --out DIR
//   maploc stats       --bundle B [--config C] --out DIR
//   maploc curate      --scans S   --config C  --out BUNDLE
//
// Exit codes: 0 success, 1 at least one group/scene failed (partial
// results written), 2 usage or fatal error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "maploc/harness.hpp"

namespace {

struct Common {
  std::string bundle;
  std::string scans;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

maploc::EvalConfig resolve_config(const Common& c) {
  maploc::EvalConfig cfg = c.config.empty() ? maploc::EvalConfig{} : maploc::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  return cfg;
}

int finish(const maploc::RunResult& r, const std::string& out) {
  maploc::write_run(r, out);
  std::cout << "wrote " << out << "\n";
  return r.any_failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Map-and-locate evaluation harness"};
  app.set_version_flag("--version", maploc::kToolVersion);
  app.require_subcommand(1);

  Common c;
  auto add_common = [&](CLI::App* sub, bool needs_bundle) {
    if (needs_bundle) sub->add_option("--bundle", c.bundle, "Bundle root directory")->required();
    sub->add_option("--config", c.config, "JSON config file");
    sub->add_option("--out", c.out, "Output path")->required();
    sub->add_option("--seed", c.seed, "Override config seed");
    sub->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
  };
  auto* maploc_cmd = app.add_subcommand("eval-maploc", "Semantic map-and-locate scores");
  auto* depth_cmd = app.add_subcommand("eval-depth", "Monocular depth scores");
  auto* pose_cmd = app.add_subcommand("eval-pose", "Relative pose scores");
  auto* align_cmd = app.add_subcommand("align", "Write world-aligned predicted pointmaps");
  auto* stats_cmd = app.add_subcommand("stats", "Camera difference histograms");
  auto* curate_cmd = app.add_subcommand("curate", "Build a bundle from raw scans");
  for (auto* sub : {maploc_cmd, depth_cmd, pose_cmd, align_cmd, stats_cmd}) add_common(sub, true);
  add_common(curate_cmd, false);
  curate_cmd->add_option("--scans", c.scans, "Scan directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Usage errors are fatal (2); --help and --version exit 0.
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const maploc::EvalConfig cfg = resolve_config(c);
    if (*curate_cmd) {
      const auto r = maploc::run_curate(c.scans, c.out, cfg);
      maploc::write_text(std::filesystem::path(c.out) / "curation_stats.json", r.report.dump(2) + "\n");
      std::cout << "wrote bundle " << c.out << "\n";
      return r.any_failed ? 1 : 0;
    }
    const maploc::Bundle bundle = maploc::load_bundle(c.bundle);
    if (*maploc_cmd) return finish(maploc::eval_maploc(bundle, cfg), c.out);
    if (*depth_cmd) return finish(maploc::eval_depth(bundle, cfg), c.out);
    if (*pose_cmd) return finish(maploc::eval_pose(bundle, cfg), c.out);
    if (*align_cmd) {
      const auto r = maploc::run_align(bundle, cfg, c.out);
      maploc::write_text(std::filesystem::path(c.out) / "alignment.json", r.report.dump(2) + "\n");
      std::cout << "wrote " << c.out << "\n";
      return r.any_failed ? 1 : 0;
    }
    if (*stats_cmd) {
      const auto s = maploc::run_stats(bundle, cfg);
      const std::filesystem::path dir = c.out;
      maploc::write_text(dir / "camera_stats.json", s.summary.dump(2) + "\n");
      maploc::write_text(dir / "camera_pairs.csv", s.pairs_csv);
      maploc::write_text(dir / "camera_histograms.csv", s.histogram_csv);
      std::cout << "wrote " << c.out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "maploc: " << e.what() << "\n";
    if (const auto* me = dynamic_cast<const maploc::Error*>(&e))
      for (const auto& d : me->details()) std::cerr << "  " << d << "\n";
    return 2;
  }
  return 2;
}
