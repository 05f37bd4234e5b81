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

// Benchmark construction: frame covisibility, overlap-constrained group
// selection, NYU40 label mapping and camera-distribution statistics.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "maploc/error.hpp"
#include "maploc/geometry.hpp"
#include "maploc/parallel.hpp"

namespace maploc {

struct CameraFrame {
  std::string id;
  DepthGrid depth;
  RigidTransform pose;  // camera-to-world
  Intrinsics intrinsics;
};

struct CovisibilityOptions {
  double depth_tolerance = 0.10;  // relative to b's depth
  std::size_t pixel_stride = 1;   // sample every n-th row and column of a
};

/// Fraction of a's valid pixels that reproject inside b's image onto a
/// pixel whose depth agrees with the projected depth within the relative
/// tolerance. Not symmetric.
inline double covisibility(const CameraFrame& a, const CameraFrame& b,
                           const CovisibilityOptions& opts = {}) {
  a.intrinsics.validate();
  b.intrinsics.validate();
  const std::size_t stride = std::max<std::size_t>(1, opts.pixel_stride);
  // a-camera -> b-camera
  const RigidTransform a_to_b = b.pose.inverse() * a.pose;
  std::size_t valid = 0, seen = 0;
  for (std::size_t v = 0; v < a.depth.height; v += stride) {
    for (std::size_t u = 0; u < a.depth.width; u += stride) {
      const double d = a.depth(v, u);
      if (!(d > 0.0) || !std::isfinite(d)) continue;
      ++valid;
      const Vec3 xa((static_cast<double>(u) - a.intrinsics.cx) / a.intrinsics.fx * d,
                    (static_cast<double>(v) - a.intrinsics.cy) / a.intrinsics.fy * d, d);
      const Vec3 xb = a_to_b.apply(xa);
      if (!(xb.z() > 0.0)) continue;
      const auto px = project(b.intrinsics, xb);
      const double ub = std::round(px.x()), vb = std::round(px.y());
      if (ub < 0.0 || vb < 0.0 || ub >= static_cast<double>(b.depth.width) ||
          vb >= static_cast<double>(b.depth.height))
        continue;
      const double db = b.depth(static_cast<std::size_t>(vb), static_cast<std::size_t>(ub));
      if (!(db > 0.0) || !std::isfinite(db)) continue;
      if (std::abs(xb.z() - db) <= opts.depth_tolerance * db) ++seen;
    }
  }
  if (valid == 0) throw Error(Errc::NoValidPixels, "frame " + a.id + " has no valid depth");
  return static_cast<double>(seen) / static_cast<double>(valid);
}

// ---------------------------------------------------------------------------
// Camera statistics

struct CameraDelta {
  double d_translation = 0.0;  // meters
  double d_rotation = 0.0;     // radians
};

/// |t1 - t2| and the axis-angle magnitude of R1^-1 R2.
inline CameraDelta camera_delta(const RigidTransform& a, const RigidTransform& b) {
  return {(a.translation - b.translation).norm(),
          rotation_log(a.rotation.transpose() * b.rotation).norm()};
}

inline std::vector<CameraDelta> camera_stats(
    const std::vector<std::pair<RigidTransform, RigidTransform>>& pairs) {
  std::vector<CameraDelta> out;
  out.reserve(pairs.size());
  for (const auto& [a, b] : pairs) out.push_back(camera_delta(a, b));
  return out;
}

// ---------------------------------------------------------------------------
// Group selection

struct GroupSpec {
  std::string scene;
  std::vector<std::string> frames;
  std::vector<std::vector<double>> overlap;  // symmetric, 1 on the diagonal
  double min_rotation = 0.0;                 // smallest pairwise d_rotation, radians
};

struct GroupingOptions {
  std::vector<std::size_t> sizes{2, 3, 4};
  std::size_t groups_per_size = 2;
  double min_overlap = 0.3;
  std::uint64_t seed = 0;
  CovisibilityOptions covisibility;
  unsigned threads = 1;
};

/// Pairwise overlap used for grouping: the smaller of the two directed
/// covisibilities, so both frames must see the shared content.
inline std::vector<std::vector<double>> overlap_matrix(const std::vector<CameraFrame>& frames,
                                                       const CovisibilityOptions& opts = {},
                                                       unsigned threads = 1) {
  const std::size_t n = frames.size();
  std::vector<std::vector<double>> directed(n, std::vector<double>(n, 1.0));
  parallel_for(n * n, threads, [&](std::size_t k) {
    const std::size_t i = k / n, j = k % n;
    if (i == j) return;
    try {
      directed[i][j] = covisibility(frames[i], frames[j], opts);
    } catch (const Error& e) {
      if (e.code() != Errc::NoValidPixels) throw;
      directed[i][j] = 0.0;
    }
  });
  std::vector<std::vector<double>> out(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) out[i][j] = std::min(directed[i][j], directed[j][i]);
  return out;
}

/// Seeded, deterministic selection of 2/3/4-view groups. For each size,
/// every frame seeds a greedy group that repeatedly adds the frame with the
/// largest minimum rotation to the current members among frames overlapping
/// some member by at least min_overlap. Groups are ranked by their minimum
/// pairwise rotation; seeded random keys break ties. Frames are processed in
/// id order, so the input order does not matter.
inline std::vector<GroupSpec> build_groups(const std::string& scene,
                                           std::vector<CameraFrame> frames,
                                           const GroupingOptions& opts = {}) {
  if (opts.sizes.empty()) throw Error(Errc::InvalidArgument, "no group sizes requested");
  for (std::size_t k : opts.sizes)
    if (k < 2 || k > 4) throw Error(Errc::InvalidArgument, "group sizes must be 2, 3 or 4");
  const std::size_t max_size = *std::max_element(opts.sizes.begin(), opts.sizes.end());
  if (frames.size() < max_size)
    throw Error(Errc::InsufficientFrames, scene + ": " + std::to_string(frames.size()) +
                                              " frames, need " + std::to_string(max_size));
  std::sort(frames.begin(), frames.end(),
            [](const CameraFrame& a, const CameraFrame& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < frames.size(); ++i)
    if (frames[i].id == frames[i - 1].id)
      throw Error(Errc::InvalidArgument, "duplicate frame id " + frames[i].id);

  const std::size_t n = frames.size();
  const auto overlap = overlap_matrix(frames, opts.covisibility, opts.threads);
  std::vector<std::vector<double>> rot(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      rot[i][j] = rot[j][i] = camera_delta(frames[i].pose, frames[j].pose).d_rotation;

  std::mt19937_64 rng(opts.seed);
  std::vector<std::uint64_t> key(n);
  for (auto& k : key) k = rng();

  std::vector<GroupSpec> out;
  for (std::size_t size : opts.sizes) {
    struct Candidate {
      std::vector<std::size_t> members;  // sorted
      double objective;
    };
    std::vector<Candidate> candidates;
    std::set<std::vector<std::size_t>> seen;
    for (std::size_t start = 0; start < n; ++start) {
      std::vector<std::size_t> members{start};
      while (members.size() < size) {
        std::size_t best = n;
        double best_spread = -1.0;
        for (std::size_t f = 0; f < n; ++f) {
          if (std::find(members.begin(), members.end(), f) != members.end()) continue;
          double spread = std::numeric_limits<double>::infinity();
          bool linked = false;
          for (std::size_t m : members) {
            spread = std::min(spread, rot[f][m]);
            if (overlap[f][m] >= opts.min_overlap) linked = true;
          }
          if (!linked) continue;
          if (spread > best_spread || (spread == best_spread && key[f] < key[best])) {
            best = f;
            best_spread = spread;
          }
        }
        if (best == n) break;
        members.push_back(best);
      }
      if (members.size() < size) continue;
      std::sort(members.begin(), members.end());
      if (!seen.insert(members).second) continue;
      double objective = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b)
          objective = std::min(objective, rot[members[a]][members[b]]);
      candidates.push_back({std::move(members), objective});
    }
    if (candidates.empty())
      throw Error(Errc::NoFeasibleGroup, scene + ": no " + std::to_string(size) +
                                             "-view group satisfies min_overlap " +
                                             std::to_string(opts.min_overlap));
    auto key_seq = [&](const Candidate& c) {
      std::vector<std::uint64_t> ks;
      for (std::size_t m : c.members) ks.push_back(key[m]);
      return ks;
    };
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](const Candidate& a, const Candidate& b) {
                       if (a.objective != b.objective) return a.objective > b.objective;
                       return key_seq(a) < key_seq(b);
                     });
    const std::size_t take = std::min(opts.groups_per_size, candidates.size());
    for (std::size_t c = 0; c < take; ++c) {
      GroupSpec g;
      g.scene = scene;
      g.min_rotation = candidates[c].objective;
      for (std::size_t m : candidates[c].members) g.frames.push_back(frames[m].id);
      g.overlap.assign(size, std::vector<double>(size, 1.0));
      for (std::size_t a = 0; a < size; ++a)
        for (std::size_t b = 0; b < size; ++b)
          if (a != b) g.overlap[a][b] = overlap[candidates[c].members[a]][candidates[c].members[b]];
      out.push_back(std::move(g));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Label mapping

inline constexpr Label kMaxNyu40Label = 40;

struct LabelMapping {
  std::unordered_map<std::uint32_t, Label> table;  // raw id -> NYU40 id
  std::map<Label, std::string> names;              // NYU40 id -> name

  void add(std::uint32_t raw, Label target, const std::string& name = {}) {
    if (target > kMaxNyu40Label)
      throw Error(Errc::InvalidArgument, "NYU40 id " + std::to_string(target) + " out of range");
    const auto [it, inserted] = table.emplace(raw, target);
    if (!inserted && it->second != target)
      throw Error(Errc::InvalidArgument, "raw id " + std::to_string(raw) + " mapped twice");
    if (!name.empty() && target != kVoidLabel) names.emplace(target, name);
  }

  Label lookup(std::uint32_t raw) const {
    const auto it = table.find(raw);
    return it == table.end() ? kVoidLabel : it->second;
  }

  /// Tab-separated rows: raw id, raw name, nyu40 id, nyu40 name. Rows whose
  /// first field is not an integer (headers) and blank lines are skipped.
  static LabelMapping parse_tsv(std::istream& is) {
    LabelMapping m;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<std::string> fields;
      std::stringstream ss(line);
      for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
      auto parse_uint = [](const std::string& s, std::uint32_t& out) {
        const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
        return r.ec == std::errc() && r.ptr == s.data() + s.size();
      };
      std::uint32_t raw = 0, target = 0;
      if (fields.empty() || !parse_uint(fields[0], raw)) continue;
      if (fields.size() < 3 || !parse_uint(fields[2], target))
        throw Error(Errc::InvalidArgument,
                    "label map line " + std::to_string(line_no) + ": expected nyu40 id in column 3");
      if (target > kMaxNyu40Label)
        throw Error(Errc::InvalidArgument, "label map line " + std::to_string(line_no) +
                                               ": NYU40 id " + std::to_string(target) +
                                               " out of range");
      m.add(raw, static_cast<Label>(target), fields.size() > 3 ? fields[3] : std::string{});
    }
    return m;
  }

  static LabelMapping from_tsv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error(Errc::Io, "cannot open label map " + path.string());
    return parse_tsv(is);
  }
};

/// Element-wise lookup; ids without an entry become void.
inline LabelGrid map_labels(const Grid<std::uint16_t>& raw, const LabelMapping& m) {
  LabelGrid out(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.size(); ++i) out.data[i] = m.lookup(raw.data[i]);
  return out;
}

}  // namespace maploc
