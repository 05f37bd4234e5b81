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

// Brute-force reference implementations. They share no code with the
// library beyond the plain data types.

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "maploc/geometry.hpp"

namespace maploc::oracle {

struct Nearest {
  std::size_t index;
  double distance;
};

/// O(n) scan; the first (smallest-index) point wins ties.
inline Nearest brute_nearest(const std::vector<Vec3>& pts, const Vec3& q) {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double dx = pts[i].x() - q.x(), dy = pts[i].y() - q.y(), dz = pts[i].z() - q.z();
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return {best, std::sqrt(best_d2)};
}

struct TransferScores {
  double miou;
  double acc;
};

/// Label transfer by brute-force nearest neighbor, then a dense confusion
/// matrix over the labels present in either cloud. Void (0) points are
/// removed from both clouds first.
inline TransferScores label_transfer(const std::vector<Vec3>& pred_pts,
                                     const std::vector<Label>& pred_labels,
                                     const std::vector<Vec3>& gt_pts,
                                     const std::vector<Label>& gt_labels) {
  std::vector<Vec3> pp;
  std::vector<Label> pl;
  for (std::size_t i = 0; i < pred_pts.size(); ++i)
    if (pred_labels[i] != 0) {
      pp.push_back(pred_pts[i]);
      pl.push_back(pred_labels[i]);
    }
  std::vector<Label> truth, guess;
  for (std::size_t i = 0; i < gt_pts.size(); ++i) {
    if (gt_labels[i] == 0) continue;
    truth.push_back(gt_labels[i]);
    guess.push_back(pl[brute_nearest(pp, gt_pts[i]).index]);
  }
  std::set<Label> all(truth.begin(), truth.end());
  all.insert(guess.begin(), guess.end());
  std::map<Label, std::size_t> slot;
  for (Label l : all) slot.emplace(l, slot.size());
  const std::size_t n = slot.size();
  std::vector<std::vector<std::size_t>> cm(n, std::vector<std::size_t>(n, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) ++cm[slot[truth[i]]][slot[guess[i]]];

  std::size_t diag = 0;
  for (std::size_t c = 0; c < n; ++c) diag += cm[c][c];
  const std::set<Label> present(truth.begin(), truth.end());
  double sum = 0.0;
  for (Label l : present) {
    const std::size_t c = slot[l];
    std::size_t row = 0, col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += cm[c][k];
      col += cm[k][c];
    }
    sum += static_cast<double>(cm[c][c]) / static_cast<double>(row + col - cm[c][c]);
  }
  return {sum / static_cast<double>(present.size()),
          static_cast<double>(diag) / static_cast<double>(truth.size())};
}

}  // namespace maploc::oracle
