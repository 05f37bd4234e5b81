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

#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "maploc/alignment.hpp"
#include "support/common.hpp"

namespace maploc::test {

inline std::vector<Vec3> random_cloud(std::mt19937_64& rng, std::size_t n, double extent = 2.0) {
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = test::random_vec(rng, extent);
  return pts;
}

struct Ring {
  ViewGraph graph;
  std::map<std::string, RigidTransform> poses;  // camera-to-world
};

/// Pairwise pointmaps rendered from one random world cloud; every edge sees
/// a different random subset.
inline Ring make_ring(std::mt19937_64& rng, const std::vector<std::string>& ids, double edge_noise = 0.0) {
  Ring ring;
  const auto world = random_cloud(rng, 400, 3.0);
  for (const auto& id : ids) ring.poses[id] = test::random_rigid(rng, 2.0);
  ring.graph.nodes = ids;
  std::normal_distribution<double> noise(0.0, edge_noise);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const std::string& a = ids[k];
    const std::string& b = ids[(k + 1) % ids.size()];
    ViewEdge e{a, b, Pointmap(1, 120, a), Pointmap(1, 120, b)};
    std::uniform_int_distribution<std::size_t> pick(0, world.size() - 1);
    const RigidTransform wa = ring.poses[a].inverse(), wb = ring.poses[b].inverse();
    for (std::size_t i = 0; i < 120; ++i) {
      const Vec3& x = world[pick(rng)];
      e.b_in_a.points[i] = wa.apply(x) + (edge_noise > 0 ? Vec3(noise(rng), noise(rng), noise(rng)) : Vec3::Zero());
      e.b_in_b.points[i] = wb.apply(x);
    }
    ring.graph.edges.push_back(std::move(e));
  }
  return ring;
}

}  // namespace maploc::test
