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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "maploc/error.hpp"
#include "maploc/geometry.hpp"
#include "maploc/parallel.hpp"

namespace maploc {

struct Neighbor {
  std::size_t index = 0;  // position of the point in the build input
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exact nearest-neighbor search over a fixed 3D point set.
///
/// Balanced kd-tree: each inner node splits its range at the median of the
/// widest bounding-box dimension. Queries return the globally nearest point;
/// equidistant points resolve to the smallest input index. The index is
/// immutable after build and safe to query from many threads.
class PointIndex {
 public:
  static constexpr std::size_t kLeafSize = 8;

  explicit PointIndex(std::span<const Vec3> points) {
    if (points.empty()) throw Error(Errc::EmptyInput, "cannot index an empty point set");
    if (points.size() > std::numeric_limits<std::uint32_t>::max())
      throw Error(Errc::InvalidArgument, "point set too large for index");
    coords_.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec3& p = points[i];
      if (!p.allFinite())
        throw Error(Errc::NonFiniteCoordinate,
                    "point " + std::to_string(i) + " has a non-finite coordinate");
      coords_[i] = {p.x(), p.y(), p.z()};
    }
    order_.resize(points.size());
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    nodes_.reserve(2 * points.size() / kLeafSize + 1);
    build_node(0, static_cast<std::uint32_t>(points.size()));
    // Store leaf points contiguously in tree order.
    std::vector<std::array<double, 3>> sorted(coords_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) sorted[i] = coords_[order_[i]];
    coords_ = std::move(sorted);
  }

  std::size_t size() const { return order_.size(); }

  Neighbor nearest(const Vec3& query) const {
    if (!query.allFinite()) throw Error(Errc::NonFiniteCoordinate, "query is not finite");
    const std::array<double, 3> q{query.x(), query.y(), query.z()};
    Best best;
    search(0, q, best);
    return {best.id, std::sqrt(best.d2)};
  }

  std::vector<Neighbor> nearest_batch(std::span<const Vec3> queries,
                                      unsigned threads = 1) const {
    std::vector<Neighbor> out(queries.size());
    constexpr std::size_t kChunk = 4096;
    const std::size_t chunks = (queries.size() + kChunk - 1) / kChunk;
    parallel_for(chunks, threads, [&](std::size_t c) {
      const std::size_t end = std::min(queries.size(), (c + 1) * kChunk);
      for (std::size_t i = c * kChunk; i < end; ++i) out[i] = nearest(queries[i]);
    });
    return out;
  }

 private:
  struct Node {
    double split = 0.0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t right = 0;  // left child is always this node + 1
    std::int32_t dim = -1;    // -1 marks a leaf
  };

  struct Best {
    double d2 = std::numeric_limits<double>::infinity();
    std::size_t id = std::numeric_limits<std::size_t>::max();
  };

  std::uint32_t build_node(std::uint32_t begin, std::uint32_t end) {
    const auto self = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({0.0, begin, end, 0, -1});
    if (end - begin <= kLeafSize) return self;

    std::array<double, 3> lo{}, hi{};
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (std::uint32_t i = begin; i < end; ++i) {
      const auto& p = coords_[order_[i]];
      for (int d = 0; d < 3; ++d) {
        lo[d] = std::min(lo[d], p[d]);
        hi[d] = std::max(hi[d], p[d]);
      }
    }
    int dim = 0;
    for (int d = 1; d < 3; ++d)
      if (hi[d] - lo[d] > hi[dim] - lo[dim]) dim = d;
    if (hi[dim] == lo[dim]) return self;  // all points coincide

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return coords_[a][dim] < coords_[b][dim];
                     });
    const double split = coords_[order_[mid]][dim];
    build_node(begin, mid);
    const std::uint32_t right = build_node(mid, end);
    nodes_[self].dim = dim;
    nodes_[self].split = split;
    nodes_[self].right = right;
    return self;
  }

  void search(std::uint32_t node_id, const std::array<double, 3>& q, Best& best) const {
    const Node& node = nodes_[node_id];
    if (node.dim < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const auto& p = coords_[i];
        const double dx = q[0] - p[0];
        const double dy = q[1] - p[1];
        const double dz = q[2] - p[2];
        const double d2 = dx * dx + dy * dy + dz * dz;
        const std::size_t id = order_[i];
        if (d2 < best.d2 || (d2 == best.d2 && id < best.id)) {
          best.d2 = d2;
          best.id = id;
        }
      }
      return;
    }
    // Left holds coordinates <= split, right holds coordinates >= split.
    const double diff = q[node.dim] - node.split;
    const std::uint32_t near_child = diff <= 0.0 ? node_id + 1 : node.right;
    const std::uint32_t far_child = diff <= 0.0 ? node.right : node_id + 1;
    search(near_child, q, best);
    if (diff * diff <= best.d2) search(far_child, q, best);
  }

  std::vector<std::array<double, 3>> coords_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace maploc
