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

// Feature-distillation objective: per-pixel 2D feature regression and the
// weighted total loss. Confidence and matching losses enter as scalars.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "maploc/error.hpp"
#include "maploc/metrics.hpp"

namespace maploc {

enum class FeatureNorm { L2Mean, L1Mean };

struct LossWeights {
  double beta = 0.75;
  std::vector<double> gammas{20.0};

  void validate() const {
    if (!(beta >= 0.0)) throw Error(Errc::InvalidArgument, "beta must be nonnegative");
    for (double g : gammas)
      if (!(g >= 0.0)) throw Error(Errc::InvalidArgument, "gammas must be nonnegative");
  }
};

/// Mean over pixels of the per-pixel feature-difference norm (L2 or L1).
inline double l2d(const FeatureGrid& pred, const FeatureGrid& target,
                  FeatureNorm norm = FeatureNorm::L2Mean) {
  pred.validate();
  target.validate();
  if (pred.height != target.height || pred.width != target.width || pred.dim != target.dim)
    throw Error(Errc::ShapeMismatch, "feature grids differ in shape");
  const std::size_t pixels = pred.height * pred.width;
  if (pixels == 0) throw Error(Errc::ShapeMismatch, "feature grids are empty");
  double total = 0.0;
  for (std::size_t i = 0; i < pixels; ++i) {
    const auto a = pred.pixel(i);
    const auto b = target.pixel(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double d = double(a[k]) - double(b[k]);
      acc += norm == FeatureNorm::L2Mean ? d * d : std::abs(d);
    }
    total += norm == FeatureNorm::L2Mean ? std::sqrt(acc) : acc;
  }
  return total / static_cast<double>(pixels);
}

/// l_conf + beta * l_match + sum_i gamma_i * l_2d[i]
inline double total_loss(double l_conf, double l_match, std::span<const double> l_2d_terms,
                         const LossWeights& w) {
  w.validate();
  if (l_2d_terms.size() != w.gammas.size())
    throw Error(Errc::LengthMismatch, std::to_string(l_2d_terms.size()) + " 2D terms for " +
                                          std::to_string(w.gammas.size()) + " gammas");
  double total = l_conf + w.beta * l_match;
  for (std::size_t i = 0; i < l_2d_terms.size(); ++i) total += w.gammas[i] * l_2d_terms[i];
  return total;
}

}  // namespace maploc
