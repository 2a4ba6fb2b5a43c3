// Copyright 2026 The rtnerf Authors
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

#include "rtnerf/features.hpp"

#include <numbers>

namespace rtnerf {

double apply_activation(DensityActivation a, double raw) {
  if (a == DensityActivation::Relu) return raw > 0.0 ? raw : 0.0;
  // softplus, written to stay finite for large |raw|
  if (raw > 30.0) return raw + std::log1p(std::exp(-raw));
  return std::log1p(std::exp(raw));
}

double density_at(const VmDecomposition& d, const CellIndex& c) {
  require_in_range(d, c);
  return apply_activation(d.activation, density_raw(DenseFactorReader(d), d, c));
}

Eigen::VectorXd appearance_features(const VmDecomposition& d, const CellIndex& c) {
  require_in_range(d, c);
  Eigen::VectorXd out(d.feature_width());
  appearance_features(DenseFactorReader(d), d, c, out);
  return out;
}

Eigen::VectorXd encode_direction(const Eigen::Vector3d& dir, int degree) {
  Eigen::VectorXd enc(AppearanceHead::direction_encoding_width(degree));
  enc.head<3>() = dir;
  double freq = std::numbers::pi;
  for (int l = 0; l < degree; ++l, freq *= 2.0) {
    for (int a = 0; a < 3; ++a) {
      enc[3 + 6 * l + a] = std::sin(freq * dir[a]);
      enc[3 + 6 * l + 3 + a] = std::cos(freq * dir[a]);
    }
  }
  return enc;
}

Eigen::Vector3d evaluate_head(const AppearanceHead& head, const Eigen::VectorXd& features,
                              const Eigen::Vector3d& dir) {
  if (head.output_width() != 3) throw std::invalid_argument("color head must produce 3 channels");
  Eigen::VectorXf x(head.input_width());
  x.head(features.size()) = features.cast<float>();
  x.tail(x.size() - features.size()) = encode_direction(dir, head.direction_degree).cast<float>();
  const std::size_t layers = head.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::VectorXf y = head.weights[l] * x + head.biases[l];
    if (l + 1 < layers) {
      x = y.array().tanh().matrix();
    } else {
      x = (1.0f / (1.0f + (-y.array()).exp())).matrix();
    }
  }
  return x.cast<double>().cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::Vector3d appearance_at(const VmDecomposition& d, const AppearanceHead& head, const CellIndex& c,
                              const Eigen::Vector3d& dir) {
  return evaluate_head(head, appearance_features(d, c), dir);
}

CompositeResult composite(std::span<const ShadedSample> samples, double tau, Transmittance mode) {
  if (!(tau >= 0.0 && tau < 1.0)) throw std::invalid_argument("termination threshold must lie in [0, 1)");
  for (std::size_t k = 1; k < samples.size(); ++k) {
    if (samples[k].t < samples[k - 1].t) throw std::invalid_argument("samples are not sorted by t");
  }
  CompositeState state;
  for (const auto& s : samples) {
    if (!state.fold(s.sigma, s.delta, s.color, tau, mode)) break;
  }
  return {state.color, state.folded, state.transmittance};
}

}  // namespace rtnerf
