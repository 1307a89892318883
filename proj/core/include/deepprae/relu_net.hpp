#pragma once

#include "deepprae/common.hpp"
#include "deepprae/monotone_hull.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace deepprae {

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden;

  void validate() const;
  // One hidden layer: 32 wide up to d = 5, else 64.
  static MlpSpec default_for(int input_dim);
};

struct DenseLayer {
  Mat weight;  // out x in
  Vec bias;
};

// Hidden ReLU layers followed by a linear 1-output layer.
// The input is first mapped through z = input_scale .* x + input_shift.
struct MlpParams {
  Vec input_scale;
  Vec input_shift;
  std::vector<DenseLayer> layers;
  double final_loss = 0.0;

  int input_dim() const { return static_cast<int>(input_scale.size()); }
  int hidden_layer_count() const { return static_cast<int>(layers.size()) - 1; }
  int neuron_count() const;
  void validate() const;
};

MlpParams zero_params(const MlpSpec& spec);

// First layer with the input affine map folded in; shared by the MIP encoder.
std::vector<DenseLayer> folded_layers(const MlpParams& p);

double logit(const MlpParams& p, const Vec& x);

// Pre-activations of every layer (last entry is the scalar output).
std::vector<Vec> preactivations(const MlpParams& p, const Vec& x);

struct Interval {
  Vec lower;
  Vec upper;
};
// Interval propagation of pre-activation bounds over a box (last entry is the output).
std::vector<Interval> interval_bounds(const MlpParams& p, const Box& box);

struct TrainConfig {
  double learning_rate = 3e-3;
  int epochs = 200;
  int batch_size = 64;
  std::uint64_t seed = 0;
  std::optional<double> class_weight_positive;  // default n0 / n1
};

MlpParams train(std::span<const LabeledSample> samples, const MlpSpec& spec, const TrainConfig& cfg);

// Class-weighted logistic loss (weighted mean) and its gradient per layer.
double loss_and_gradient(const MlpParams& p, std::span<const LabeledSample> samples, double pos_weight,
                         std::vector<DenseLayer>* grad);

std::string save_params(const MlpParams& p);
MlpParams load_params(std::string_view bytes);
void save_params_file(const MlpParams& p, const std::string& path);
MlpParams load_params_file(const std::string& path);

}  // namespace deepprae
