#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uqsim/param_vector.hpp"
#include "uqsim/rng.hpp"
#include "uqsim/tape.hpp"

namespace uqsim {

enum class Activation { kRelu, kTanh };

// Predicted variance is clamped to this interval everywhere.
inline constexpr double kVarianceFloor = 1e-6;
inline constexpr double kVarianceCeil = 1e6;

struct MlpConfig {
  int hidden_layers = 4;
  int hidden_width = 100;
  Activation activation = Activation::kRelu;
  double dropout_rate = 0.0;
  // One linear head per name; link functions are the caller's business.
  std::vector<std::string> heads = {"mean", "logvar"};

  void validate() const;
};

struct FirstOrderPrediction {
  double mean = 0.0;
  double variance = 1.0;  // > 0 and finite
};

// Per-hidden-layer multiplicative masks. Rank-2 masks are per-element
// (training); rank-1 masks are shared across the batch (one sampled
// subnetwork applied to every query point).
struct DropoutMasks {
  std::vector<ad::Tensor> layers;
};

// Scalar-input MLP with independent linear heads. Owns the parameter layout
// and both forward paths (taped for training, plain for inference).
class Mlp {
 public:
  explicit Mlp(MlpConfig cfg);

  const MlpConfig& config() const { return cfg_; }
  ad::ParameterVector& params() { return params_; }
  const ad::ParameterVector& params() const { return params_; }

  // Fan-in-scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
  // weights and biases.
  void init_params(RandomStream& stream);

  DropoutMasks sample_masks(RandomStream& stream, std::int64_t batch_rows) const;

  // Taped forward; returns one (B x 1) node per head.
  std::vector<ad::ValueId> forward_tape(ad::Tape& tape, const std::vector<ad::ValueId>& leaves,
                                        ad::ValueId x_batch, const DropoutMasks* masks) const;

  // Tape-free forward over a batch of inputs; returns one column per head.
  // `flat_override` substitutes the stored parameters when given.
  std::vector<std::vector<double>> forward_fast(std::span<const double> xs,
                                                const double* flat_override = nullptr,
                                                const DropoutMasks* masks = nullptr) const;

 private:
  MlpConfig cfg_;
  ad::ParameterVector params_;
};

double clamp_variance(double v);

// Flat parameter blob with the layout as header rows:
//   entry,<name>,<dims joined by x>,<offset>
//   value rows follow, one per parameter, 17 significant digits.
void write_params_csv(const ad::ParameterVector& params, const std::string& path);
// Restores values into a ParameterVector with an identical layout.
void read_params_csv(ad::ParameterVector& params, const std::string& path);

// (mean, exp(logvar) clamped) predictions for a two-head MLP.
std::vector<FirstOrderPrediction> het_predict(const Mlp& model, std::span<const double> xs,
                                              const double* flat_override = nullptr,
                                              const DropoutMasks* masks = nullptr);

}  // namespace uqsim
