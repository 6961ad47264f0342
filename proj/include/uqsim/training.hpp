#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "uqsim/dgp.hpp"
#include "uqsim/mlp.hpp"

namespace uqsim {

struct TrainConfig {
  double learning_rate = 0.009;
  int epochs = 500;
  int batch_size = 64;  // falls back to full batch when larger than the dataset
  std::uint64_t seed = 0;
  // Gaussian-prior (L2) precision for MAP training; 0 disables it.
  double l2_precision = 0.0;

  void validate() const;
};

double gaussian_nll(const FirstOrderPrediction& pred, double y);

// mean over the batch of 0.5*(log 2pi + s + (y - mu)^2 * exp(-s)), where
// mu and logvar are (B x 1) head nodes.
ad::ValueId gaussian_nll_graph(ad::Tape& tape, ad::ValueId mu, ad::ValueId logvar,
                               ad::ValueId y_batch);

// Adam with (0.9, 0.999, 1e-8).
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t dim, double lr);
  void step(std::vector<double>& params, const std::vector<double>& grad);

 private:
  double lr_;
  int t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct TrainedMlp {
  Mlp model;
  double epoch1_nll = 0.0;
  double final_nll = 0.0;
  bool loss_decreased = true;  // final full-batch NLL <= epoch-1 value
  RandomStream inference_stream{0};
};

// Maximum-likelihood (or MAP when l2_precision > 0) training of the two-head
// heteroscedastic MLP. Deterministic given (data, configs, seed).
TrainedMlp train_mlp(const Dataset& data, const MlpConfig& mcfg, const TrainConfig& tcfg);

// Single-point prediction. With dropout_active a fresh mask is drawn from the
// model's inference stream on every call (single-owner; see MC Dropout).
FirstOrderPrediction predict(TrainedMlp& trained, double x, bool dropout_active = false);

// Diagonal GGN of the dataset Gaussian NLL at the current parameters.
// Curvature weights are 1/sigma_hat^2(x) for the mean head (or 1/fixed_noise
// when given) and 1/2 for the log-variance head. Empty dataset -> zeros.
std::vector<double> hessian_diag_ggn(const Mlp& model, const Dataset& data,
                                     std::optional<double> fixed_mean_noise = std::nullopt);

// Full-batch mean NLL at the stored (or overridden) parameters.
double full_batch_nll(const Mlp& model, const Dataset& data,
                      const double* flat_override = nullptr);

}  // namespace uqsim
