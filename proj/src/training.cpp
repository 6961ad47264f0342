#include "uqsim/training.hpp"

#include <cmath>
#include <numbers>

#include "uqsim/errors.hpp"
#include "uqsim/ggn.hpp"

namespace uqsim {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ContractViolation("TrainConfig: learning_rate must be > 0");
  if (epochs <= 0) throw ContractViolation("TrainConfig: epochs must be > 0");
  if (batch_size <= 0) throw ContractViolation("TrainConfig: batch_size must be > 0");
  if (l2_precision < 0.0) throw ContractViolation("TrainConfig: l2_precision must be >= 0");
}

double gaussian_nll(const FirstOrderPrediction& pred, double y) {
  if (!(pred.variance > 0.0)) throw ContractViolation("gaussian_nll: variance must be positive");
  const double r = y - pred.mean;
  return 0.5 * (std::log(2.0 * std::numbers::pi * pred.variance) + r * r / pred.variance);
}

ad::ValueId gaussian_nll_graph(ad::Tape& tape, ad::ValueId mu, ad::ValueId logvar,
                               ad::ValueId y_batch) {
  const ad::ValueId r = tape.sub(y_batch, mu);
  const ad::ValueId weighted = tape.mul(tape.square(r), tape.exp(tape.neg(logvar)));
  return tape.mean(tape.affine(tape.add(logvar, weighted), 0.5, 0.5 * kLog2Pi));
}

AdamOptimizer::AdamOptimizer(std::size_t dim, double lr) : lr_(lr), m_(dim, 0.0), v_(dim, 0.0) {}

void AdamOptimizer::step(std::vector<double>& params, const std::vector<double>& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ContractViolation("AdamOptimizer: size mismatch");
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, t_);
  const double c2 = 1.0 - std::pow(beta2, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1 * m_[i] + (1.0 - beta1) * grad[i];
    v_[i] = beta2 * v_[i] + (1.0 - beta2) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
  }
}

double full_batch_nll(const Mlp& model, const Dataset& data, const double* flat_override) {
  const auto heads = model.forward_fast(data.xs, flat_override, nullptr);
  double acc = 0.0;
  for (std::size_t i = 0; i < data.xs.size(); ++i) {
    const double s = heads[1][i];
    const double r = data.ys[i] - heads[0][i];
    acc += 0.5 * (kLog2Pi + s + r * r * std::exp(-s));
  }
  return acc / static_cast<double>(data.xs.size());
}

TrainedMlp train_mlp(const Dataset& data, const MlpConfig& mcfg, const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  if (data.xs.empty()) throw ContractViolation("train_mlp: empty dataset");
  if (mcfg.heads.size() != 2) throw ContractViolation("train_mlp: expected mean/logvar heads");

  RandomStream proc(tcfg.seed);
  RandomStream init_stream = proc.split("init");
  RandomStream shuffle_stream = proc.split("shuffle");
  RandomStream dropout_stream = proc.split("dropout");

  TrainedMlp result{Mlp(mcfg)};
  Mlp& model = result.model;
  model.init_params(init_stream);
  result.inference_stream = proc.split("inference");

  const std::size_t n = data.xs.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(tcfg.batch_size), n);
  const double n_real = static_cast<double>(n);

  AdamOptimizer opt(model.params().values().size(), tcfg.learning_rate);
  std::vector<double> xb(batch);
  std::vector<double> yb(batch);

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    const std::vector<std::size_t> perm = shuffle_stream.permutation(n);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t b = std::min(batch, n - start);
      xb.resize(b);
      yb.resize(b);
      for (std::size_t i = 0; i < b; ++i) {
        xb[i] = data.xs[perm[start + i]];
        yb[i] = data.ys[perm[start + i]];
      }
      try {
        ad::Tape tape;
        const std::vector<ad::ValueId> leaves = model.params().make_leaves(tape);
        const ad::ValueId x_node =
            tape.constant(ad::Tensor({static_cast<std::int64_t>(b), 1}, xb));
        const ad::ValueId y_node =
            tape.constant(ad::Tensor({static_cast<std::int64_t>(b), 1}, yb));
        DropoutMasks masks;
        const DropoutMasks* mask_ptr = nullptr;
        if (mcfg.dropout_rate > 0.0) {
          masks = model.sample_masks(dropout_stream, static_cast<std::int64_t>(b));
          mask_ptr = &masks;
        }
        const auto heads = model.forward_tape(tape, leaves, x_node, mask_ptr);
        const ad::ValueId loss = gaussian_nll_graph(tape, heads[0], heads[1], y_node);
        tape.backward(loss);
        std::vector<double> grad = model.params().gather_grad(tape, leaves);
        if (tcfg.l2_precision > 0.0) {
          const double scale = tcfg.l2_precision / n_real;
          const std::vector<double>& p = model.params().values();
          for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += scale * p[i];
        }
        opt.step(model.params().values(), grad);
      } catch (const NumericError& e) {
        throw TrainingError(epoch, std::string("divergence: ") + e.what());
      }
    }

    double nll = full_batch_nll(model, data);
    if (tcfg.l2_precision > 0.0) {
      double sq = 0.0;
      for (double p : model.params().values()) sq += p * p;
      nll += 0.5 * tcfg.l2_precision * sq / n_real;
    }
    if (!std::isfinite(nll)) throw TrainingError(epoch, "non-finite full-batch loss");
    if (epoch == 1) result.epoch1_nll = nll;
    result.final_nll = nll;
  }
  result.loss_decreased = result.final_nll <= result.epoch1_nll;
  return result;
}

FirstOrderPrediction predict(TrainedMlp& trained, double x, bool dropout_active) {
  const double xs[] = {x};
  if (dropout_active && trained.model.config().dropout_rate > 0.0) {
    const DropoutMasks masks = trained.model.sample_masks(trained.inference_stream, 0);
    return het_predict(trained.model, xs, nullptr, &masks)[0];
  }
  return het_predict(trained.model, xs)[0];
}

std::vector<double> hessian_diag_ggn(const Mlp& model, const Dataset& data,
                                     std::optional<double> fixed_mean_noise) {
  std::vector<double> acc(model.params().values().size(), 0.0);
  if (fixed_mean_noise && !(*fixed_mean_noise > 0.0))
    throw ContractViolation("hessian_diag_ggn: noise must be positive");
  for (std::size_t i = 0; i < data.xs.size(); ++i) {
    ad::Tape tape;
    const std::vector<ad::ValueId> leaves = model.params().make_leaves(tape);
    const ad::ValueId x_node = tape.constant(ad::Tensor({1, 1}, {data.xs[i]}));
    const auto heads = model.forward_tape(tape, leaves, x_node, nullptr);
    const ad::ValueId mu = tape.sum(heads[0]);
    const ad::ValueId s = tape.sum(heads[1]);
    const double var =
        fixed_mean_noise ? *fixed_mean_noise : clamp_variance(std::exp(tape.value(s)[0]));
    const ad::GgnTerm terms[] = {{mu, 1.0 / var}, {s, 0.5}};
    ad::ggn_diag_accumulate(tape, terms, model.params(), leaves, acc);
  }
  return acc;
}

}  // namespace uqsim
