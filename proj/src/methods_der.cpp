#include "uqsim/methods/der.hpp"

#include <cmath>
#include <numbers>

#include "uqsim/errors.hpp"

namespace uqsim {

namespace {

constexpr double kLinkFloor = 1e-6;

inline double softplus(double x) {
  return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

// Marginal NIG negative log-likelihood plus the evidence regularizer, as a
// tape graph over the four raw head nodes. Omega = 2 beta (1 + nu).
ad::ValueId der_loss_graph(ad::Tape& tape, const std::vector<ad::ValueId>& raw_heads,
                           ad::ValueId y_batch, double lambda) {
  const ad::ValueId gamma = raw_heads[0];
  const ad::ValueId nu = tape.softplus(raw_heads[1]);
  const ad::ValueId alpha = tape.affine(tape.softplus(raw_heads[2]), 1.0, 1.0);
  const ad::ValueId beta = tape.softplus(raw_heads[3]);

  const ad::ValueId omega = tape.affine(tape.mul(beta, tape.affine(nu, 1.0, 1.0)), 2.0, 0.0);
  const ad::ValueId resid = tape.sub(y_batch, gamma);

  const ad::ValueId t_nu = tape.affine(tape.log(nu), -0.5, 0.5 * std::log(std::numbers::pi));
  const ad::ValueId t_omega = tape.neg(tape.mul(alpha, tape.log(omega)));
  const ad::ValueId t_resid = tape.mul(
      tape.affine(alpha, 1.0, 0.5),
      tape.log(tape.add(tape.mul(nu, tape.square(resid)), omega)));
  const ad::ValueId t_gamma = tape.sub(tape.lgamma(alpha), tape.lgamma(tape.affine(alpha, 1.0, 0.5)));

  const ad::ValueId nll = tape.add(tape.add(t_nu, t_omega), tape.add(t_resid, t_gamma));
  const ad::ValueId evidence = tape.mul(tape.abs(resid), tape.add(tape.affine(nu, 2.0, 0.0), alpha));
  return tape.mean(tape.add(nll, tape.affine(evidence, lambda, 0.0)));
}

class DerPredictor : public SecondOrderPredictor {
 public:
  DerPredictor(Mlp model, RandomStream inference)
      : model_(std::move(model)), inference_(inference) {}

  std::string name() const override { return "der"; }

  std::optional<NigParams> nig_at(double x) override {
    const double xs[] = {x};
    const auto heads = model_.forward_fast(xs);
    return nig_link(heads[0][0], heads[1][0], heads[2][0], heads[3][0]);
  }

  std::vector<SecondOrderSample> sample_grid(std::span<const double> xs, int d) override {
    if (d < 1) throw ContractViolation("der: d must be >= 1");
    const auto heads = model_.forward_fast(xs);
    std::vector<SecondOrderSample> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out[i].query_x = xs[i];
      out[i].members.reserve(static_cast<std::size_t>(d));
      const NigParams p = nig_link(heads[0][i], heads[1][i], heads[2][i], heads[3][i]);
      for (int j = 0; j < d; ++j) {
        // sigma^2 ~ InvGamma(alpha, beta), mu | sigma^2 ~ N(gamma, sigma^2/nu)
        const double g = inference_.gamma(p.alpha);
        const double var = clamp_variance(p.beta / g);
        const double mu = p.gamma + std::sqrt(var / p.nu) * inference_.normal();
        out[i].members.push_back({mu, var});
      }
    }
    return out;
  }

 private:
  Mlp model_;
  RandomStream inference_;
};

}  // namespace

void DerConfig::validate() const {
  if (!(learning_rate > 0.0) || epochs <= 0 || batch_size <= 0)
    throw ContractViolation("DerConfig: nonpositive hyperparameter");
  if (lambda < 0.0) throw ContractViolation("DerConfig: lambda must be >= 0");
}

NigParams nig_link(double raw_gamma, double raw_nu, double raw_alpha, double raw_beta) {
  NigParams p;
  p.gamma = raw_gamma;
  p.nu = std::max(softplus(raw_nu), kLinkFloor);
  p.alpha = 1.0 + std::max(softplus(raw_alpha), kLinkFloor);
  p.beta = std::max(softplus(raw_beta), kLinkFloor);
  return p;
}

PredictorPtr fit_der(const Dataset& data, const MlpConfig& base_cfg, const DerConfig& cfg) {
  cfg.validate();
  if (data.xs.empty()) throw ContractViolation("fit_der: empty dataset");

  MlpConfig mcfg = base_cfg;
  mcfg.dropout_rate = 0.0;
  mcfg.heads = {"gamma", "nu", "alpha", "beta"};
  Mlp model(mcfg);

  RandomStream proc(cfg.seed);
  RandomStream init_stream = proc.split("init");
  RandomStream shuffle_stream = proc.split("shuffle");
  model.init_params(init_stream);

  const std::size_t n = data.xs.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
  AdamOptimizer opt(model.params().values().size(), cfg.learning_rate);
  std::vector<double> xb(batch), yb(batch);

  try {
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      const std::vector<std::size_t> perm = shuffle_stream.permutation(n);
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t b = std::min(batch, n - start);
        xb.resize(b);
        yb.resize(b);
        for (std::size_t i = 0; i < b; ++i) {
          xb[i] = data.xs[perm[start + i]];
          yb[i] = data.ys[perm[start + i]];
        }
        ad::Tape tape;
        const auto leaves = model.params().make_leaves(tape);
        const ad::ValueId x_node = tape.constant(ad::Tensor({static_cast<std::int64_t>(b), 1}, xb));
        const ad::ValueId y_node = tape.constant(ad::Tensor({static_cast<std::int64_t>(b), 1}, yb));
        const auto heads = model.forward_tape(tape, leaves, x_node, nullptr);
        const ad::ValueId loss = der_loss_graph(tape, heads, y_node, cfg.lambda);
        tape.backward(loss);
        opt.step(model.params().values(), model.params().gather_grad(tape, leaves));
      }
    }
  } catch (const NumericError& e) {
    throw MethodError("der", std::string("training diverged: ") + e.what());
  }

  return std::make_unique<DerPredictor>(std::move(model), proc.split("inference"));
}

}  // namespace uqsim
