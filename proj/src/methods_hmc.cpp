#include "uqsim/methods/hmc.hpp"

#include <cmath>

#include "uqsim/errors.hpp"

namespace uqsim {

void HmcConfig::validate() const {
  if (!(pretrain_lr > 0.0) || pretrain_epochs <= 0 || batch_size <= 0)
    throw ContractViolation("HmcConfig: bad pretraining parameters");
  if (n_samples <= 0 || !(step > 0.0) || leapfrog_steps <= 0)
    throw ContractViolation("HmcConfig: bad sampling parameters");
  if (burn < 0 || burn >= n_samples || inference_burn < 0 ||
      inference_burn >= inference_samples)
    throw ContractViolation("HmcConfig: burn must be shorter than the chain");
  if (!(tau >= 0.0)) throw ContractViolation("HmcConfig: tau must be >= 0");
}

PotentialValue leapfrog(const PotentialFn& potential, std::vector<double>& q,
                        std::vector<double>& p, double step, int n_steps) {
  PotentialValue u = potential(q);
  for (int s = 0; s < n_steps; ++s) {
    for (std::size_t i = 0; i < q.size(); ++i) p[i] -= 0.5 * step * u.grad[i];
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += step * p[i];
    u = potential(q);
    for (std::size_t i = 0; i < q.size(); ++i) p[i] -= 0.5 * step * u.grad[i];
  }
  return u;
}

HmcChain hmc_sample(const PotentialFn& potential, std::vector<double> init, int n_samples,
                    double step, int leapfrog_steps, RandomStream& stream) {
  HmcChain chain;
  chain.samples.reserve(static_cast<std::size_t>(n_samples));
  std::vector<double> q = std::move(init);
  double u_current = potential(q).value;

  std::vector<double> p(q.size());
  for (int it = 0; it < n_samples; ++it) {
    for (double& pi : p) pi = stream.normal();
    double kinetic0 = 0.0;
    for (double pi : p) kinetic0 += 0.5 * pi * pi;

    std::vector<double> q_prop = q;
    std::vector<double> p_prop = p;
    bool proposal_finite = true;
    double u_prop = 0.0;
    try {
      u_prop = leapfrog(potential, q_prop, p_prop, step, leapfrog_steps).value;
    } catch (const NumericError&) {
      proposal_finite = false;  // treat a diverged trajectory as a rejection
    }

    ++chain.proposed;
    if (proposal_finite) {
      double kinetic1 = 0.0;
      for (double pi : p_prop) kinetic1 += 0.5 * pi * pi;
      const double dh = (u_prop + kinetic1) - (u_current + kinetic0);
      if (std::isfinite(dh) && stream.uniform01() < std::exp(-dh)) {
        q = std::move(q_prop);
        u_current = u_prop;
        ++chain.accepted;
      }
    }
    chain.samples.push_back(q);
  }
  return chain;
}

namespace {

class HmcPredictor : public SecondOrderPredictor {
 public:
  HmcPredictor(Mlp model, std::vector<std::vector<double>> retained,
               std::vector<std::string> warnings)
      : model_(std::move(model)), retained_(std::move(retained)), warnings_(std::move(warnings)) {}

  std::string name() const override { return "hmc"; }
  std::vector<std::string> warnings() const override { return warnings_; }

  std::vector<SecondOrderSample> sample_grid(std::span<const double> xs, int /*d*/) override {
    std::vector<SecondOrderSample> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out[i].query_x = xs[i];
      out[i].members.reserve(retained_.size());
    }
    for (const std::vector<double>& w : retained_) {
      const auto preds = het_predict(model_, xs, w.data());
      for (std::size_t i = 0; i < xs.size(); ++i) out[i].members.push_back(preds[i]);
    }
    return out;
  }

 private:
  Mlp model_;
  std::vector<std::vector<double>> retained_;
  std::vector<std::string> warnings_;
};

}  // namespace

PredictorPtr fit_hmc(const Dataset& data, const MlpConfig& mcfg, const HmcConfig& cfg) {
  cfg.validate();
  if (data.xs.empty()) throw ContractViolation("fit_hmc: empty dataset");

  TrainConfig tcfg;
  tcfg.learning_rate = cfg.pretrain_lr;
  tcfg.epochs = cfg.pretrain_epochs;
  tcfg.batch_size = cfg.batch_size;
  tcfg.seed = cfg.seed;

  TrainedMlp pretrained = [&] {
    try {
      return train_mlp(data, mcfg, tcfg);
    } catch (const TrainingError& e) {
      throw MethodError("hmc", std::string("pretraining failed: ") + e.what());
    }
  }();

  const std::int64_t n = static_cast<std::int64_t>(data.xs.size());
  const Mlp& model = pretrained.model;
  ad::ParameterVector scratch = model.params();

  // Unnormalized negative log-posterior: summed Gaussian NLL plus the
  // isotropic Gaussian prior with precision tau.
  PotentialFn potential = [&model, &data, &scratch, n, tau = cfg.tau](
                              const std::vector<double>& w) {
    scratch.assign(w);
    ad::Tape tape;
    const auto leaves = scratch.make_leaves(tape);
    const ad::ValueId x_node = tape.constant(ad::Tensor({n, 1}, data.xs));
    const ad::ValueId y_node = tape.constant(ad::Tensor({n, 1}, data.ys));
    const auto heads = model.forward_tape(tape, leaves, x_node, nullptr);
    const ad::ValueId nll_sum = tape.affine(
        gaussian_nll_graph(tape, heads[0], heads[1], y_node), static_cast<double>(n), 0.0);
    tape.backward(nll_sum);
    PotentialValue out;
    out.value = tape.value(nll_sum)[0];
    out.grad = scratch.gather_grad(tape, leaves);
    for (std::size_t i = 0; i < w.size(); ++i) {
      out.value += 0.5 * tau * w[i] * w[i];
      out.grad[i] += tau * w[i];
    }
    return out;
  };

  RandomStream chain_stream = RandomStream(cfg.seed).split("hmc-chain");

  const HmcChain adaptation = hmc_sample(potential, model.params().values(), cfg.n_samples,
                                         cfg.step, cfg.leapfrog_steps, chain_stream);
  std::vector<double> state = adaptation.samples.back();
  const HmcChain inference = hmc_sample(potential, std::move(state), cfg.inference_samples,
                                        cfg.step, cfg.leapfrog_steps, chain_stream);

  std::vector<std::vector<double>> retained(
      inference.samples.begin() + cfg.inference_burn, inference.samples.end());

  std::vector<std::string> warnings;
  const int total_proposed = adaptation.proposed + inference.proposed;
  const int total_accepted = adaptation.accepted + inference.accepted;
  if (total_accepted < total_proposed / 100)
    warnings.push_back("hmc: acceptance rate below 1% (" + std::to_string(total_accepted) + "/" +
                       std::to_string(total_proposed) + ")");

  Mlp fitted = pretrained.model;
  return std::make_unique<HmcPredictor>(std::move(fitted), std::move(retained),
                                        std::move(warnings));
}

}  // namespace uqsim
