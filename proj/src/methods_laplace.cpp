#include "uqsim/methods/laplace.hpp"

#include <cmath>

#include "uqsim/errors.hpp"

namespace uqsim {

namespace {

class LaplacePredictor : public SecondOrderPredictor {
 public:
  LaplacePredictor(Mlp model, std::vector<double> posterior_sd, int default_samples,
                   RandomStream inference)
      : model_(std::move(model)),
        posterior_sd_(std::move(posterior_sd)),
        default_samples_(default_samples),
        inference_(inference) {}

  std::string name() const override { return "laplace"; }

  std::vector<SecondOrderSample> sample_grid(std::span<const double> xs, int d) override {
    const int draws = d > 0 ? d : default_samples_;
    const std::vector<double>& map = model_.params().values();
    std::vector<SecondOrderSample> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out[i].query_x = xs[i];
      out[i].members.reserve(static_cast<std::size_t>(draws));
    }
    std::vector<double> w(map.size());
    for (int j = 0; j < draws; ++j) {
      for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = map[i] + posterior_sd_[i] * inference_.normal();
      const auto preds = het_predict(model_, xs, w.data());
      for (std::size_t i = 0; i < xs.size(); ++i) out[i].members.push_back(preds[i]);
    }
    return out;
  }

 private:
  Mlp model_;
  std::vector<double> posterior_sd_;
  int default_samples_;
  RandomStream inference_;
};

}  // namespace

void LaplaceConfig::validate() const {
  if (!(map_lr > 0.0) || epochs <= 0 || batch_size <= 0 || posterior_samples <= 0)
    throw ContractViolation("LaplaceConfig: nonpositive hyperparameter");
  if (!(prior_precision > 0.0)) throw ContractViolation("LaplaceConfig: prior_precision must be > 0");
  if (!(noise > 0.0)) throw ContractViolation("LaplaceConfig: noise must be > 0");
}

std::vector<double> laplace_posterior_variance(const std::vector<double>& ggn_diag,
                                               double prior_precision) {
  if (!(prior_precision > 0.0))
    throw ContractViolation("laplace_posterior_variance: prior_precision must be > 0");
  std::vector<double> var(ggn_diag.size());
  for (std::size_t i = 0; i < ggn_diag.size(); ++i) {
    if (ggn_diag[i] < 0.0)
      throw ContractViolation("laplace_posterior_variance: negative curvature entry");
    var[i] = 1.0 / (ggn_diag[i] + prior_precision);
  }
  return var;
}

PredictorPtr fit_laplace(const Dataset& data, const MlpConfig& mcfg, const LaplaceConfig& cfg) {
  cfg.validate();
  if (data.xs.empty()) throw ContractViolation("fit_laplace: empty dataset");

  TrainConfig tcfg;
  tcfg.learning_rate = cfg.map_lr;
  tcfg.epochs = cfg.epochs;
  tcfg.batch_size = cfg.batch_size;
  tcfg.seed = cfg.seed;
  tcfg.l2_precision = cfg.prior_precision;

  TrainedMlp map = [&] {
    try {
      return train_mlp(data, mcfg, tcfg);
    } catch (const TrainingError& e) {
      throw MethodError("laplace", e.what());
    }
  }();

  const std::vector<double> ggn = hessian_diag_ggn(map.model, data, cfg.noise);
  const std::vector<double> var = laplace_posterior_variance(ggn, cfg.prior_precision);
  std::vector<double> sd(var.size());
  for (std::size_t i = 0; i < var.size(); ++i) sd[i] = std::sqrt(var[i]);

  return std::make_unique<LaplacePredictor>(std::move(map.model), std::move(sd),
                                            cfg.posterior_samples, map.inference_stream);
}

}  // namespace uqsim
