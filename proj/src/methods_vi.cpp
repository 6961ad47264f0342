#include "uqsim/methods/vi.hpp"

#include <cmath>

#include "uqsim/errors.hpp"

namespace uqsim {

namespace {

inline double softplus(double x) {
  return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

class ViPredictor : public SecondOrderPredictor {
 public:
  ViPredictor(Mlp model, std::vector<double> mu, std::vector<double> sigma, int test_mc,
              RandomStream inference)
      : model_(std::move(model)),
        mu_(std::move(mu)),
        sigma_(std::move(sigma)),
        test_mc_(test_mc),
        inference_(inference) {}

  std::string name() const override { return "vi"; }

  std::vector<SecondOrderSample> sample_grid(std::span<const double> xs, int d) override {
    const int draws = d > 0 ? d : test_mc_;
    std::vector<SecondOrderSample> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out[i].query_x = xs[i];
      out[i].members.reserve(static_cast<std::size_t>(draws));
    }
    std::vector<double> w(mu_.size());
    for (int j = 0; j < draws; ++j) {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = mu_[i] + sigma_[i] * inference_.normal();
      const auto preds = het_predict(model_, xs, w.data());
      for (std::size_t i = 0; i < xs.size(); ++i) out[i].members.push_back(preds[i]);
    }
    return out;
  }

 private:
  Mlp model_;
  std::vector<double> mu_;
  std::vector<double> sigma_;
  int test_mc_;
  RandomStream inference_;
};

}  // namespace

void ViConfig::validate() const {
  if (!(learning_rate > 0.0) || epochs <= 0 || train_mc <= 0 || test_mc <= 0 || batch_size <= 0)
    throw ContractViolation("ViConfig: nonpositive hyperparameter");
  if (burn_in_epochs < 0 || beta < 0.0)
    throw ContractViolation("ViConfig: invalid beta or burn-in");
  if (!(prior_pi > 0.0 && prior_pi <= 1.0) || !(prior_sigma1 > 0.0) || !(prior_sigma2 > 0.0))
    throw ContractViolation("ViConfig: invalid prior mixture");
}

double kl_diag_gaussian(std::span<const double> mu_q, std::span<const double> sigma_q,
                        double mu_p, double sigma_p) {
  if (mu_q.size() != sigma_q.size()) throw ContractViolation("kl_diag_gaussian: size mismatch");
  const double p2 = sigma_p * sigma_p;
  double acc = 0.0;
  for (std::size_t i = 0; i < mu_q.size(); ++i) {
    const double q2 = sigma_q[i] * sigma_q[i];
    const double dm = mu_q[i] - mu_p;
    acc += std::log(sigma_p / sigma_q[i]) + (q2 + dm * dm) / (2.0 * p2) - 0.5;
  }
  return acc;
}

PredictorPtr fit_vi(const Dataset& data, const MlpConfig& mcfg, const ViConfig& cfg) {
  cfg.validate();
  if (data.xs.empty()) throw ContractViolation("fit_vi: empty dataset");

  RandomStream proc(cfg.seed);
  RandomStream init_stream = proc.split("init");
  RandomStream shuffle_stream = proc.split("shuffle");
  RandomStream eps_stream = proc.split("eps");

  Mlp model(mcfg);
  model.init_params(init_stream);
  const std::size_t p = model.params().values().size();

  std::vector<double> mu = model.params().values();
  std::vector<double> rho(p, cfg.init_rho);

  const std::size_t n = data.xs.size();
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
  const int num_batches = static_cast<int>((n + batch - 1) / batch);

  // Adam over the concatenated (mu, rho) vector.
  std::vector<double> theta(2 * p);
  std::copy(mu.begin(), mu.end(), theta.begin());
  std::copy(rho.begin(), rho.end(), theta.begin() + static_cast<std::ptrdiff_t>(p));
  AdamOptimizer opt(2 * p, cfg.learning_rate);

  std::vector<double> xb(batch), yb(batch), w(p), grad(2 * p), sigma(p);
  std::vector<std::vector<double>> eps_draws(static_cast<std::size_t>(cfg.train_mc),
                                             std::vector<double>(p));
  ad::ParameterVector scratch = model.params();

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

        std::fill(grad.begin(), grad.end(), 0.0);
        const double* mu_now = theta.data();
        const double* rho_now = theta.data() + p;
        for (std::size_t i = 0; i < p; ++i) sigma[i] = softplus(rho_now[i]);

        const double mc_scale = 1.0 / static_cast<double>(cfg.train_mc);
        for (int s = 0; s < cfg.train_mc; ++s) {
          std::vector<double>& eps = eps_draws[static_cast<std::size_t>(s)];
          for (std::size_t i = 0; i < p; ++i) {
            eps[i] = eps_stream.normal();
            w[i] = mu_now[i] + sigma[i] * eps[i];
          }
          scratch.assign(w);

          ad::Tape tape;
          const auto leaves = scratch.make_leaves(tape);
          const ad::ValueId x_node =
              tape.constant(ad::Tensor({static_cast<std::int64_t>(b), 1}, xb));
          const ad::ValueId y_node =
              tape.constant(ad::Tensor({static_cast<std::int64_t>(b), 1}, yb));
          const auto heads = model.forward_tape(tape, leaves, x_node, nullptr);
          tape.backward(gaussian_nll_graph(tape, heads[0], heads[1], y_node));
          const std::vector<double> gw = scratch.gather_grad(tape, leaves);
          for (std::size_t i = 0; i < p; ++i) {
            grad[i] += mc_scale * gw[i];
            grad[p + i] += mc_scale * gw[i] * eps[i] * sigmoid(rho_now[i]);
          }
        }

        if (epoch > cfg.burn_in_epochs && cfg.beta > 0.0) {
          const double kl_w = cfg.beta / (static_cast<double>(num_batches) *
                                          static_cast<double>(b));
          if (cfg.prior_pi >= 1.0) {
            // Single Gaussian prior: analytic KL gradient.
            const double p2 = cfg.prior_sigma1 * cfg.prior_sigma1;
            for (std::size_t i = 0; i < p; ++i) {
              grad[i] += kl_w * mu_now[i] / p2;
              const double dkl_dsigma = sigma[i] / p2 - 1.0 / sigma[i];
              grad[p + i] += kl_w * dkl_dsigma * sigmoid(rho_now[i]);
            }
          } else {
            // Scale-mixture prior: pathwise Monte-Carlo KL gradient using the
            // same weight draws as the likelihood term. With w = mu + sigma*eps
            // the q-score parts cancel in mu and the gradients reduce to
            //   d/dmu   = score(w),  d/dsigma = score(w)*eps - 1/sigma,
            // where score is -d log p_mix / dw.
            const double s1sq = cfg.prior_sigma1 * cfg.prior_sigma1;
            const double s2sq = cfg.prior_sigma2 * cfg.prior_sigma2;
            const double log_c1 = std::log(cfg.prior_pi) - std::log(cfg.prior_sigma1);
            const double log_c2 = std::log1p(-cfg.prior_pi) - std::log(cfg.prior_sigma2);
            for (int s = 0; s < cfg.train_mc; ++s) {
              const std::vector<double>& eps_s = eps_draws[static_cast<std::size_t>(s)];
              for (std::size_t i = 0; i < p; ++i) {
                const double wi = mu_now[i] + sigma[i] * eps_s[i];
                const double l1 = log_c1 - 0.5 * wi * wi / s1sq;
                const double l2 = log_c2 - 0.5 * wi * wi / s2sq;
                const double r2 = l2 > l1 ? 1.0 / (1.0 + std::exp(l1 - l2))
                                          : std::exp(l2 - l1) / (1.0 + std::exp(l2 - l1));
                const double score = (1.0 - r2) * wi / s1sq + r2 * wi / s2sq;
                grad[i] += kl_w * mc_scale * score;
                grad[p + i] += kl_w * mc_scale * (score * eps_s[i] - 1.0 / sigma[i]) *
                               sigmoid(rho_now[i]);
              }
            }
          }
        }

        opt.step(theta, grad);
      }
    }
  } catch (const NumericError& e) {
    throw MethodError("vi", std::string("ELBO divergence: ") + e.what());
  }

  std::copy(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(p), mu.begin());
  for (std::size_t i = 0; i < p; ++i) sigma[i] = softplus(theta[p + i]);
  model.params().assign(mu);
  return std::make_unique<ViPredictor>(std::move(model), std::move(mu), std::move(sigma),
                                       cfg.test_mc, proc.split("inference"));
}

}  // namespace uqsim
