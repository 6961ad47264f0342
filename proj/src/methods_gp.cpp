#include "uqsim/methods/gp.hpp"

#include <cmath>
#include <numbers>

#include "uqsim/errors.hpp"
#include "uqsim/mlp.hpp"
#include "uqsim/training.hpp"

namespace uqsim {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

double RbfKernel::operator()(double a, double b) const {
  const double d = (a - b) / lengthscale;
  return signal_variance * std::exp(-0.5 * d * d);
}

void GpConfig::validate() const {
  if (inducing < 2 || !(learning_rate > 0.0) || epochs <= 0 || default_samples <= 0)
    throw ContractViolation("GpConfig: nonpositive hyperparameter");
  if (!(jitter > 0.0) || !(max_jitter >= jitter))
    throw ContractViolation("GpConfig: bad jitter range");
}

CholeskyWithJitter cholesky_with_jitter(const Eigen::MatrixXd& k, double jitter,
                                        double max_jitter) {
  const Eigen::Index m = k.rows();
  if (m == 0) throw ContractViolation("cholesky_with_jitter: empty matrix");
  for (double j = jitter; j <= max_jitter * (1.0 + 1e-12); j *= 10.0) {
    Eigen::MatrixXd shifted = k;
    shifted.diagonal().array() += j;
    const Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) {
      CholeskyWithJitter out;
      out.lower = llt.matrixL();
      out.jitter_used = j;
      return out;
    }
  }
  throw MethodError("gp", "covariance not positive-definite despite jitter escalation");
}

std::vector<double> exact_gp_posterior_mean(std::span<const double> x_train,
                                            std::span<const double> y_train, const RbfKernel& k,
                                            double noise_variance,
                                            std::span<const double> x_query) {
  if (x_train.size() != y_train.size() || x_train.empty())
    throw ContractViolation("exact_gp_posterior_mean: bad training data");
  const Eigen::Index n = static_cast<Eigen::Index>(x_train.size());
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) gram(i, j) = k(x_train[i], x_train[j]);
  gram.diagonal().array() += noise_variance;
  const CholeskyWithJitter chol = cholesky_with_jitter(gram, 1e-10, 1e-8);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = y_train[static_cast<std::size_t>(i)];
  const Eigen::VectorXd alpha =
      chol.lower.transpose().triangularView<Eigen::Upper>().solve(
          chol.lower.triangularView<Eigen::Lower>().solve(y));

  std::vector<double> out(x_query.size());
  for (std::size_t q = 0; q < x_query.size(); ++q) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      acc += k(x_query[q], x_train[static_cast<std::size_t>(i)]) * alpha[i];
    out[q] = acc;
  }
  return out;
}

namespace {

// Feature matrix A = K_xz L^-T and the residual variances
// r_i = k(x_i, x_i) - ||a_i||^2 for one latent process.
struct ProcessFeatures {
  Eigen::MatrixXd a;
  Eigen::VectorXd residual;
};

ProcessFeatures build_features(const LatentProcess& proc, std::span<const double> xs) {
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  const Eigen::Index m = proc.inducing.size();
  Eigen::MatrixXd kxz(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      kxz(i, j) = proc.kernel(xs[static_cast<std::size_t>(i)], proc.inducing[j]);
  ProcessFeatures f;
  // a_i = L^-1 k(Z, x_i) transposed into rows of A.
  f.a = proc.chol_kzz.triangularView<Eigen::Lower>()
            .solve(kxz.transpose())
            .transpose();
  f.residual = Eigen::VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double kxx = proc.kernel.signal_variance;
    f.residual[i] = std::max(kxx - f.a.row(i).squaredNorm(), 1e-12);
  }
  return f;
}

// Unpacks the raw lower-triangular storage into C (diagonal through exp).
Eigen::MatrixXd sqrt_from_raw(const Eigen::MatrixXd& raw) {
  const Eigen::Index m = raw.rows();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) c(i, j) = raw(i, j);
    c(i, i) = std::exp(raw(i, i));
  }
  return c;
}

struct VariationalState {
  Eigen::VectorXd m;
  Eigen::MatrixXd raw;  // lower-triangular storage for C
};

class GpPredictor : public SecondOrderPredictor {
 public:
  GpPredictor(GpPosterior posterior, int default_samples, RandomStream inference)
      : posterior_(std::move(posterior)),
        default_samples_(default_samples),
        inference_(inference) {}

  std::string name() const override { return "gp"; }

  const GpPosterior& posterior() const { return posterior_; }

  std::vector<SecondOrderSample> sample_grid(std::span<const double> xs, int d) override {
    const int draws = d > 0 ? d : default_samples_;
    const ProcessFeatures ff = build_features(posterior_.mean_process, xs);
    const ProcessFeatures fg = build_features(posterior_.noise_process, xs);
    const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
    const Eigen::Index m = posterior_.mean_process.inducing.size();

    std::vector<SecondOrderSample> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out[i].query_x = xs[i];
      out[i].members.reserve(static_cast<std::size_t>(draws));
    }

    Eigen::VectorXd vf(m), vg(m);
    for (int j = 0; j < draws; ++j) {
      for (Eigen::Index i = 0; i < m; ++i) vf[i] = inference_.normal();
      for (Eigen::Index i = 0; i < m; ++i) vg[i] = inference_.normal();
      const Eigen::VectorXd uf = posterior_.mean_process.whitened_mean +
                                 posterior_.mean_process.whitened_sqrt * vf;
      const Eigen::VectorXd ug = posterior_.noise_process.whitened_mean +
                                 posterior_.noise_process.whitened_sqrt * vg;
      const Eigen::VectorXd mean_part = ff.a * uf;
      const Eigen::VectorXd noise_part = fg.a * ug;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double fx = posterior_.mean_process.mean_offset + mean_part[i] +
                          std::sqrt(ff.residual[i]) * inference_.normal();
        const double gx = posterior_.noise_process.mean_offset + noise_part[i] +
                          std::sqrt(fg.residual[i]) * inference_.normal();
        out[static_cast<std::size_t>(i)].members.push_back(
            {fx, clamp_variance(std::exp(gx))});
      }
    }
    return out;
  }

 private:
  GpPosterior posterior_;
  int default_samples_;
  RandomStream inference_;
};

}  // namespace

const GpPosterior& gp_posterior(const SecondOrderPredictor& predictor) {
  const auto* gp = dynamic_cast<const GpPredictor*>(&predictor);
  if (!gp) throw ContractViolation("gp_posterior: predictor is not a GP");
  return gp->posterior();
}

PredictorPtr fit_hetero_gp(const Dataset& data, const GpConfig& cfg) {
  cfg.validate();
  const std::size_t n_data = data.xs.size();
  if (n_data < 2) throw ContractViolation("fit_hetero_gp: need at least two points");

  double y_mean = 0.0;
  for (double y : data.ys) y_mean += y;
  y_mean /= static_cast<double>(n_data);
  double y_var = 0.0;
  for (double y : data.ys) y_var += (y - y_mean) * (y - y_mean);
  y_var /= static_cast<double>(n_data);

  double x_lo = data.xs[0], x_hi = data.xs[0];
  for (double x : data.xs) {
    x_lo = std::min(x_lo, x);
    x_hi = std::max(x_hi, x);
  }

  const Eigen::Index m = std::min<Eigen::Index>(cfg.inducing, static_cast<Eigen::Index>(n_data));
  GpPosterior post;
  post.mean_process.kernel = {0.1, std::max(y_var, 0.1)};
  post.noise_process.kernel = {0.25, 4.0};
  post.mean_process.mean_offset = y_mean;
  post.noise_process.mean_offset = std::log(std::max(0.5 * y_var, 1e-3));

  for (LatentProcess* proc : {&post.mean_process, &post.noise_process}) {
    proc->inducing = Eigen::VectorXd::LinSpaced(m, x_lo, x_hi);
    Eigen::MatrixXd kzz(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        kzz(i, j) = proc->kernel(proc->inducing[i], proc->inducing[j]);
    const CholeskyWithJitter chol = cholesky_with_jitter(kzz, cfg.jitter, cfg.max_jitter);
    proc->chol_kzz = chol.lower;
    post.jitter_used = std::max(post.jitter_used, chol.jitter_used);
  }

  const ProcessFeatures ff = build_features(post.mean_process, data.xs);
  const ProcessFeatures fg = build_features(post.noise_process, data.xs);

  // Flat parameter block: [m_f | raw_f | m_g | raw_g | g_offset].
  const std::size_t mm = static_cast<std::size_t>(m);
  const std::size_t block = mm + mm * mm;
  std::vector<double> theta(2 * block + 1, 0.0);
  theta[2 * block] = post.noise_process.mean_offset;
  AdamOptimizer opt(theta.size(), cfg.learning_rate);
  std::vector<double> grad(theta.size());

  Eigen::Map<Eigen::VectorXd> mf(theta.data(), m);
  Eigen::Map<Eigen::MatrixXd> rawf(theta.data() + mm, m, m);
  Eigen::Map<Eigen::VectorXd> mg(theta.data() + block, m);
  Eigen::Map<Eigen::MatrixXd> rawg(theta.data() + block + mm, m, m);

  const Eigen::Index n = static_cast<Eigen::Index>(n_data);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = data.ys[static_cast<std::size_t>(i)];

  double objective = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Eigen::MatrixXd cf = sqrt_from_raw(rawf);
    const Eigen::MatrixXd cg = sqrt_from_raw(rawg);
    const double g0 = theta[2 * block];

    const Eigen::MatrixXd bf = ff.a * cf;
    const Eigen::MatrixXd bg = fg.a * cg;
    Eigen::VectorXd mu_f = ff.a * mf;
    mu_f.array() += post.mean_process.mean_offset;
    Eigen::VectorXd mu_g = fg.a * mg;
    mu_g.array() += g0;
    const Eigen::VectorXd var_f = ff.residual + bf.rowwise().squaredNorm();
    const Eigen::VectorXd var_g = fg.residual + bg.rowwise().squaredNorm();

    const Eigen::ArrayXd big_e = (-mu_g.array() + 0.5 * var_g.array()).exp();
    const Eigen::ArrayXd resid = y.array() - mu_f.array();
    const Eigen::ArrayXd big_s = resid.square() + var_f.array();

    objective = 0.5 * kLog2Pi * static_cast<double>(n) + 0.5 * mu_g.sum() +
                0.5 * (big_e * big_s).sum();
    // KL terms in the whitened space.
    auto kl_of = [m](const Eigen::VectorXd& mean, const Eigen::MatrixXd& c,
                     const Eigen::MatrixXd& raw) {
      return 0.5 * (mean.squaredNorm() + c.squaredNorm() - static_cast<double>(m)) -
             raw.diagonal().sum();
    };
    objective += kl_of(mf, cf, rawf) + kl_of(mg, cg, rawg);
    if (!std::isfinite(objective)) throw MethodError("gp", "ELBO diverged");

    const Eigen::ArrayXd d_mu_f = -(big_e * resid);
    const Eigen::ArrayXd d_var_f = 0.5 * big_e;
    const Eigen::ArrayXd d_mu_g = 0.5 - 0.5 * big_e * big_s;
    const Eigen::ArrayXd d_var_g = 0.25 * big_e * big_s;

    Eigen::Map<Eigen::VectorXd> g_mf(grad.data(), m);
    Eigen::Map<Eigen::MatrixXd> g_rawf(grad.data() + mm, m, m);
    Eigen::Map<Eigen::VectorXd> g_mg(grad.data() + block, m);
    Eigen::Map<Eigen::MatrixXd> g_rawg(grad.data() + block + mm, m, m);

    g_mf = ff.a.transpose() * d_mu_f.matrix() + mf;
    g_mg = fg.a.transpose() * d_mu_g.matrix() + mg;
    grad[2 * block] = d_mu_g.sum();

    Eigen::MatrixXd gc_f =
        2.0 * (ff.a.transpose() * d_var_f.matrix().asDiagonal() * bf) + cf;
    Eigen::MatrixXd gc_g =
        2.0 * (fg.a.transpose() * d_var_g.matrix().asDiagonal() * bg) + cg;
    // Lower triangle only; chain the exp-diagonal, and the KL -log det term.
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        if (j > i) {
          g_rawf(i, j) = 0.0;
          g_rawg(i, j) = 0.0;
        } else if (j == i) {
          g_rawf(i, i) = gc_f(i, i) * cf(i, i) - 1.0;
          g_rawg(i, i) = gc_g(i, i) * cg(i, i) - 1.0;
        } else {
          g_rawf(i, j) = gc_f(i, j);
          g_rawg(i, j) = gc_g(i, j);
        }
      }
    }

    opt.step(theta, grad);
  }

  post.mean_process.whitened_mean = mf;
  post.mean_process.whitened_sqrt = sqrt_from_raw(rawf);
  post.noise_process.whitened_mean = mg;
  post.noise_process.whitened_sqrt = sqrt_from_raw(rawg);
  post.noise_process.mean_offset = theta[2 * block];
  post.final_objective = objective;

  RandomStream inference = RandomStream(cfg.seed).split("gp-inference");
  return std::make_unique<GpPredictor>(std::move(post), cfg.default_samples, inference);
}

}  // namespace uqsim
