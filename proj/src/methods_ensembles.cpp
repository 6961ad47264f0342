#include "uqsim/methods/ensembles.hpp"

#include <cmath>

#include "uqsim/errors.hpp"

namespace uqsim {

namespace {

class EnsemblePredictor : public SecondOrderPredictor {
 public:
  EnsemblePredictor(std::string name, std::vector<TrainedMlp> members)
      : name_(std::move(name)), members_(std::move(members)) {
    for (std::size_t j = 0; j < members_.size(); ++j)
      if (!members_[j].loss_decreased)
        warnings_.push_back(name_ + ": member " + std::to_string(j) +
                            " finished above its epoch-1 loss");
  }

  std::string name() const override { return name_; }
  std::vector<std::string> warnings() const override { return warnings_; }

  std::vector<SecondOrderSample> sample_grid(std::span<const double> xs, int /*d*/) override {
    std::vector<SecondOrderSample> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out[i].query_x = xs[i];
      out[i].members.reserve(members_.size());
    }
    for (const TrainedMlp& member : members_) {
      const auto preds = het_predict(member.model, xs);
      for (std::size_t i = 0; i < xs.size(); ++i) out[i].members.push_back(preds[i]);
    }
    return out;
  }

 private:
  std::string name_;
  std::vector<TrainedMlp> members_;
  std::vector<std::string> warnings_;
};

TrainedMlp train_member(const std::string& method, int index, const Dataset& data,
                        const MlpConfig& mcfg, TrainConfig tcfg, std::uint64_t seed) {
  tcfg.seed = seed;
  try {
    return train_mlp(data, mcfg, tcfg);
  } catch (const std::exception& e) {
    throw MethodError(method, "member " + std::to_string(index) + " failed: " + e.what());
  }
}

class McDropoutPredictor : public SecondOrderPredictor {
 public:
  explicit McDropoutPredictor(TrainedMlp trained) : trained_(std::move(trained)) {}

  std::string name() const override { return "mc_dropout"; }

  std::vector<std::string> warnings() const override {
    if (trained_.loss_decreased) return {};
    return {"mc_dropout: training finished above its epoch-1 loss"};
  }

  std::vector<SecondOrderSample> sample_grid(std::span<const double> xs, int d) override {
    if (d < 1) throw ContractViolation("mc_dropout: d must be >= 1");
    std::vector<SecondOrderSample> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      out[i].query_x = xs[i];
      out[i].members.reserve(static_cast<std::size_t>(d));
    }
    for (int pass = 0; pass < d; ++pass) {
      const DropoutMasks masks = trained_.model.sample_masks(trained_.inference_stream, 0);
      const auto preds = het_predict(trained_.model, xs, nullptr, &masks);
      for (std::size_t i = 0; i < xs.size(); ++i) out[i].members.push_back(preds[i]);
    }
    return out;
  }

 private:
  TrainedMlp trained_;
};

}  // namespace

PredictorPtr fit_deep_ensemble(const Dataset& data, const MlpConfig& mcfg, const TrainConfig& tcfg,
                               const std::vector<std::uint64_t>& member_seeds) {
  if (member_seeds.size() < 2) throw ContractViolation("fit_deep_ensemble: need d >= 2 members");
  std::vector<TrainedMlp> members;
  members.reserve(member_seeds.size());
  for (std::size_t j = 0; j < member_seeds.size(); ++j)
    members.push_back(
        train_member("deep_ensemble", static_cast<int>(j), data, mcfg, tcfg, member_seeds[j]));
  return std::make_unique<EnsemblePredictor>("deep_ensemble", std::move(members));
}

PredictorPtr fit_bootstrap_ensemble(const Dataset& data, const MlpConfig& mcfg,
                                    const TrainConfig& tcfg,
                                    const std::vector<std::uint64_t>& member_seeds,
                                    double fraction) {
  if (member_seeds.size() < 2)
    throw ContractViolation("fit_bootstrap_ensemble: need d >= 2 members");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ContractViolation("fit_bootstrap_ensemble: fraction must lie in (0,1]");

  const std::size_t n = data.xs.size();
  const std::size_t m = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n)));
  std::vector<TrainedMlp> members;
  members.reserve(member_seeds.size());
  for (std::size_t j = 0; j < member_seeds.size(); ++j) {
    RandomStream resample(
        RandomStream::derive_seed(member_seeds[j], "bootstrap", data.seed));
    Dataset sample;
    sample.n = static_cast<int>(m);
    sample.seed = data.seed;
    sample.xs.reserve(m);
    sample.ys.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t k = static_cast<std::size_t>(resample.below(n));
      sample.xs.push_back(data.xs[k]);
      sample.ys.push_back(data.ys[k]);
    }
    members.push_back(train_member("bootstrap_ensemble", static_cast<int>(j), sample, mcfg, tcfg,
                                   member_seeds[j]));
  }
  return std::make_unique<EnsemblePredictor>("bootstrap_ensemble", std::move(members));
}

PredictorPtr fit_mc_dropout(const Dataset& data, const MlpConfig& mcfg, const TrainConfig& tcfg,
                            double rate) {
  if (!(rate > 0.0 && rate < 1.0))
    throw ContractViolation("fit_mc_dropout: rate must lie in (0,1)");
  MlpConfig cfg = mcfg;
  cfg.dropout_rate = rate;
  try {
    return std::make_unique<McDropoutPredictor>(train_mlp(data, cfg, tcfg));
  } catch (const TrainingError& e) {
    throw MethodError("mc_dropout", e.what());
  }
}

}  // namespace uqsim
