#include "uqsim/mlp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "uqsim/csv.hpp"
#include "uqsim/errors.hpp"

namespace uqsim {

namespace {
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Eigen::Map;
}  // namespace

void MlpConfig::validate() const {
  if (hidden_layers < 1) throw ContractViolation("MlpConfig: hidden_layers must be >= 1");
  if (hidden_width < 1) throw ContractViolation("MlpConfig: hidden_width must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ContractViolation("MlpConfig: dropout_rate must lie in [0,1)");
  if (heads.empty()) throw ContractViolation("MlpConfig: at least one head required");
}

Mlp::Mlp(MlpConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const std::int64_t w = cfg_.hidden_width;
  params_.add("w1", {1, w});
  params_.add("b1", {w});
  for (int l = 2; l <= cfg_.hidden_layers; ++l) {
    params_.add("w" + std::to_string(l), {w, w});
    params_.add("b" + std::to_string(l), {w});
  }
  for (const std::string& head : cfg_.heads) {
    params_.add("head_" + head + "_w", {w, 1});
    params_.add("head_" + head + "_b", {1});
  }
}

void Mlp::init_params(RandomStream& stream) {
  double bound = 1.0;  // fan_in of the current layer's weight entry
  for (std::size_t i = 0; i < params_.entry_count(); ++i) {
    const ad::ParamEntry& e = params_.entry(i);
    if (e.shape.size() == 2) bound = 1.0 / std::sqrt(static_cast<double>(e.shape[0]));
    for (std::int64_t k = 0; k < e.size; ++k)
      params_.values()[static_cast<std::size_t>(e.offset + k)] =
          bound * (2.0 * stream.uniform01() - 1.0);
  }
}

DropoutMasks Mlp::sample_masks(RandomStream& stream, std::int64_t batch_rows) const {
  DropoutMasks masks;
  const double rate = cfg_.dropout_rate;
  if (rate <= 0.0) return masks;
  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  const std::int64_t w = cfg_.hidden_width;
  for (int l = 0; l < cfg_.hidden_layers; ++l) {
    ad::Tensor mask = batch_rows > 0 ? ad::Tensor({batch_rows, w}) : ad::Tensor({w});
    for (std::int64_t i = 0; i < mask.size(); ++i)
      mask[i] = stream.uniform01() < keep ? scale : 0.0;
    masks.layers.push_back(std::move(mask));
  }
  return masks;
}

std::vector<ad::ValueId> Mlp::forward_tape(ad::Tape& tape, const std::vector<ad::ValueId>& leaves,
                                           ad::ValueId x_batch, const DropoutMasks* masks) const {
  if (masks && !masks->layers.empty() &&
      static_cast<int>(masks->layers.size()) != cfg_.hidden_layers)
    throw ContractViolation("forward_tape: mask count mismatch");

  ad::ValueId h = x_batch;
  std::size_t p = 0;
  for (int l = 0; l < cfg_.hidden_layers; ++l) {
    const ad::ValueId wl = leaves[p++];
    const ad::ValueId bl = leaves[p++];
    h = tape.add(tape.matmul(h, wl), bl);
    h = cfg_.activation == Activation::kRelu ? tape.relu(h) : tape.tanh(h);
    if (masks && !masks->layers.empty())
      h = tape.mul(h, tape.constant(masks->layers[static_cast<std::size_t>(l)]));
  }
  std::vector<ad::ValueId> heads;
  heads.reserve(cfg_.heads.size());
  for (std::size_t k = 0; k < cfg_.heads.size(); ++k) {
    const ad::ValueId wh = leaves[p++];
    const ad::ValueId bh = leaves[p++];
    heads.push_back(tape.add(tape.matmul(h, wh), bh));
  }
  return heads;
}

std::vector<std::vector<double>> Mlp::forward_fast(std::span<const double> xs,
                                                   const double* flat_override,
                                                   const DropoutMasks* masks) const {
  const double* flat = flat_override ? flat_override : params_.values().data();
  const std::int64_t b = static_cast<std::int64_t>(xs.size());
  const std::int64_t w = cfg_.hidden_width;

  MatRM h(b, w);
  std::size_t p = 0;
  auto entry = [&](std::size_t i) { return flat + params_.entry(i).offset; };

  {
    Map<const MatRM> w1(entry(p), 1, w);
    Map<const Eigen::RowVectorXd> b1(entry(p + 1), w);
    p += 2;
    Map<const Eigen::VectorXd> x(xs.data(), b);
    h.noalias() = x * w1;
    h.rowwise() += b1;
    if (cfg_.activation == Activation::kRelu) h = h.cwiseMax(0.0);
    else h = h.array().tanh().matrix();
    if (masks && !masks->layers.empty()) {
      const ad::Tensor& m = masks->layers[0];
      if (m.rank() == 1) h.array().rowwise() *= Map<const Eigen::Array<double, 1, Eigen::Dynamic>>(m.data(), w);
      else h.array() *= Map<const Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(m.data(), b, w);
    }
  }
  MatRM h2(b, w);
  for (int l = 2; l <= cfg_.hidden_layers; ++l) {
    Map<const MatRM> wl(entry(p), w, w);
    Map<const Eigen::RowVectorXd> bl(entry(p + 1), w);
    p += 2;
    h2.noalias() = h * wl;
    h2.rowwise() += bl;
    if (cfg_.activation == Activation::kRelu) h2 = h2.cwiseMax(0.0);
    else h2 = h2.array().tanh().matrix();
    if (masks && !masks->layers.empty()) {
      const ad::Tensor& m = masks->layers[static_cast<std::size_t>(l - 1)];
      if (m.rank() == 1) h2.array().rowwise() *= Map<const Eigen::Array<double, 1, Eigen::Dynamic>>(m.data(), w);
      else h2.array() *= Map<const Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(m.data(), b, w);
    }
    h.swap(h2);
  }

  std::vector<std::vector<double>> out;
  out.reserve(cfg_.heads.size());
  for (std::size_t k = 0; k < cfg_.heads.size(); ++k) {
    Map<const Eigen::VectorXd> wh(entry(p), w);
    const double bh = *entry(p + 1);
    p += 2;
    Eigen::VectorXd col = h * wh;
    std::vector<double> v(static_cast<std::size_t>(b));
    for (std::int64_t i = 0; i < b; ++i) v[static_cast<std::size_t>(i)] = col[i] + bh;
    out.push_back(std::move(v));
  }
  return out;
}

double clamp_variance(double v) { return std::clamp(v, kVarianceFloor, kVarianceCeil); }

void write_params_csv(const ad::ParameterVector& params, const std::string& path) {
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < params.entry_count(); ++i) {
    const ad::ParamEntry& e = params.entry(i);
    std::string dims;
    for (std::size_t d = 0; d < e.shape.size(); ++d) {
      if (d) dims += "x";
      dims += std::to_string(e.shape[d]);
    }
    lines.push_back("entry," + e.name + "," + dims + "," + std::to_string(e.offset));
  }
  for (double v : params.values()) lines.push_back(format_double(v));
  write_lines(path, lines);
}

void read_params_csv(ad::ParameterVector& params, const std::string& path) {
  const std::size_t header_rows = params.entry_count();
  std::vector<std::string> lines;
  {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) lines.push_back(line);
    }
  }
  if (lines.size() != header_rows + params.values().size())
    throw IoError(path + ": row count does not match the parameter layout");
  for (std::size_t i = 0; i < header_rows; ++i) {
    const ad::ParamEntry& e = params.entry(i);
    if (lines[i].rfind("entry," + e.name + ",", 0) != 0)
      throw IoError(path + ": layout mismatch at entry " + e.name);
  }
  for (std::size_t i = 0; i < params.values().size(); ++i)
    params.values()[i] = parse_double(lines[header_rows + i]);
}

std::vector<FirstOrderPrediction> het_predict(const Mlp& model, std::span<const double> xs,
                                              const double* flat_override,
                                              const DropoutMasks* masks) {
  const auto heads = model.forward_fast(xs, flat_override, masks);
  if (heads.size() != 2) throw ContractViolation("het_predict: model must have two heads");
  std::vector<FirstOrderPrediction> preds(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    preds[i].mean = heads[0][i];
    preds[i].variance = clamp_variance(std::exp(heads[1][i]));
    if (!std::isfinite(preds[i].mean) || !std::isfinite(preds[i].variance))
      throw NumericError("predict", "non-finite prediction");
  }
  return preds;
}

}  // namespace uqsim
