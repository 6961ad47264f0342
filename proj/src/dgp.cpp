#include "uqsim/dgp.hpp"

#include <cmath>

#include "uqsim/csv.hpp"
#include "uqsim/errors.hpp"

namespace uqsim {

void DgpSpec::validate() const {
  if (!(beta_alpha > 0.0) || !(beta_beta > 0.0))
    throw ContractViolation("DgpSpec: Beta shape parameters must be positive");
  if (mean_fn != "sin-inverse-cubic") throw ContractViolation("DgpSpec: unknown mean_fn " + mean_fn);
  if (noise_fn != "quartic") throw ContractViolation("DgpSpec: unknown noise_fn " + noise_fn);
}

double f_true(double x) {
  const double c = x + 0.16;
  return std::sin(1.0 / (5.0 * c * c * c));
}

double sigma2_true(double x) { return x * x * x * x; }

std::vector<double> sample_beta(RandomStream& stream, double alpha, double beta, int count) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw ContractViolation("sample_beta: shape parameters must be positive");
  if (count < 0) throw ContractViolation("sample_beta: negative count");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(stream.beta(alpha, beta));
  return out;
}

Dataset generate_dataset(const DgpSpec& spec, int n, std::uint64_t seed) {
  spec.validate();
  if (n <= 0) throw ContractViolation("generate_dataset: n must be positive");
  RandomStream root(seed);
  RandomStream x_stream = root.split("covariates");
  RandomStream eps_stream = root.split("noise");

  Dataset data;
  data.n = n;
  data.seed = seed;
  data.xs = sample_beta(x_stream, spec.beta_alpha, spec.beta_beta, n);
  data.ys.reserve(static_cast<std::size_t>(n));
  for (double x : data.xs) {
    const double sd = std::sqrt(sigma2_true(x));
    data.ys.push_back(f_true(x) + sd * eps_stream.normal());
  }
  return data;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(data.xs.size() + 1);
  lines.emplace_back("x,y");
  for (std::size_t i = 0; i < data.xs.size(); ++i)
    lines.push_back(format_double(data.xs[i]) + "," + format_double(data.ys[i]));
  write_lines(path, lines);
}

Dataset read_dataset_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header != std::vector<std::string>{"x", "y"})
    throw IoError(path + ": expected header x,y");
  Dataset data;
  for (const auto& row : table.rows) {
    if (row.size() != 2) throw IoError(path + ": malformed row");
    data.xs.push_back(parse_double(row[0]));
    data.ys.push_back(parse_double(row[1]));
  }
  data.n = static_cast<int>(data.xs.size());
  return data;
}

}  // namespace uqsim
