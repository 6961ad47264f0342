#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uqsim/rng.hpp"

namespace uqsim {

// Synthetic heteroscedastic regression process: covariates x ~ Beta(1.2, 0.5),
// responses y = f(x) + N(0, sigma^2(x)) with f(x) = sin(1/(5(x+0.16)^3)) and
// sigma^2(x) = x^4.
struct DgpSpec {
  double beta_alpha = 1.2;
  double beta_beta = 0.5;
  std::string mean_fn = "sin-inverse-cubic";
  std::string noise_fn = "quartic";

  void validate() const;
};

struct Dataset {
  std::vector<double> xs;
  std::vector<double> ys;
  int n = 0;
  std::uint64_t seed = 0;
};

double f_true(double x);
double sigma2_true(double x);

// count draws from Beta(alpha, beta), all strictly inside (0,1).
std::vector<double> sample_beta(RandomStream& stream, double alpha, double beta, int count);

// Bit-reproducible for a fixed seed within this implementation.
Dataset generate_dataset(const DgpSpec& spec, int n, std::uint64_t seed);

// CSV with header `x,y`, 17-significant-digit floats, LF line endings.
void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

}  // namespace uqsim
