#include "uqsim/rng.hpp"

#include <cmath>
#include <numbers>

#include "uqsim/errors.hpp"

namespace uqsim {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& si : s_) si = splitmix64(x);
}

std::uint64_t RandomStream::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RandomStream::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RandomStream::uniform_open01() {
  for (;;) {
    double u = uniform01();
    if (u > 0.0) return u;  // uniform01 < 1 by construction
  }
}

double RandomStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

double RandomStream::gamma(double shape) {
  if (!(shape > 0.0)) throw ContractViolation("gamma: shape must be positive");
  if (shape < 1.0) {
    const double u = uniform_open01();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RandomStream::beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw ContractViolation("beta: shape parameters must be positive");
  for (;;) {
    const double ga = gamma(a);
    const double gb = gamma(b);
    if (ga + gb <= 0.0) continue;
    const double r = ga / (ga + gb);
    if (r > 0.0 && r < 1.0) return r;
  }
}

std::uint64_t RandomStream::below(std::uint64_t n) {
  if (n == 0) throw ContractViolation("below: n must be positive");
  // Rejection to avoid modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v < limit) return v % n;
  }
}

std::vector<std::size_t> RandomStream::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(below(i));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

std::uint64_t RandomStream::derive_seed(std::uint64_t parent_seed, std::string_view tag,
                                        std::uint64_t index) {
  std::uint64_t x = parent_seed ^ rotl(fnv1a64(tag), 1) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  return splitmix64(x);
}

RandomStream RandomStream::split(std::string_view tag, std::uint64_t index) const {
  return RandomStream(derive_seed(seed_, tag, index));
}

}  // namespace uqsim
