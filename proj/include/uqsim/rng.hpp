#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace uqsim {

// Deterministic 64-bit stream: xoshiro256++ seeded through splitmix64.
// Child streams are derived from the *seed* (not the current state) by
// hashing (parent_seed, purpose_tag, index), so splits are reproducible
// no matter how much of the parent has been consumed.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  // Uniform on [0,1) with 53 random bits.
  double uniform01();
  // Uniform on the open interval (0,1).
  double uniform_open01();

  // Standard normal via Box-Muller (pairs generated, second value cached).
  double normal();

  // Gamma(shape, scale=1) via Marsaglia-Tsang; shape < 1 handled with the
  // u^(1/shape) boost.
  double gamma(double shape);

  // Beta(a, b) from two Gammas; endpoints 0 and 1 are rejected and redrawn.
  double beta(double a, double b);

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Fisher-Yates shuffle of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  RandomStream split(std::string_view tag, std::uint64_t index = 0) const;

  // Seed derivation without constructing the stream.
  static std::uint64_t derive_seed(std::uint64_t parent_seed, std::string_view tag,
                                   std::uint64_t index);

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace uqsim
