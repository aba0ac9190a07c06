#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace softsample {

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::uint64_t fnv1a64(std::string_view text);
std::string to_hex(std::uint64_t value);

std::uint64_t splitmix64(std::uint64_t x);

// Independent stream seed derived from a base seed, a purpose tag and an
// index. Keeps parallel runs reproducible without sharing generator state.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t index = 0);

// mt19937_64 with hand-rolled distributions so identical seeds produce
// identical draws regardless of the standard library in use.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform01();
  double uniform(double lo, double hi);

  // Uniform integer in [0, n), unbiased. n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller.
  double normal();

  // k distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace softsample
