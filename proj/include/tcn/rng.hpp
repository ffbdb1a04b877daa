#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace tcn {

/// Seeded xoshiro256++ generator. The 256-bit state is expanded from the
/// 64-bit seed with splitmix64. Only integer arithmetic touches the state, so
/// streams are identical on every platform. Gaussian variates use the
/// Box-Muller transform; the second variate of each pair is cached.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "xoshiro256++/splitmix64-seed/box-muller";

  explicit Rng(std::uint64_t seed);
  /// Starts from an explicit xoshiro state (reference-vector tests).
  static Rng from_state(const std::array<std::uint64_t, 4>& state);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Standard normal variate.
  double normal() noexcept;
  /// Unbiased integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Fisher-Yates shuffle driven by this generator.
  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  std::optional<double> spare_normal_;
};

std::vector<double> rng_uniform(Rng& rng, std::size_t n);
/// Throws ArgumentError when `stddev` is negative.
std::vector<double> rng_normal(Rng& rng, std::size_t n, double mean, double stddev);

}  // namespace tcn
