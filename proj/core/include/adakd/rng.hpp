#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace adakd::rng {

// splitmix64 finalizer; derives independent substream seeds from a base
// seed and a stream tag.
inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 0x632be59bd9b4e019ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stream tags. Every consumer of randomness gets its own substream so
// adding a draw in one place never shifts another.
inline constexpr std::uint64_t kStreamInit = 0x101;
inline constexpr std::uint64_t kStreamSampler = 0x202;
inline constexpr std::uint64_t kStreamBlobTrain = 0x303;
inline constexpr std::uint64_t kStreamBlobTest = 0x404;

/// mt19937_64 with hand-rolled double conversions. std::uniform_real_distribution
/// and std::normal_distribution are implementation-defined, which breaks
/// bit-reproducibility across standard libraries; the conversions here are fully
/// specified.
class Engine {
 public:
  explicit Engine(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller. The second value of each pair is
  /// cached, so call order matters for reproducibility.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Fisher-Yates shuffle. std::shuffle is implementation-defined and is
/// avoided everywhere determinism matters.
template <typename T>
void shuffle(std::vector<T>& v, Engine& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = eng.below(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace adakd::rng
