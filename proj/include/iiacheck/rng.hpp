// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef IIACHECK_RNG_HPP
#define IIACHECK_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace iia {

// Streams are identified by a 64-bit key; child streams are derived by
// hashing (key, tag), so a substream is reproducible no matter how much
// the parent has been consumed or on which thread it runs.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_tag(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(seed) { reseed(); }

  RngStream derive(std::uint64_t tag) const {
    std::uint64_t mix = key_ ^ (0x9e3779b97f4a7c15ULL + tag);
    std::uint64_t s = mix;
    splitmix64(s);
    return RngStream(splitmix64(s), 0);
  }

  RngStream derive(std::string_view label) const { return derive(hash_tag(label)); }

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double phi = 6.283185307179586476925286766559 * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  // Index draw proportional to non-negative weights (need not be normalized).
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
    double u = uniform() * total;
    double cum = 0.0;
    for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
      cum += weights[k];
      if (u < cum) return static_cast<int>(k);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  void multinomial(std::span<const double> weights, int n, std::span<int> out) {
    for (auto& c : out) c = 0;
    for (int i = 0; i < n; ++i) out[categorical(weights)]++;
  }

  // Marsaglia-Tsang; requires shape >= 1 (all uses here have integer counts + 1).
  double gamma(double shape) {
    if (shape < 1.0) throw std::invalid_argument("gamma: shape < 1 unsupported");
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  void dirichlet(std::span<const double> alpha, std::span<double> out) {
    double total = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
      out[k] = gamma(alpha[k]);
      total += out[k];
    }
    for (std::size_t k = 0; k < alpha.size(); ++k) out[k] /= total;
  }

 private:
  RngStream(std::uint64_t key, int) : key_(key) { reseed(); }

  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  void reseed() {
    std::uint64_t s = key_;
    for (auto& word : state_) word = splitmix64(s);
    has_spare_ = false;
    spare_ = 0.0;
  }

  std::uint64_t key_;
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace iia

#endif  // IIACHECK_RNG_HPP
