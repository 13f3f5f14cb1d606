#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>
#include <variant>

#include "wynn/types.hpp"

namespace wynn {

/// SplitMix64 finalizer; used to derive replicate seeds from a master seed.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of replicate r: splitmix64(master ^ splitmix64(r)).
constexpr std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t replicate) noexcept {
  return splitmix64(master ^ splitmix64(replicate));
}

/// Deterministic 64-bit seeded generator (mt19937_64).
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}
  std::uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return engine_; }

  double normal() { return normal_(engine_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct IIDGaussian {
  double sigma = 0.0;
};
/// Student t rescaled to variance scale^2.
struct IIDScaledT {
  double df = 5.0;
  double scale = 1.0;
};
/// Conditional s.d. sigma * sqrt(1 + decay / i) at step i.
struct Heteroscedastic {
  double sigma = 1.0;
  double decay = 0.0;
};
/// Conditional s.d. alternates between sigma_odd and sigma_even; has no
/// limiting conditional variance.
struct NonAH {
  double sigma_odd = 1.0;
  double sigma_even = 2.0;
};

using ErrorVariant = std::variant<IIDGaussian, IIDScaledT, Heteroscedastic, NonAH>;

/// Martingale-difference error generator. Every variant has conditional mean
/// zero and a conditional variance depending only on the step index.
class ErrorProcess {
 public:
  explicit ErrorProcess(ErrorVariant v = IIDGaussian{0.0}) : variant_(v) { validate(); }

  const ErrorVariant& variant() const { return variant_; }
  long step() const { return step_; }

  /// Limit of the conditional variance, NaN for NonAH.
  double limiting_variance() const {
    return std::visit(
        [](const auto& v) -> double {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, IIDGaussian>) return v.sigma * v.sigma;
          else if constexpr (std::is_same_v<T, IIDScaledT>) return v.scale * v.scale;
          else if constexpr (std::is_same_v<T, Heteroscedastic>) return v.sigma * v.sigma;
          else return std::nan("");
        },
        variant_);
  }

  bool asymptotically_homogeneous() const { return !std::holds_alternative<NonAH>(variant_); }

  std::string kind() const {
    switch (variant_.index()) {
      case 0: return "iid_gaussian";
      case 1: return "iid_scaled_t";
      case 2: return "heteroscedastic";
      default: return "non_ah";
    }
  }

  /// Draws the error of the next step and advances the step counter.
  double next(SeededRng& rng) {
    const long i = ++step_;
    return std::visit(
        [&](const auto& v) -> double {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, IIDScaledT>) {
            std::student_t_distribution<double> t(v.df);
            return v.scale * std::sqrt((v.df - 2.0) / v.df) * t(rng.engine());
          } else {
            const double sd = std::sqrt(variance_at(i));
            return sd == 0.0 ? 0.0 : sd * rng.normal();
          }
        },
        variant_);
  }

  /// Conditional variance the variant uses at step i (1-based).
  double variance_at(long i) const {
    if (i < 1) throw InvalidInput("conditional_variance: step must be >= 1");
    return std::visit(
        [&](const auto& v) -> double {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, IIDGaussian>) return v.sigma * v.sigma;
          else if constexpr (std::is_same_v<T, IIDScaledT>) return v.scale * v.scale;
          else if constexpr (std::is_same_v<T, Heteroscedastic>)
            return v.sigma * v.sigma * (1.0 + v.decay / static_cast<double>(i));
          else return i % 2 == 1 ? v.sigma_odd * v.sigma_odd : v.sigma_even * v.sigma_even;
        },
        variant_);
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, IIDGaussian>) {
            if (!(v.sigma >= 0.0)) throw InvalidInput("iid_gaussian: sigma must be >= 0");
          } else if constexpr (std::is_same_v<T, IIDScaledT>) {
            if (!(v.df > 4.0)) throw InvalidInput("iid_scaled_t: df must exceed 4");
            if (!(v.scale > 0.0)) throw InvalidInput("iid_scaled_t: scale must be > 0");
          } else if constexpr (std::is_same_v<T, Heteroscedastic>) {
            if (!(v.sigma > 0.0)) throw InvalidInput("heteroscedastic: sigma must be > 0");
            if (!(v.decay >= 0.0)) throw InvalidInput("heteroscedastic: decay must be >= 0");
          } else {
            if (!(v.sigma_odd > 0.0) || !(v.sigma_even > 0.0) || v.sigma_odd == v.sigma_even)
              throw InvalidInput("non_ah: need distinct positive sigma_odd and sigma_even");
          }
        },
        variant_);
  }

  ErrorVariant variant_;
  long step_ = 0;
};

inline double next_error(ErrorProcess& proc, SeededRng& rng) { return proc.next(rng); }

inline double conditional_variance(const ErrorProcess& proc, long step) { return proc.variance_at(step); }

}  // namespace wynn
