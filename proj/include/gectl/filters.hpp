#ifndef GECTL_FILTERS_HPP_
#define GECTL_FILTERS_HPP_

#include <cmath>

#include "gectl/errors.hpp"
#include "gectl/math.hpp"

namespace gectl {

/// First-order IIR low-pass, discretized exactly for a fixed sample period
/// (alpha = 1 - exp(-2 pi fc dt)), so sampled step responses match the
/// continuous filter and the DC gain is exactly one.
template <typename T>
class LowPass {
 public:
  LowPass() = default;
  LowPass(double cutoff_hz, double sample_period) { Configure(cutoff_hz, sample_period); }

  void Configure(double cutoff_hz, double sample_period) {
    if (!(sample_period > 0.0)) {
      throw ConfigError("low-pass sample period must be positive");
    }
    if (!(cutoff_hz > 0.0) || cutoff_hz >= 0.5 / sample_period) {
      throw ConfigError("low-pass cutoff must lie in (0, Nyquist)");
    }
    alpha_ = 1.0 - std::exp(-2.0 * kPi * cutoff_hz * sample_period);
    initialized_ = false;
  }

  // First sample seeds the state when `warm_start` is set; otherwise the
  // filter starts from zero.
  const T& Update(const T& sample) {
    if (!initialized_) {
      state_ = warm_start_ ? sample : Zero(sample);
      initialized_ = true;
      if (warm_start_) return state_;
    }
    state_ = state_ + alpha_ * (sample - state_);
    return state_;
  }

  void Reset(const T& value) {
    state_ = value;
    initialized_ = true;
  }
  void SetWarmStart(bool on) { warm_start_ = on; }

  const T& value() const { return state_; }
  double alpha() const { return alpha_; }
  bool initialized() const { return initialized_; }

 private:
  static T Zero(const T& like) {
    if constexpr (std::is_arithmetic_v<T>) {
      (void)like;
      return T{0};
    } else {
      return T::Zero(like.rows(), like.cols());
    }
  }

  double alpha_ = 1.0;
  T state_{};
  bool initialized_ = false;
  bool warm_start_ = true;
};

}  // namespace gectl

#endif  // GECTL_FILTERS_HPP_
