#pragma once

#include <cmath>
#include <stdexcept>

namespace ldn {

// Warmup-hold-decay schedule over normalised training progress. One scalar
// scale multiplies both the corruption rates and the auxiliary loss weights,
// so corruption strength and supervision strength rise and fall together.
struct WhdSchedule {
  double warmup_frac = 0.05;
  double hold_frac = 0.75;
  double decay_frac = 0.20;
};

inline void validate(const WhdSchedule& s) {
  auto frac_ok = [](double f) { return std::isfinite(f) && f >= 0.0 && f <= 1.0; };
  if (!frac_ok(s.warmup_frac) || !frac_ok(s.hold_frac) || !frac_ok(s.decay_frac))
    throw std::invalid_argument("WhdSchedule: fractions must lie in [0, 1]");
  if (std::abs(s.warmup_frac + s.hold_frac + s.decay_frac - 1.0) > 1e-12)
    throw std::invalid_argument("WhdSchedule: fractions must sum to 1");
}

// Piecewise linear: 0 to 1 across the warmup span, 1 across the hold span,
// 1 to 0 across the remainder. The decay branch interpolates against
// (1 - hold_end) rather than dividing by decay_frac; that form hits the
// boundary values exactly in double arithmetic.
inline double whd_scale(double progress, const WhdSchedule& s) {
  validate(s);
  if (!(progress >= 0.0 && progress <= 1.0))
    throw std::domain_error("whd_scale: progress outside [0, 1]");
  if (progress <= s.warmup_frac)
    return s.warmup_frac > 0.0 ? progress / s.warmup_frac : 1.0;
  const double hold_end = s.warmup_frac + s.hold_frac;
  if (progress <= hold_end) return 1.0;
  return 1.0 - (progress - hold_end) / (1.0 - hold_end);
}

}  // namespace ldn
