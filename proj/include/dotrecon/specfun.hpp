#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "dotrecon/errors.hpp"
#include "dotrecon/vec2.hpp"

namespace dotrecon {

/// Point light source. `s` is its distance from the origin (the layer-stripping
/// parameter); `amplitude` the emitted intensity scale.
struct SourcePoint {
  Vec2 position;           // mm
  double s = 0.0;          // |position|, mm
  double amplitude = 1.0;  // > 0

  /// Builds a source at `pos`, deriving s = |pos|.
  static SourcePoint at(Vec2 pos, double amplitude = 1.0) {
    SourcePoint p{pos, norm(pos), amplitude};
    p.validate();
    return p;
  }

  void validate() const {
    if (!(s > 0.0)) throw ValidationError("SourcePoint: s must be positive");
    if (!(amplitude > 0.0)) throw ValidationError("SourcePoint: amplitude must be positive");
    const double d = std::abs(s - norm(position));
    if (d > 1e-12 * s) throw ValidationError("SourcePoint: s does not equal |position|");
  }
};

namespace detail {

inline constexpr double kEulerGamma = 0.57721566490153286061;

/// Clenshaw evaluation of a Chebyshev series on [-1, 1].
template <std::size_t N>
double cheb_eval(const double (&c)[N], double t) {
  double b0 = 0.0, b1 = 0.0;
  for (std::size_t i = N; i-- > 1;) {
    const double b2 = b1;
    b1 = b0;
    b0 = 2.0 * t * b1 - b2 + c[i];
  }
  return t * b0 - b1 + c[0];
}

// Chebyshev coefficients of K0(y)*exp(y)*sqrt(y), t = (16/y - 5)/3, y in [2, 8].
inline constexpr double kK0Mid[] = {
    1.2117802604833602929,     -0.022356526056998190520,  0.00077341811546938582353,
    -0.000042810066888860994645, 3.0817001738629747437e-6,  -2.6393672220096649741e-7,
    2.5637130364034692063e-8,  -2.7427055499002012639e-9, 3.1694296580974995921e-10,
    -3.9023532869621841416e-11, 5.0680406981885754021e-12, -6.8895747410078706795e-13,
    9.7449784978259176914e-14, -1.4273328418845485054e-14, 2.1564125710214630396e-15,
    -3.3496542551495627722e-16, 5.3352602169529116921e-17,
};

// Chebyshev coefficients of K0(y)*exp(y)*sqrt(y), t = 16/y - 1, y in [8, inf).
inline constexpr double kK0Far[] = {
    1.2439906508684620388,     -0.0091748526910256953107, 0.00014445509317750058210,
    -4.0136141754357097287e-6, 1.5678318108523106726e-7,  -7.7701104385217377103e-9,
    4.6111825761797178825e-10, -3.1585929978605657705e-11, 2.4350180393650411278e-12,
    -2.0743313873983478977e-13, 1.9257872805899170847e-14, -1.9275548058389561036e-15,
    2.0621980291978182783e-16,
};

}  // namespace detail

/// Modified Bessel function of the second kind, order zero (Macdonald function).
///
/// Ascending series below y = 2; Chebyshev expansions of the exponentially
/// scaled function above, with the classical argument splits at y = 8. Relative
/// error below 1e-13 on [1e-6, 700]; underflows smoothly to zero beyond.
inline double bessel_k0(double y) {
  if (!(y > 0.0)) throw DomainError("bessel_k0: argument must be positive, got " + std::to_string(y));
  if (y < 2.0) {
    // K0 = -(ln(y/2) + gamma) I0(y) + sum_{m>=1} (y^2/4)^m / (m!)^2 * H_m
    const double q = 0.25 * y * y;
    double term = 1.0, i0 = 1.0, h = 0.0, sum = 0.0;
    for (int m = 1; m <= 40; ++m) {
      term *= q / (static_cast<double>(m) * m);
      h += 1.0 / m;
      i0 += term;
      sum += term * h;
      if (term < 1e-18 * i0) break;
    }
    return -(std::log(0.5 * y) + detail::kEulerGamma) * i0 + sum;
  }
  const double g = (y <= 8.0) ? detail::cheb_eval(detail::kK0Mid, (16.0 / y - 5.0) / 3.0)
                              : detail::cheb_eval(detail::kK0Far, 16.0 / y - 1.0);
  return g * std::exp(-y) / std::sqrt(y);
}

/// Free-space solution of (Laplacian - k^2) u = -delta(x - x0) in 2-D:
/// u0(x - x0) = K0(k |x - x0|) / (2 pi).
inline double fundamental_solution(Vec2 x, Vec2 x0, double k) {
  if (!(k > 0.0)) throw DomainError("fundamental_solution: k must be positive");
  const double r = dist(x, x0);
  if (r <= 0.0) throw SingularityError("fundamental_solution: evaluation at the source point");
  return bessel_k0(k * r) / (2.0 * M_PI);
}

/// Leading far-field amplitude of the fundamental solution along the source
/// line: w0(s) = exp(-k s) / (2 sqrt(2 pi s)).
inline double w0_asymptotic(double s, double k) {
  if (!(s > 0.0)) throw DomainError("w0_asymptotic: s must be positive, got " + std::to_string(s));
  if (k < 0.0) throw DomainError("w0_asymptotic: k must be nonnegative");
  return std::exp(-k * s) / (2.0 * std::sqrt(2.0 * M_PI * s));
}

}  // namespace dotrecon
