#include "truelearn/gaussmath.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "truelearn/error.hpp"

namespace truelearn {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Below this standardized mean v and w come from the continued fraction.
constexpr double kMillsSwitch = -5.0;

// Smallest probability mass accepted as evidence.
constexpr double kMinEvidence = 1e-300;

// 1/(x + 2/(x + 3/(x + ...))) for x > 0, i.e. 1/R(x) - x where R is the
// Mills ratio. Modified Lentz evaluation.
double mills_tail(double x) {
  constexpr double tiny = 1e-300;
  double f = tiny;
  double c = f;
  double d = 0.0;
  for (int k = 1; k < 1000; ++k) {
    const double a = (k == 1) ? 1.0 : static_cast<double>(k);
    d = x + a * d;
    if (d == 0.0) d = tiny;
    c = x + a / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return f;
}

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw DomainError(std::string(what) + " must be finite");
  }
}

void require_prior(const Gaussian1D& prior) {
  require_finite(prior.mean, "prior mean");
  require_finite(prior.variance, "prior variance");
  if (!(prior.variance > 0.0)) {
    throw DomainError("prior variance must be positive");
  }
}

// Gauss-Legendre nodes/weights on [-1, 1].
struct GaussLegendre {
  static constexpr int kN = 24;
  std::array<double, kN> x{};
  std::array<double, kN> w{};

  GaussLegendre() {
    for (int i = 0; i < kN; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (kN + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0;
        double p1 = z;
        for (int k = 2; k <= kN; ++k) {
          const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = kN * (z * p1 - p0) / (z * z - 1.0);
        const double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      x[i] = z;
      w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    // Exact mirror symmetry, so symmetric intervals give a zero mean.
    for (int i = 0; i < kN / 2; ++i) {
      x[kN - 1 - i] = -x[i];
      w[kN - 1 - i] = w[i];
    }
  }
};

const GaussLegendre& gauss_legendre() {
  static const GaussLegendre rule;
  return rule;
}

struct StdMoments {
  double mean;
  double variance;
};

// Moments of Z ~ N(0,1) restricted to [center - half, center + half] when the
// log-density varies little across the interval. Integrates in the local
// coordinate u = z - center so no large terms cancel.
StdMoments narrow_interval_moments(double center, double half) {
  const auto& gl = gauss_legendre();
  double mass = 0.0;
  double first = 0.0;
  std::array<double, GaussLegendre::kN> dens{};
  std::array<double, GaussLegendre::kN> us{};
  for (int i = 0; i < GaussLegendre::kN; ++i) {
    const double u = half * gl.x[i];
    us[i] = u;
    dens[i] = gl.w[i] * std::exp(-center * u - 0.5 * u * u);
  }
  // Mirrored nodes are accumulated together so their terms cancel exactly
  // when the density is symmetric.
  for (int i = 0; i < GaussLegendre::kN / 2; ++i) {
    const int j = GaussLegendre::kN - 1 - i;
    mass += dens[i] + dens[j];
    first += dens[i] * us[i] + dens[j] * us[j];
  }
  const double mean_u = first / mass;
  double second = 0.0;
  for (int i = 0; i < GaussLegendre::kN; ++i) {
    const double du = us[i] - mean_u;
    second += dens[i] * du * du;
  }
  const double log_mass =
      -0.5 * center * center - kLogSqrt2Pi + std::log(mass * half);
  if (log_mass < std::log(kMinEvidence)) {
    throw DegenerateEvidence("probability mass inside the margin underflows");
  }
  return {center + mean_u, second / mass};
}

StdMoments interval_moments(double lo, double hi) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  if (half * (std::abs(center) + half) <= 2.0) {
    return narrow_interval_moments(center, half);
  }
  const double mass = std_cdf_interval(lo, hi);
  if (!(mass >= kMinEvidence)) {
    throw DegenerateEvidence("probability mass inside the margin underflows");
  }
  const double pdf_lo = std_pdf(lo);
  const double pdf_hi = std_pdf(hi);
  const double lo_term = std::isfinite(lo) ? lo * pdf_lo : 0.0;
  const double hi_term = std::isfinite(hi) ? hi * pdf_hi : 0.0;
  const double mean = (pdf_lo - pdf_hi) / mass;
  const double variance = 1.0 + (lo_term - hi_term) / mass - mean * mean;
  return {mean, variance};
}

}  // namespace

double std_pdf(double t) { return kInvSqrt2Pi * std::exp(-0.5 * t * t); }

double std_cdf(double t) { return 0.5 * std::erfc(-t * kInvSqrt2); }

double std_ccdf(double t) { return 0.5 * std::erfc(t * kInvSqrt2); }

double std_cdf_interval(double lo, double hi) {
  if (lo >= hi) return 0.0;
  if (lo >= 0.0) return std_ccdf(lo) - std_ccdf(hi);
  if (hi <= 0.0) return std_cdf(hi) - std_cdf(lo);
  return 1.0 - std_cdf(lo) - std_ccdf(hi);
}

double std_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("std_quantile requires 0 < p < 1, got " +
                      std::to_string(p));
  }
  // Acklam's rational approximation, then Halley refinement on std_cdf.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  for (int it = 0; it < 3; ++it) {
    // Residual on the tail with the better relative precision.
    const double e = (x < 0.0) ? std_cdf(x) - p : (1.0 - p) - std_ccdf(x);
    const double pdf = std_pdf(x);
    if (pdf == 0.0) break;
    const double u = e / pdf;
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double v_greater(double t) {
  require_finite(t, "t");
  if (t < kMillsSwitch) {
    const double x = -t;
    return x + mills_tail(x);
  }
  return std_pdf(t) / std_cdf(t);
}

double w_greater(double t) {
  require_finite(t, "t");
  if (t < kMillsSwitch) {
    const double x = -t;
    const double tail = mills_tail(x);
    return (x + tail) * tail;
  }
  const double v = std_pdf(t) / std_cdf(t);
  return v * (v + t);
}

Gaussian1D truncate_above(const Gaussian1D& prior, double performance_noise_sq) {
  require_prior(prior);
  require_finite(performance_noise_sq, "performance noise");
  if (performance_noise_sq < 0.0) {
    throw DomainError("performance noise must be nonnegative");
  }
  const double total_var = prior.variance + performance_noise_sq;
  const double scale = std::sqrt(total_var);
  const double t = prior.mean / scale;
  const double v = v_greater(t);
  const double w = w_greater(t);
  const double share = prior.variance / scale;
  return {prior.mean + share * v,
          prior.variance * (1.0 - prior.variance / total_var * w)};
}

Gaussian1D truncate_within(const Gaussian1D& prior, double margin) {
  require_prior(prior);
  if (std::isnan(margin) || !(margin > 0.0)) {
    throw DomainError("margin must be positive");
  }
  if (std::isinf(margin)) return prior;
  const double sd = std::sqrt(prior.variance);
  const double lo = (-margin - prior.mean) / sd;
  const double hi = (margin - prior.mean) / sd;
  const StdMoments m = interval_moments(lo, hi);
  return {prior.mean + sd * m.mean, prior.variance * m.variance};
}

Gaussian1D distribute_correction(const Gaussian1D& member,
                                 const Gaussian1D& total_prior,
                                 const Gaussian1D& total_posterior,
                                 double sign) {
  if (member.variance == 0.0) return member;
  const double gain = member.variance / total_prior.variance;
  const double lost_var = total_prior.variance - total_posterior.variance;
  return {member.mean + sign * gain * (total_posterior.mean - total_prior.mean),
          member.variance - gain * gain * lost_var};
}

}  // namespace truelearn
