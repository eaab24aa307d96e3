#pragma once

// One-dimensional Gaussian kernel: standard normal functions and the
// moment-matched truncations behind every skill update.
//
// All functions are pure and thread-safe.

namespace truelearn {

// Belief over one real quantity, stored as (mean, variance).
// variance > 0 for priors; variance == 0 marks an observed constant.
struct Gaussian1D {
  double mean = 0.0;
  double variance = 1.0;

  friend bool operator==(const Gaussian1D&, const Gaussian1D&) = default;
};

double std_pdf(double t);

// Phi(t). Uses erfc, so the lower tail keeps full relative precision.
double std_cdf(double t);

// 1 - Phi(t) without cancellation.
double std_ccdf(double t);

// Phi(hi) - Phi(lo) for lo <= hi, evaluated on the tail that avoids
// cancellation.
double std_cdf_interval(double lo, double hi);

// Inverse of std_cdf. Throws DomainError unless 0 < p < 1.
double std_quantile(double p);

// Correction functions for conditioning a standardized Gaussian on t' > 0
// when its standardized mean is t:
//   v(t) = pdf(t) / cdf(t)
//   w(t) = v(t) * (v(t) + t)
// Below t = -5 both are evaluated from the continued fraction of the Mills
// ratio, which avoids the 0/0 of the direct ratio.
double v_greater(double t);
double w_greater(double t);

// Posterior of X ~ prior given X + noise > 0, noise ~ N(0, noise_sq),
// projected onto a Gaussian by moment matching.
Gaussian1D truncate_above(const Gaussian1D& prior, double performance_noise_sq);

// Posterior of X ~ prior given |X| <= margin, by moment matching.
// An infinite margin returns the prior unchanged. Throws DegenerateEvidence
// when the prior mass inside the margin is below 1e-300.
Gaussian1D truncate_within(const Gaussian1D& prior, double margin);

// Update of a member of a jointly Gaussian sum. `member` is a summand of a
// variable whose prior is `total_prior` and whose posterior is
// `total_posterior`; the member's share of the correction is proportional
// to its variance.
Gaussian1D distribute_correction(const Gaussian1D& member,
                                 const Gaussian1D& total_prior,
                                 const Gaussian1D& total_posterior,
                                 double sign = 1.0);

}  // namespace truelearn
