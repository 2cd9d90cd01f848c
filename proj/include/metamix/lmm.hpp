#pragma once

#include <Eigen/Dense>
#include <vector>

#include "metamix/types.hpp"

// Linear mixed model with a random study intercept:
//
//   y_ji = alpha_j + beta x_ji + eps_ji,  eps_ji ~ N(0, sigma_j^2),
//   alpha_j ~ N(alpha, sigma_alpha^2).
//
// Studies split into an IPD part S1 (full records available) and an AD part
// S2 (only beta_hat_j and its variance). The combined estimator is GLS on
// the stacked data; everything here reduces to closed 2x2 normal equations
// via the rank-one structure of each study covariance block.
//
// Parameter order in estimates and covariances is (alpha, beta).

namespace metamix::lmm {

struct VarianceComponents {
  double sigma_alpha_sq = 0.0;
  // One entry: common residual variance. k entries: per-study.
  std::vector<double> sigma_sq;

  double sigma_for(int j) const {
    return sigma_sq.size() == 1 ? sigma_sq[0]
                                : sigma_sq.at(static_cast<size_t>(j));
  }
};

struct LmmEstimate {
  double alpha_hat = 0.0;
  double beta_hat = 0.0;
  Eigen::Matrix2d covariance;  // (alpha, beta) order
  double variance_beta = 0.0;  // == covariance(1,1)
  Partition partition;
};

// Variance of the combined treatment-effect estimator for a given IPD set.
// s1 holds indices into the design arrays; empty s1 means AD only.
double variance_combined(const std::vector<int>& n,
                         const std::vector<double>& pi,
                         const VarianceComponents& vc,
                         const std::vector<int>& s1);

// All studies IPD (the reference point for relative efficiency).
double variance_ipd_ma(const std::vector<int>& n, const std::vector<double>& pi,
                       const VarianceComponents& vc);

// All studies AD: inverse-variance pooling of the per-study effects.
double variance_ad_ma(const std::vector<int>& n, const std::vector<double>& pi,
                      const VarianceComponents& vc);

// variance_ipd_ma / variance_combined(s1); lies in (0, 1].
double relative_efficiency(const std::vector<int>& n,
                           const std::vector<double>& pi,
                           const VarianceComponents& vc,
                           const std::vector<int>& s1);

// GLS fit of (alpha, beta) from IPD records for partition.s1 and summary
// effects for partition.s2. AD-side effect variances are model-implied,
// sigma_j^2 / (n_j pi_j (1 - pi_j)), so the reported covariance agrees with
// variance_combined exactly. Throws EstimabilityError when s1 is empty.
LmmEstimate combined_estimate_lmm(const StudyCollection& c, const Partition& p,
                                  const VarianceComponents& vc);

// Residual variance implied by a summary record: var_hat * n pi (1 - pi).
double estimate_sigma_j(const AdStudy& s);

struct PooledSigma {
  double sigma_sq = 0.0;       // df-weighted pool of the per-study estimates
  double bartlett_stat = 0.0;  // homogeneity test statistic
  double p_value = 1.0;
  int df = 0;
};

// Pool per-study residual variances with degrees of freedom n_j - 2 and
// report Bartlett's homogeneity test alongside. The pool is never applied
// automatically; callers decide.
PooledSigma pooled_sigma(const std::vector<AdStudy>& studies);

struct SigmaAlphaEstimate {
  double sigma_alpha_sq = 0.0;
  double sigma_sq = 0.0;  // common residual variance, profiled jointly
  bool truncated = false; // negative interior estimate clipped to zero
  double loglik = 0.0;
};

// ML fit of (sigma^2, sigma_alpha^2) from pilot IPD studies under a common
// residual variance, with (alpha, beta) profiled out by GLS. For binary
// outcomes the random-intercept variance comes from the logistic composite
// fit instead.
SigmaAlphaEstimate estimate_sigma_alpha(const std::vector<const IpdStudy*>& pilots,
                                        OutcomeKind outcome);

}  // namespace metamix::lmm
