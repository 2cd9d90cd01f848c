#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "metamix/types.hpp"

// Logistic model with random study effects:
//
//   logit P(y_ji = 1) = alpha_j + beta_j x_ji,
//   (beta_j, alpha_j) ~ N((beta, alpha), Sigma).
//
// Estimation combines per-study MLEs through a Laplace-style composite
// likelihood: an IPD study contributes a Gaussian term for (beta_j_hat,
// alpha_j_hat) with precision (Sigma + I_j^-1)^-1, an AD study one for
// beta_j_hat with variance var_hat + Sigma_bb. The mean profiles out in
// closed form; Sigma is maximized numerically.
//
// Parameter order throughout this module is (beta, alpha).

namespace metamix::glmm {

struct GlmmStudyFit {
  std::string id;
  Eigen::Vector2d theta_hat = Eigen::Vector2d::Zero();  // (beta_hat, alpha_hat)
  Eigen::Matrix2d info = Eigen::Matrix2d::Zero();       // observed information
  bool degenerate = false;  // empty cell, fitted after a 0.5 correction
};

// Random-effect covariance [[bb, ba], [ba, aa]].
struct RandomEffectCov {
  double bb = 0.0, ba = 0.0, aa = 0.0;
  Eigen::Matrix2d mat() const {
    Eigen::Matrix2d m;
    m << bb, ba, ba, aa;
    return m;
  }
};

struct GlmmOptions {
  bool independent = true;  // constrain ba = 0
  double tol = 1e-8;
  int max_iter = 500;
};

struct GlmmCombined {
  double beta_hat = 0.0;
  double alpha_hat = 0.0;  // NaN for AD-only fits
  RandomEffectCov sigma_hat;
  double variance_beta = 0.0;
  double loglik = 0.0;
  bool converged = false;
  bool boundary = false;  // some variance estimated at (numerically) zero
  Partition partition;
};

// Per-study logistic MLE by Newton iteration with step halving. An empty
// cell in the 2x2 outcome table makes the MLE diverge; those studies are
// refitted with 0.5 added to every cell and flagged degenerate.
GlmmStudyFit fit_study_logistic(const IpdStudy& s);

// Precision contribution of an IPD study: (Sigma + info^-1)^-1.
Eigen::Matrix2d laplace_block(const GlmmStudyFit& fit,
                              const Eigen::Matrix2d& sigma);

// Precision contribution of an AD study: effect block only.
Eigen::Matrix2d ad_block(double var_hat, double sigma_bb);

// Closed-form maximizer of the composite likelihood in (beta, alpha) at
// fixed Sigma. Needs at least one IPD fit.
std::pair<double, double> profile_mean(const std::vector<GlmmStudyFit>& fits,
                                       const std::vector<AdStudy>& ads,
                                       const Eigen::Matrix2d& sigma);

// Composite log-likelihood profiled over the mean: Gaussian terms as above,
// per-study MLE constants dropped. With no IPD fits this is the summary-only
// likelihood in beta (only Sigma_bb matters then).
double composite_loglik(const std::vector<GlmmStudyFit>& fits,
                        const std::vector<AdStudy>& ads,
                        const Eigen::Matrix2d& sigma);

// Maximize over Sigma (log-Cholesky parameterization, Nelder-Mead with one
// restart), then report the profiled mean, its variance, and flags.
GlmmCombined maximize_varcomp(const std::vector<GlmmStudyFit>& fits,
                              const std::vector<AdStudy>& ads,
                              const GlmmOptions& opt);

// Fit from a study collection: partition.s1 studies enter through their
// records, partition.s2 through their summaries.
GlmmCombined combined_estimate_glmm(const StudyCollection& c,
                                    const Partition& p,
                                    const GlmmOptions& opt);

// Per-study pieces of the closed-form combined variance when only the
// intercept is random (Sigma = diag(0, sigma_alpha^2)):
//   a = n_t p1 (1-p1), b = n_c p0 (1-p0), h = 1/a + 1/b = var(beta_hat),
//   g = a / (a + b), c = sigma_alpha^2 h + 1/(a b).
struct LogisticSelectionTerms {
  double p1 = 0.0, p0 = 0.0;
  double a = 0.0, b = 0.0, h = 0.0, g = 0.0, c = 0.0;
};

LogisticSelectionTerms logistic_terms(int n_t, int n_c, double p1, double p0,
                                      double sigma_alpha_sq);

// [ sum_{S1} (h_j/c_j)(g_j - g_tilde)^2 + sum_all 1/h_j ]^-1 with g_tilde
// the (h/c)-weighted mean over S1. Equals the matrix pipeline's effect
// variance at Sigma = diag(0, sigma_alpha^2) exactly.
double logistic_variance_combined(const std::vector<LogisticSelectionTerms>& terms,
                                  const std::vector<int>& s1,
                                  double sigma_alpha_sq);

enum class LogisticWeightMode {
  rare_disease,  // g from beta_hat and the arm ratio, h from var_hat
  two_by_two,    // g, h from the event counts
};

struct LogisticWeights {
  std::vector<double> u, v;
  std::vector<std::string> corrected;  // ids that needed a 0.5 cell correction
};

// Selection scores for upgrading AD studies to IPD: u_j in (0,1) plays the
// role the treated proportion has in the linear model, v_j = h_j / c_j.
LogisticWeights selection_weights_logistic(const std::vector<AdStudy>& ads,
                                           double sigma_alpha_sq,
                                           LogisticWeightMode mode);

}  // namespace metamix::glmm
