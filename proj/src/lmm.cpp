#include "metamix/lmm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>

#include "metamix/glmm.hpp"
#include "metamix/neldermead.hpp"

namespace metamix::lmm {

namespace {

void check_design(const std::vector<int>& n, const std::vector<double>& pi,
                  const VarianceComponents& vc) {
  if (n.size() != pi.size())
    throw InputError("design arrays n and pi differ in length");
  if (n.empty()) throw InputError("empty design");
  if (vc.sigma_sq.size() != 1 && vc.sigma_sq.size() != n.size())
    throw InputError("sigma_sq must be common or one per study");
  if (vc.sigma_alpha_sq < 0.0)
    throw InputError("sigma_alpha_sq must be nonnegative");
  for (size_t j = 0; j < n.size(); ++j) {
    if (n[j] < 2) throw InputError("study sizes must be at least 2");
    if (!(pi[j] > 0.0 && pi[j] < 1.0))
      throw InputError("treated proportions must lie strictly in (0,1)");
  }
  for (double s : vc.sigma_sq)
    if (!(s > 0.0)) throw InputError("residual variances must be positive");
}

void check_subset(const std::vector<int>& s1, size_t k) {
  std::set<int> seen;
  for (int j : s1) {
    if (j < 0 || static_cast<size_t>(j) >= k)
      throw InputError("subset index out of range");
    if (!seen.insert(j).second) throw InputError("duplicate subset index");
  }
}

// Sufficient statistics per IPD study for the GLS normal equations.
struct StudyStats {
  double n, nt, S, T, Q;  // size, treated size, sum y, treated sum y, sum y^2
};

StudyStats stats_of(const IpdStudy& s) {
  StudyStats st{static_cast<double>(s.n()), 0.0, 0.0, 0.0, 0.0};
  for (int i = 0; i < s.n(); ++i) {
    st.S += s.y[i];
    st.Q += s.y[i] * s.y[i];
    if (s.x[i]) {
      st.nt += 1.0;
      st.T += s.y[i];
    }
  }
  return st;
}

struct NormalEq {
  double maa = 0, mab = 0, mbb = 0, ra = 0, rb = 0;

  void add_ipd(const StudyStats& st, double sigma_sq, double sigma_alpha_sq) {
    double b = sigma_alpha_sq / sigma_sq;
    double a = 1.0 + st.n * b;
    double w = 1.0 / (sigma_sq * a);
    maa += st.n * w;
    mab += st.nt * w;
    mbb += st.nt * (1.0 + (st.n - st.nt) * b) * w;
    ra += st.S * w;
    rb += (st.T - (b / a) * st.nt * st.S) / sigma_sq;
  }

  void add_ad(double beta_hat, double var_beta) {
    mbb += 1.0 / var_beta;
    rb += beta_hat / var_beta;
  }

  void solve(double& alpha, double& beta, Eigen::Matrix2d& cov) const {
    double det = maa * mbb - mab * mab;
    if (!(det > 0.0) || !std::isfinite(det))
      throw EstimabilityError("singular normal equations for (alpha, beta)");
    alpha = (mbb * ra - mab * rb) / det;
    beta = (maa * rb - mab * ra) / det;
    cov << mbb / det, -mab / det, -mab / det, maa / det;
  }
};

}  // namespace

double variance_combined(const std::vector<int>& n,
                         const std::vector<double>& pi,
                         const VarianceComponents& vc,
                         const std::vector<int>& s1) {
  check_design(n, pi, vc);
  check_subset(s1, n.size());
  double den = 0.0;
  for (size_t j = 0; j < n.size(); ++j)
    den += n[j] * pi[j] * (1.0 - pi[j]) / vc.sigma_for(static_cast<int>(j));
  if (!s1.empty()) {
    double sw = 0.0, swp = 0.0;
    for (int j : s1) {
      double s2 = vc.sigma_for(j);
      double a = 1.0 + n[j] * vc.sigma_alpha_sq / s2;
      double w = n[j] / (s2 * a);
      sw += w;
      swp += w * pi[j];
    }
    double pbar = swp / sw;
    for (int j : s1) {
      double s2 = vc.sigma_for(j);
      double a = 1.0 + n[j] * vc.sigma_alpha_sq / s2;
      double w = n[j] / (s2 * a);
      den += w * (pi[j] - pbar) * (pi[j] - pbar);
    }
  }
  if (!(den > 0.0))
    throw EstimabilityError("treatment effect not estimable for this design");
  return 1.0 / den;
}

double variance_ipd_ma(const std::vector<int>& n, const std::vector<double>& pi,
                       const VarianceComponents& vc) {
  std::vector<int> all(n.size());
  for (size_t j = 0; j < n.size(); ++j) all[j] = static_cast<int>(j);
  return variance_combined(n, pi, vc, all);
}

double variance_ad_ma(const std::vector<int>& n, const std::vector<double>& pi,
                      const VarianceComponents& vc) {
  return variance_combined(n, pi, vc, {});
}

double relative_efficiency(const std::vector<int>& n,
                           const std::vector<double>& pi,
                           const VarianceComponents& vc,
                           const std::vector<int>& s1) {
  return variance_ipd_ma(n, pi, vc) / variance_combined(n, pi, vc, s1);
}

LmmEstimate combined_estimate_lmm(const StudyCollection& c, const Partition& p,
                                  const VarianceComponents& vc) {
  if (p.s1.empty())
    throw EstimabilityError(
        "combined fit needs at least one IPD study; alpha is not estimable "
        "from summaries alone");
  if (vc.sigma_sq.size() != 1 &&
      vc.sigma_sq.size() != static_cast<size_t>(c.size()))
    throw InputError("sigma_sq must be common or one per study");
  auto sigma_at = [&](const std::string& id) {
    if (vc.sigma_sq.size() == 1) return vc.sigma_sq[0];
    auto it = std::find(c.order.begin(), c.order.end(), id);
    return vc.sigma_sq[static_cast<size_t>(it - c.order.begin())];
  };

  NormalEq eq;
  for (const auto& id : p.s1) {
    if (!c.has_ipd(id))
      throw InputError("IPD part names study '" + id + "' without records");
    const auto& s = c.ipd.at(id);
    validate(s, OutcomeKind::continuous);
    eq.add_ipd(stats_of(s), sigma_at(id), vc.sigma_alpha_sq);
  }
  for (const auto& id : p.s2) {
    if (!c.has_ad(id))
      throw InputError("AD part names study '" + id + "' without a summary");
    const auto& s = c.ad.at(id);
    // model-implied effect variance: sigma^2 n / (n_t n_c)
    double v = sigma_at(id) * s.n() /
               (static_cast<double>(s.n_t) * static_cast<double>(s.n_c));
    eq.add_ad(s.beta_hat, v);
  }

  LmmEstimate est;
  eq.solve(est.alpha_hat, est.beta_hat, est.covariance);
  est.variance_beta = est.covariance(1, 1);
  est.partition = p;
  return est;
}

double estimate_sigma_j(const AdStudy& s) {
  validate(s);
  double n = s.n();
  return s.var_hat * n * s.pi() * (1.0 - s.pi());
}

PooledSigma pooled_sigma(const std::vector<AdStudy>& studies) {
  std::vector<double> s2, df;
  for (const auto& s : studies) {
    if (s.n() < 3) continue;  // no residual degrees of freedom to contribute
    s2.push_back(estimate_sigma_j(s));
    df.push_back(s.n() - 2.0);
  }
  if (s2.size() < 2)
    throw EstimabilityError("pooling needs at least two studies with n >= 3");
  PooledSigma out;
  double sum_df = 0.0, pooled = 0.0;
  for (size_t j = 0; j < s2.size(); ++j) {
    sum_df += df[j];
    pooled += df[j] * s2[j];
  }
  out.sigma_sq = pooled / sum_df;
  out.df = static_cast<int>(s2.size()) - 1;
  double lsum = 0.0, inv = 0.0;
  for (size_t j = 0; j < s2.size(); ++j) {
    lsum += df[j] * std::log(s2[j]);
    inv += 1.0 / df[j];
  }
  double corr = 1.0 + (inv - 1.0 / sum_df) / (3.0 * out.df);
  out.bartlett_stat = (sum_df * std::log(out.sigma_sq) - lsum) / corr;
  boost::math::chi_squared chi(out.df);
  out.p_value = 1.0 - boost::math::cdf(chi, std::max(0.0, out.bartlett_stat));
  return out;
}

namespace {

// Profile log-likelihood of (sigma^2, sigma_alpha^2) over pilot studies with
// (alpha, beta) replaced by their GLS fit at those components.
double pilot_loglik(const std::vector<StudyStats>& st, double sigma_sq,
                    double sigma_alpha_sq) {
  NormalEq eq;
  for (const auto& s : st) eq.add_ipd(s, sigma_sq, sigma_alpha_sq);
  double alpha, beta;
  Eigen::Matrix2d cov;
  eq.solve(alpha, beta, cov);

  double ll = 0.0;
  double b = sigma_alpha_sq / sigma_sq;
  for (const auto& s : st) {
    double a = 1.0 + s.n * b;
    // residual sums for r = y - alpha - beta x
    double rr = s.Q - 2.0 * alpha * s.S - 2.0 * beta * s.T + s.n * alpha * alpha +
                2.0 * alpha * beta * s.nt + beta * beta * s.nt;
    double rsum = s.S - s.n * alpha - s.nt * beta;
    double qf = (rr - (b / a) * rsum * rsum) / sigma_sq;
    ll += -0.5 * (s.n * std::log(2.0 * M_PI * sigma_sq) + std::log(a) + qf);
  }
  return ll;
}

}  // namespace

SigmaAlphaEstimate estimate_sigma_alpha(
    const std::vector<const IpdStudy*>& pilots, OutcomeKind outcome) {
  if (pilots.size() < 2)
    throw EstimabilityError(
        "between-study variance needs at least two pilot studies");

  if (outcome == OutcomeKind::binary) {
    std::vector<glmm::GlmmStudyFit> fits;
    fits.reserve(pilots.size());
    for (const IpdStudy* s : pilots) {
      validate(*s, OutcomeKind::binary);
      fits.push_back(glmm::fit_study_logistic(*s));
    }
    glmm::GlmmOptions opt;
    opt.independent = true;
    auto fit = glmm::maximize_varcomp(fits, {}, opt);
    SigmaAlphaEstimate out;
    out.sigma_alpha_sq = fit.sigma_hat.aa;
    out.sigma_sq = 0.0;
    out.truncated = fit.boundary;
    out.loglik = fit.loglik;
    return out;
  }

  std::vector<StudyStats> st;
  double pooled = 0.0, pooled_df = 0.0;
  std::vector<double> means;
  double max_n = 0.0;
  for (const IpdStudy* s : pilots) {
    validate(*s, OutcomeKind::continuous);
    auto stats = stats_of(*s);
    st.push_back(stats);
    means.push_back(stats.S / stats.n);
    max_n = std::max(max_n, stats.n);
    // within-arm scatter for a starting value
    double tm = stats.T / stats.nt;
    double cm = (stats.S - stats.T) / (stats.n - stats.nt);
    double rss = stats.Q - stats.nt * tm * tm - (stats.n - stats.nt) * cm * cm;
    if (stats.n > 2) {
      pooled += rss;
      pooled_df += stats.n - 2.0;
    }
  }
  double s2_0 = pooled_df > 0 ? std::max(pooled / pooled_df, 1e-8) : 1.0;
  double mbar = 0.0;
  for (double m : means) mbar += m;
  mbar /= means.size();
  double between = 0.0;
  for (double m : means) between += (m - mbar) * (m - mbar);
  between /= means.size();
  double sa_0 = std::max(between - s2_0 * pilots.size() / std::max(1.0, max_n) /
                                       pilots.size(),
                         1e-4);

  auto neg = [&](const std::vector<double>& t) {
    double s2 = std::exp(t[0]);
    double sa = t[1];
    if (!(s2 > 1e-12) || s2 > 1e12 || std::fabs(sa) > 1e9) return 1e100;
    if (1.0 + max_n * sa / s2 < 1e-10) return 1e100;  // covariance must stay PD
    return -pilot_loglik(st, s2, sa);
  };
  auto run = nelder_mead_restarted(neg, {std::log(s2_0), sa_0}, 0.5);
  if (!run.converged)
    throw ConvergenceError("variance-component search did not converge");

  SigmaAlphaEstimate out;
  out.sigma_sq = std::exp(run.x[0]);
  out.sigma_alpha_sq = run.x[1];
  out.loglik = -run.fx;
  if (out.sigma_alpha_sq < 0.0) {
    out.truncated = true;
    out.sigma_alpha_sq = 0.0;
    auto neg0 = [&](const std::vector<double>& t) {
      double s2 = std::exp(t[0]);
      if (!(s2 > 1e-12) || s2 > 1e12) return 1e100;
      return -pilot_loglik(st, s2, 0.0);
    };
    auto run0 = nelder_mead_restarted(neg0, {run.x[0]}, 0.25);
    out.sigma_sq = std::exp(run0.x[0]);
    out.loglik = -run0.fx;
  }
  return out;
}

}  // namespace metamix::lmm
