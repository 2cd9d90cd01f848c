#include "metamix/glmm.hpp"

#include <cmath>
#include <limits>

#include "metamix/neldermead.hpp"

namespace metamix::glmm {

namespace {

double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

struct Cells {
  double ct, nt, cc, nc;  // events and sizes per arm
};

Cells cells_of(const IpdStudy& s) {
  Cells c{0, 0, 0, 0};
  for (int i = 0; i < s.n(); ++i) {
    if (s.x[i]) {
      c.nt += 1.0;
      c.ct += s.y[i];
    } else {
      c.nc += 1.0;
      c.cc += s.y[i];
    }
  }
  return c;
}

Eigen::Matrix2d info_at(const Cells& c, double beta, double alpha) {
  double p1 = expit(alpha + beta), p0 = expit(alpha);
  double a = c.nt * p1 * (1.0 - p1), b = c.nc * p0 * (1.0 - p0);
  Eigen::Matrix2d m;
  m << a, a, a, a + b;
  return m;
}

// DerSimonian-Laird moment estimate, used only as a search start.
double dl_tau_sq(const std::vector<double>& est, const std::vector<double>& var) {
  size_t k = est.size();
  if (k < 2) return 0.0;
  double sw = 0.0, swe = 0.0, sw2 = 0.0;
  for (size_t j = 0; j < k; ++j) {
    double w = 1.0 / var[j];
    sw += w;
    swe += w * est[j];
    sw2 += w * w;
  }
  double mean = swe / sw;
  double q = 0.0;
  for (size_t j = 0; j < k; ++j)
    q += (est[j] - mean) * (est[j] - mean) / var[j];
  double denom = sw - sw2 / sw;
  if (!(denom > 0.0)) return 0.0;
  return std::max(0.0, (q - (k - 1.0)) / denom);
}

Eigen::Matrix2d inv2(const Eigen::Matrix2d& m, const char* what) {
  double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  if (!(det > 0.0) || !std::isfinite(det))
    throw EstimabilityError(std::string(what) + ": matrix is not positive definite");
  Eigen::Matrix2d out;
  out << m(1, 1) / det, -m(0, 1) / det, -m(1, 0) / det, m(0, 0) / det;
  return out;
}

}  // namespace

GlmmStudyFit fit_study_logistic(const IpdStudy& s) {
  validate(s, OutcomeKind::binary);
  Cells c = cells_of(s);
  GlmmStudyFit fit;
  fit.id = s.id;

  if (c.ct == 0.0 || c.ct == c.nt || c.cc == 0.0 || c.cc == c.nc) {
    // Empty cell: the unpenalized MLE runs away. Refit on the corrected
    // table with 0.5 added to every cell.
    fit.degenerate = true;
    Cells cc{c.ct + 0.5, c.nt + 1.0, c.cc + 0.5, c.nc + 1.0};
    double p1 = cc.ct / cc.nt, p0 = cc.cc / cc.nc;
    fit.theta_hat << logit(p1) - logit(p0), logit(p0);
    fit.info = info_at(cc, fit.theta_hat(0), fit.theta_hat(1));
    return fit;
  }

  double pbar = (c.ct + c.cc) / (c.nt + c.nc);
  Eigen::Vector2d theta(0.0, logit(pbar));
  for (int it = 0; it < 50; ++it) {
    double p1 = expit(theta(1) + theta(0)), p0 = expit(theta(1));
    Eigen::Vector2d score(c.ct - c.nt * p1,
                          (c.ct + c.cc) - (c.nt * p1 + c.nc * p0));
    if (score.lpNorm<Eigen::Infinity>() < 1e-10) break;
    Eigen::Matrix2d info = info_at(c, theta(0), theta(1));
    Eigen::Vector2d step = inv2(info, "logistic information") * score;
    // halve until the score norm actually shrinks
    double base = score.lpNorm<Eigen::Infinity>();
    for (int h = 0; h < 30; ++h) {
      Eigen::Vector2d cand = theta + step;
      double p1c = expit(cand(1) + cand(0)), p0c = expit(cand(1));
      Eigen::Vector2d sc(c.ct - c.nt * p1c,
                         (c.ct + c.cc) - (c.nt * p1c + c.nc * p0c));
      if (sc.lpNorm<Eigen::Infinity>() < base || h == 29) {
        theta = cand;
        break;
      }
      step *= 0.5;
    }
  }
  fit.theta_hat = theta;
  fit.info = info_at(c, theta(0), theta(1));
  return fit;
}

Eigen::Matrix2d laplace_block(const GlmmStudyFit& fit,
                              const Eigen::Matrix2d& sigma) {
  Eigen::Matrix2d total = sigma + inv2(fit.info, "study information");
  return inv2(total, "study covariance");
}

Eigen::Matrix2d ad_block(double var_hat, double sigma_bb) {
  if (!(var_hat > 0.0)) throw InputError("summary variance must be positive");
  if (sigma_bb < 0.0) throw InputError("sigma_bb must be nonnegative");
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  m(0, 0) = 1.0 / (sigma_bb + var_hat);
  return m;
}

std::pair<double, double> profile_mean(const std::vector<GlmmStudyFit>& fits,
                                       const std::vector<AdStudy>& ads,
                                       const Eigen::Matrix2d& sigma) {
  if (fits.empty())
    throw EstimabilityError(
        "profiling the full mean needs at least one IPD study");
  Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  for (const auto& f : fits) {
    Eigen::Matrix2d d = laplace_block(f, sigma);
    A += d;
    rhs += d * f.theta_hat;
  }
  for (const auto& s : ads) {
    Eigen::Matrix2d o = ad_block(s.var_hat, sigma(0, 0));
    A += o;
    rhs(0) += o(0, 0) * s.beta_hat;
  }
  Eigen::Vector2d theta = inv2(A, "combined precision") * rhs;
  return {theta(0), theta(1)};
}

double composite_loglik(const std::vector<GlmmStudyFit>& fits,
                        const std::vector<AdStudy>& ads,
                        const Eigen::Matrix2d& sigma) {
  static const double kLog2Pi = std::log(2.0 * M_PI);
  if (fits.empty()) {
    if (ads.empty()) throw InputError("no studies");
    double sw = 0.0, swe = 0.0;
    for (const auto& s : ads) {
      double w = 1.0 / (sigma(0, 0) + s.var_hat);
      sw += w;
      swe += w * s.beta_hat;
    }
    double mean = swe / sw;
    double ll = 0.0;
    for (const auto& s : ads) {
      double v = sigma(0, 0) + s.var_hat;
      double q = s.beta_hat - mean;
      ll += -0.5 * (q * q / v + std::log(v) + kLog2Pi);
    }
    return ll;
  }

  auto [beta, alpha] = profile_mean(fits, ads, sigma);
  Eigen::Vector2d theta(beta, alpha);
  double ll = 0.0;
  for (const auto& f : fits) {
    Eigen::Matrix2d total = sigma + inv2(f.info, "study information");
    double det = total(0, 0) * total(1, 1) - total(0, 1) * total(1, 0);
    if (!(det > 0.0)) throw EstimabilityError("study covariance not PD");
    Eigen::Matrix2d prec = laplace_block(f, sigma);
    Eigen::Vector2d q = theta - f.theta_hat;
    ll += -0.5 * q.dot(prec * q) - 0.5 * std::log(det) - kLog2Pi;
  }
  for (const auto& s : ads) {
    double v = sigma(0, 0) + s.var_hat;
    double q = beta - s.beta_hat;
    ll += -0.5 * (q * q / v + std::log(v) + kLog2Pi);
  }
  return ll;
}

namespace {

struct SigmaParam {
  bool has_alpha;    // any IPD fit present
  bool independent;  // ba fixed at zero

  int dim() const { return has_alpha ? (independent ? 2 : 3) : 1; }

  // log-Cholesky: Sigma = L L' with positive diagonal via exp
  Eigen::Matrix2d sigma(const std::vector<double>& t) const {
    double lb = std::exp(t[0]);
    Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
    if (!has_alpha) {
      s(0, 0) = lb * lb;
      return s;
    }
    if (independent) {
      double la = std::exp(t[1]);
      s(0, 0) = lb * lb;
      s(1, 1) = la * la;
      return s;
    }
    double l21 = t[1];
    double la = std::exp(t[2]);
    s(0, 0) = lb * lb;
    s(0, 1) = s(1, 0) = l21 * lb;
    s(1, 1) = l21 * l21 + la * la;
    return s;
  }

  bool inside(const std::vector<double>& t) const {
    for (size_t i = 0; i < t.size(); ++i) {
      bool offdiag = has_alpha && !independent && i == 1;
      if (offdiag ? std::fabs(t[i]) > 1e3 : std::fabs(t[i]) > 15.0) return false;
    }
    return true;
  }
};

}  // namespace

GlmmCombined maximize_varcomp(const std::vector<GlmmStudyFit>& fits,
                              const std::vector<AdStudy>& ads,
                              const GlmmOptions& opt) {
  if (fits.empty() && ads.empty()) throw InputError("no studies to combine");

  SigmaParam par{!fits.empty(), opt.independent};

  // moment starts
  std::vector<double> eb, vb, ea, va;
  for (const auto& f : fits) {
    Eigen::Matrix2d ii = inv2(f.info, "study information");
    eb.push_back(f.theta_hat(0));
    vb.push_back(ii(0, 0));
    ea.push_back(f.theta_hat(1));
    va.push_back(ii(1, 1));
  }
  for (const auto& s : ads) {
    eb.push_back(s.beta_hat);
    vb.push_back(s.var_hat);
  }
  double tb0 = 0.5 * std::log(std::max(dl_tau_sq(eb, vb), 1e-3));
  std::vector<double> t0;
  if (!par.has_alpha) {
    t0 = {tb0};
  } else if (par.independent) {
    double ta0 = 0.5 * std::log(std::max(dl_tau_sq(ea, va), 1e-3));
    t0 = {tb0, ta0};
  } else {
    double ta0 = 0.5 * std::log(std::max(dl_tau_sq(ea, va), 1e-3));
    t0 = {tb0, 0.0, ta0};
  }

  auto neg = [&](const std::vector<double>& t) {
    if (!par.inside(t)) return 1e100;
    return -composite_loglik(fits, ads, par.sigma(t));
  };
  auto run = nelder_mead_restarted(neg, t0, 0.5, opt.tol, opt.max_iter);
  if (!run.converged)
    throw ConvergenceError("random-effect covariance search did not converge");

  Eigen::Matrix2d sig = par.sigma(run.x);
  GlmmCombined out;
  out.sigma_hat.bb = sig(0, 0);
  out.sigma_hat.ba = par.has_alpha ? sig(0, 1) : 0.0;
  out.sigma_hat.aa = par.has_alpha ? sig(1, 1) : 0.0;
  out.loglik = -run.fx;
  out.converged = run.converged;
  out.boundary = out.sigma_hat.bb < 1e-4 ||
                 (par.has_alpha && out.sigma_hat.aa < 1e-4);

  if (fits.empty()) {
    double sw = 0.0, swe = 0.0;
    for (const auto& s : ads) {
      double w = 1.0 / (out.sigma_hat.bb + s.var_hat);
      sw += w;
      swe += w * s.beta_hat;
    }
    out.beta_hat = swe / sw;
    out.alpha_hat = std::numeric_limits<double>::quiet_NaN();
    out.variance_beta = 1.0 / sw;
    return out;
  }

  auto [beta, alpha] = profile_mean(fits, ads, sig);
  out.beta_hat = beta;
  out.alpha_hat = alpha;
  Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
  for (const auto& f : fits) A += laplace_block(f, sig);
  for (const auto& s : ads) A += ad_block(s.var_hat, sig(0, 0));
  out.variance_beta = inv2(A, "combined precision")(0, 0);
  return out;
}

GlmmCombined combined_estimate_glmm(const StudyCollection& c,
                                    const Partition& p,
                                    const GlmmOptions& opt) {
  std::vector<GlmmStudyFit> fits;
  for (const auto& id : p.s1) {
    if (!c.has_ipd(id))
      throw InputError("IPD part names study '" + id + "' without records");
    fits.push_back(fit_study_logistic(c.ipd.at(id)));
  }
  std::vector<AdStudy> ads;
  for (const auto& id : p.s2) {
    if (!c.has_ad(id))
      throw InputError("AD part names study '" + id + "' without a summary");
    const auto& s = c.ad.at(id);
    validate(s);
    ads.push_back(s);
  }
  GlmmCombined out = maximize_varcomp(fits, ads, opt);
  out.partition = p;
  return out;
}

LogisticSelectionTerms logistic_terms(int n_t, int n_c, double p1, double p0,
                                      double sigma_alpha_sq) {
  if (n_t < 1 || n_c < 1) throw InputError("arm sizes must be positive");
  if (!(p1 > 0.0 && p1 < 1.0 && p0 > 0.0 && p0 < 1.0))
    throw InputError("event probabilities must lie strictly in (0,1)");
  if (sigma_alpha_sq < 0.0) throw InputError("sigma_alpha_sq must be nonnegative");
  LogisticSelectionTerms t;
  t.p1 = p1;
  t.p0 = p0;
  t.a = n_t * p1 * (1.0 - p1);
  t.b = n_c * p0 * (1.0 - p0);
  t.h = 1.0 / t.a + 1.0 / t.b;
  t.g = t.a / (t.a + t.b);
  t.c = sigma_alpha_sq * t.h + 1.0 / (t.a * t.b);
  return t;
}

double logistic_variance_combined(const std::vector<LogisticSelectionTerms>& terms,
                                  const std::vector<int>& s1,
                                  double sigma_alpha_sq) {
  if (terms.empty()) throw InputError("no studies");
  double den = 0.0;
  for (const auto& t : terms) den += 1.0 / t.h;
  if (!s1.empty()) {
    double sw = 0.0, swg = 0.0;
    for (int j : s1) {
      const auto& t = terms.at(static_cast<size_t>(j));
      double c = sigma_alpha_sq * t.h + 1.0 / (t.a * t.b);
      double w = t.h / c;
      sw += w;
      swg += w * t.g;
    }
    double gtilde = swg / sw;
    for (int j : s1) {
      const auto& t = terms.at(static_cast<size_t>(j));
      double c = sigma_alpha_sq * t.h + 1.0 / (t.a * t.b);
      double w = t.h / c;
      den += w * (t.g - gtilde) * (t.g - gtilde);
    }
  }
  return 1.0 / den;
}

LogisticWeights selection_weights_logistic(const std::vector<AdStudy>& ads,
                                           double sigma_alpha_sq,
                                           LogisticWeightMode mode) {
  if (sigma_alpha_sq < 0.0) throw InputError("sigma_alpha_sq must be nonnegative");
  LogisticWeights out;
  for (const auto& s : ads) {
    validate(s);
    double g, h;
    if (mode == LogisticWeightMode::rare_disease) {
      double ratio = static_cast<double>(s.n_t) / s.n_c;
      g = 1.0 / (ratio * std::exp(s.beta_hat) + 1.0);
      h = s.var_hat;
    } else {
      if (!s.cases_t || !s.cases_c)
        throw InputError("study " + s.id +
                         ": event counts required for two-by-two scoring");
      double ct = *s.cases_t, cc = *s.cases_c;
      double nt = s.n_t, nc = s.n_c;
      if (ct == 0.0 || ct == nt || cc == 0.0 || cc == nc) {
        ct += 0.5;
        cc += 0.5;
        nt += 1.0;
        nc += 1.0;
        out.corrected.push_back(s.id);
      }
      double p1 = ct / nt, p0 = cc / nc;
      double a = nt * p1 * (1.0 - p1), b = nc * p0 * (1.0 - p0);
      g = 1.0 / (a / b + 1.0);
      h = 1.0 / a + 1.0 / b;
    }
    out.u.push_back(g);
    out.v.push_back(1.0 / (sigma_alpha_sq + h * g * (1.0 - g)));
  }
  return out;
}

}  // namespace metamix::glmm
