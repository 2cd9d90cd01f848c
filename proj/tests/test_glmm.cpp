#include <cmath>
#include <vector>

#include "doctest.h"
#include "metamix/glmm.hpp"
#include "metamix/sim.hpp"
#include "oracles.hpp"

using namespace metamix;
using glmm::GlmmOptions;
using glmm::GlmmStudyFit;

namespace {

IpdStudy make_binary(const std::string& id, int n_t, int n_c, int ct, int cc) {
  IpdStudy s;
  s.id = id;
  for (int i = 0; i < n_t; ++i) {
    s.x.push_back(1);
    s.y.push_back(i < ct ? 1.0 : 0.0);
  }
  for (int i = 0; i < n_c; ++i) {
    s.x.push_back(0);
    s.y.push_back(i < cc ? 1.0 : 0.0);
  }
  return s;
}

double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Binomial log likelihood of one study at (beta, alpha).
double study_loglik(int n_t, int n_c, int ct, int cc, double beta, double alpha) {
  double p1 = expit(alpha + beta), p0 = expit(alpha);
  return ct * std::log(p1) + (n_t - ct) * std::log(1 - p1) +
         cc * std::log(p0) + (n_c - cc) * std::log(1 - p0);
}

// Mean-parameterized composite likelihood at fixed Sigma (the quantity
// profile_mean maximizes), built from dense inverses only.
double composite_at_mean(const std::vector<GlmmStudyFit>& fits,
                         const std::vector<AdStudy>& ads,
                         const Eigen::Matrix2d& sigma, double beta,
                         double alpha) {
  Eigen::Vector2d theta(beta, alpha);
  double ll = 0.0;
  for (const auto& f : fits) {
    Eigen::Matrix2d total = sigma + f.info.inverse();
    Eigen::Vector2d q = theta - f.theta_hat;
    ll += -0.5 * q.dot(total.inverse() * q) - 0.5 * std::log(total.determinant()) -
          std::log(2.0 * M_PI);
  }
  for (const auto& s : ads) {
    double v = sigma(0, 0) + s.var_hat;
    double q = beta - s.beta_hat;
    ll += -0.5 * (q * q / v + std::log(v) + std::log(2.0 * M_PI));
  }
  return ll;
}

}  // namespace

TEST_CASE("per-study logistic fit solves the 2x2 table in closed form") {
  auto s = make_binary("a", 20, 20, 10, 5);
  auto fit = glmm::fit_study_logistic(s);
  CHECK_FALSE(fit.degenerate);
  CHECK(fit.theta_hat(0) == doctest::Approx(std::log(3.0)).epsilon(1e-8));
  CHECK(fit.theta_hat(1) == doctest::Approx(std::log(1.0 / 3)).epsilon(1e-8));
  // information at the MLE: [[a, a], [a, a + b]] with a = 5, b = 3.75
  CHECK(fit.info(0, 0) == doctest::Approx(5.0).epsilon(1e-8));
  CHECK(fit.info(0, 1) == doctest::Approx(5.0).epsilon(1e-8));
  CHECK(fit.info(1, 1) == doctest::Approx(8.75).epsilon(1e-8));
}

TEST_CASE("reported information is the negative Hessian of the log likelihood") {
  auto s = make_binary("a", 25, 30, 8, 17);
  auto fit = glmm::fit_study_logistic(s);
  auto h = oracles::fd_hessian(
      [&](const std::vector<double>& t) {
        return study_loglik(25, 30, 8, 17, t[0], t[1]);
      },
      {fit.theta_hat(0), fit.theta_hat(1)});
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      CHECK(fit.info(r, c) == doctest::Approx(-h(r, c)).epsilon(1e-5));
}

TEST_CASE("an empty cell triggers the half-count refit") {
  auto fit = glmm::fit_study_logistic(make_binary("a", 10, 10, 0, 4));
  CHECK(fit.degenerate);
  CHECK(std::isfinite(fit.theta_hat(0)));
  // corrected table: 0.5/11 events vs 4.5/11
  CHECK(fit.theta_hat(0) ==
        doctest::Approx(std::log(0.5 / 10.5) - std::log(4.5 / 6.5)).epsilon(1e-6));
}

TEST_CASE("precision blocks against dense inverses") {
  auto fit = glmm::fit_study_logistic(make_binary("a", 20, 20, 10, 5));
  Eigen::Matrix2d sigma;
  sigma << 0.3, 0.05, 0.05, 0.4;
  Eigen::Matrix2d block = glmm::laplace_block(fit, sigma);
  Eigen::Matrix2d should_be_identity = block * (sigma + fit.info.inverse());
  CHECK((should_be_identity - Eigen::Matrix2d::Identity()).norm() < 1e-10);

  // zero Sigma collapses the block to the information itself
  Eigen::Matrix2d at_zero = glmm::laplace_block(fit, Eigen::Matrix2d::Zero());
  CHECK((at_zero - fit.info).norm() < 1e-8);

  Eigen::Matrix2d o = glmm::ad_block(0.4, 0.1);
  CHECK(o(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(o(0, 1) == 0.0);
  CHECK(o(1, 0) == 0.0);
  CHECK(o(1, 1) == 0.0);
  CHECK_THROWS_AS(glmm::ad_block(0.0, 0.1), InputError);
}

TEST_CASE("profiled mean is a stationary point of the composite likelihood") {
  std::vector<GlmmStudyFit> fits{
      glmm::fit_study_logistic(make_binary("a", 20, 20, 10, 5)),
      glmm::fit_study_logistic(make_binary("b", 30, 25, 6, 9)),
  };
  std::vector<AdStudy> ads{{"c", 0.4, 0.3, 15, 35, {}, {}}};
  Eigen::Matrix2d sigma;
  sigma << 0.3, 0.05, 0.05, 0.4;

  auto [beta, alpha] = glmm::profile_mean(fits, ads, sigma);
  auto grad = oracles::fd_gradient(
      [&](const std::vector<double>& t) {
        return composite_at_mean(fits, ads, sigma, t[0], t[1]);
      },
      {beta, alpha});
  CHECK(std::fabs(grad[0]) < 1e-7);
  CHECK(std::fabs(grad[1]) < 1e-7);

  // and the profiled value is what composite_loglik reports
  CHECK(glmm::composite_loglik(fits, ads, sigma) ==
        doctest::Approx(composite_at_mean(fits, ads, sigma, beta, alpha))
            .epsilon(1e-10));

  CHECK_THROWS_AS(glmm::profile_mean({}, ads, sigma), EstimabilityError);
}

TEST_CASE("summary-only composite likelihood pools with shrunk weights") {
  std::vector<AdStudy> ads{{"a", 0.2, 0.3, 10, 10, {}, {}},
                           {"b", 0.7, 0.5, 10, 10, {}, {}},
                           {"c", -0.1, 0.4, 10, 10, {}, {}}};
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Zero();
  sigma(0, 0) = 0.25;
  double sw = 0.0, swe = 0.0;
  for (const auto& s : ads) {
    sw += 1.0 / (0.25 + s.var_hat);
    swe += s.beta_hat / (0.25 + s.var_hat);
  }
  double mean = swe / sw, expect = 0.0;
  for (const auto& s : ads) {
    double v = 0.25 + s.var_hat;
    expect += -0.5 * ((s.beta_hat - mean) * (s.beta_hat - mean) / v +
                      std::log(v) + std::log(2.0 * M_PI));
  }
  CHECK(glmm::composite_loglik({}, ads, sigma) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("covariance search lands on a stationary maximum") {
  sim::LogisticScenario sc;
  sc.k = 25;
  sc.n = 120;
  sc.beta = 0.5;
  sc.alpha = 0.4;
  sc.sigma_bb = 0.3;
  sc.sigma_aa = 0.3;
  auto c = sim::gen_logistic_dataset(sc, 63, 0);
  std::vector<GlmmStudyFit> fits;
  for (const auto& id : c.order) fits.push_back(glmm::fit_study_logistic(c.ipd.at(id)));

  GlmmOptions opt;
  auto fit = glmm::maximize_varcomp(fits, {}, opt);
  CHECK(fit.converged);
  CHECK(fit.variance_beta > 0.0);
  CHECK(std::fabs(fit.beta_hat - 0.5) < 0.45);
  CHECK(fit.sigma_hat.ba == 0.0);

  // no direction in (sigma_bb, sigma_aa) improves the composite likelihood
  if (!fit.boundary) {
    Eigen::Matrix2d sig = fit.sigma_hat.mat();
    double at_opt = glmm::composite_loglik(fits, {}, sig);
    for (double fb : {0.93, 1.07})
      for (double fa : {0.93, 1.07}) {
        Eigen::Matrix2d s2 = sig;
        s2(0, 0) *= fb;
        s2(1, 1) *= fa;
        CHECK(glmm::composite_loglik(fits, {}, s2) <= at_opt + 1e-7);
      }
  }

  GlmmOptions starved;
  starved.max_iter = 1;
  CHECK_THROWS_AS(glmm::maximize_varcomp(fits, {}, starved), ConvergenceError);
}

TEST_CASE("summary-only combination is the shrunk inverse-variance pool") {
  std::vector<AdStudy> ads{{"a", 0.2, 0.3, 10, 10, {}, {}},
                           {"b", 0.7, 0.5, 10, 10, {}, {}},
                           {"c", -0.1, 0.4, 10, 10, {}, {}},
                           {"d", 0.9, 0.6, 10, 10, {}, {}}};
  GlmmOptions opt;
  auto fit = glmm::maximize_varcomp({}, ads, opt);
  CHECK(fit.converged);
  CHECK(std::isnan(fit.alpha_hat));
  double sw = 0.0, swe = 0.0;
  for (const auto& s : ads) {
    double w = 1.0 / (fit.sigma_hat.bb + s.var_hat);
    sw += w;
    swe += w * s.beta_hat;
  }
  CHECK(fit.beta_hat == doctest::Approx(swe / sw).epsilon(1e-10));
  CHECK(fit.variance_beta == doctest::Approx(1.0 / sw).epsilon(1e-10));

  // identical effects leave nothing for the heterogeneity component
  std::vector<AdStudy> flat{{"a", 0.3, 0.4, 10, 10, {}, {}},
                            {"b", 0.3, 0.4, 10, 10, {}, {}},
                            {"c", 0.3, 0.4, 10, 10, {}, {}}};
  auto f2 = glmm::maximize_varcomp({}, flat, opt);
  CHECK(f2.boundary);
  CHECK(f2.beta_hat == doctest::Approx(0.3).epsilon(1e-8));
}

TEST_CASE("random-intercept variance: closed form equals the matrix pipeline") {
  struct Row {
    int n_t, n_c, ct, cc;
  };
  std::vector<Row> rows{{20, 20, 10, 5}, {30, 25, 6, 9}, {15, 35, 7, 12}};
  for (double sa : {0.0, 0.3}) {
    std::vector<GlmmStudyFit> fits;
    std::vector<glmm::LogisticSelectionTerms> terms;
    std::vector<double> h;
    for (const auto& r : rows) {
      fits.push_back(glmm::fit_study_logistic(
          make_binary("s" + std::to_string(terms.size()), r.n_t, r.n_c, r.ct, r.cc)));
      terms.push_back(glmm::logistic_terms(
          r.n_t, r.n_c, double(r.ct) / r.n_t, double(r.cc) / r.n_c, sa));
      h.push_back(terms.back().h);
    }
    Eigen::Matrix2d sigma = Eigen::Matrix2d::Zero();
    sigma(1, 1) = sa;

    // first two studies contribute records, the third only its summary
    Eigen::Matrix2d m = glmm::laplace_block(fits[0], sigma) +
                        glmm::laplace_block(fits[1], sigma) +
                        glmm::ad_block(h[2], 0.0);
    double matrix_var = m.inverse()(0, 0);
    CHECK(glmm::logistic_variance_combined(terms, {0, 1}, sa) ==
          doctest::Approx(matrix_var).epsilon(1e-8));

    // all records
    Eigen::Matrix2d all = m - glmm::ad_block(h[2], 0.0) +
                          glmm::laplace_block(fits[2], sigma);
    CHECK(glmm::logistic_variance_combined(terms, {0, 1, 2}, sa) ==
          doctest::Approx(all.inverse()(0, 0)).epsilon(1e-8));

    // summaries only: no alpha row to invert, compare the scalar
    double den = 1.0 / h[0] + 1.0 / h[1] + 1.0 / h[2];
    CHECK(glmm::logistic_variance_combined(terms, {}, sa) ==
          doctest::Approx(1.0 / den).epsilon(1e-12));
  }
}

TEST_CASE("logistic selection scores") {
  // equal arms, equal event rates: the location score is exactly 1/2
  std::vector<AdStudy> ads{{"a", 0.0, 0.5, 20, 20, 5, 5}};
  for (auto mode : {glmm::LogisticWeightMode::rare_disease,
                    glmm::LogisticWeightMode::two_by_two}) {
    auto w = glmm::selection_weights_logistic(ads, 0.1, mode);
    REQUIRE(w.u.size() == 1);
    CHECK(w.u[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(w.v[0] > 0.0);
    CHECK(w.corrected.empty());
  }

  // unbalanced table: |u - 1/2| reflects the arm-information split
  std::vector<AdStudy> skew{{"b", 0.0, 0.5, 20, 60, 10, 30}};
  auto w = glmm::selection_weights_logistic(skew, 0.1,
                                            glmm::LogisticWeightMode::two_by_two);
  // a = 5, b = 15: the score is 1/4 from one side or 3/4 from the other
  CHECK(std::min(w.u[0], 1.0 - w.u[0]) == doctest::Approx(0.25).epsilon(1e-10));
  // and the weight matches 1 / (sigma_alpha^2 + 1/(a+b))
  CHECK(w.v[0] == doctest::Approx(1.0 / (0.1 + 1.0 / 20)).epsilon(1e-10));

  // an empty cell gets the half-count correction and is reported
  std::vector<AdStudy> zero{{"c", 0.0, 0.5, 10, 10, 0, 4}};
  auto wz = glmm::selection_weights_logistic(zero, 0.1,
                                             glmm::LogisticWeightMode::two_by_two);
  CHECK(wz.corrected == std::vector<std::string>{"c"});
  CHECK(wz.u[0] > 0.0);
  CHECK(wz.u[0] < 1.0);

  // rare-disease mode needs no counts
  std::vector<AdStudy> bare{{"d", 0.4, 0.09, 100, 100, {}, {}}};
  auto wr = glmm::selection_weights_logistic(bare, 0.0,
                                             glmm::LogisticWeightMode::rare_disease);
  CHECK(wr.u[0] == doctest::Approx(1.0 / (std::exp(0.4) + 1.0)).epsilon(1e-12));
  CHECK_THROWS_AS(glmm::selection_weights_logistic(
                      bare, 0.0, glmm::LogisticWeightMode::two_by_two),
                  InputError);
}

TEST_CASE("record/summary split through a study collection") {
  sim::LogisticScenario sc;
  sc.k = 10;
  sc.n = 80;
  auto c = sim::gen_logistic_dataset(sc, 64, 0);
  // summaries for the AD part
  for (const auto& id : c.order) {
    auto& s = c.ipd.at(id);
    AdStudy ad;
    auto f = glmm::fit_study_logistic(s);
    ad.id = id;
    ad.beta_hat = f.theta_hat(0);
    Eigen::Matrix2d ii = f.info.inverse();
    ad.var_hat = ii(0, 0);
    ad.n_t = s.n_treated();
    ad.n_c = s.n() - s.n_treated();
    c.ad[id] = ad;
  }
  Partition p;
  for (int j = 0; j < c.size(); ++j)
    (j < 4 ? p.s1 : p.s2).push_back(c.order[static_cast<size_t>(j)]);

  GlmmOptions opt;
  auto fit = glmm::combined_estimate_glmm(c, p, opt);
  CHECK(fit.converged);
  CHECK(std::isfinite(fit.beta_hat));
  CHECK(std::isfinite(fit.alpha_hat));
  CHECK(fit.variance_beta > 0.0);
  CHECK(fit.partition.s1 == p.s1);

  Partition missing;
  missing.s1 = {"no-such-study"};
  CHECK_THROWS_AS(glmm::combined_estimate_glmm(c, missing, opt), InputError);
}
