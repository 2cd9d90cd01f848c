// Acceptance gate: the nine shipping criteria, one PASS/FAIL line each,
// with measured values and elapsed time. The exit status is the number of
// failed criteria, so a single red line fails the whole gate.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "metamix/csv.hpp"
#include "metamix/glmm.hpp"
#include "metamix/lmm.hpp"
#include "metamix/rng.hpp"
#include "metamix/select.hpp"
#include "metamix/sim.hpp"
#include "metamix/types.hpp"
#include "oracles.hpp"

using namespace metamix;

namespace {

struct Gate {
  int failed = 0;

  void line(int idx, bool ok, const std::string& what,
            const std::string& detail, double secs) {
    std::printf("criterion %d: %s  %s (%s) [%.1fs]\n", idx,
                ok ? "PASS" : "FAIL", what.c_str(), detail.c_str(), secs);
    std::fflush(stdout);
    if (!ok) ++failed;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ----- shared fixtures -----

const std::vector<double> kPiBalanced{0.1, 0.2, 0.3, 0.3, 0.3,
                                      0.5, 0.6, 0.6, 0.8, 0.8};
const std::vector<double> kPiSkewed{0.1, 0.1, 0.1, 0.1, 0.2,
                                    0.8, 0.9, 0.9, 0.9, 0.9};

lmm::VarianceComponents bench_vc() { return {0.025, {2.5}}; }

IpdStudy binary_study(const std::string& id, int n_t, int n_c, int ct, int cc) {
  IpdStudy s;
  s.id = id;
  for (int i = 0; i < n_t; ++i) {
    s.y.push_back(i < ct ? 1.0 : 0.0);
    s.x.push_back(1);
  }
  for (int i = 0; i < n_c; ++i) {
    s.y.push_back(i < cc ? 1.0 : 0.0);
    s.x.push_back(0);
  }
  return s;
}

// Independent mean-parameterized composite objective: Gaussian term per
// study fit with covariance Sigma + info^-1, effect-only term per summary.
double composite_at_mean(const std::vector<glmm::GlmmStudyFit>& fits,
                         const std::vector<AdStudy>& ads,
                         const Eigen::Matrix2d& sigma, double beta,
                         double alpha) {
  constexpr double kLog2Pi = 1.8378770664093453;
  double ll = 0.0;
  Eigen::Vector2d mean(beta, alpha);
  for (const auto& f : fits) {
    Eigen::Matrix2d cov = sigma + f.info.inverse();
    Eigen::Vector2d r = f.theta_hat - mean;
    ll += -kLog2Pi - 0.5 * std::log(cov.determinant()) -
          0.5 * r.dot(cov.inverse() * r);
  }
  for (const auto& a : ads) {
    double var = a.var_hat + sigma(0, 0);
    double r = a.beta_hat - beta;
    ll += -0.5 * kLog2Pi - 0.5 * std::log(var) - 0.5 * r * r / var;
  }
  return ll;
}

std::vector<double> rank_values(const std::vector<double>& x) {
  const size_t n = x.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (size_t t = i; t <= j; ++t) r[idx[t]] = avg;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ra = rank_values(a), rb = rank_values(b);
  const double n = static_cast<double>(a.size());
  double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double num = 0.0, da = 0.0, db = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

// Seeded without-replacement subsample of one study's 2x2 outcome table,
// capped by the arm sizes, returned as records.
IpdStudy subsample_records(const AdStudy& s, int per_arm, uint64_t seed,
                           int study_index) {
  RngStream st(seed, 0, static_cast<uint32_t>(study_index),
               StreamKind::subsample);
  IpdStudy out;
  out.id = s.id;
  auto draw_arm = [&](int n, int cases, int x) {
    int m = std::min(per_arm, n);
    int remaining = n, rem_events = cases;
    for (int i = 0; i < m; ++i) {
      bool event = st.next_below(static_cast<uint64_t>(remaining)) <
                   static_cast<uint64_t>(rem_events);
      if (event) --rem_events;
      --remaining;
      out.y.push_back(event ? 1.0 : 0.0);
      out.x.push_back(x);
    }
  };
  draw_arm(s.n_t, s.cases_t.value(), 1);
  draw_arm(s.n_c, s.cases_c.value(), 0);
  return out;
}

// ----- criteria -----

void criterion_1(Gate& g) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<int> n(10, 10);
  auto vc = bench_vc();
  double re_ad = lmm::relative_efficiency(n, kPiBalanced, vc, {});
  double re_sub = lmm::relative_efficiency(n, kPiBalanced, vc, {0, 1, 8, 9});
  double re_skew = lmm::relative_efficiency(n, kPiSkewed, vc, {});

  bool band_ad = std::fabs(re_ad - 0.79) <= 0.005;
  bool band_sub = std::fabs(re_sub - 0.956) <= 0.001;
  bool band_skew = std::fabs(re_skew - 0.44) <= 0.005;

  // independent dense-matrix cross-check of the out-of-band number
  std::vector<int> m(10);
  for (int j = 0; j < 10; ++j)
    m[static_cast<size_t>(j)] =
        static_cast<int>(std::lround(10.0 * kPiBalanced[static_cast<size_t>(j)]));
  std::vector<char> all(10, 1), none(10, 0);
  double dense_re = oracles::dense_lmm_variance(n, m, vc, all) *
                    oracles::dense_lmm_information(n, m, vc, none)(1, 1);
  bool oracle_agrees = std::fabs(dense_re - re_ad) <= 1e-12;

  g.line(1, band_ad && band_sub && band_skew,
         "deterministic efficiency pins",
         "summary-only " + fmt(re_ad) + " vs 0.79+-0.005" +
             (band_ad ? "" : " <- outside") + ", subset {1,2,9,10} " +
             fmt(re_sub) + " vs 0.956+-0.001, skewed " + fmt(re_skew) +
             " vs 0.44+-0.005",
         seconds_since(t0));
  if (!band_ad)
    std::printf(
        "  note: the dense-matrix oracle reproduces %.15f independently "
        "(agreement %s); the first band appears to round the exact value "
        "to two decimals and excludes it by %.4f.\n",
        re_ad, oracle_agrees ? "1e-12" : "BROKEN",
        std::fabs(re_ad - 0.79) - 0.005);
}

void criterion_2(Gate& g) {
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (uint32_t i = 0; i < 1000; ++i) {
    auto d = oracles::random_design(2026, i);
    const int k = static_cast<int>(d.n.size());
    RngStream st(2026, i, 1, StreamKind::misc);
    std::vector<char> mask(static_cast<size_t>(k), 0);
    std::vector<int> s1;
    for (int j = 0; j < k; ++j)
      if (st.next_bernoulli(0.5)) {
        mask[static_cast<size_t>(j)] = 1;
        s1.push_back(j);
      }
    if (s1.empty()) {
      int j = static_cast<int>(st.next_below(static_cast<uint64_t>(k)));
      mask[static_cast<size_t>(j)] = 1;
      s1.push_back(j);
    }

    double closed = lmm::variance_combined(d.n, d.pi, d.vc, s1);
    double dense = oracles::dense_lmm_variance(d.n, d.n_treated, d.vc, mask);
    worst = std::max(worst, std::fabs(closed - dense) / std::fabs(dense));

    std::vector<char> all(static_cast<size_t>(k), 1);
    std::vector<int> every(static_cast<size_t>(k));
    std::iota(every.begin(), every.end(), 0);
    double ipd = lmm::variance_combined(d.n, d.pi, d.vc, every);
    double dense_ipd = oracles::dense_lmm_variance(d.n, d.n_treated, d.vc, all);
    worst = std::max(worst, std::fabs(ipd - dense_ipd) / std::fabs(dense_ipd));

    std::vector<char> none(static_cast<size_t>(k), 0);
    double ad = lmm::variance_ad_ma(d.n, d.pi, d.vc);
    double dense_ad =
        1.0 / oracles::dense_lmm_information(d.n, d.n_treated, d.vc, none)(1, 1);
    worst = std::max(worst, std::fabs(ad - dense_ad) / std::fabs(dense_ad));
  }
  g.line(2, worst < 1e-10, "closed-form variance vs dense matrix oracle",
         "1000 random designs, worst relative error " + fmt(worst),
         seconds_since(t0));
}

void criterion_3(Gate& g) {
  auto t0 = std::chrono::steady_clock::now();
  int bad = 0;
  for (uint32_t i = 0; i < 200; ++i) {
    RngStream st(3026, i, 0, StreamKind::misc);
    int k = 4 + static_cast<int>(st.next_below(9));  // 4..12
    select::SelectionInstance inst;
    inst.k1 = 2 + static_cast<int>(st.next_below(static_cast<uint64_t>(k - 1)));
    for (int j = 0; j < k; ++j) {
      inst.u.push_back(st.next_unit());
      inst.v.push_back(0.2 + 3.0 * st.next_unit());
    }
    auto best = select::brute_force_select(inst);
    auto oracle_best = oracles::enumerate_extreme(inst.u, inst.v, inst.k1, false);
    auto worst = select::brute_force_worst(inst);
    auto oracle_worst = oracles::enumerate_extreme(inst.u, inst.v, inst.k1, true);
    if (best.chosen != oracle_best.set || best.objective != oracle_best.objective)
      ++bad;
    if (worst.chosen != oracle_worst.set ||
        worst.objective != oracle_worst.objective)
      ++bad;
  }

  std::vector<int> n(10, 10);
  auto inst = select::selection_weights_lmm(n, kPiBalanced, bench_vc(), 2);
  auto best2 = select::brute_force_select(inst);
  auto worst2 = select::brute_force_worst(inst);
  bool pins = best2.chosen == std::vector<int>{0, 9} &&
              worst2.chosen == std::vector<int>{2, 3};

  g.line(3, bad == 0 && pins, "exhaustive selection vs unpruned enumerator",
         "200 random instances, " + std::to_string(bad) +
             " mismatches; benchmark k1=2 best {1,10} worst {3,4} " +
             (pins ? "reproduced" : "NOT reproduced"),
         seconds_since(t0));
}

void criterion_4(Gate& g) {
  auto t0 = std::chrono::steady_clock::now();
  sim::MatchConfig cfg;  // 30 studies, k1 2..10, 100 replicates
  auto rep = sim::run_match_experiment(cfg);
  double worst_ratio = 0.0, worst_rate = 1.0;
  for (size_t i = 0; i < rep.k1.size(); ++i) {
    worst_ratio = std::max(worst_ratio, rep.mean_ratio[i]);
    worst_rate = std::min(worst_rate, rep.exact_rate[i]);
  }
  g.line(4, worst_ratio <= 1.002 && worst_rate >= 0.75,
         "sequential heuristic quality",
         "worst mean variance ratio " + fmt(worst_ratio) +
             " (<= 1.002), worst exact-match rate " + fmt(worst_rate) +
             " (>= 0.75)",
         seconds_since(t0));
}

void criterion_5(Gate& g) {
  auto t0 = std::chrono::steady_clock::now();
  auto overlap_rate = [](bool hetero) {
    sim::SensitivityConfig cfg;  // 1000 replicates, k1 = 5
    cfg.heterogeneous = hetero;
    auto rep = sim::run_sensitivity_experiment(cfg);
    long long good = 0, tot = 0;
    for (size_t v = 0; v < rep.overlap_counts.size(); ++v) {
      tot += rep.overlap_counts[v];
      if (v >= 4) good += rep.overlap_counts[v];
    }
    return static_cast<double>(good) / static_cast<double>(tot);
  };
  double shared = overlap_rate(false);
  double hetero = overlap_rate(true);
  g.line(5, shared > 0.99 && hetero >= 0.90,
         "selection under estimated components",
         "overlap >= 4 of 5: shared residual " + fmt(shared) +
             " (> 0.99), heterogeneous " + fmt(hetero) + " (>= 0.90)",
         seconds_since(t0));
}

void criterion_6(Gate& g) {
  auto t0 = std::chrono::steady_clock::now();
  sim::GlmmSimConfig cfg;  // 50 studies of 100, fractions 0..1, 200 replicates
  auto rep = sim::run_glmm_experiment(cfg);
  std::vector<double> fr, re;
  for (const auto& r : rep.rows) {
    fr.push_back(r.fraction);
    re.push_back(r.rel_eff);
  }
  double rho = spearman(fr, re);
  double ad_re = rep.rows.front().rel_eff;
  double ad_mse = rep.rows.front().mse;
  bool re_band = ad_re >= 0.85 && ad_re <= 0.99;
  bool mse_band = ad_mse >= 0.5 * 0.021 && ad_mse <= 1.5 * 0.021;
  g.line(6, re_band && rho >= 0.8 && mse_band,
         "logistic simulation at scale",
         "summary-only re " + fmt(ad_re) + " (in [0.85, 0.99]), spearman(f, re) " +
             fmt(rho) + " (>= 0.8), summary-only mse " + fmt(ad_mse) +
             " (in 0.021 +- 50%)",
         seconds_since(t0));
}

void criterion_7(Gate& g) {
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (uint32_t i = 0; i < 100; ++i) {
    RngStream st(7026, i, 0, StreamKind::misc);
    int k = 2 + static_cast<int>(st.next_below(5));  // 2..6
    double sa = (i % 3 == 0) ? 0.0 : 0.4 * st.next_unit();

    std::vector<glmm::GlmmStudyFit> fits;
    std::vector<glmm::LogisticSelectionTerms> terms;
    std::vector<int> s1;
    Eigen::Matrix2d sigma = Eigen::Matrix2d::Zero();
    sigma(1, 1) = sa;
    Eigen::Matrix2d total = Eigen::Matrix2d::Zero();

    for (int j = 0; j < k; ++j) {
      int nt = 10 + static_cast<int>(st.next_below(31));
      int nc = 10 + static_cast<int>(st.next_below(31));
      int ct = 2 + static_cast<int>(st.next_below(static_cast<uint64_t>(nt - 3)));
      int cc = 2 + static_cast<int>(st.next_below(static_cast<uint64_t>(nc - 3)));
      fits.push_back(glmm::fit_study_logistic(
          binary_study("s" + std::to_string(j), nt, nc, ct, cc)));
      terms.push_back(glmm::logistic_terms(nt, nc, double(ct) / nt,
                                           double(cc) / nc, sa));
      if (st.next_bernoulli(0.5)) s1.push_back(j);
    }
    if (s1.empty()) s1.push_back(static_cast<int>(st.next_below(
        static_cast<uint64_t>(k))));

    for (int j = 0; j < k; ++j) {
      if (std::find(s1.begin(), s1.end(), j) != s1.end())
        total += glmm::laplace_block(fits[static_cast<size_t>(j)], sigma);
      else
        total += glmm::ad_block(terms[static_cast<size_t>(j)].h, 0.0);
    }
    double matrix_var = total.inverse()(0, 0);
    double closed = glmm::logistic_variance_combined(terms, s1, sa);
    worst = std::max(worst, std::fabs(closed - matrix_var) / matrix_var);
  }
  g.line(7, worst < 1e-8, "logistic closed form vs matrix pipeline",
         "100 random instances, worst relative error " + fmt(worst),
         seconds_since(t0));
}

void criterion_8(Gate& g) {
  auto t0 = std::chrono::steady_clock::now();
  const uint64_t seed = 20260822;
  StudyCollection c = load_ad(std::string(DATA_DIR) + "/beta_blocker.csv",
                              OutcomeKind::binary);
  std::vector<AdStudy> ads;
  for (const auto& id : c.order) ads.push_back(c.ad.at(id));
  const int k = static_cast<int>(ads.size());

  // pick 5 studies to upgrade, estimate the intercept variance from their
  // subsampled records, then reselect once at the estimated value
  auto choose = [&](double sa) {
    auto w = glmm::selection_weights_logistic(
        ads, sa, glmm::LogisticWeightMode::two_by_two);
    select::SelectionInstance inst{w.u, w.v, 5};
    return select::brute_force_select(inst).chosen;
  };
  auto estimate_sa = [&](const std::vector<int>& set) {
    std::vector<IpdStudy> pilots;
    for (int j : set)
      pilots.push_back(subsample_records(ads[static_cast<size_t>(j)], 50, seed, j));
    std::vector<const IpdStudy*> ptrs;
    for (const auto& p : pilots) ptrs.push_back(&p);
    return lmm::estimate_sigma_alpha(ptrs, OutcomeKind::binary).sigma_alpha_sq;
  };

  std::vector<int> set = choose(0.025);
  double sa_hat = estimate_sa(set);
  std::vector<int> set2 = choose(sa_hat);
  if (set2 != set) {
    set = set2;
    sa_hat = estimate_sa(set);
  }

  std::vector<glmm::LogisticSelectionTerms> terms;
  for (const auto& s : ads)
    terms.push_back(glmm::logistic_terms(s.n_t, s.n_c,
                                         double(*s.cases_t) / s.n_t,
                                         double(*s.cases_c) / s.n_c, sa_hat));
  std::vector<int> every(static_cast<size_t>(k));
  std::iota(every.begin(), every.end(), 0);
  double v_ipd = glmm::logistic_variance_combined(terms, every, sa_hat);
  double v_mix = glmm::logistic_variance_combined(terms, set, sa_hat);
  double v_ad = glmm::logistic_variance_combined(terms, {}, sa_hat);

  bool ordered = v_ipd <= v_mix * (1 + 1e-12) && v_mix <= v_ad * (1 + 1e-12);
  double recovery = (v_ad - v_mix) / (v_ad - v_ipd);

  std::string ids;
  for (int j : set) ids += (ids.empty() ? "" : ";") + c.order[static_cast<size_t>(j)];
  g.line(8, ordered && recovery >= 0.5, "trial-data upgrade workflow",
         "upgrade {" + ids + "}, sigma_alpha_hat " + fmt(sa_hat) +
             ", variances " + fmt(v_ad) + " -> " + fmt(v_mix) + " vs " +
             fmt(v_ipd) + ", gap recovery " + fmt(100.0 * recovery) + "%",
         seconds_since(t0));
}

void criterion_9(Gate& g) {
  auto t0 = std::chrono::steady_clock::now();
  std::string notes;
  bool ok = true;
  auto record = [&](bool part, const char* tag) {
    ok = ok && part;
    if (!part) notes += std::string(notes.empty() ? "" : ", ") + tag + " broke";
  };

  // variance can only shrink as the record-level set grows
  {
    bool mono = true;
    for (uint32_t i = 0; i < 500 && mono; ++i) {
      auto d = oracles::random_design(9026, i);
      const int k = static_cast<int>(d.n.size());
      RngStream st(9026, i, 1, StreamKind::misc);
      std::vector<int> order(static_cast<size_t>(k));
      std::iota(order.begin(), order.end(), 0);
      for (int j = k - 1; j > 0; --j)
        std::swap(order[static_cast<size_t>(j)],
                  order[st.next_below(static_cast<uint64_t>(j + 1))]);
      std::vector<int> s1;
      double prev = lmm::variance_ad_ma(d.n, d.pi, d.vc);
      for (int j : order) {
        s1.push_back(j);
        std::sort(s1.begin(), s1.end());
        double cur = lmm::variance_combined(d.n, d.pi, d.vc, s1);
        if (cur > prev * (1 + 1e-12)) mono = false;
        prev = cur;
      }
    }
    record(mono, "monotonicity");
  }

  // equal treated fractions make every partition equally efficient
  {
    bool invariant = true;
    for (uint32_t i = 0; i < 100 && invariant; ++i) {
      RngStream st(9126, i, 0, StreamKind::misc);
      int k = 2 + static_cast<int>(st.next_below(7));
      int m0 = 1 + static_cast<int>(st.next_below(3));  // pi = m0/4
      lmm::VarianceComponents vc;
      vc.sigma_alpha_sq = 0.5 * st.next_unit();
      std::vector<int> n;
      std::vector<double> pi;
      for (int j = 0; j < k; ++j) {
        int c4 = 1 + static_cast<int>(st.next_below(6));
        n.push_back(4 * c4);
        pi.push_back(m0 / 4.0);
        vc.sigma_sq.push_back(0.5 + 3.0 * st.next_unit());
      }
      double v_ad = lmm::variance_ad_ma(n, pi, vc);
      for (int trial = 0; trial < 5; ++trial) {
        std::vector<int> s1;
        for (int j = 0; j < k; ++j)
          if (st.next_bernoulli(0.5)) s1.push_back(j);
        double v = lmm::variance_combined(n, pi, vc, s1);
        double re = lmm::relative_efficiency(n, pi, vc, s1);
        if (std::fabs(v - v_ad) > 1e-12 * v_ad || std::fabs(re - 1.0) > 1e-12)
          invariant = false;
      }
    }
    record(invariant, "equal-fraction invariance");
  }

  // profiled mean is a finite-difference stationary point of the composite
  {
    bool stationary = true;
    for (uint32_t i = 0; i < 40 && stationary; ++i) {
      RngStream st(9226, i, 0, StreamKind::misc);
      std::vector<glmm::GlmmStudyFit> fits;
      std::vector<AdStudy> ads;
      int k = 3 + static_cast<int>(st.next_below(4));
      for (int j = 0; j < k; ++j) {
        int nt = 15 + static_cast<int>(st.next_below(30));
        int nc = 15 + static_cast<int>(st.next_below(30));
        int ct = 3 + static_cast<int>(st.next_below(static_cast<uint64_t>(nt - 5)));
        int cc = 3 + static_cast<int>(st.next_below(static_cast<uint64_t>(nc - 5)));
        auto fit = glmm::fit_study_logistic(
            binary_study("s" + std::to_string(j), nt, nc, ct, cc));
        if (j < (k + 1) / 2) {
          fits.push_back(fit);
        } else {
          AdStudy a;
          a.id = "s" + std::to_string(j);
          a.beta_hat = fit.theta_hat(0);
          a.var_hat = fit.info.inverse()(0, 0);
          a.n_t = nt;
          a.n_c = nc;
          ads.push_back(a);
        }
      }
      Eigen::Matrix2d sigma = Eigen::Matrix2d::Zero();
      sigma(0, 0) = 0.1 + 0.4 * st.next_unit();
      sigma(1, 1) = 0.1 + 0.4 * st.next_unit();
      if (i % 2 == 0) {
        double ba = 0.3 * std::sqrt(sigma(0, 0) * sigma(1, 1));
        sigma(0, 1) = sigma(1, 0) = ba;
      }
      auto [beta, alpha] = glmm::profile_mean(fits, ads, sigma);
      auto f = [&](const std::vector<double>& x) {
        return composite_at_mean(fits, ads, sigma, x[0], x[1]);
      };
      auto grad = oracles::fd_gradient(f, {beta, alpha});
      auto hess = oracles::fd_hessian(f, {beta, alpha});
      for (int d = 0; d < 2; ++d)
        if (std::fabs(grad[static_cast<size_t>(d)]) >
            1e-5 * (1.0 + std::fabs(hess(d, d))))
          stationary = false;
      double lib = glmm::composite_loglik(fits, ads, sigma);
      double ora = composite_at_mean(fits, ads, sigma, beta, alpha);
      if (std::fabs(lib - ora) > 1e-8 * (1.0 + std::fabs(ora)))
        stationary = false;
    }
    record(stationary, "composite stationarity");
  }

  // per-study information vs finite-difference Hessian at the MLE
  {
    double worst = 0.0;
    for (uint32_t i = 0; i < 50; ++i) {
      RngStream st(9326, i, 0, StreamKind::misc);
      int nt = 15 + static_cast<int>(st.next_below(46));
      int nc = 15 + static_cast<int>(st.next_below(46));
      int ct = 3 + static_cast<int>(st.next_below(static_cast<uint64_t>(nt - 5)));
      int cc = 3 + static_cast<int>(st.next_below(static_cast<uint64_t>(nc - 5)));
      auto fit = glmm::fit_study_logistic(binary_study("s", nt, nc, ct, cc));
      auto ll = [&](const std::vector<double>& th) {
        double eta1 = th[1] + th[0], eta0 = th[1];
        return ct * eta1 - nt * std::log1p(std::exp(eta1)) + cc * eta0 -
               nc * std::log1p(std::exp(eta0));
      };
      Eigen::MatrixXd h =
          oracles::fd_hessian(ll, {fit.theta_hat(0), fit.theta_hat(1)});
      double scale = fit.info.norm();
      worst = std::max(worst, (fit.info + h).norm() / scale);
    }
    record(worst < 1e-6, "information vs finite differences");
  }

  // simulation reports are bit-identical across worker counts
  {
    bool identical = true;
    sim::MatchConfig mc;
    mc.k = 10;
    mc.k1_min = 2;
    mc.k1_max = 4;
    mc.replicates = 20;
    mc.workers = 1;
    auto m1 = sim::run_match_experiment(mc);
    mc.workers = 2;
    auto m2 = sim::run_match_experiment(mc);
    mc.workers = 8;
    auto m8 = sim::run_match_experiment(mc);
    identical = identical && m1.mean_ratio == m2.mean_ratio &&
                m1.mean_ratio == m8.mean_ratio &&
                m1.exact_rate == m2.exact_rate &&
                m1.exact_rate == m8.exact_rate && m1.overlap == m2.overlap &&
                m1.overlap == m8.overlap &&
                m1.config_hash == m8.config_hash;

    sim::SensitivityConfig sc;
    sc.replicates = 10;
    sc.workers = 1;
    auto s1 = sim::run_sensitivity_experiment(sc);
    sc.workers = 2;
    auto s2 = sim::run_sensitivity_experiment(sc);
    sc.workers = 8;
    auto s8 = sim::run_sensitivity_experiment(sc);
    identical = identical && s1.overlap_counts == s2.overlap_counts &&
                s1.overlap_counts == s8.overlap_counts &&
                s1.mean_sigma_alpha_hat == s2.mean_sigma_alpha_hat &&
                s1.mean_sigma_alpha_hat == s8.mean_sigma_alpha_hat &&
                s1.config_hash == s8.config_hash;

    sim::GlmmSimConfig gc;
    gc.scenario.k = 6;
    gc.scenario.n = 40;
    gc.fractions = {0.0, 0.5, 1.0};
    gc.replicates = 6;
    gc.workers = 1;
    auto g1 = sim::run_glmm_experiment(gc);
    gc.workers = 8;
    auto g8 = sim::run_glmm_experiment(gc);
    for (size_t r = 0; r < g1.rows.size(); ++r) {
      identical = identical && g1.rows[r].estimate == g8.rows[r].estimate &&
                  g1.rows[r].bias == g8.rows[r].bias &&
                  g1.rows[r].se == g8.rows[r].se &&
                  g1.rows[r].mse == g8.rows[r].mse &&
                  g1.rows[r].rel_eff == g8.rows[r].rel_eff;
    }
    identical = identical && g1.config_hash == g8.config_hash;
    record(identical, "worker invariance");
  }

  g.line(9, ok, "property suites",
         ok ? "monotone growth, equal-fraction invariance, composite "
              "stationarity, information vs finite differences, worker "
              "invariance"
            : notes,
         seconds_since(t0));
}

}  // namespace

int main() {
  Gate g;
  criterion_1(g);
  criterion_2(g);
  criterion_3(g);
  criterion_4(g);
  criterion_5(g);
  criterion_6(g);
  criterion_7(g);
  criterion_8(g);
  criterion_9(g);
  std::printf("%d of 9 criteria passed\n", 9 - g.failed);
  return g.failed;
}
