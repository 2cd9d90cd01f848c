#include "metamix/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "metamix/csv.hpp"
#include "metamix/glmm.hpp"
#include "metamix/lmm.hpp"
#include "metamix/rng.hpp"
#include "metamix/summarize.hpp"
#include "metamix/threading.hpp"

namespace metamix::sim {

namespace {

double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// A replicate body may throw; exceptions cannot cross the worker loop, so
// they are captured per slot and the first one (in replicate order) is
// rethrown with its class preserved.
template <class F>
void run_replicates(int reps, int workers, F&& body) {
  struct Captured {
    int cls = -1;
    std::string msg;
  };
  std::vector<Captured> errs(static_cast<size_t>(reps));
  parallel_for(reps, workers, [&](int r) {
    try {
      body(r);
    } catch (const InputError& e) {
      errs[static_cast<size_t>(r)] = {0, e.what()};
    } catch (const EstimabilityError& e) {
      errs[static_cast<size_t>(r)] = {1, e.what()};
    } catch (const ConvergenceError& e) {
      errs[static_cast<size_t>(r)] = {2, e.what()};
    } catch (const std::exception& e) {
      errs[static_cast<size_t>(r)] = {3, e.what()};
    }
  });
  for (int r = 0; r < reps; ++r) {
    const auto& er = errs[static_cast<size_t>(r)];
    if (er.cls < 0) continue;
    std::string m = "replicate " + std::to_string(r) + ": " + er.msg;
    switch (er.cls) {
      case 0: throw InputError(m);
      case 1: throw EstimabilityError(m);
      case 2: throw ConvergenceError(m);
      default: throw Error(m);
    }
  }
}

int broadcast_n(const std::vector<int>& n, int k, int j) {
  if (n.size() == 1) return n[0];
  if (n.size() != static_cast<size_t>(k))
    throw InputError("study sizes must be common or one per study");
  return n[static_cast<size_t>(j)];
}

int clamp_arm(double target, int n) {
  int m = static_cast<int>(std::lround(target));
  return std::max(1, std::min(n - 1, m));
}

std::vector<int> draw_subset(RngStream& st, int k, int k1) {
  std::vector<int> pool(static_cast<size_t>(k));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k1; ++i) {
    int j = i + static_cast<int>(st.next_below(static_cast<uint64_t>(k - i)));
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
  }
  pool.resize(static_cast<size_t>(k1));
  std::sort(pool.begin(), pool.end());
  return pool;
}

int overlap_size(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> tmp;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(tmp));
  return static_cast<int>(tmp.size());
}

std::string join_ids_1based(const std::vector<int>& idx) {
  std::string out;
  for (size_t i = 0; i < idx.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(idx[i] + 1);
  }
  return out;
}

}  // namespace

StudyCollection gen_lmm_dataset(const LmmScenario& sc, uint64_t seed,
                                uint32_t replicate, LmmRealization* real) {
  if (sc.k < 1) throw InputError("scenario needs at least one study");
  if (sc.pi_law == LmmScenario::PiLaw::fixed && sc.pi.empty())
    throw InputError("fixed proportions requested but none given");
  if (!sc.draw_sigma &&
      sc.sigma_sq.size() != 1 &&
      sc.sigma_sq.size() != static_cast<size_t>(sc.k))
    throw InputError("sigma_sq must be common or one per study");
  if (sc.sigma_alpha_sq < 0.0) throw InputError("sigma_alpha_sq must be nonnegative");

  StudyCollection c;
  c.outcome = OutcomeKind::continuous;
  LmmRealization r;

  double shared_sigma = 0.0;
  if (sc.draw_sigma && sc.shared_sigma_draw) {
    RngStream st(seed, replicate, 0, StreamKind::variance);
    shared_sigma = st.next_inv_gamma_int(2, 5.0);
  }

  for (int j = 0; j < sc.k; ++j) {
    int nj = broadcast_n(sc.n, sc.k, j);
    if (nj < 2) throw InputError("study sizes must be at least 2");

    double pij;
    switch (sc.pi_law) {
      case LmmScenario::PiLaw::fixed:
        pij = sc.pi.size() == 1 ? sc.pi[0] : sc.pi.at(static_cast<size_t>(j));
        break;
      case LmmScenario::PiLaw::uniform: {
        RngStream st(seed, replicate, static_cast<uint32_t>(j),
                     StreamKind::proportion);
        pij = st.next_unit();
        break;
      }
      case LmmScenario::PiLaw::bathtub: {
        RngStream st(seed, replicate, static_cast<uint32_t>(j),
                     StreamKind::proportion);
        bool low = st.next_bernoulli(0.5);
        pij = low ? st.next_beta_int(2, 9) : st.next_beta_int(9, 2);
        break;
      }
      default:
        throw InputError("unknown proportion law");
    }
    if (!(pij > 0.0 && pij < 1.0))
      throw InputError("treated proportions must lie strictly in (0,1)");

    double s2;
    if (sc.draw_sigma) {
      if (sc.shared_sigma_draw) {
        s2 = shared_sigma;
      } else {
        RngStream st(seed, replicate, static_cast<uint32_t>(j),
                     StreamKind::variance);
        s2 = st.next_inv_gamma_int(2, 5.0);
      }
    } else {
      s2 = sc.sigma_sq.size() == 1 ? sc.sigma_sq[0]
                                   : sc.sigma_sq[static_cast<size_t>(j)];
    }
    if (!(s2 > 0.0)) throw InputError("residual variances must be positive");

    RngStream eff(seed, replicate, static_cast<uint32_t>(j),
                  StreamKind::study_effect);
    double aj = sc.alpha + std::sqrt(sc.sigma_alpha_sq) * eff.next_normal();

    int m = clamp_arm(nj * pij, nj);
    IpdStudy s;
    s.id = "s" + std::to_string(j + 1);
    s.y.reserve(static_cast<size_t>(nj));
    s.x.reserve(static_cast<size_t>(nj));
    RngStream resp(seed, replicate, static_cast<uint32_t>(j),
                   StreamKind::response);
    double sd = std::sqrt(s2);
    for (int i = 0; i < nj; ++i) {
      int xi = i < m ? 1 : 0;
      s.x.push_back(xi);
      s.y.push_back(aj + sc.beta * xi + sd * resp.next_normal());
    }
    c.order.push_back(s.id);
    c.ipd[s.id] = std::move(s);

    r.n.push_back(nj);
    r.n_treated.push_back(m);
    r.pi.push_back(pij);
    r.sigma_sq.push_back(s2);
    r.alpha_j.push_back(aj);
  }
  if (real) *real = std::move(r);
  return c;
}

StudyCollection gen_logistic_dataset(const LogisticScenario& sc, uint64_t seed,
                                     uint32_t replicate,
                                     LogisticRealization* real) {
  if (sc.k < 1) throw InputError("scenario needs at least one study");
  if (sc.n < 2) throw InputError("study sizes must be at least 2");
  if (sc.sigma_bb < 0.0 || sc.sigma_aa < 0.0)
    throw InputError("random-effect variances must be nonnegative");

  StudyCollection c;
  c.outcome = OutcomeKind::binary;
  LogisticRealization r;

  for (int j = 0; j < sc.k; ++j) {
    RngStream eff(seed, replicate, static_cast<uint32_t>(j),
                  StreamKind::study_effect);
    double bj = sc.beta + std::sqrt(sc.sigma_bb) * eff.next_normal();
    double aj = sc.alpha + std::sqrt(sc.sigma_aa) * eff.next_normal();

    RngStream prop(seed, replicate, static_cast<uint32_t>(j),
                   StreamKind::proportion);
    int m = clamp_arm(sc.n * prop.next_unit(), sc.n);

    IpdStudy s;
    s.id = "s" + std::to_string(j + 1);
    RngStream resp(seed, replicate, static_cast<uint32_t>(j),
                   StreamKind::response);
    double p1 = expit(aj + bj), p0 = expit(aj);
    for (int i = 0; i < sc.n; ++i) {
      int xi = i < m ? 1 : 0;
      s.x.push_back(xi);
      s.y.push_back(resp.next_bernoulli(xi ? p1 : p0) ? 1.0 : 0.0);
    }
    c.order.push_back(s.id);
    c.ipd[s.id] = std::move(s);

    r.n_treated.push_back(m);
    r.beta_j.push_back(bj);
    r.alpha_j.push_back(aj);
  }
  if (real) *real = std::move(r);
  return c;
}

MatchReport run_match_experiment(const MatchConfig& cfg) {
  if (cfg.k1_min < 2 || cfg.k1_min > cfg.k1_max || cfg.k1_max > cfg.k)
    throw InputError("need 2 <= k1_min <= k1_max <= k");
  if (cfg.replicates < 1) throw InputError("need at least one replicate");
  if (cfg.n < 2) throw InputError("study sizes must be at least 2");

  const int rows = cfg.k1_max - cfg.k1_min + 1;
  const int reps = cfg.replicates;
  std::vector<std::vector<int>> overlaps(static_cast<size_t>(reps),
                                         std::vector<int>(rows));
  std::vector<std::vector<double>> ratios(static_cast<size_t>(reps),
                                          std::vector<double>(rows));
  std::vector<std::vector<char>> matches(static_cast<size_t>(reps),
                                         std::vector<char>(rows));

  const std::vector<int> nvec(static_cast<size_t>(cfg.k), cfg.n);

  run_replicates(reps, cfg.workers, [&](int rep) {
    std::vector<double> pis(static_cast<size_t>(cfg.k));
    std::vector<double> sigmas(static_cast<size_t>(cfg.k));
    for (int j = 0; j < cfg.k; ++j) {
      RngStream ps(cfg.seed, static_cast<uint32_t>(rep),
                   static_cast<uint32_t>(j), StreamKind::proportion);
      pis[static_cast<size_t>(j)] = ps.next_unit();
      RngStream vs(cfg.seed, static_cast<uint32_t>(rep),
                   static_cast<uint32_t>(j), StreamKind::variance);
      sigmas[static_cast<size_t>(j)] = vs.next_inv_gamma_int(2, 5.0);
    }
    lmm::VarianceComponents vc{cfg.sigma_alpha_sq, sigmas};
    auto inst = select::selection_weights_lmm(nvec, pis, vc, cfg.k1_min);
    auto bests = select::best_per_size(inst.u, inst.v, cfg.k1_max);
    for (int row = 0; row < rows; ++row) {
      int k1 = cfg.k1_min + row;
      select::SelectionInstance one{inst.u, inst.v, k1};
      auto heur = select::ssa_select(one);
      const auto& best = bests[static_cast<size_t>(k1)];
      double v_heur = lmm::variance_combined(nvec, pis, vc, heur.chosen);
      double v_best = lmm::variance_combined(nvec, pis, vc, best.chosen);
      overlaps[static_cast<size_t>(rep)][static_cast<size_t>(row)] =
          overlap_size(heur.chosen, best.chosen);
      ratios[static_cast<size_t>(rep)][static_cast<size_t>(row)] =
          v_heur / v_best;
      matches[static_cast<size_t>(rep)][static_cast<size_t>(row)] =
          heur.chosen == best.chosen ? 1 : 0;
    }
  });

  MatchReport rep;
  rep.config = cfg;
  const std::string conf = canonical_config(cfg);
  rep.config_hash = hash_bytes(conf.data(), conf.size());
  for (int row = 0; row < rows; ++row) {
    int k1 = cfg.k1_min + row;
    rep.k1.push_back(k1);
    std::vector<long long> hist(static_cast<size_t>(k1) + 1, 0);
    double ratio_sum = 0.0;
    long long match_count = 0;
    for (int r = 0; r < reps; ++r) {
      hist[static_cast<size_t>(
          overlaps[static_cast<size_t>(r)][static_cast<size_t>(row)])] += 1;
      ratio_sum += ratios[static_cast<size_t>(r)][static_cast<size_t>(row)];
      match_count += matches[static_cast<size_t>(r)][static_cast<size_t>(row)];
    }
    rep.overlap.push_back(std::move(hist));
    rep.mean_ratio.push_back(ratio_sum / reps);
    rep.exact_rate.push_back(static_cast<double>(match_count) / reps);
  }
  return rep;
}

SensitivityReport run_sensitivity_experiment(const SensitivityConfig& cfg) {
  if (cfg.replicates < 1) throw InputError("need at least one replicate");
  if (cfg.k1 < 2 || cfg.k1 > cfg.k) throw InputError("need 2 <= k1 <= k");
  if (cfg.pilot_count < 2 || cfg.pilot_count > cfg.k)
    throw InputError("pilot count must lie between 2 and k");
  if (cfg.pi.size() != 1 && cfg.pi.size() != static_cast<size_t>(cfg.k))
    throw InputError("pi must be common or one per study");

  const int reps = cfg.replicates;
  std::vector<int> overlaps(static_cast<size_t>(reps));
  std::vector<double> sa_hats(static_cast<size_t>(reps), 0.0);
  std::vector<double> pooled(static_cast<size_t>(reps), 0.0);
  std::vector<char> rejects(static_cast<size_t>(reps), 0);

  LmmScenario base;
  base.k = cfg.k;
  base.n = {cfg.n};
  base.alpha = cfg.alpha;
  base.beta = cfg.beta;
  base.sigma_alpha_sq = cfg.sigma_alpha_sq;
  base.draw_sigma = true;
  base.shared_sigma_draw = !cfg.heterogeneous;
  base.pi_law = LmmScenario::PiLaw::fixed;
  base.pi = cfg.pi;

  std::vector<int> nvec(static_cast<size_t>(cfg.k), cfg.n);
  std::vector<double> pivec(static_cast<size_t>(cfg.k));
  for (int j = 0; j < cfg.k; ++j)
    pivec[static_cast<size_t>(j)] =
        cfg.pi.size() == 1 ? cfg.pi[0] : cfg.pi[static_cast<size_t>(j)];

  run_replicates(reps, cfg.workers, [&](int r) {
    LmmRealization real;
    StudyCollection data =
        gen_lmm_dataset(base, cfg.seed, static_cast<uint32_t>(r), &real);

    lmm::VarianceComponents vc_true{cfg.sigma_alpha_sq, real.sigma_sq};
    select::ExactOptions serial;
    serial.workers = 1;  // replicates already occupy the workers
    auto known = select::brute_force_select(
        select::selection_weights_lmm(nvec, pivec, vc_true, cfg.k1), serial);

    std::vector<int> est_choice;
    if (cfg.sanity_identical_paths) {
      est_choice = known.chosen;
    } else {
      std::vector<AdStudy> summaries;
      std::vector<double> sig_hat;
      for (const auto& id : data.order) {
        summaries.push_back(summarize_ipd(data.ipd.at(id), OutcomeKind::continuous));
        sig_hat.push_back(lmm::estimate_sigma_j(summaries.back()));
      }

      RngStream ps(cfg.seed, static_cast<uint32_t>(r), 0, StreamKind::pilot);
      auto pilot_idx = draw_subset(ps, cfg.k, cfg.pilot_count);
      std::vector<const IpdStudy*> pilots;
      for (int j : pilot_idx)
        pilots.push_back(&data.ipd.at(data.order[static_cast<size_t>(j)]));
      auto sa = lmm::estimate_sigma_alpha(pilots, OutcomeKind::continuous);

      // Under the homogeneous working assumption the analyst pools the
      // residual variance; per-study estimates are for the regime where
      // variances genuinely differ. Pooling matters: the skewed design has
      // exactly tied optima, and per-study noise would scatter the choice
      // across tied variants instead of tracking the known-components set.
      auto pool = lmm::pooled_sigma(summaries);
      lmm::VarianceComponents vc_est{sa.sigma_alpha_sq, {}};
      if (cfg.heterogeneous)
        vc_est.sigma_sq = std::move(sig_hat);
      else
        vc_est.sigma_sq = {pool.sigma_sq};
      auto est = select::ssa_select(
          select::selection_weights_lmm(nvec, pivec, vc_est, cfg.k1));
      est_choice = est.chosen;
      sa_hats[static_cast<size_t>(r)] = sa.sigma_alpha_sq;
      pooled[static_cast<size_t>(r)] = pool.sigma_sq;
      rejects[static_cast<size_t>(r)] = pool.p_value < 0.05 ? 1 : 0;
    }
    overlaps[static_cast<size_t>(r)] = overlap_size(known.chosen, est_choice);
  });

  SensitivityReport rep;
  rep.config = cfg;
  const std::string conf = canonical_config(cfg);
  rep.config_hash = hash_bytes(conf.data(), conf.size());
  rep.overlap_counts.assign(static_cast<size_t>(cfg.k1) + 1, 0);
  double sa_sum = 0.0, pool_sum = 0.0;
  long long rej = 0;
  for (int r = 0; r < reps; ++r) {
    rep.overlap_counts[static_cast<size_t>(overlaps[static_cast<size_t>(r)])] += 1;
    sa_sum += sa_hats[static_cast<size_t>(r)];
    pool_sum += pooled[static_cast<size_t>(r)];
    rej += rejects[static_cast<size_t>(r)];
  }
  rep.mean_sigma_alpha_hat = sa_sum / reps;
  rep.mean_pooled_sigma = pool_sum / reps;
  rep.bartlett_reject_rate = static_cast<double>(rej) / reps;
  return rep;
}

GlmmSimReport run_glmm_experiment(const GlmmSimConfig& cfg) {
  if (cfg.replicates < 1) throw InputError("need at least one replicate");
  if (cfg.fractions.empty()) throw InputError("no fractions requested");
  for (double f : cfg.fractions)
    if (!(f >= 0.0 && f <= 1.0))
      throw InputError("fractions must lie in [0,1]");

  const int reps = cfg.replicates;
  const int nf = static_cast<int>(cfg.fractions.size());
  const int k = cfg.scenario.k;

  std::vector<std::vector<double>> betas(static_cast<size_t>(reps),
                                         std::vector<double>(nf));
  std::vector<std::vector<double>> res(static_cast<size_t>(reps),
                                       std::vector<double>(nf));

  run_replicates(reps, cfg.workers, [&](int r) {
    LogisticRealization real;
    StudyCollection data = gen_logistic_dataset(cfg.scenario, cfg.seed,
                                                static_cast<uint32_t>(r), &real);
    std::vector<glmm::GlmmStudyFit> fits;
    std::vector<AdStudy> ads;
    for (int j = 0; j < k; ++j) {
      const auto& s = data.ipd.at(data.order[static_cast<size_t>(j)]);
      fits.push_back(glmm::fit_study_logistic(s));
      AdStudy a;
      a.id = s.id;
      a.beta_hat = fits.back().theta_hat(0);
      double det = fits.back().info(0, 0) * fits.back().info(1, 1) -
                   fits.back().info(0, 1) * fits.back().info(1, 0);
      a.var_hat = fits.back().info(1, 1) / det;
      a.n_t = real.n_treated[static_cast<size_t>(j)];
      a.n_c = cfg.scenario.n - a.n_t;
      ads.push_back(a);
    }

    glmm::GlmmOptions opt;
    auto full = glmm::maximize_varcomp(fits, {}, opt);

    for (int fi = 0; fi < nf; ++fi) {
      int k1 = static_cast<int>(std::lround(cfg.fractions[static_cast<size_t>(fi)] * k));
      k1 = std::max(0, std::min(k, k1));
      double beta, var;
      if (k1 == k) {
        beta = full.beta_hat;
        var = full.variance_beta;
      } else if (k1 == 0) {
        auto fit = glmm::maximize_varcomp({}, ads, opt);
        beta = fit.beta_hat;
        var = fit.variance_beta;
      } else {
        RngStream ps(cfg.seed, static_cast<uint32_t>(r),
                     static_cast<uint32_t>(1000 + fi), StreamKind::partition);
        auto s1 = draw_subset(ps, k, k1);
        std::vector<glmm::GlmmStudyFit> f1;
        std::vector<AdStudy> a2;
        std::vector<char> in(static_cast<size_t>(k), 0);
        for (int j : s1) in[static_cast<size_t>(j)] = 1;
        for (int j = 0; j < k; ++j) {
          if (in[static_cast<size_t>(j)])
            f1.push_back(fits[static_cast<size_t>(j)]);
          else
            a2.push_back(ads[static_cast<size_t>(j)]);
        }
        auto fit = glmm::maximize_varcomp(f1, a2, opt);
        beta = fit.beta_hat;
        var = fit.variance_beta;
      }
      betas[static_cast<size_t>(r)][static_cast<size_t>(fi)] = beta;
      res[static_cast<size_t>(r)][static_cast<size_t>(fi)] =
          full.variance_beta / var;
    }
  });

  GlmmSimReport rep;
  rep.config = cfg;
  const std::string conf = canonical_config(cfg);
  rep.config_hash = hash_bytes(conf.data(), conf.size());
  for (int fi = 0; fi < nf; ++fi) {
    GlmmSimRow row;
    row.fraction = cfg.fractions[static_cast<size_t>(fi)];
    double sum = 0.0, sumsq = 0.0, mse = 0.0, re_sum = 0.0;
    for (int r = 0; r < reps; ++r) {
      double b = betas[static_cast<size_t>(r)][static_cast<size_t>(fi)];
      sum += b;
      sumsq += b * b;
      double e = b - cfg.scenario.beta;
      mse += e * e;
      re_sum += res[static_cast<size_t>(r)][static_cast<size_t>(fi)];
    }
    row.estimate = sum / reps;
    row.bias = row.estimate - cfg.scenario.beta;
    double var = sumsq / reps - row.estimate * row.estimate;
    row.se = std::sqrt(std::max(0.0, var));
    row.mse = mse / reps;
    row.rel_eff = re_sum / reps;
    rep.rows.push_back(row);
  }
  return rep;
}

FigureData re_figure(const std::vector<int>& n, const std::vector<double>& pi,
                     const lmm::VarianceComponents& vc, int k1_min, int k1_max) {
  const int k = static_cast<int>(n.size());
  if (k1_min < 1 || k1_min > k1_max || k1_max > k)
    throw InputError("need 1 <= k1_min <= k1_max <= k");
  double total = 0.0;
  for (int s = k1_min; s <= k1_max; ++s) total += select::n_subsets(k, s);
  if (total > 1e6)
    throw InputError("full combination dump limited to 1e6 subsets");

  FigureData f;
  double v_ipd = lmm::variance_ipd_ma(n, pi, vc);
  f.ad_ma_re = v_ipd / lmm::variance_ad_ma(n, pi, vc);

  for (int k1 = k1_min; k1 <= k1_max; ++k1) {
    std::vector<int> subset;
    long long rank = 0;
    auto walk = [&](auto&& self, int start) -> void {
      if (static_cast<int>(subset.size()) == k1) {
        double re = v_ipd / lmm::variance_combined(n, pi, vc, subset);
        f.combos.push_back({k1, rank++, re});
        return;
      }
      int last = k - (k1 - static_cast<int>(subset.size()));
      for (int i = start; i <= last; ++i) {
        subset.push_back(i);
        self(self, i + 1);
        subset.pop_back();
      }
    };
    walk(walk, 0);
  }

  std::vector<int> k1_list;
  for (int k1 = k1_min; k1 <= k1_max; ++k1) k1_list.push_back(k1);
  f.curve = select::re_curve(n, pi, vc, k1_list, select::Method::exact);
  return f;
}

void write_overlap_csv(const MatchReport& r, std::ostream& os) {
  os << "k1,overlap,count\n";
  for (size_t row = 0; row < r.k1.size(); ++row)
    for (size_t o = 0; o < r.overlap[row].size(); ++o)
      os << r.k1[row] << ',' << o << ',' << r.overlap[row][o] << '\n';
}

void write_summary_csv(const MatchReport& r, std::ostream& os) {
  os << "k1,mean_variance_ratio,exact_match_rate\n";
  for (size_t row = 0; row < r.k1.size(); ++row)
    os << r.k1[row] << ',' << format_double(r.mean_ratio[row]) << ','
       << format_double(r.exact_rate[row]) << '\n';
}

void write_overlap_csv(const SensitivityReport& r, std::ostream& os) {
  os << "overlap,count\n";
  for (size_t o = 0; o < r.overlap_counts.size(); ++o)
    os << o << ',' << r.overlap_counts[o] << '\n';
}

void write_summary_csv(const SensitivityReport& r, std::ostream& os) {
  os << "mean_sigma_alpha_hat,mean_pooled_sigma,bartlett_reject_rate\n";
  os << format_double(r.mean_sigma_alpha_hat) << ','
     << format_double(r.mean_pooled_sigma) << ','
     << format_double(r.bartlett_reject_rate) << '\n';
}

void write_csv(const GlmmSimReport& r, std::ostream& os) {
  os << "fraction,estimate,bias,se,mse,rel_eff\n";
  for (const auto& row : r.rows)
    os << format_double(row.fraction) << ',' << format_double(row.estimate)
       << ',' << format_double(row.bias) << ',' << format_double(row.se) << ','
       << format_double(row.mse) << ',' << format_double(row.rel_eff) << '\n';
}

void write_combo_csv(const FigureData& f, std::ostream& os) {
  os << "k1,combination,re\n";
  for (const auto& c : f.combos)
    os << c.k1 << ',' << c.rank << ',' << format_double(c.re) << '\n';
}

void write_curve_csv(const FigureData& f, std::ostream& os) {
  os << "k1,n_combinations,max_re,max_set,min_re,min_set\n";
  for (const auto& row : f.curve) {
    os << row.k1 << ',' << format_double(row.n_combinations) << ','
       << format_double(row.max_re) << ',' << join_ids_1based(row.argmax) << ',';
    if (std::isnan(row.min_re))
      os << ',';
    else
      os << format_double(row.min_re) << ',' << join_ids_1based(row.argmin);
    os << '\n';
  }
}

std::string canonical_config(const MatchConfig& c) {
  std::ostringstream os;
  os << "match;k=" << c.k << ";n=" << c.n << ";sa=" << c.sigma_alpha_sq
     << ";k1=" << c.k1_min << ".." << c.k1_max << ";reps=" << c.replicates
     << ";seed=" << c.seed;
  return os.str();
}

std::string canonical_config(const SensitivityConfig& c) {
  std::ostringstream os;
  os << "sensitivity;het=" << c.heterogeneous << ";k=" << c.k << ";n=" << c.n
     << ";k1=" << c.k1 << ";alpha=" << c.alpha << ";beta=" << c.beta
     << ";sa=" << c.sigma_alpha_sq << ";pi=";
  for (double p : c.pi) os << p << '|';
  os << ";pilots=" << c.pilot_count << ";reps=" << c.replicates
     << ";seed=" << c.seed << ";sanity=" << c.sanity_identical_paths;
  return os.str();
}

std::string canonical_config(const GlmmSimConfig& c) {
  std::ostringstream os;
  os << "glmm;k=" << c.scenario.k << ";n=" << c.scenario.n
     << ";beta=" << c.scenario.beta << ";alpha=" << c.scenario.alpha
     << ";sbb=" << c.scenario.sigma_bb << ";saa=" << c.scenario.sigma_aa
     << ";fracs=";
  for (double f : c.fractions) os << f << '|';
  os << ";reps=" << c.replicates << ";seed=" << c.seed;
  return os.str();
}

}  // namespace metamix::sim
