// Command-line driver: ingestion, estimation, selection, efficiency
// curves, and the Monte Carlo experiments. Orchestration is single
// threaded; the parallel work happens inside the library. Data goes to
// CSV files in the output directory, stdout carries a human summary,
// and every run writes a manifest sufficient to reproduce it.
//
// Exit codes: 0 ok, 2 bad input, 3 quantity not estimable, 4 iteration
// failed to converge.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "metamix/csv.hpp"
#include "metamix/errors.hpp"
#include "metamix/glmm.hpp"
#include "metamix/lmm.hpp"
#include "metamix/rng.hpp"
#include "metamix/select.hpp"
#include "metamix/sim.hpp"
#include "metamix/summarize.hpp"
#include "metamix/version.hpp"

namespace fs = std::filesystem;
using namespace metamix;

namespace {

std::string hex64(uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Key=value run record; enough to reproduce the outputs exactly.
class Manifest {
 public:
  void add(const std::string& k, const std::string& v) {
    rows_.emplace_back(k, v);
  }
  void add(const std::string& k, double v) { add(k, format_double(v)); }
  void add(const std::string& k, long long v) { add(k, std::to_string(v)); }
  void add_input(const std::string& k, const std::string& path) {
    if (path.empty()) return;
    add("input." + k, path);
    add("input." + k + ".fnv", hex64(hash_file(path)));
  }
  void write(const fs::path& dir) const {
    std::ofstream os(dir / "manifest.txt");
    if (!os) throw InputError("cannot write manifest in " + dir.string());
    for (const auto& [k, v] : rows_) os << k << '=' << v << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  std::ofstream os(dir / name);
  if (!os) throw InputError("cannot write " + (dir / name).string());
  return os;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ';';
    out += ids[i];
  }
  return out;
}

std::string join_1based(const std::vector<int>& idx) {
  std::string out;
  for (size_t i = 0; i < idx.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(idx[i] + 1);
  }
  return out;
}

// Flags shared by the data-driven subcommands.
struct CommonOpts {
  std::string ipd_path, ad_path;
  std::string out_dir = ".";
  std::string model = "lmm";
  // NaN = not given; a parse-time callback would break config-file merging
  // by forcing requirement checks before the file is read.
  double sigma_alpha = std::numeric_limits<double>::quiet_NaN();
  bool sigma_alpha_set() const { return !std::isnan(sigma_alpha); }
  std::vector<std::string> pilot_ids;
  int pilot_count = 0;
  uint64_t seed = 20260822;
  int workers = 0;

  OutcomeKind kind() const {
    return model == "lmm" ? OutcomeKind::continuous : OutcomeKind::binary;
  }
};

void add_common(CLI::App* sub, CommonOpts& o, bool ipd, bool ad) {
  if (ipd)
    sub->add_option("--ipd", o.ipd_path, "individual-level CSV")
        ->check(CLI::ExistingFile);
  if (ad)
    sub->add_option("--ad", o.ad_path, "summary-level CSV")
        ->check(CLI::ExistingFile);
  sub->add_option("--model", o.model, "outcome model")
      ->check(CLI::IsMember({"lmm", "logistic"}))
      ->capture_default_str();
  sub->add_option("--out", o.out_dir, "output directory")
      ->envname("METAMIX_OUT")
      ->capture_default_str();
  sub->add_option("--seed", o.seed, "stream seed")->capture_default_str();
  sub->add_option("--workers", o.workers, "worker threads (0 = all)")
      ->capture_default_str();
}

void add_sigma_alpha(CLI::App* sub, CommonOpts& o, bool pilots) {
  sub->add_option("--sigma-alpha", o.sigma_alpha,
                  "known between-study intercept variance");
  if (pilots) {
    sub->add_option("--pilot", o.pilot_ids,
                    "pilot study ids for variance-component estimation")
        ->delimiter(',');
    sub->add_option("--pilot-count", o.pilot_count,
                    "number of seeded pilot studies");
  }
}

// IPD file first, then the summary file; ids must not repeat.
StudyCollection load_inputs(const CommonOpts& o) {
  if (o.ipd_path.empty() && o.ad_path.empty())
    throw InputError("need --ipd and/or --ad");
  StudyCollection c;
  c.outcome = o.kind();
  if (!o.ipd_path.empty()) {
    auto a = load_ipd(o.ipd_path, c.outcome);
    for (auto& id : a.order) {
      c.order.push_back(id);
      c.ipd[id] = std::move(a.ipd[id]);
    }
  }
  if (!o.ad_path.empty()) {
    auto b = load_ad(o.ad_path, c.outcome);
    for (auto& id : b.order) {
      if (c.has_ipd(id) || c.has_ad(id))
        throw InputError("study id '" + id + "' appears twice");
      c.order.push_back(id);
      c.ad[id] = std::move(b.ad[id]);
    }
  }
  return c;
}

// Per-study design arrays in input order; IPD studies are summarized so
// every study has a summary row.
struct Design {
  std::vector<int> n;
  std::vector<double> pi;
  std::vector<AdStudy> summaries;
  std::vector<char> is_ipd;
  std::vector<int> s1_idx, all_idx;
  Partition part;
};

Design build_design(const StudyCollection& c) {
  Design d;
  for (int i = 0; i < c.size(); ++i) {
    const auto& id = c.order[static_cast<size_t>(i)];
    AdStudy s;
    if (c.has_ipd(id)) {
      s = summarize_ipd(c.ipd.at(id), c.outcome);
      d.part.s1.push_back(id);
      d.s1_idx.push_back(i);
      d.is_ipd.push_back(1);
    } else {
      s = c.ad.at(id);
      d.part.s2.push_back(id);
      d.is_ipd.push_back(0);
    }
    d.n.push_back(s.n());
    d.pi.push_back(s.pi());
    d.summaries.push_back(std::move(s));
    d.all_idx.push_back(i);
  }
  return d;
}

// Resolution order: explicit value, then pilot IPD studies (named, or a
// seeded draw of --pilot-count, or all of them), else not estimable.
double resolve_sigma_alpha(const CommonOpts& o, const StudyCollection& c,
                           Manifest& man) {
  if (o.sigma_alpha_set()) {
    if (o.sigma_alpha < 0.0) throw InputError("--sigma-alpha must be >= 0");
    man.add("sigma_alpha", o.sigma_alpha);
    man.add("sigma_alpha.source", "flag");
    return o.sigma_alpha;
  }
  std::vector<std::string> ipd_ids;
  for (const auto& id : c.order)
    if (c.has_ipd(id)) ipd_ids.push_back(id);

  std::vector<std::string> chosen;
  if (!o.pilot_ids.empty()) {
    for (const auto& id : o.pilot_ids) {
      if (!c.has_ipd(id))
        throw InputError("pilot study '" + id + "' has no individual records");
      chosen.push_back(id);
    }
  } else if (o.pilot_count > 0) {
    int k = static_cast<int>(ipd_ids.size());
    if (o.pilot_count > k)
      throw InputError("--pilot-count exceeds the IPD study count");
    RngStream st(o.seed, 0, 0, StreamKind::pilot);
    std::vector<int> pool(static_cast<size_t>(k));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < o.pilot_count; ++i) {
      int j = i + static_cast<int>(st.next_below(static_cast<uint64_t>(k - i)));
      std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    }
    pool.resize(static_cast<size_t>(o.pilot_count));
    std::sort(pool.begin(), pool.end());
    for (int j : pool) chosen.push_back(ipd_ids[static_cast<size_t>(j)]);
  } else {
    chosen = ipd_ids;
  }
  if (chosen.size() < 2)
    throw EstimabilityError(
        "sigma_alpha_sq needs --sigma-alpha or at least two pilot IPD studies");

  std::vector<const IpdStudy*> pilots;
  for (const auto& id : chosen) pilots.push_back(&c.ipd.at(id));
  auto est = lmm::estimate_sigma_alpha(pilots, c.outcome);
  man.add("sigma_alpha", est.sigma_alpha_sq);
  man.add("sigma_alpha.source",
          "pilot:" + join_ids(chosen) + (est.truncated ? " (truncated)" : ""));
  return est.sigma_alpha_sq;
}

glmm::LogisticWeightMode parse_mode(const std::string& mode,
                                    const std::vector<AdStudy>& ads) {
  if (mode == "rare") return glmm::LogisticWeightMode::rare_disease;
  if (mode == "2x2") return glmm::LogisticWeightMode::two_by_two;
  // auto: reconstruct from the 2x2 tables whenever every row carries counts
  for (const auto& s : ads)
    if (!s.cases_t || !s.cases_c) return glmm::LogisticWeightMode::rare_disease;
  return glmm::LogisticWeightMode::two_by_two;
}

// Closed-form variance pieces for one summary row. Counted tables use the
// cells (0.5-corrected when a cell is empty); otherwise h comes from the
// reported variance and g from the arm ratio and the odds ratio.
glmm::LogisticSelectionTerms terms_from_summary(const AdStudy& s, double sa,
                                                glmm::LogisticWeightMode mode,
                                                bool counted) {
  if (counted || mode == glmm::LogisticWeightMode::two_by_two) {
    if (!s.cases_t || !s.cases_c)
      throw InputError("study '" + s.id + "' has no event counts");
    double ct = *s.cases_t, cc = *s.cases_c;
    double nt = s.n_t, nc = s.n_c;
    if (ct == 0.0 || cc == 0.0 || ct == nt || cc == nc) {
      ct += 0.5;
      cc += 0.5;
      nt += 1.0;
      nc += 1.0;
    }
    return glmm::logistic_terms(s.n_t, s.n_c, ct / nt, cc / nc, sa);
  }
  glmm::LogisticSelectionTerms t;
  t.p1 = t.p0 = std::numeric_limits<double>::quiet_NaN();
  t.h = s.var_hat;
  t.g = 1.0 / (1.0 + static_cast<double>(s.n_c) / s.n_t * std::exp(-s.beta_hat));
  t.a = 1.0 / (t.h * (1.0 - t.g));
  t.b = 1.0 / (t.h * t.g);
  t.c = sa * t.h + 1.0 / (t.a * t.b);
  return t;
}

struct EstimateRow {
  std::string method;
  std::optional<double> estimate;
  double se = 0.0, variance = 0.0, re = 0.0;
};

void emit_estimate(const std::vector<EstimateRow>& rows, const fs::path& dir) {
  auto os = open_out(dir, "estimate.csv");
  os << "method,estimate,se,variance,re\n";
  for (const auto& r : rows) {
    os << r.method << ',';
    if (r.estimate) os << format_double(*r.estimate);
    os << ',' << format_double(r.se) << ',' << format_double(r.variance) << ','
       << format_double(r.re) << '\n';
  }
  for (const auto& r : rows) {
    std::cout << r.method << ": ";
    if (r.estimate)
      std::cout << "estimate " << *r.estimate << " (se " << r.se << "), ";
    std::cout << "variance " << r.variance << ", re " << r.re << '\n';
  }
}

int cmd_estimate(const CommonOpts& o, bool pooled, const std::string& mode_str,
                 bool correlated) {
  fs::create_directories(o.out_dir);
  Manifest man;
  man.add("version", kVersion);
  man.add("subcommand", "estimate");
  man.add("model", o.model);
  man.add_input("ipd", o.ipd_path);
  man.add_input("ad", o.ad_path);

  StudyCollection c = load_inputs(o);
  Design d = build_design(c);
  double sa = resolve_sigma_alpha(o, c, man);
  std::vector<EstimateRow> rows;

  if (c.outcome == OutcomeKind::continuous) {
    std::vector<double> sig;
    for (const auto& s : d.summaries) sig.push_back(lmm::estimate_sigma_j(s));
    lmm::VarianceComponents vc{sa, sig};
    if (pooled) {
      auto pool = lmm::pooled_sigma(d.summaries);
      vc.sigma_sq = {pool.sigma_sq};
      man.add("pooled_sigma", pool.sigma_sq);
      man.add("pooled_sigma.bartlett_p", pool.p_value);
      std::cout << "pooled residual variance " << pool.sigma_sq
                << " (homogeneity p = " << pool.p_value << ")\n";
    }

    double v_ipd = lmm::variance_ipd_ma(d.n, d.pi, vc);
    double v_ad = lmm::variance_ad_ma(d.n, d.pi, vc);
    double wsum = 0.0, bsum = 0.0;
    for (int j = 0; j < c.size(); ++j) {
      double nj = d.n[static_cast<size_t>(j)], pj = d.pi[static_cast<size_t>(j)];
      double w = nj * pj * (1.0 - pj) / vc.sigma_for(j);
      wsum += w;
      bsum += w * d.summaries[static_cast<size_t>(j)].beta_hat;
    }

    if (d.part.s1.empty()) {
      std::cout << "note: alpha is not estimable from summaries alone\n";
      rows.push_back({"ad_ma", bsum / wsum, std::sqrt(v_ad), v_ad, v_ipd / v_ad});
    } else {
      auto est = lmm::combined_estimate_lmm(c, d.part, vc);
      double v_mix = lmm::variance_combined(d.n, d.pi, vc, d.s1_idx);
      bool all_ipd = d.part.s2.empty();
      rows.push_back({"ipd_ma",
                      all_ipd ? std::optional<double>(est.beta_hat) : std::nullopt,
                      std::sqrt(v_ipd), v_ipd, 1.0});
      rows.push_back({"ipd_ad_ma", est.beta_hat, std::sqrt(v_mix), v_mix,
                      v_ipd / v_mix});
      rows.push_back({"ad_ma", bsum / wsum, std::sqrt(v_ad), v_ad, v_ipd / v_ad});
      std::cout << "alpha estimate " << est.alpha_hat << '\n';
    }
  } else {
    glmm::GlmmOptions gopt;
    gopt.independent = !correlated;
    auto fit = glmm::combined_estimate_glmm(c, d.part, gopt);
    {
      auto os = open_out(o.out_dir, "glmm_fit.csv");
      os << "beta_hat,se,alpha_hat,sigma_bb,sigma_ba,sigma_aa,loglik,"
            "converged,boundary\n";
      os << format_double(fit.beta_hat) << ','
         << format_double(std::sqrt(fit.variance_beta)) << ','
         << format_double(fit.alpha_hat) << ','
         << format_double(fit.sigma_hat.bb) << ','
         << format_double(fit.sigma_hat.ba) << ','
         << format_double(fit.sigma_hat.aa) << ','
         << format_double(fit.loglik) << ',' << (fit.converged ? 1 : 0) << ','
         << (fit.boundary ? 1 : 0) << '\n';
    }
    man.add("glmm.boundary", static_cast<long long>(fit.boundary ? 1 : 0));

    auto mode = parse_mode(mode_str, d.summaries);
    std::vector<glmm::LogisticSelectionTerms> terms;
    for (int j = 0; j < c.size(); ++j)
      terms.push_back(terms_from_summary(d.summaries[static_cast<size_t>(j)],
                                         sa, mode,
                                         d.is_ipd[static_cast<size_t>(j)] != 0));
    double v_ipd = glmm::logistic_variance_combined(terms, d.all_idx, sa);
    double v_ad = glmm::logistic_variance_combined(terms, {}, sa);
    double wsum = 0.0, bsum = 0.0;
    for (int j = 0; j < c.size(); ++j) {
      double w = 1.0 / terms[static_cast<size_t>(j)].h;
      wsum += w;
      bsum += w * d.summaries[static_cast<size_t>(j)].beta_hat;
    }

    if (d.part.s1.empty()) {
      std::cout << "note: alpha is not estimable from summaries alone\n";
      rows.push_back({"ad_ma", bsum / wsum, std::sqrt(v_ad), v_ad, v_ipd / v_ad});
    } else {
      double v_mix = glmm::logistic_variance_combined(terms, d.s1_idx, sa);
      bool all_ipd = d.part.s2.empty();
      rows.push_back({"ipd_ma",
                      all_ipd ? std::optional<double>(fit.beta_hat) : std::nullopt,
                      std::sqrt(v_ipd), v_ipd, 1.0});
      rows.push_back({"ipd_ad_ma", fit.beta_hat, std::sqrt(v_mix), v_mix,
                      v_ipd / v_mix});
      rows.push_back({"ad_ma", bsum / wsum, std::sqrt(v_ad), v_ad, v_ipd / v_ad});
    }
  }

  emit_estimate(rows, o.out_dir);
  man.write(o.out_dir);
  return 0;
}

int cmd_select(const CommonOpts& o, int k1, const std::string& method,
               const std::string& mode_str) {
  if (o.ad_path.empty()) throw InputError("select needs --ad");
  fs::create_directories(o.out_dir);
  Manifest man;
  man.add("version", kVersion);
  man.add("subcommand", "select");
  man.add("model", o.model);
  man.add("k1", static_cast<long long>(k1));
  man.add("method", method);
  man.add_input("ad", o.ad_path);

  if (!o.sigma_alpha_set())
    throw EstimabilityError(
        "selection scores need --sigma-alpha (components are inputs here)");
  double sa = o.sigma_alpha;
  man.add("sigma_alpha", sa);

  StudyCollection c = load_ad(o.ad_path, o.kind());
  std::vector<AdStudy> ads;
  for (const auto& id : c.order) ads.push_back(c.ad.at(id));

  select::SelectionInstance inst;
  inst.k1 = k1;
  std::vector<int> nvec;
  std::vector<double> pivec;
  lmm::VarianceComponents vc{sa, {}};
  std::vector<glmm::LogisticSelectionTerms> terms;
  if (c.outcome == OutcomeKind::continuous) {
    for (const auto& s : ads) {
      nvec.push_back(s.n());
      pivec.push_back(s.pi());
      vc.sigma_sq.push_back(lmm::estimate_sigma_j(s));
    }
    inst = select::selection_weights_lmm(nvec, pivec, vc, k1);
  } else {
    auto mode = parse_mode(mode_str, ads);
    man.add("mode", mode == glmm::LogisticWeightMode::rare_disease ? "rare" : "2x2");
    auto lw = glmm::selection_weights_logistic(ads, sa, mode);
    if (!lw.corrected.empty())
      std::cout << "note: 0.5 cell correction applied to "
                << join_ids(lw.corrected) << '\n';
    inst.u = lw.u;
    inst.v = lw.v;
    for (const auto& s : ads) terms.push_back(terms_from_summary(s, sa, mode, false));
  }

  select::SelectionResult res;
  if (method == "exact") {
    select::ExactOptions eo;
    eo.workers = o.workers;
    res = select::brute_force_select(inst, eo);
  } else if (method == "ssa") {
    res = select::ssa_select(inst);
  } else {
    res = select::extremes_select(inst.u, k1);
  }
  double obj = select::objective(inst.u, inst.v, res.chosen);

  std::vector<int> all(ads.size());
  std::iota(all.begin(), all.end(), 0);
  double v, v_ipd;
  if (c.outcome == OutcomeKind::continuous) {
    v = lmm::variance_combined(nvec, pivec, vc, res.chosen);
    v_ipd = lmm::variance_ipd_ma(nvec, pivec, vc);
  } else {
    v = glmm::logistic_variance_combined(terms, res.chosen, sa);
    v_ipd = glmm::logistic_variance_combined(terms, all, sa);
  }

  {
    auto os = open_out(o.out_dir, "select.csv");
    os << "k1,method,indices,objective,variance,re\n";
    os << k1 << ',' << method << ',' << join_1based(res.chosen) << ','
       << format_double(obj) << ',' << format_double(v) << ','
       << format_double(v_ipd / v) << '\n';
  }
  std::vector<std::string> ids;
  for (int j : res.chosen) ids.push_back(c.order[static_cast<size_t>(j)]);
  std::cout << "chosen: " << join_ids(ids) << " (objective " << obj << ", re "
            << v_ipd / v << ")"
            << (res.indifferent ? " [all subsets equivalent]" : "") << '\n';
  man.write(o.out_dir);
  return 0;
}

int cmd_re_curve(const CommonOpts& o, int k1_min, int k1_max,
                 const std::string& method) {
  if (o.ad_path.empty()) throw InputError("re-curve needs --ad");
  if (o.model != "lmm")
    throw InputError("the efficiency curve is defined for the linear model");
  fs::create_directories(o.out_dir);
  Manifest man;
  man.add("version", kVersion);
  man.add("subcommand", "re-curve");
  man.add("method", method);
  man.add_input("ad", o.ad_path);
  if (!o.sigma_alpha_set())
    throw EstimabilityError("the curve needs --sigma-alpha");
  man.add("sigma_alpha", o.sigma_alpha);

  StudyCollection c = load_ad(o.ad_path, OutcomeKind::continuous);
  std::vector<int> nvec;
  std::vector<double> pivec;
  lmm::VarianceComponents vc{o.sigma_alpha, {}};
  for (const auto& id : c.order) {
    const auto& s = c.ad.at(id);
    nvec.push_back(s.n());
    pivec.push_back(s.pi());
    vc.sigma_sq.push_back(lmm::estimate_sigma_j(s));
  }

  int k = c.size();
  if (k1_max == 0) k1_max = k;
  if (k1_min < 1 || k1_min > k1_max || k1_max > k)
    throw InputError("need 1 <= k1-min <= k1-max <= k");
  std::vector<int> k1_list;
  for (int k1 = k1_min; k1 <= k1_max; ++k1) k1_list.push_back(k1);
  man.add("k1_range", std::to_string(k1_min) + ".." + std::to_string(k1_max));

  select::ExactOptions eo;
  eo.workers = o.workers;
  auto rows = select::re_curve(nvec, pivec, vc, k1_list,
                               method == "ssa" ? select::Method::ssa
                                               : select::Method::exact,
                               eo);
  {
    auto os = open_out(o.out_dir, "curve.csv");
    os << "k1,n_combinations,max_re,max_set,min_re,min_set\n";
    for (const auto& r : rows) {
      os << r.k1 << ',' << format_double(r.n_combinations) << ','
         << format_double(r.max_re) << ',' << join_1based(r.argmax) << ',';
      if (!std::isnan(r.min_re))
        os << format_double(r.min_re) << ',' << join_1based(r.argmin);
      else
        os << ',';
      os << '\n';
    }
  }
  std::cout << "curve over k1 = " << k1_min << ".." << k1_max << " written ("
            << rows.size() << " rows)\n";
  man.write(o.out_dir);
  return 0;
}

int cmd_simulate(const CommonOpts& o, const std::string& experiment, int reps,
                 bool heterogeneous, bool sanity, const std::string& scenario) {
  fs::create_directories(o.out_dir);
  Manifest man;
  man.add("version", kVersion);
  man.add("subcommand", "simulate");
  man.add("experiment", experiment);
  man.add("seed", static_cast<long long>(o.seed));
  man.add("workers", static_cast<long long>(o.workers));

  if (experiment == "match") {
    sim::MatchConfig cfg;
    cfg.seed = o.seed;
    cfg.workers = o.workers;
    if (reps > 0) cfg.replicates = reps;
    auto rep = sim::run_match_experiment(cfg);
    man.add("replicates", static_cast<long long>(cfg.replicates));
    man.add("config_hash", hex64(rep.config_hash));
    auto os1 = open_out(o.out_dir, "match_overlap.csv");
    sim::write_overlap_csv(rep, os1);
    auto os2 = open_out(o.out_dir, "match_summary.csv");
    sim::write_summary_csv(rep, os2);
    for (size_t i = 0; i < rep.k1.size(); ++i)
      std::cout << "k1 " << rep.k1[i] << ": mean ratio " << rep.mean_ratio[i]
                << ", exact " << rep.exact_rate[i] << '\n';
  } else if (experiment == "sensitivity") {
    sim::SensitivityConfig cfg;
    cfg.seed = o.seed;
    cfg.workers = o.workers;
    cfg.heterogeneous = heterogeneous;
    cfg.sanity_identical_paths = sanity;
    if (reps > 0) cfg.replicates = reps;
    if (o.sigma_alpha_set()) cfg.sigma_alpha_sq = o.sigma_alpha;
    auto rep = sim::run_sensitivity_experiment(cfg);
    man.add("replicates", static_cast<long long>(cfg.replicates));
    man.add("heterogeneous", static_cast<long long>(heterogeneous ? 1 : 0));
    man.add("config_hash", hex64(rep.config_hash));
    auto os1 = open_out(o.out_dir, "sensitivity_overlap.csv");
    sim::write_overlap_csv(rep, os1);
    auto os2 = open_out(o.out_dir, "sensitivity_summary.csv");
    sim::write_summary_csv(rep, os2);
    long long ge4 = 0, tot = 0;
    for (size_t v = 0; v < rep.overlap_counts.size(); ++v) {
      tot += rep.overlap_counts[v];
      if (static_cast<int>(v) >= cfg.k1 - 1) ge4 += rep.overlap_counts[v];
    }
    std::cout << "overlap >= " << cfg.k1 - 1 << " in "
              << static_cast<double>(ge4) / tot * 100.0 << "% of replicates\n";
  } else if (experiment == "glmm") {
    sim::GlmmSimConfig cfg;
    cfg.seed = o.seed;
    cfg.workers = o.workers;
    if (reps > 0) cfg.replicates = reps;
    auto rep = sim::run_glmm_experiment(cfg);
    man.add("replicates", static_cast<long long>(cfg.replicates));
    man.add("config_hash", hex64(rep.config_hash));
    auto os = open_out(o.out_dir, "glmm_sim.csv");
    sim::write_csv(rep, os);
    for (const auto& r : rep.rows)
      std::cout << "fraction " << r.fraction << ": estimate " << r.estimate
                << ", re " << r.rel_eff << '\n';
  } else if (experiment == "figure") {
    std::vector<double> pi;
    if (scenario == "skewed")
      pi = {0.1, 0.1, 0.1, 0.1, 0.2, 0.8, 0.9, 0.9, 0.9, 0.9};
    else
      pi = {0.1, 0.2, 0.3, 0.3, 0.3, 0.5, 0.6, 0.6, 0.8, 0.8};
    double sa = o.sigma_alpha_set() ? o.sigma_alpha : 0.025;
    std::vector<int> n(pi.size(), 10);
    lmm::VarianceComponents vc{sa, {2.5}};
    auto fd = sim::re_figure(n, pi, vc, 1, static_cast<int>(pi.size()));
    man.add("scenario", scenario);
    man.add("sigma_alpha", sa);
    auto os1 = open_out(o.out_dir, "combos.csv");
    sim::write_combo_csv(fd, os1);
    auto os2 = open_out(o.out_dir, "curve.csv");
    sim::write_curve_csv(fd, os2);
    std::cout << "summary-only relative efficiency " << fd.ad_ma_re << '\n';
  } else {
    throw InputError("unknown experiment '" + experiment + "'");
  }
  man.write(o.out_dir);
  return 0;
}

int cmd_summarize(const CommonOpts& o) {
  if (o.ipd_path.empty()) throw InputError("summarize needs --ipd");
  fs::create_directories(o.out_dir);
  Manifest man;
  man.add("version", kVersion);
  man.add("subcommand", "summarize");
  man.add("model", o.model);
  man.add_input("ipd", o.ipd_path);

  StudyCollection c = load_ipd(o.ipd_path, o.kind());
  StudyCollection s = summarize_collection(c);
  write_ad(s, (fs::path(o.out_dir) / "ad_summary.csv").string());
  for (const auto& id : s.order) {
    const auto& a = s.ad.at(id);
    std::cout << id << ": beta_hat " << a.beta_hat << ", var_hat " << a.var_hat
              << '\n';
  }
  man.write(o.out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"combined analysis of individual-level and summary-level studies"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "INI config file; command-line flags win");
  app.require_subcommand(1);

  CommonOpts est_o, sel_o, rec_o, sim_o, sum_o;
  bool pooled = false, correlated = false;
  std::string est_mode = "auto", sel_mode = "auto";
  int k1 = 0;
  std::string sel_method = "exact", rec_method = "exact";
  int k1_min = 1, k1_max = 0;
  std::string experiment, scenario = "balanced";
  int reps = 0;
  bool heterogeneous = false, sanity = false;

  auto* est = app.add_subcommand("estimate",
                                 "pooled treatment effect from mixed inputs");
  add_common(est, est_o, true, true);
  add_sigma_alpha(est, est_o, true);
  est->add_flag("--pooled-sigma", pooled,
                "pool residual variances across studies");
  est->add_flag("--correlated", correlated,
                "allow correlated random slope and intercept");
  est->add_option("--mode", est_mode, "summary reconstruction for binary data")
      ->check(CLI::IsMember({"auto", "rare", "2x2"}));

  auto* sel = app.add_subcommand("select", "which summary studies to upgrade");
  add_common(sel, sel_o, false, true);
  add_sigma_alpha(sel, sel_o, false);
  sel->add_option("--k1", k1, "number of studies to upgrade")->required();
  sel->add_option("--method", sel_method, "search strategy")
      ->check(CLI::IsMember({"exact", "ssa", "extremes"}))
      ->capture_default_str();
  sel->add_option("--mode", sel_mode, "summary reconstruction for binary data")
      ->check(CLI::IsMember({"auto", "rare", "2x2"}));

  auto* rec = app.add_subcommand("re-curve",
                                 "efficiency range per upgraded-set size");
  add_common(rec, rec_o, false, true);
  add_sigma_alpha(rec, rec_o, false);
  rec->add_option("--k1-min", k1_min, "smallest set size")->capture_default_str();
  rec->add_option("--k1-max", k1_max, "largest set size (0 = all studies)");
  rec->add_option("--method", rec_method, "search strategy")
      ->check(CLI::IsMember({"exact", "ssa"}))
      ->capture_default_str();

  auto* simc = app.add_subcommand("simulate", "seeded Monte Carlo experiments");
  add_common(simc, sim_o, false, false);
  add_sigma_alpha(simc, sim_o, false);
  simc->add_option("--experiment", experiment,
                   "match | sensitivity | glmm | figure")
      ->required();
  simc->add_option("--reps", reps, "replicates (0 = experiment default)");
  simc->add_flag("--heterogeneous", heterogeneous,
                 "per-study residual variances in the sensitivity runs");
  simc->add_flag("--sanity", sanity,
                 "feed the true components to the estimated path");
  simc->add_option("--scenario", scenario, "figure design")
      ->check(CLI::IsMember({"balanced", "skewed"}));

  auto* sum = app.add_subcommand("summarize", "reduce records to summary rows");
  add_common(sum, sum_o, true, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (est->parsed()) return cmd_estimate(est_o, pooled, est_mode, correlated);
    if (sel->parsed()) return cmd_select(sel_o, k1, sel_method, sel_mode);
    if (rec->parsed()) return cmd_re_curve(rec_o, k1_min, k1_max, rec_method);
    if (simc->parsed())
      return cmd_simulate(sim_o, experiment, reps, heterogeneous, sanity,
                          scenario);
    if (sum->parsed()) return cmd_summarize(sum_o);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const EstimabilityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
