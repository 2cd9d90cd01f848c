#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "metamix/select.hpp"
#include "metamix/types.hpp"

// Monte Carlo experiments and deterministic figure data. Every random
// quantity comes from a counter-based stream addressed by (seed, replicate,
// study, kind), so reports are bit-identical across worker counts and
// reruns; each report carries a hash of its resolved configuration.

namespace metamix::sim {

// ----- dataset generation -----

struct LmmScenario {
  int k = 10;
  std::vector<int> n = {10};  // broadcast when a single entry
  double alpha = 0.5, beta = 1.5;
  double sigma_alpha_sq = 0.025;
  std::vector<double> sigma_sq = {2.5};  // ignored when draw_sigma
  bool draw_sigma = false;        // sigma_j^2 ~ InvGamma(2, 5)
  bool shared_sigma_draw = false; // one draw shared by all studies
  enum class PiLaw { fixed, uniform, bathtub } pi_law = PiLaw::fixed;
  std::vector<double> pi;  // the fixed design; broadcast when a single entry
};

// The draws behind a generated replicate, kept for oracle comparisons.
struct LmmRealization {
  std::vector<int> n, n_treated;
  std::vector<double> pi;        // design proportions
  std::vector<double> sigma_sq;  // realized residual variances
  std::vector<double> alpha_j;
};

StudyCollection gen_lmm_dataset(const LmmScenario& sc, uint64_t seed,
                                uint32_t replicate,
                                LmmRealization* real = nullptr);

struct LogisticScenario {
  int k = 50, n = 100;
  double beta = 0.5, alpha = 0.5;
  double sigma_bb = 0.5, sigma_aa = 0.5;  // random slope / intercept variances
};

struct LogisticRealization {
  std::vector<int> n_treated;
  std::vector<double> beta_j, alpha_j;
};

StudyCollection gen_logistic_dataset(const LogisticScenario& sc, uint64_t seed,
                                     uint32_t replicate,
                                     LogisticRealization* real = nullptr);

// ----- heuristic-vs-exhaustive match experiment -----

struct MatchConfig {
  int k = 30, n = 10;
  double sigma_alpha_sq = 0.025;
  int k1_min = 2, k1_max = 10;
  int replicates = 100;
  uint64_t seed = 20260822;
  int workers = 0;
};

// Per replicate: proportions ~ U(0,1), residual variances ~ InvGamma(2,5);
// the sequential heuristic's set is compared with the exhaustive optimum
// for each k1.
struct MatchReport {
  MatchConfig config;
  std::vector<int> k1;
  std::vector<std::vector<long long>> overlap;  // [row][0..k1] counts
  std::vector<double> mean_ratio;  // mean of v(heuristic) / v(optimum) >= 1
  std::vector<double> exact_rate;  // fraction of replicates with equal sets
  uint64_t config_hash = 0;
};

MatchReport run_match_experiment(const MatchConfig& cfg);

// ----- selection under estimated variance components -----

struct SensitivityConfig {
  bool heterogeneous = false;  // per-study InvGamma draws vs one shared draw
  int k = 10, n = 50, k1 = 5;
  double alpha = 0.5, beta = 1.5, sigma_alpha_sq = 0.025;
  std::vector<double> pi = {0.1, 0.1, 0.1, 0.1, 0.2, 0.8, 0.9, 0.9, 0.9, 0.9};
  int pilot_count = 5;
  int replicates = 1000;
  uint64_t seed = 20260822;
  int workers = 0;
  // Oracle mode: the "estimated" path also uses the true components, so the
  // two paths coincide and the overlap must be k1 in every replicate.
  bool sanity_identical_paths = false;
};

struct SensitivityReport {
  SensitivityConfig config;
  std::vector<long long> overlap_counts;  // size k1+1
  double mean_sigma_alpha_hat = 0.0;
  double mean_pooled_sigma = 0.0;
  double bartlett_reject_rate = 0.0;  // at the 5% level; reported, not applied
  uint64_t config_hash = 0;
};

SensitivityReport run_sensitivity_experiment(const SensitivityConfig& cfg);

// ----- logistic combined-estimator experiment -----

struct GlmmSimConfig {
  LogisticScenario scenario;
  std::vector<double> fractions = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  int replicates = 200;
  uint64_t seed = 20260822;
  int workers = 0;
};

struct GlmmSimRow {
  double fraction = 0.0;
  double estimate = 0.0, bias = 0.0, se = 0.0, mse = 0.0, rel_eff = 0.0;
};

// For each IPD fraction: a random S1 of that size per replicate, the rest
// contributing summaries. SE is the Monte Carlo standard deviation
// (population form), so mse = bias^2 + se^2 exactly.
struct GlmmSimReport {
  GlmmSimConfig config;
  std::vector<GlmmSimRow> rows;
  uint64_t config_hash = 0;
};

GlmmSimReport run_glmm_experiment(const GlmmSimConfig& cfg);

// ----- deterministic relative-efficiency figure data -----

struct ComboRe {
  int k1 = 0;
  long long rank = 0;  // position in lexicographic subset order
  double re = 0.0;
};

struct FigureData {
  std::vector<ComboRe> combos;
  std::vector<select::ReCurveRow> curve;
  double ad_ma_re = 0.0;
};

FigureData re_figure(const std::vector<int>& n, const std::vector<double>& pi,
                     const lmm::VarianceComponents& vc, int k1_min, int k1_max);

// ----- serialization (indices are reported 1-based) -----

void write_overlap_csv(const MatchReport& r, std::ostream& os);
void write_summary_csv(const MatchReport& r, std::ostream& os);
void write_overlap_csv(const SensitivityReport& r, std::ostream& os);
void write_summary_csv(const SensitivityReport& r, std::ostream& os);
void write_csv(const GlmmSimReport& r, std::ostream& os);
void write_combo_csv(const FigureData& f, std::ostream& os);
void write_curve_csv(const FigureData& f, std::ostream& os);

std::string canonical_config(const MatchConfig& c);
std::string canonical_config(const SensitivityConfig& c);
std::string canonical_config(const GlmmSimConfig& c);

}  // namespace metamix::sim
