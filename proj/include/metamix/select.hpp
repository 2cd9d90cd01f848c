#pragma once

#include <vector>

#include "metamix/lmm.hpp"

// Choosing which AD studies to upgrade to IPD. Each candidate j carries a
// location score u_j in (0,1) and a positive weight v_j; a subset A of size
// k1 is scored by the weighted scatter
//
//   f(A) = sum_{j in A} v_j (u_j - u_bar_A)^2,   u_bar_A = weighted mean,
//
// which is exactly what the combined-estimator variance rewards. Exhaustive
// search maximizes f; the sequential heuristic (seed pair, then greedy
// insertions) gets close at a tiny fraction of the cost.
//
// Tie handling: among maximizers the lexicographically largest index set
// wins; among minimizers the smallest. Degenerate instances (all u equal,
// or k1 = 1) make every subset equivalent: the lowest-index set is returned
// with the `indifferent` flag set.

namespace metamix::select {

struct SelectionInstance {
  std::vector<double> u, v;
  int k1 = 0;
};

enum class Method { exact, ssa, extremes };

struct SelectionResult {
  std::vector<int> chosen;  // ascending indices into u/v
  double objective = 0.0;
  Method method = Method::exact;
  bool indifferent = false;
};

// Weighted scatter of the subset; two-pass evaluation.
double objective(const std::vector<double>& u, const std::vector<double>& v,
                 const std::vector<int>& subset);

struct ExactOptions {
  int workers = 0;        // 0 = library default; 1 = serial reference kernel
  double cap = 2e9;       // refuse instances with more subsets than this
  int parallel_min = 20000;  // below this many subsets the serial kernel runs
};

// Exhaustive maximization / minimization over all k-choose-k1 subsets.
SelectionResult brute_force_select(const SelectionInstance& inst,
                                   const ExactOptions& opt = {});
SelectionResult brute_force_worst(const SelectionInstance& inst,
                                  const ExactOptions& opt = {});

// Sequential search: best pair by f({p,q}) = (u_p-u_q)^2 / (1/v_p + 1/v_q),
// then repeatedly the r maximizing the insertion gain v_r (u_r - M)^2 / (D
// + v_r), with M the running weighted mean and D the running weight sum.
SelectionResult ssa_select(const SelectionInstance& inst);

// Balanced-design shortcut that alternates between the smallest and largest
// remaining proportions. Both starting phases are scored (equal weights)
// and the better kept. A heuristic: alternation is not always optimal.
SelectionResult extremes_select(const std::vector<double>& pi, int k1);

// One sweep over all subsets of size <= smax, recording the best (or worst)
// of every size from 2 to smax. Serial kernel; callers parallelize across
// replicates.
std::vector<SelectionResult> best_per_size(const std::vector<double>& u,
                                           const std::vector<double>& v,
                                           int smax, bool minimize = false);

// Selection scores for the linear model: u_j = pi_j and v_j = n_j /
// (sigma_j^2 a_j) with a_j = 1 + n_j sigma_alpha^2 / sigma_j^2.
SelectionInstance selection_weights_lmm(const std::vector<int>& n,
                                        const std::vector<double>& pi,
                                        const lmm::VarianceComponents& vc,
                                        int k1);

struct ReCurveRow {
  int k1 = 0;
  double n_combinations = 0.0;
  double max_re = 0.0;
  std::vector<int> argmax;
  double min_re = 0.0;         // NaN in ssa mode
  std::vector<int> argmin;     // empty in ssa mode
};

// Relative-efficiency range per IPD-set size. `exact` enumerates best and
// worst subsets; `ssa` reports the heuristic's choice only.
std::vector<ReCurveRow> re_curve(const std::vector<int>& n,
                                 const std::vector<double>& pi,
                                 const lmm::VarianceComponents& vc,
                                 const std::vector<int>& k1_list, Method mode,
                                 const ExactOptions& opt = {});

// k choose k1 without overflow (exact until ~2^53).
double n_subsets(int k, int k1);

}  // namespace metamix::select
