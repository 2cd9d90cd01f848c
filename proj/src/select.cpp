#include "metamix/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "metamix/threading.hpp"

namespace metamix::select {

namespace {

void check_instance(const std::vector<double>& u, const std::vector<double>& v,
                    int k1) {
  if (u.empty() || u.size() != v.size())
    throw InputError("selection instance needs matching nonempty u and v");
  if (k1 < 1 || static_cast<size_t>(k1) > u.size())
    throw InputError("k1 must lie between 1 and the number of studies");
  for (size_t j = 0; j < u.size(); ++j)
    if (!(u[j] > 0.0) || !(v[j] > 0.0))
      throw InputError("selection scores and weights must be positive");
}

bool all_equal(const std::vector<double>& u) {
  for (double x : u)
    if (x != u[0]) return false;
  return true;
}

std::vector<int> iota_set(int k1) {
  std::vector<int> s(static_cast<size_t>(k1));
  std::iota(s.begin(), s.end(), 0);
  return s;
}

// -1 / 0 / +1 comparing ascending index sequences lexicographically.
int lex_cmp(const std::vector<int>& a, const std::vector<int>& b) {
  for (size_t i = 0; i < a.size() && i < b.size(); ++i) {
    if (a[i] != b[i]) return a[i] < b[i] ? -1 : 1;
  }
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  return 0;
}

struct Best {
  double obj = -std::numeric_limits<double>::infinity();
  std::vector<int> set;
};

void merge_max(Best& into, double obj, const std::vector<int>& set) {
  if (obj > into.obj || (obj == into.obj && lex_cmp(set, into.set) > 0)) {
    into.obj = obj;
    into.set = set;
  }
}

void merge_min(Best& into, double obj, const std::vector<int>& set) {
  if (obj < into.obj || (obj == into.obj && lex_cmp(set, into.set) < 0)) {
    into.obj = obj;
    into.set = set;
  }
}

void merge(Best& into, const Best& from, bool minimize) {
  if (from.set.empty()) return;
  if (into.set.empty()) {
    into = from;
    return;
  }
  if (minimize)
    merge_min(into, from.obj, from.set);
  else
    merge_max(into, from.obj, from.set);
}

// Enumerates every ascending k1-subset whose first index lies in
// [first_lo, first_hi], carrying the weighted sums incrementally; O(1) work
// per visited node. Subsets whose u values are all bit-equal get an exact
// 0.0 objective (the incremental form would leave rounding noise there and
// break the lexicographic tie rules).
class ExactKernel {
 public:
  ExactKernel(const std::vector<double>& u, const std::vector<double>& v,
              int k1, bool minimize)
      : k_(static_cast<int>(u.size())), k1_(k1), minimize_(minimize) {
    vu_.resize(u.size());
    vuu_.resize(u.size());
    u_ = u;
    v_ = v;
    for (size_t j = 0; j < u.size(); ++j) {
      vu_[j] = v[j] * u[j];
      vuu_[j] = v[j] * u[j] * u[j];
    }
    prefix_.resize(static_cast<size_t>(k1));
    best_.obj = minimize ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
  }

  Best run(int first_lo, int first_hi) {
    for (int i = first_lo; i <= first_hi; ++i) {
      prefix_[0] = i;
      walk(i + 1, 1, v_[i], vu_[i], vuu_[i], u_[i], true);
    }
    return best_;
  }

 private:
  void walk(int start, int depth, double sv, double svu, double svuu,
            double u0, bool uniform) {
    if (depth == k1_) {
      double obj = uniform ? 0.0 : svuu - svu * svu / sv;
      if (minimize_)
        merge_min(best_, obj, prefix_);
      else
        merge_max(best_, obj, prefix_);
      return;
    }
    int last = k_ - (k1_ - depth);
    if (depth == k1_ - 1) {
      for (int i = start; i <= last; ++i) {
        double sv2 = sv + v_[i];
        double svu2 = svu + vu_[i];
        double obj = uniform && u_[i] == u0
                         ? 0.0
                         : svuu + vuu_[i] - svu2 * svu2 / sv2;
        if (minimize_ ? obj <= best_.obj : obj >= best_.obj) {
          prefix_[static_cast<size_t>(depth)] = i;
          if (minimize_)
            merge_min(best_, obj, prefix_);
          else
            merge_max(best_, obj, prefix_);
        }
      }
      return;
    }
    for (int i = start; i <= last; ++i) {
      prefix_[static_cast<size_t>(depth)] = i;
      walk(i + 1, depth + 1, sv + v_[i], svu + vu_[i], svuu + vuu_[i], u0,
           uniform && u_[i] == u0);
    }
  }

  int k_, k1_;
  bool minimize_;
  std::vector<double> u_, v_, vu_, vuu_;
  std::vector<int> prefix_;
  Best best_;
};

SelectionResult exact_search(const SelectionInstance& inst,
                             const ExactOptions& opt, bool minimize) {
  check_instance(inst.u, inst.v, inst.k1);
  const int k = static_cast<int>(inst.u.size());
  const int k1 = inst.k1;

  SelectionResult res;
  res.method = Method::exact;
  if (k1 == 1 || all_equal(inst.u)) {
    res.chosen = iota_set(k1);
    res.objective = 0.0;
    res.indifferent = true;
    return res;
  }

  double count = n_subsets(k, k1);
  if (count > opt.cap)
    throw InputError(
        "exhaustive search over " + std::to_string(count) +
        " subsets exceeds the cap; use the sequential method instead");

  int workers = opt.workers != 0 ? opt.workers : default_workers();
  const int first_max = k - k1;
  Best best;
  if (workers == 1 || count < opt.parallel_min) {
    ExactKernel kernel(inst.u, inst.v, k1, minimize);
    best = kernel.run(0, first_max);
  } else {
    // One task per first index; merging in index order keeps the result
    // identical to the serial kernel for every worker count.
    std::vector<Best> parts(static_cast<size_t>(first_max + 1));
    parallel_for(first_max + 1, workers, [&](int i) {
      ExactKernel kernel(inst.u, inst.v, k1, minimize);
      parts[static_cast<size_t>(i)] = kernel.run(i, i);
    });
    for (const auto& p : parts) merge(best, p, minimize);
  }

  res.chosen = best.set;
  res.objective = objective(inst.u, inst.v, res.chosen);
  return res;
}

}  // namespace

double objective(const std::vector<double>& u, const std::vector<double>& v,
                 const std::vector<int>& subset) {
  if (u.size() != v.size()) throw InputError("u and v differ in length");
  std::set<int> seen;
  for (int j : subset) {
    if (j < 0 || static_cast<size_t>(j) >= u.size())
      throw InputError("subset index out of range");
    if (!seen.insert(j).second) throw InputError("duplicate subset index");
  }
  if (subset.size() <= 1) return 0.0;
  bool uniform = true;
  for (int j : subset) uniform = uniform && u[j] == u[subset[0]];
  if (uniform) return 0.0;
  double sv = 0.0, svu = 0.0;
  for (int j : subset) {
    sv += v[j];
    svu += v[j] * u[j];
  }
  double mean = svu / sv;
  double f = 0.0;
  for (int j : subset) f += v[j] * (u[j] - mean) * (u[j] - mean);
  return f;
}

double n_subsets(int k, int k1) {
  if (k1 < 0 || k1 > k) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k1; ++i) {
    r *= k - k1 + i;
    r /= i;
  }
  return r;
}

SelectionResult brute_force_select(const SelectionInstance& inst,
                                   const ExactOptions& opt) {
  return exact_search(inst, opt, false);
}

SelectionResult brute_force_worst(const SelectionInstance& inst,
                                  const ExactOptions& opt) {
  return exact_search(inst, opt, true);
}

SelectionResult ssa_select(const SelectionInstance& inst) {
  check_instance(inst.u, inst.v, inst.k1);
  const auto& u = inst.u;
  const auto& v = inst.v;
  const int k = static_cast<int>(u.size());
  const int k1 = inst.k1;

  SelectionResult res;
  res.method = Method::ssa;
  if (k1 == 1 || all_equal(u)) {
    res.chosen = iota_set(k1);
    res.objective = 0.0;
    res.indifferent = true;
    return res;
  }

  // seed: the best pair under f restricted to two elements
  double best_pair = -1.0;
  int bp = 0, bq = 1;
  for (int p = 0; p < k; ++p)
    for (int q = p + 1; q < k; ++q) {
      double d = u[p] - u[q];
      double val = d * d / (1.0 / v[p] + 1.0 / v[q]);
      if (val >= best_pair) {  // enumeration order makes >= pick the
        best_pair = val;       // lexicographically largest tied pair
        bp = p;
        bq = q;
      }
    }

  std::vector<char> in(static_cast<size_t>(k), 0);
  std::vector<int> chosen{bp, bq};
  in[static_cast<size_t>(bp)] = in[static_cast<size_t>(bq)] = 1;
  double D = v[bp] + v[bq];
  double M = (v[bp] * u[bp] + v[bq] * u[bq]) / D;

  while (static_cast<int>(chosen.size()) < k1) {
    double best_gain = -1.0;
    int br = -1;
    for (int r = 0; r < k; ++r) {
      if (in[static_cast<size_t>(r)]) continue;
      double d = u[r] - M;
      double gain = v[r] * d * d / (D + v[r]);
      if (gain >= best_gain) {  // ties toward the higher index
        best_gain = gain;
        br = r;
      }
    }
    chosen.push_back(br);
    in[static_cast<size_t>(br)] = 1;
    M = (D * M + v[br] * u[br]) / (D + v[br]);
    D += v[br];
  }

  std::sort(chosen.begin(), chosen.end());
  res.chosen = std::move(chosen);
  res.objective = objective(u, v, res.chosen);
  return res;
}

SelectionResult extremes_select(const std::vector<double>& pi, int k1) {
  if (pi.empty()) throw InputError("empty proportion list");
  if (k1 < 1 || static_cast<size_t>(k1) > pi.size())
    throw InputError("k1 must lie between 1 and the number of studies");
  for (double p : pi)
    if (!(p > 0.0 && p < 1.0))
      throw InputError("treated proportions must lie strictly in (0,1)");

  SelectionResult res;
  res.method = Method::extremes;
  if (k1 == 1 || all_equal(pi)) {
    res.chosen = iota_set(k1);
    res.objective = 0.0;
    res.indifferent = true;
    return res;
  }

  const int k = static_cast<int>(pi.size());
  std::vector<int> order(static_cast<size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (pi[a] != pi[b]) return pi[a] < pi[b];
    return a < b;
  });

  std::vector<double> ones(pi.size(), 1.0);
  auto alternate = [&](bool start_low) {
    std::vector<int> pick;
    int lo = 0, hi = k - 1;
    bool low_turn = start_low;
    while (static_cast<int>(pick.size()) < k1) {
      pick.push_back(low_turn ? order[static_cast<size_t>(lo++)]
                              : order[static_cast<size_t>(hi--)]);
      low_turn = !low_turn;
    }
    std::sort(pick.begin(), pick.end());
    return pick;
  };

  auto low_first = alternate(true);
  auto high_first = alternate(false);
  double f_low = objective(pi, ones, low_first);
  double f_high = objective(pi, ones, high_first);
  if (f_high > f_low) {
    res.chosen = std::move(high_first);
    res.objective = f_high;
  } else {
    res.chosen = std::move(low_first);
    res.objective = f_low;
  }
  return res;
}

std::vector<SelectionResult> best_per_size(const std::vector<double>& u,
                                           const std::vector<double>& v,
                                           int smax, bool minimize) {
  check_instance(u, v, smax);
  const int k = static_cast<int>(u.size());
  double total = 0.0;
  for (int s = 2; s <= smax; ++s) total += n_subsets(k, s);
  if (total > 2e9)
    throw InputError("per-size sweep over " + std::to_string(total) +
                     " subsets exceeds the cap");

  std::vector<SelectionResult> out(static_cast<size_t>(smax) + 1);
  for (auto& r : out) r.method = Method::exact;
  out[1].chosen = {0};
  out[1].objective = 0.0;
  out[1].indifferent = true;
  if (all_equal(u)) {
    for (int s = 2; s <= smax; ++s) {
      out[static_cast<size_t>(s)].chosen = iota_set(s);
      out[static_cast<size_t>(s)].indifferent = true;
    }
    return out;
  }

  std::vector<double> vu(u.size()), vuu(u.size());
  for (size_t j = 0; j < u.size(); ++j) {
    vu[j] = v[j] * u[j];
    vuu[j] = v[j] * u[j] * u[j];
  }
  std::vector<Best> best(static_cast<size_t>(smax) + 1);
  for (auto& b : best)
    b.obj = minimize ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity();
  std::vector<int> prefix;
  prefix.reserve(static_cast<size_t>(smax));

  auto walk = [&](auto&& self, int start, double sv, double svu, double svuu,
                  double u0, bool uniform) -> void {
    int depth = static_cast<int>(prefix.size());
    for (int i = start; i < k; ++i) {
      double sv2 = sv + v[static_cast<size_t>(i)];
      double svu2 = svu + vu[static_cast<size_t>(i)];
      double svuu2 = svuu + vuu[static_cast<size_t>(i)];
      double u02 = depth == 0 ? u[static_cast<size_t>(i)] : u0;
      bool unif2 = depth == 0 || (uniform && u[static_cast<size_t>(i)] == u0);
      prefix.push_back(i);
      if (depth + 1 >= 2) {
        // exact zero for bit-equal u, as in the single-size kernel
        double obj = unif2 ? 0.0 : svuu2 - svu2 * svu2 / sv2;
        auto& b = best[static_cast<size_t>(depth + 1)];
        if (minimize)
          merge_min(b, obj, prefix);
        else
          merge_max(b, obj, prefix);
      }
      if (depth + 1 < smax) self(self, i + 1, sv2, svu2, svuu2, u02, unif2);
      prefix.pop_back();
    }
  };
  walk(walk, 0, 0.0, 0.0, 0.0, 0.0, true);

  for (int s = 2; s <= smax; ++s) {
    out[static_cast<size_t>(s)].chosen = best[static_cast<size_t>(s)].set;
    out[static_cast<size_t>(s)].objective =
        objective(u, v, out[static_cast<size_t>(s)].chosen);
  }
  return out;
}

SelectionInstance selection_weights_lmm(const std::vector<int>& n,
                                        const std::vector<double>& pi,
                                        const lmm::VarianceComponents& vc,
                                        int k1) {
  if (n.size() != pi.size() || n.empty())
    throw InputError("design arrays n and pi differ in length");
  if (vc.sigma_sq.size() != 1 && vc.sigma_sq.size() != n.size())
    throw InputError("sigma_sq must be common or one per study");
  SelectionInstance inst;
  inst.k1 = k1;
  for (size_t j = 0; j < n.size(); ++j) {
    if (!(pi[j] > 0.0 && pi[j] < 1.0))
      throw InputError("treated proportions must lie strictly in (0,1)");
    double s2 = vc.sigma_for(static_cast<int>(j));
    if (!(s2 > 0.0)) throw InputError("residual variances must be positive");
    double a = 1.0 + n[j] * vc.sigma_alpha_sq / s2;
    inst.u.push_back(pi[j]);
    inst.v.push_back(n[j] / (s2 * a));
  }
  check_instance(inst.u, inst.v, k1);
  return inst;
}

std::vector<ReCurveRow> re_curve(const std::vector<int>& n,
                                 const std::vector<double>& pi,
                                 const lmm::VarianceComponents& vc,
                                 const std::vector<int>& k1_list, Method mode,
                                 const ExactOptions& opt) {
  if (mode == Method::extremes)
    throw InputError("re-curve supports exact and ssa modes");
  std::vector<ReCurveRow> rows;
  for (int k1 : k1_list) {
    SelectionInstance inst = selection_weights_lmm(n, pi, vc, k1);
    ReCurveRow row;
    row.k1 = k1;
    row.n_combinations = n_subsets(static_cast<int>(n.size()), k1);
    if (mode == Method::exact) {
      auto best = brute_force_select(inst, opt);
      auto worst = brute_force_worst(inst, opt);
      row.argmax = best.chosen;
      row.max_re = lmm::relative_efficiency(n, pi, vc, best.chosen);
      row.argmin = worst.chosen;
      row.min_re = lmm::relative_efficiency(n, pi, vc, worst.chosen);
    } else {
      auto best = ssa_select(inst);
      row.argmax = best.chosen;
      row.max_re = lmm::relative_efficiency(n, pi, vc, best.chosen);
      row.min_re = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace metamix::select
