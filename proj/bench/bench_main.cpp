// Times the parallel kernels against their serial reference twins and
// checks that both produce identical results.

#include <chrono>
#include <cstdio>
#include <vector>

#include "metamix/rng.hpp"
#include "metamix/select.hpp"
#include "metamix/sim.hpp"
#include "metamix/threading.hpp"

using namespace metamix;

namespace {

template <class F>
double time_ms(F&& f) {
  auto t0 = std::chrono::steady_clock::now();
  f();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

bool report(const char* name, double serial_ms, double parallel_ms, bool same) {
  std::printf("%-28s serial %8.1f ms   parallel %8.1f ms   x%.2f   %s\n", name,
              serial_ms, parallel_ms, serial_ms / parallel_ms,
              same ? "identical" : "MISMATCH");
  return same;
}

}  // namespace

int main() {
  std::printf("workers available: %d\n\n", default_workers());
  bool ok = true;

  {
    const int k = 26, k1 = 8;  // ~1.6e6 subsets
    RngStream st(7, 0, 0, StreamKind::misc);
    select::SelectionInstance inst;
    inst.k1 = k1;
    for (int j = 0; j < k; ++j) {
      inst.u.push_back(st.next_unit());
      inst.v.push_back(0.5 + st.next_unit());
    }
    select::ExactOptions serial, parallel;
    serial.workers = 1;
    select::SelectionResult rs, rp;
    double ts = time_ms([&] { rs = select::brute_force_select(inst, serial); });
    double tp = time_ms([&] { rp = select::brute_force_select(inst, parallel); });
    ok &= report("exhaustive search", ts, tp,
                 rs.chosen == rp.chosen && rs.objective == rp.objective);
  }

  {
    sim::MatchConfig cfg;
    cfg.k = 14;
    cfg.k1_min = 2;
    cfg.k1_max = 6;
    cfg.replicates = 48;
    cfg.workers = 1;
    sim::MatchReport rs, rp;
    double ts = time_ms([&] { rs = sim::run_match_experiment(cfg); });
    cfg.workers = 0;
    double tp = time_ms([&] { rp = sim::run_match_experiment(cfg); });
    bool same = rs.mean_ratio == rp.mean_ratio &&
                rs.exact_rate == rp.exact_rate && rs.overlap == rp.overlap;
    ok &= report("replicate runner", ts, tp, same);
  }

  return ok ? 0 : 1;
}
