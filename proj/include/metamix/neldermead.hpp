#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

// Nelder-Mead simplex minimizer. Small dimension only (variance-component
// searches are 1 to 3 parameters here). Stops when the simplex diameter in
// the infinity norm drops below tol or the evaluation budget runs out.

namespace metamix {

struct NmResult {
  std::vector<double> x;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline NmResult nelder_mead(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x0, double step = 0.25, double tol = 1e-8,
    int max_iter = 500) {
  const size_t d = x0.size();
  std::vector<std::vector<double>> pts(d + 1, x0);
  for (size_t i = 0; i < d; ++i) pts[i + 1][i] += step;
  std::vector<double> fv(d + 1);
  for (size_t i = 0; i <= d; ++i) fv[i] = f(pts[i]);

  auto order = [&] {
    std::vector<size_t> idx(d + 1);
    for (size_t i = 0; i <= d; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> p2;
    std::vector<double> f2;
    for (size_t i : idx) {
      p2.push_back(pts[i]);
      f2.push_back(fv[i]);
    }
    pts.swap(p2);
    fv.swap(f2);
  };

  NmResult res;
  int it = 0;
  for (; it < max_iter; ++it) {
    order();
    double diam = 0.0;
    for (size_t i = 1; i <= d; ++i)
      for (size_t j = 0; j < d; ++j)
        diam = std::max(diam, std::fabs(pts[i][j] - pts[0][j]));
    if (diam < tol) {
      res.converged = true;
      break;
    }

    std::vector<double> centroid(d, 0.0);
    for (size_t i = 0; i < d; ++i) {
      for (size_t j = 0; j < d; ++j) centroid[j] += pts[i][j];
    }
    for (size_t j = 0; j < d; ++j) centroid[j] /= static_cast<double>(d);

    auto blend = [&](double t) {
      std::vector<double> p(d);
      for (size_t j = 0; j < d; ++j)
        p[j] = centroid[j] + t * (pts[d][j] - centroid[j]);
      return p;
    };

    auto refl = blend(-1.0);
    double fr = f(refl);
    if (fr < fv[0]) {
      auto exp_ = blend(-2.0);
      double fe = f(exp_);
      if (fe < fr) {
        pts[d] = exp_;
        fv[d] = fe;
      } else {
        pts[d] = refl;
        fv[d] = fr;
      }
    } else if (fr < fv[d - 1]) {
      pts[d] = refl;
      fv[d] = fr;
    } else {
      auto con = blend(fr < fv[d] ? -0.5 : 0.5);
      double fc = f(con);
      if (fc < std::min(fr, fv[d])) {
        pts[d] = con;
        fv[d] = fc;
      } else {
        for (size_t i = 1; i <= d; ++i) {
          for (size_t j = 0; j < d; ++j)
            pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
          fv[i] = f(pts[i]);
        }
      }
    }
  }
  order();
  res.x = pts[0];
  res.fx = fv[0];
  res.iterations = it;
  return res;
}

// One restart from a slightly perturbed optimum guards against premature
// simplex collapse; the better of the two runs wins.
inline NmResult nelder_mead_restarted(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x0, double step = 0.25, double tol = 1e-8,
    int max_iter = 500) {
  NmResult first = nelder_mead(f, x0, step, tol, max_iter);
  std::vector<double> x1 = first.x;
  for (auto& v : x1) v += 0.05 * step;
  NmResult second = nelder_mead(f, x1, 0.1 * step, tol, max_iter);
  NmResult& best = (second.fx < first.fx) ? second : first;
  best.converged = first.converged || second.converged;
  best.iterations = first.iterations + second.iterations;
  return best;
}

}  // namespace metamix
