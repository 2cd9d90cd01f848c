#include "metamix/summarize.hpp"

#include <cmath>

#include "metamix/glmm.hpp"

namespace metamix {

AdStudy summarize_ipd(const IpdStudy& s, OutcomeKind outcome) {
  validate(s, outcome);
  AdStudy out;
  out.id = s.id;
  out.n_t = s.n_treated();
  out.n_c = s.n() - out.n_t;

  if (outcome == OutcomeKind::binary) {
    auto fit = glmm::fit_study_logistic(s);
    out.beta_hat = fit.theta_hat(0);
    double det = fit.info(0, 0) * fit.info(1, 1) - fit.info(0, 1) * fit.info(1, 0);
    out.var_hat = fit.info(1, 1) / det;  // effect entry of the inverse information
    int ct = 0, cc = 0;
    for (int i = 0; i < s.n(); ++i)
      (s.x[i] ? ct : cc) += static_cast<int>(s.y[i]);
    out.cases_t = ct;
    out.cases_c = cc;
    return out;
  }

  if (s.n() < 3)
    throw EstimabilityError("study " + s.id +
                            ": no residual degrees of freedom for a variance");
  double st = 0.0, sc = 0.0;
  for (int i = 0; i < s.n(); ++i) (s.x[i] ? st : sc) += s.y[i];
  double mt = st / out.n_t, mc = sc / out.n_c;
  double rss = 0.0;
  for (int i = 0; i < s.n(); ++i) {
    double r = s.y[i] - (s.x[i] ? mt : mc);
    rss += r * r;
  }
  double s2 = rss / (s.n() - 2);
  out.beta_hat = mt - mc;
  out.var_hat = s2 * (1.0 / out.n_t + 1.0 / out.n_c);
  return out;
}

StudyCollection summarize_collection(const StudyCollection& c) {
  StudyCollection out = c;
  for (const auto& id : c.order)
    if (c.has_ipd(id)) out.ad[id] = summarize_ipd(c.ipd.at(id), c.outcome);
  return out;
}

}  // namespace metamix
