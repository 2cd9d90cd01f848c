#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metamix/errors.hpp"

namespace metamix {

enum class OutcomeKind { continuous, binary };

// One study with individual-level records. x is the 0/1 treatment arm.
struct IpdStudy {
  std::string id;
  std::vector<double> y;
  std::vector<int> x;

  int n() const { return static_cast<int>(y.size()); }
  int n_treated() const {
    int m = 0;
    for (int xi : x) m += (xi != 0);
    return m;
  }
  double pi() const { return static_cast<double>(n_treated()) / n(); }
};

// One study known only through its summary: treatment-effect estimate,
// its variance, and the arm sizes. Binary outcomes may carry event counts.
struct AdStudy {
  std::string id;
  double beta_hat = 0.0;
  double var_hat = 0.0;
  int n_t = 0;
  int n_c = 0;
  std::optional<int> cases_t;
  std::optional<int> cases_c;

  int n() const { return n_t + n_c; }
  double pi() const { return static_cast<double>(n_t) / n(); }
};

// Split of the study ids into the IPD part (s1) and the AD part (s2).
struct Partition {
  std::vector<std::string> s1;
  std::vector<std::string> s2;
};

// A set of studies keyed by id; `order` preserves input order, which is
// what reports and index-based selection refer to.
struct StudyCollection {
  OutcomeKind outcome = OutcomeKind::continuous;
  std::vector<std::string> order;
  std::map<std::string, IpdStudy> ipd;
  std::map<std::string, AdStudy> ad;

  int size() const { return static_cast<int>(order.size()); }
  bool has_ipd(const std::string& id) const { return ipd.count(id) != 0; }
  bool has_ad(const std::string& id) const { return ad.count(id) != 0; }
};

// Checks the record-level invariants: n >= 2, both arms present, and for
// binary outcomes y in {0,1}. Throws InputError.
void validate(const IpdStudy& s, OutcomeKind outcome);

// var_hat > 0, n_t >= 1, n_c >= 1, event counts within arm sizes.
void validate(const AdStudy& s);

// Positions of the given ids in the collection's input order.
std::vector<int> indices_of(const StudyCollection& c,
                            const std::vector<std::string>& ids);

}  // namespace metamix
