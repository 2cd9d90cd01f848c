#include "metamix/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace metamix {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
    out.back().pop_back();
  return out;
}

double parse_double(const std::string& tok, const std::string& where) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE)
    throw InputError(where + ": bad numeric field '" + tok + "'");
  return v;
}

long parse_int(const std::string& tok, const std::string& where) {
  long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size())
    throw InputError(where + ": bad integer field '" + tok + "'");
  return v;
}

std::string ctx(const std::string& name, int lineno) {
  return name + ":" + std::to_string(lineno);
}

}  // namespace

void validate(const IpdStudy& s, OutcomeKind outcome) {
  if (s.y.size() != s.x.size())
    throw InputError("study " + s.id + ": y/x length mismatch");
  if (s.n() < 2)
    throw InputError("study " + s.id + ": needs at least 2 participants");
  int m = s.n_treated();
  if (m == 0 || m == s.n())
    throw InputError("study " + s.id + ": both arms must be present");
  for (int xi : s.x)
    if (xi != 0 && xi != 1)
      throw InputError("study " + s.id + ": treatment indicator must be 0/1");
  if (outcome == OutcomeKind::binary)
    for (double yi : s.y)
      if (yi != 0.0 && yi != 1.0)
        throw InputError("study " + s.id + ": binary outcome must be 0/1");
}

void validate(const AdStudy& s) {
  if (!(s.var_hat > 0.0))
    throw InputError("study " + s.id + ": var_hat must be positive");
  if (s.n_t < 1 || s.n_c < 1)
    throw InputError("study " + s.id + ": both arm sizes must be positive");
  if (s.cases_t.has_value() != s.cases_c.has_value())
    throw InputError("study " + s.id + ": cases_t/cases_c must come together");
  if (s.cases_t) {
    if (*s.cases_t < 0 || *s.cases_t > s.n_t || *s.cases_c < 0 ||
        *s.cases_c > s.n_c)
      throw InputError("study " + s.id + ": case counts exceed arm sizes");
  }
}

std::vector<int> indices_of(const StudyCollection& c,
                            const std::vector<std::string>& ids) {
  std::map<std::string, int> pos;
  for (int i = 0; i < c.size(); ++i) pos[c.order[i]] = i;
  std::vector<int> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = pos.find(id);
    if (it == pos.end()) throw InputError("unknown study id '" + id + "'");
    out.push_back(it->second);
  }
  return out;
}

StudyCollection parse_ipd(std::istream& in, OutcomeKind outcome,
                          const std::string& name) {
  StudyCollection c;
  c.outcome = outcome;
  std::string line;
  if (!std::getline(in, line)) throw InputError(name + ": empty file");
  auto header = split_line(line);
  if (header.size() != 3 || header[0] != "study_id" || header[1] != "y" ||
      header[2] != "x")
    throw InputError(name + ": expected header study_id,y,x");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tok = split_line(line);
    if (tok.size() != 3)
      throw InputError(ctx(name, lineno) + ": expected 3 fields");
    const std::string& id = tok[0];
    if (id.empty()) throw InputError(ctx(name, lineno) + ": empty study id");
    if (!c.has_ipd(id)) {
      if (!c.order.empty() && c.order.back() != id &&
          std::find(c.order.begin(), c.order.end(), id) != c.order.end())
        throw InputError(ctx(name, lineno) + ": study '" + id +
                         "' rows are not contiguous");
      c.order.push_back(id);
      c.ipd[id].id = id;
    } else if (c.order.back() != id) {
      throw InputError(ctx(name, lineno) + ": study '" + id +
                       "' rows are not contiguous");
    }
    auto& s = c.ipd[id];
    s.y.push_back(parse_double(tok[1], ctx(name, lineno)));
    long xi = parse_int(tok[2], ctx(name, lineno));
    s.x.push_back(static_cast<int>(xi));
  }
  if (c.order.empty()) throw InputError(name + ": no study rows");
  for (const auto& id : c.order) validate(c.ipd.at(id), outcome);
  return c;
}

StudyCollection parse_ad(std::istream& in, OutcomeKind outcome,
                         const std::string& name) {
  StudyCollection c;
  c.outcome = outcome;
  std::string line;
  if (!std::getline(in, line)) throw InputError(name + ": empty file");
  auto header = split_line(line);
  bool with_cases = false;
  if (header.size() == 7 && header[5] == "cases_t" && header[6] == "cases_c")
    with_cases = true;
  else if (header.size() != 5)
    throw InputError(name +
                     ": expected header study_id,beta_hat,var_hat,n_t,n_c"
                     "[,cases_t,cases_c]");
  if (header[0] != "study_id" || header[1] != "beta_hat" ||
      header[2] != "var_hat" || header[3] != "n_t" || header[4] != "n_c")
    throw InputError(name + ": expected header study_id,beta_hat,var_hat,n_t,n_c");
  if (with_cases && outcome != OutcomeKind::binary)
    throw InputError(name + ": case counts only make sense for binary outcomes");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tok = split_line(line);
    if (tok.size() != header.size())
      throw InputError(ctx(name, lineno) + ": wrong field count");
    AdStudy s;
    s.id = tok[0];
    if (s.id.empty()) throw InputError(ctx(name, lineno) + ": empty study id");
    if (c.has_ad(s.id))
      throw InputError(ctx(name, lineno) + ": duplicate study id '" + s.id + "'");
    s.beta_hat = parse_double(tok[1], ctx(name, lineno));
    s.var_hat = parse_double(tok[2], ctx(name, lineno));
    s.n_t = static_cast<int>(parse_int(tok[3], ctx(name, lineno)));
    s.n_c = static_cast<int>(parse_int(tok[4], ctx(name, lineno)));
    if (with_cases) {
      s.cases_t = static_cast<int>(parse_int(tok[5], ctx(name, lineno)));
      s.cases_c = static_cast<int>(parse_int(tok[6], ctx(name, lineno)));
    }
    validate(s);
    c.order.push_back(s.id);
    c.ad[s.id] = std::move(s);
  }
  if (c.order.empty()) throw InputError(name + ": no study rows");
  return c;
}

StudyCollection load_ipd(const std::string& path, OutcomeKind outcome) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return parse_ipd(in, outcome, path);
}

StudyCollection load_ad(const std::string& path, OutcomeKind outcome) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return parse_ad(in, outcome, path);
}

std::string format_double(double v) {
  char buf[40];
  if (v == std::floor(v) && std::fabs(v) < 9.007199254740992e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back = std::strtod(buf, nullptr);
    if (back == v) break;
  }
  return buf;
}

void write_ipd(const StudyCollection& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "study_id,y,x\n";
  for (const auto& id : c.order) {
    const auto& s = c.ipd.at(id);
    for (int i = 0; i < s.n(); ++i)
      out << id << ',' << format_double(s.y[i]) << ',' << s.x[i] << '\n';
  }
}

void write_ad(const StudyCollection& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  bool with_cases = false;
  for (const auto& id : c.order)
    if (c.ad.at(id).cases_t) with_cases = true;
  out << "study_id,beta_hat,var_hat,n_t,n_c";
  if (with_cases) out << ",cases_t,cases_c";
  out << '\n';
  for (const auto& id : c.order) {
    const auto& s = c.ad.at(id);
    out << id << ',' << format_double(s.beta_hat) << ','
        << format_double(s.var_hat) << ',' << s.n_t << ',' << s.n_c;
    if (with_cases)
      out << ',' << s.cases_t.value_or(0) << ',' << s.cases_c.value_or(0);
    out << '\n';
  }
}

uint64_t hash_bytes(const void* data, size_t len, uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  char buf[1 << 16];
  uint64_t h = 14695981039346656037ull;
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = hash_bytes(buf, static_cast<size_t>(in.gcount()), h);
  return h;
}

}  // namespace metamix
