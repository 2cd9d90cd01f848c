#pragma once

#include <iosfwd>
#include <string>

#include "metamix/types.hpp"

// Flat CSV formats.
//
// Individual-level file, header `study_id,y,x`:
//   one row per participant, x in {0,1}; rows for a study are contiguous
//   and studies appear in input order.
//
// Summary-level file, header `study_id,beta_hat,var_hat,n_t,n_c` with
// optional trailing `cases_t,cases_c` columns (binary outcomes only):
//   one row per study.
//
// Ids are plain tokens without commas or quotes. Numeric fields are
// written with enough digits that a write/load round trip reproduces the
// collection bit-for-bit.

namespace metamix {

StudyCollection load_ipd(const std::string& path, OutcomeKind outcome);
StudyCollection load_ad(const std::string& path, OutcomeKind outcome);

void write_ipd(const StudyCollection& c, const std::string& path);
void write_ad(const StudyCollection& c, const std::string& path);

// Same parsers over an already-open stream (used by tests).
StudyCollection parse_ipd(std::istream& in, OutcomeKind outcome,
                          const std::string& name);
StudyCollection parse_ad(std::istream& in, OutcomeKind outcome,
                         const std::string& name);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// FNV-1a over a file's bytes, for run manifests.
uint64_t hash_file(const std::string& path);
uint64_t hash_bytes(const void* data, size_t len, uint64_t seed = 14695981039346656037ull);

}  // namespace metamix
