#pragma once

#include "metamix/types.hpp"

namespace metamix {

// Collapse one study's records to a summary row. Continuous outcomes give
// the arm-mean difference with its pooled-residual variance; binary ones
// the log odds ratio with the inverse-information variance (event counts
// carried along).
AdStudy summarize_ipd(const IpdStudy& s, OutcomeKind outcome);

// Summaries for every study that has records; existing summary rows for
// other studies are kept.
StudyCollection summarize_collection(const StudyCollection& c);

}  // namespace metamix
