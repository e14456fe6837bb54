#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "knock/mapping.hpp"
#include "knock/traces.hpp"

namespace knock {

struct EvaluationReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> precision;  // absent when nothing was predicted conflict
  std::optional<double> recall;     // absent when no pair was a real conflict
  std::size_t pairs_evaluated = 0;
  std::optional<bool> basis_match;
};

/// Predicts every labeled pair with `recovered` and tallies the confusion
/// matrix against the pair labels. Unlabeled records are skipped.
EvaluationReport evaluate(const MappingSpec& recovered, std::span<const TraceRecord> labeled_pairs);

/// Row-space equality after clearing the unobserved bit positions of `truth`.
bool compare_bases(const BitMatrix& recovered, const BitMatrix& truth, std::uint64_t observed_bits);

/// Aligned text table for terminals.
std::string render_summary(const EvaluationReport& rep);

}  // namespace knock
