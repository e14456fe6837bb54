#pragma once

#include <optional>
#include <string>

#include "knock/bank_solver.hpp"
#include "knock/error.hpp"
#include "knock/mapping.hpp"
#include "knock/metrics.hpp"
#include "knock/row_solver.hpp"
#include "knock/simulator.hpp"
#include "knock/traces.hpp"

namespace knock {

struct E2EOptions {
  LatencyModel model;
  std::uint64_t seed = 1;
  unsigned alignment_bits = 6;
  unsigned repeats = 7;
  // Zero selects 4x the sample bound for the simulated spec.
  std::size_t bank_pairs = 0;
  std::size_t row_pairs = 0;
  std::size_t eval_pairs = 10'000;
  bool eval_noise = false;
  double epsilon = 0.01;
  VoteConfig vote;
  SearchConfig search;
  ThresholdOptions threshold;
};

struct E2EResult {
  std::size_t bank_pairs = 0;
  std::size_t row_pairs = 0;
  ThresholdReport bank_threshold;
  BankRecovery bank;
  ThresholdReport row_threshold;
  RowRecovery rows;
  std::optional<MappingSpec> recovered;
  EvaluationReport evaluation;
};

/// Error raised by run_e2e, naming the stage that failed.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.kind(), stage + ": " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// simulate -> solve banks -> simulate same-bank -> solve rows -> evaluate.
E2EResult run_e2e(const MappingSpec& truth, const E2EOptions& opts);

/// Labels from thresholding a trace's latencies; records without latency keep
/// their labels.
Trace label_by_threshold(const Trace& trace, const ThresholdOptions& opts, ThresholdReport* out);

}  // namespace knock
