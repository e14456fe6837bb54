#pragma once

#include <json.hpp>

#include "knock/bank_solver.hpp"
#include "knock/metrics.hpp"
#include "knock/row_solver.hpp"
#include "knock/traces.hpp"

namespace knock {

using Json = nlohmann::ordered_json;

Json to_json(const ThresholdReport& rep);
Json to_json(const BankRecovery& rec);
Json to_json(const RowRecovery& rec);
Json to_json(const EvaluationReport& rep);

/// Reads back the fields of a bank report needed by the row phase.
BankRecovery bank_recovery_from_json(const Json& doc);

}  // namespace knock
