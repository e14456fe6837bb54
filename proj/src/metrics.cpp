#include "knock/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "knock/error.hpp"

namespace knock {

EvaluationReport evaluate(const MappingSpec& recovered, std::span<const TraceRecord> labeled_pairs) {
  EvaluationReport rep;
  const unsigned n = recovered.address_bits();
  for (const auto& r : labeled_pairs) {
    if (!r.label) continue;
    if (r.a.width() != n || r.b.width() != n) {
      throw Error(ErrorKind::WidthMismatch, "evaluation pair width differs from the spec");
    }
    const bool predicted = recovered.conflict(r.a.bits(), r.b.bits());
    const bool real = r.is_conflict();
    if (predicted && real) {
      ++rep.tp;
    } else if (predicted) {
      ++rep.fp;
    } else if (real) {
      ++rep.fn;
    } else {
      ++rep.tn;
    }
    ++rep.pairs_evaluated;
  }
  if (rep.tp + rep.fp > 0) rep.precision = static_cast<double>(rep.tp) / (rep.tp + rep.fp);
  if (rep.tp + rep.fn > 0) rep.recall = static_cast<double>(rep.tp) / (rep.tp + rep.fn);
  return rep;
}

bool compare_bases(const BitMatrix& recovered, const BitMatrix& truth, std::uint64_t observed_bits) {
  if (recovered.width() != truth.width()) {
    throw Error(ErrorKind::WidthMismatch, "compare_bases: width mismatch");
  }
  const std::uint64_t keep = observed_bits & low_mask(truth.width());
  BitMatrix restricted(truth.width());
  for (auto w : truth.words()) restricted.append(w & keep);
  return row_space_equal(recovered, restricted);
}

std::string render_summary(const EvaluationReport& rep) {
  auto ratio = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "                 real conflict   real non-conflict\n";
  out << "pred conflict    " << rep.tp << std::string(16 - std::min<std::size_t>(15, std::to_string(rep.tp).size()), ' ')
      << rep.fp << '\n';
  out << "pred non-conf    " << rep.fn << std::string(16 - std::min<std::size_t>(15, std::to_string(rep.fn).size()), ' ')
      << rep.tn << '\n';
  out << "pairs " << rep.pairs_evaluated << "  precision " << ratio(rep.precision) << "  recall "
      << ratio(rep.recall);
  if (rep.basis_match) out << "  bank basis " << (*rep.basis_match ? "matches" : "differs");
  out << '\n';
  return out.str();
}

}  // namespace knock
