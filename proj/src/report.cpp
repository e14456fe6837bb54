#include "knock/report.hpp"

#include "knock/error.hpp"

namespace knock {

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const ThresholdReport& rep) {
  Json j;
  j["threshold"] = rep.threshold;
  j["low_mode"] = rep.low_mode;
  j["high_mode"] = rep.high_mode;
  j["low_mean"] = rep.low_mean;
  j["high_mean"] = rep.high_mean;
  j["separation_score"] = rep.separation_score;
  j["separation"] = rep.separation;
  j["low_fraction"] = rep.low_fraction;
  j["samples"] = rep.samples;
  j["bimodal"] = rep.bimodal;
  return j;
}

Json to_json(const BankRecovery& rec) {
  Json j;
  j["address_bits"] = rec.width;
  j["bank_masks"] = to_hex_list(rec.basis);
  j["undetermined_bits"] = rec.undetermined_bits;
  j["k"] = rec.k;
  j["rank_D"] = rec.rank_D;
  j["pairs_used"] = rec.pairs_used;
  j["explain_fraction"] = optional_number(rec.explain_fraction);
  Json votes = Json::array();
  for (const auto& v : rec.vote_detail) {
    votes.push_back({{"mask", to_hex(v.mask)}, {"votes", v.votes}, {"subsamples", rec.subsamples}});
  }
  j["vote_detail"] = votes;
  return j;
}

Json to_json(const RowRecovery& rec) {
  Json j;
  j["coarse_mask"] = rec.coarse_mask.to_hex();
  j["row_masks"] = to_hex_list(rec.row_basis);
  j["pivots"] = rec.pivot_positions;
  j["k_prime"] = rec.k_prime;
  j["total_weight"] = rec.total_weight;
  j["search_exhausted"] = rec.search_exhausted;
  j["search_nodes"] = rec.search_nodes;
  j["rank_D_row"] = rec.rank_D_row;
  j["hit_pairs"] = rec.hit_pairs;
  j["rejected_hits"] = rec.rejected_hits;
  j["candidates"] = rec.candidate_set.row_count();
  return j;
}

Json to_json(const EvaluationReport& rep) {
  Json j;
  j["tp"] = rep.tp;
  j["fp"] = rep.fp;
  j["tn"] = rep.tn;
  j["fn"] = rep.fn;
  j["precision"] = optional_number(rep.precision);
  j["recall"] = optional_number(rep.recall);
  j["pairs_evaluated"] = rep.pairs_evaluated;
  j["basis_match"] = rep.basis_match ? Json(*rep.basis_match) : Json(nullptr);
  return j;
}

BankRecovery bank_recovery_from_json(const Json& doc) {
  try {
    BankRecovery rec;
    rec.width = doc.at("address_bits").get<unsigned>();
    if (rec.width == 0 || rec.width > kMaxWidth) {
      throw Error(ErrorKind::Parse, "bank report: address_bits must be in 1..64");
    }
    rec.basis = from_hex_list(doc.at("bank_masks").get<std::vector<std::string>>(), rec.width);
    rec.undetermined_bits = doc.value("undetermined_bits", std::vector<unsigned>{});
    for (auto b : rec.undetermined_bits) {
      if (b >= rec.width) throw Error(ErrorKind::Parse, "bank report: undetermined bit out of range");
    }
    rec.k = rec.basis.row_count();
    rec.rank_D = doc.value("rank_D", std::size_t{0});
    rec.pairs_used = doc.value("pairs_used", std::size_t{0});
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("bank report: ") + e.what());
  }
}

}  // namespace knock
