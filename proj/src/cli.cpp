#include "knock/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "knock/bank_solver.hpp"
#include "knock/bounds.hpp"
#include "knock/error.hpp"
#include "knock/mapping.hpp"
#include "knock/metrics.hpp"
#include "knock/pipeline.hpp"
#include "knock/report.hpp"
#include "knock/row_solver.hpp"
#include "knock/simulator.hpp"
#include "knock/traces.hpp"

namespace knock {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::UnknownPreset:
      return 2;
    case ErrorKind::Io:
    case ErrorKind::Parse:
    case ErrorKind::WidthMismatch:
    case ErrorKind::InvariantViolation:
      return 3;
    case ErrorKind::NoBimodalDistribution:
    case ErrorKind::OracleUnusable:
      return 4;
    case ErrorKind::QuorumFailure:
    case ErrorKind::InsufficientData:
    case ErrorKind::NoBasis:
      return 5;
    case ErrorKind::PairNotInTrace:
      return 6;
  }
  return 1;
}

namespace {

struct SpecSource {
  std::string preset;
  std::string spec_path;

  void add(CLI::App* app) {
    auto* p = app->add_option("--preset", preset, "platform preset (see `presets`)");
    auto* s = app->add_option("--spec", spec_path, "mapping-spec document");
    p->excludes(s);
  }
  bool given() const { return !preset.empty() || !spec_path.empty(); }
  MappingSpec load() const {
    if (!preset.empty()) return load_preset(preset);
    if (!spec_path.empty()) return read_spec_file(spec_path);
    throw Error(ErrorKind::Usage, "one of --preset or --spec is required");
  }
};

struct ModelFlags {
  LatencyModel model;
  std::string noise = "symmetric";

  void add(CLI::App* app) {
    app->add_option("--theta", model.theta, "mislabel rate in [0,1)");
    app->add_flag("--closed-page", model.closed_page, "every access misses the row buffer");
    app->add_option("--low-mean", model.low_mean, "row-hit latency mean (cycles)");
    app->add_option("--low-std", model.low_std, "row-hit latency std (cycles)");
    app->add_option("--high-mean", model.high_mean, "conflict latency mean (cycles)");
    app->add_option("--high-std", model.high_std, "conflict latency std (cycles)");
    app->add_option("--noise", noise, "symmetric | conflict-miss")
        ->check(CLI::IsMember({"symmetric", "conflict-miss"}));
  }
  LatencyModel get() const {
    LatencyModel m = model;
    m.noise = noise == "conflict-miss" ? NoiseMode::conflict_miss : NoiseMode::symmetric;
    m.validate();
    return m;
  }
};

struct VoteFlags {
  VoteConfig cfg;
  void add(CLI::App* app) {
    app->add_option("--subsamples", cfg.subsamples, "disjoint subsamples for the vote (odd)");
    app->add_option("--quorum", cfg.quorum, "fraction of subsamples a mask needs");
    app->add_option("--tolerance", cfg.tolerance,
                    "fraction of a subsample's pairs a mask may contradict (0 = exact)");
    app->add_option("--resamples", cfg.resamples, "random subsets seeding the candidate pool");
  }
};

struct SearchFlags {
  SearchConfig cfg;
  void add(CLI::App* app) {
    app->add_option("--combo-max", cfg.combo_max, "max nullspace vectors combined per candidate");
    app->add_option("--weight-max", cfg.weight_max, "max Hamming weight of a candidate");
    app->add_option("--trials", cfg.oracle_trials, "timed accesses per oracle query (odd)");
    app->add_option("--bases", cfg.base_count, "base addresses per flip test");
    app->add_option("--node-budget", cfg.node_budget, "backtracking node limit");
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out << text;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, path + ": " + e.what());
  }
}

void dump_histogram(const std::string& path, const Trace& trace) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  write_histogram(latencies_of(trace), out);
}

/// Labels come from thresholding when latencies are present, otherwise the
/// trace must already be labeled.
Trace labeled_trace(const Trace& trace, const ThresholdOptions& opts, std::optional<ThresholdReport>* rep) {
  bool any_latency = false;
  for (const auto& r : trace.records) any_latency = any_latency || r.latency.has_value();
  if (!any_latency) return trace;
  ThresholdReport t;
  auto out = label_by_threshold(trace, opts, &t);
  if (rep != nullptr) *rep = t;
  return out;
}

// Refuses to write over one of the command's own inputs.
void require_distinct(std::initializer_list<std::string> inputs,
                      std::initializer_list<std::string> outputs) {
  namespace fs = std::filesystem;
  auto norm = [](const std::string& p) {
    std::error_code ec;
    auto c = fs::weakly_canonical(fs::absolute(p), ec);
    return ec ? fs::absolute(p).lexically_normal() : c;
  };
  for (const auto& out : outputs) {
    if (out.empty() || out == "-") continue;
    for (const auto& in : inputs) {
      if (!in.empty() && norm(in) == norm(out)) {
        throw Error(ErrorKind::Usage, "output path " + out + " is also an input");
      }
    }
  }
}

std::string fmt_ratio(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"knock: recover linear DRAM address mappings from timing traces"};
  app.set_config("--config", "", "TOML/INI file with flag values (flags take precedence)");
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "suppress the human summary");

  ThresholdOptions topts;
  auto add_threshold_flags = [&](CLI::App* sub) {
    sub->add_option("--min-separation", topts.min_separation,
                    "class-mean gap in pooled std devs needed to accept two distributions");
  };

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a timing trace from a mapping spec");
  SpecSource sim_spec;
  ModelFlags sim_model;
  GenConfig gen;
  gen.repeats = 7;
  std::string sim_out, constraint = "any";
  sim_spec.add(sim);
  sim_model.add(sim);
  sim->add_option("--pairs", gen.pair_count, "number of address pairs")->required();
  sim->add_option("--seed", gen.seed, "PRNG seed");
  sim->add_option("--alignment", gen.alignment_bits, "low address bits forced to zero");
  sim->add_option("--repeats", gen.repeats, "timed accesses per pair, median recorded (odd)");
  sim->add_option("--constraint", constraint, "any | same-bank")
      ->check(CLI::IsMember({"any", "any-pair", "same-bank"}));
  sim->add_option("-o,--output", sim_out, "trace file (default stdout)");

  // threshold
  auto* thr = app.add_subcommand("threshold", "detect the hit/conflict latency threshold");
  std::string thr_trace, thr_hist, thr_labeled;
  thr->add_option("--trace", thr_trace, "trace file")->required();
  thr->add_option("--report-histogram", thr_hist, "write the latency histogram table here");
  thr->add_option("--labeled-output", thr_labeled, "write the classified trace here");
  add_threshold_flags(thr);

  // solve-banks
  auto* sb = app.add_subcommand("solve-banks", "recover bank/channel masks from a trace");
  std::string sb_trace, sb_out, sb_hist;
  std::uint64_t sb_seed = 0;
  VoteFlags vote;
  bool sb_plain = false;
  sb->add_option("--trace", sb_trace, "trace file")->required();
  sb->add_option("-o,--output", sb_out, "report file (default stdout)");
  sb->add_option("--seed", sb_seed, "subsampling seed");
  sb->add_option("--report-histogram", sb_hist, "write the latency histogram table here");
  sb->add_flag("--no-vote", sb_plain, "plain nullspace of all conflict pairs, no subsampling");
  vote.add(sb);
  add_threshold_flags(sb);

  // solve-rows
  auto* sr = app.add_subcommand("solve-rows", "recover row masks from a same-bank trace");
  std::string sr_trace, sr_bank, sr_out, sr_probe, sr_oracle = "simulator";
  SpecSource sr_spec;
  ModelFlags sr_model;
  SearchFlags search;
  sr->add_option("--trace", sr_trace, "same-bank trace file")->required();
  sr->add_option("--bank-report", sr_bank, "report from solve-banks")->required();
  sr->add_option("--oracle", sr_oracle, "simulator | replay | none")
      ->check(CLI::IsMember({"simulator", "replay", "none"}));
  sr->add_option("--probe-output", sr_probe, "probe-request file for a replay oracle");
  sr->add_option("-o,--output", sr_out, "report file (default stdout)");
  sr->add_option("--seed", search.cfg.seed, "flip-test seed");
  sr_spec.add(sr);
  sr_model.add(sr);
  search.add(sr);
  add_threshold_flags(sr);

  // bound
  auto* bd = app.add_subcommand("bound", "sample-size bound for bank or row recovery");
  BoundParams bp;
  bd->add_option("--n", bp.n, "address bits")->required();
  bd->add_option("--k", bp.k, "bank-space dimension")->required();
  bd->add_option("--k-prime", bp.k_prime, "row-space dimension (selects the row bound)");
  bd->add_option("--theta", bp.theta, "mislabel rate");
  bd->add_option("--epsilon", bp.epsilon, "failure probability");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "precision/recall of a recovered mapping");
  std::string ev_recovered, ev_bank, ev_rows, ev_trace, ev_out;
  SpecSource ev_truth;
  std::size_t ev_pairs = 10'000;
  std::uint64_t ev_seed = 1;
  unsigned ev_align = 6;
  ev->add_option("--recovered", ev_recovered, "recovered mapping-spec document");
  ev->add_option("--bank-report", ev_bank, "solve-banks report (with --row-report)");
  ev->add_option("--row-report", ev_rows, "solve-rows report");
  ev->add_option("--trace", ev_trace, "labeled trace to evaluate against");
  ev_truth.add(ev);
  ev->add_option("--pairs", ev_pairs, "fresh pairs drawn from the truth spec");
  ev->add_option("--seed", ev_seed, "seed for fresh pairs");
  ev->add_option("--alignment", ev_align, "alignment of fresh pairs");
  ev->add_option("-o,--output", ev_out, "report file (default stdout)");

  // e2e
  auto* e2e = app.add_subcommand("e2e", "simulate and recover a full mapping");
  SpecSource e2e_spec;
  ModelFlags e2e_model;
  E2EOptions eopts;
  std::string e2e_out;
  VoteFlags e2e_vote;
  SearchFlags e2e_search;
  e2e_spec.add(e2e);
  e2e_model.add(e2e);
  e2e_vote.add(e2e);
  e2e_search.add(e2e);
  e2e->add_option("--seed", eopts.seed, "PRNG seed");
  e2e->add_option("--alignment", eopts.alignment_bits, "low address bits forced to zero");
  e2e->add_option("--repeats", eopts.repeats, "timed accesses per pair (odd)");
  e2e->add_option("--bank-pairs", eopts.bank_pairs, "bank-phase pairs (default 4x bound)");
  e2e->add_option("--row-pairs", eopts.row_pairs, "row-phase pairs (default 4x bound)");
  e2e->add_option("--eval-pairs", eopts.eval_pairs, "fresh evaluation pairs");
  e2e->add_flag("--eval-noise", eopts.eval_noise, "label evaluation pairs through noisy timing");
  e2e->add_option("-o,--output", e2e_out, "combined report (default stdout)");
  add_threshold_flags(e2e);

  // presets
  auto* pr = app.add_subcommand("presets", "list platform presets or export one");
  std::string pr_show, pr_out;
  pr->add_option("--show", pr_show, "print the mapping-spec document of a preset");
  pr->add_option("-o,--output", pr_out, "write the document here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  auto say = [&](const std::string& text) {
    if (!quiet) std::cerr << text;
  };

  try {
    if (*sim) {
      require_distinct({sim_spec.spec_path}, {sim_out});
      const auto spec = sim_spec.load();
      gen.constraint = constraint == "same-bank" ? PairConstraint::same_bank : PairConstraint::any_pair;
      const auto trace = generate_trace(spec, sim_model.get(), gen);
      std::size_t conflicts = 0;
      for (const auto& r : trace.records) conflicts += spec.conflict(r.a.bits(), r.b.bits());
      if (sim_out.empty() || sim_out == "-") {
        write_trace(trace, std::cout);
      } else {
        write_trace(trace, sim_out);
      }
      std::ostringstream s;
      s << "simulated " << trace.records.size() << " pairs (" << spec.label() << "), true conflict fraction "
        << static_cast<double>(conflicts) / static_cast<double>(trace.records.size()) << '\n';
      say(s.str());
      return 0;
    }

    if (*thr) {
      require_distinct({thr_trace}, {thr_hist, thr_labeled});
      const auto trace = read_trace(thr_trace);
      dump_histogram(thr_hist, trace);
      const auto rep = find_threshold(latencies_of(trace), topts);
      if (!thr_labeled.empty()) write_trace(classify(trace, rep.threshold, true), thr_labeled);
      std::cout << to_json(rep).dump() << '\n';
      return 0;
    }

    if (*sb) {
      require_distinct({sb_trace}, {sb_out, sb_hist});
      const auto trace = read_trace(sb_trace);
      dump_histogram(sb_hist, trace);
      std::optional<ThresholdReport> trep;
      const auto labeled = labeled_trace(trace, topts, &trep);
      const auto conflicts = conflict_records(labeled);
      const auto support = observed_support(labeled);
      BankRecovery rec;
      if (sb_plain) {
        const auto dm = build_difference_matrix(conflicts);
        if (dm.zero_rows > 0) {
          say("warning: dropped " + std::to_string(dm.zero_rows) + " identical-address pairs\n");
        }
        rec = recover_bank_masks(dm.matrix, support);
        rec.pairs_used = conflicts.size() - dm.zero_rows;
        rec.explain_fraction = explain_fraction(rec.basis, conflicts);
      } else {
        VoteConfig cfg = vote.cfg;
        cfg.seed = sb_seed;
        rec = subsample_vote(conflicts, cfg, support);
      }
      Json doc = to_json(rec);
      if (trep) doc["threshold"] = to_json(*trep);
      write_text(sb_out, doc.dump(2) + "\n");
      std::ostringstream s;
      s << "bank masks (" << rec.k << "):";
      for (auto m : rec.basis.words()) s << ' ' << to_hex(m);
      s << "\nundetermined bits: " << rec.undetermined_bits.size() << ", rank(D) " << rec.rank_D
        << ", conflict pairs used " << rec.pairs_used << "/" << conflicts.size()
        << ", explained " << fmt_ratio(rec.explain_fraction) << '\n';
      say(s.str());
      return 0;
    }

    if (*sr) {
      require_distinct({sr_trace, sr_bank, sr_spec.spec_path}, {sr_out, sr_probe});
      const auto trace = read_trace(sr_trace);
      const auto bank = bank_recovery_from_json(read_json_file(sr_bank));
      const auto labeled = labeled_trace(trace, topts, nullptr);
      std::unique_ptr<ConflictOracle> oracle;
      ReplayOracle* replay = nullptr;
      if (sr_oracle == "simulator") {
        if (!sr_spec.given()) {
          throw Error(ErrorKind::Usage, "--oracle simulator needs --preset or --spec");
        }
        oracle = std::make_unique<SimulatorOracle>(sr_spec.load(), sr_model.get(),
                                                   search.cfg.oracle_trials, search.cfg.seed);
      } else if (sr_oracle == "replay") {
        auto r = std::make_unique<ReplayOracle>(labeled);
        replay = r.get();
        oracle = std::move(r);
      }
      RowRecovery rec;
      try {
        rec = recover_row_masks(labeled, bank, oracle.get(), search.cfg);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::PairNotInTrace && replay != nullptr) {
          const std::string path = sr_probe.empty() ? "probe-requests.trace" : sr_probe;
          write_trace(replay->probe_requests(), path);
          std::cerr << "knock: " << e.what() << "; wrote " << replay->missing().size()
                    << " probe requests to " << path << '\n';
          return 6;
        }
        throw;
      }
      write_text(sr_out, to_json(rec).dump(2) + "\n");
      std::ostringstream s;
      s << "row masks (k'=" << rec.k_prime << ", weight " << rec.total_weight
        << (rec.search_exhausted ? ", node budget exhausted" : "") << "):";
      for (auto m : rec.row_basis.words()) s << ' ' << to_hex(m);
      s << '\n';
      say(s.str());
      return 0;
    }

    if (*bd) {
      Json doc;
      if (bp.k_prime > 0) {
        doc["kind"] = "row";
        doc["m"] = row_sample_bound(bp);
      } else {
        doc["kind"] = "bank";
        doc["m"] = bank_sample_bound(bp);
      }
      doc["n"] = bp.n;
      doc["k"] = bp.k;
      if (bp.k_prime > 0) doc["k_prime"] = bp.k_prime;
      doc["theta"] = bp.theta;
      doc["epsilon"] = bp.epsilon;
      std::cout << doc.dump() << '\n';
      return 0;
    }

    if (*ev) {
      require_distinct({ev_recovered, ev_bank, ev_rows, ev_trace, ev_truth.spec_path}, {ev_out});
      std::optional<MappingSpec> recovered;
      if (!ev_recovered.empty()) {
        recovered = read_spec_file(ev_recovered);
      } else if (!ev_bank.empty() && !ev_rows.empty()) {
        const auto bank = bank_recovery_from_json(read_json_file(ev_bank));
        const auto rows = read_json_file(ev_rows);
        BitMatrix R(bank.width);
        try {
          R = from_hex_list(rows.at("row_masks").get<std::vector<std::string>>(), bank.width);
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorKind::Parse, ev_rows + ": " + e.what());
        }
        recovered.emplace(bank.width, bank.basis, R, "recovered");
      } else {
        throw Error(ErrorKind::Usage, "need --recovered, or --bank-report with --row-report");
      }
      Trace pairs;
      std::optional<MappingSpec> truth;
      if (ev_truth.given()) truth = ev_truth.load();
      if (!ev_trace.empty()) {
        pairs = labeled_trace(read_trace(ev_trace), topts, nullptr);
      } else if (truth) {
        pairs = generate_labeled_pairs(*truth, ev_pairs, ev_seed, ev_align, PairConstraint::any_pair);
      } else {
        throw Error(ErrorKind::Usage, "need --trace, or --preset/--spec for fresh pairs");
      }
      auto rep = evaluate(*recovered, pairs.records);
      if (truth) {
        std::uint64_t observed = low_mask(truth->address_bits()) & ~low_mask(ev_align);
        rep.basis_match = compare_bases(recovered->bank_matrix(), truth->bank_matrix(), observed);
      }
      write_text(ev_out, to_json(rep).dump(2) + "\n");
      say(render_summary(rep));
      return 0;
    }

    if (*e2e) {
      require_distinct({e2e_spec.spec_path}, {e2e_out});
      const auto truth = e2e_spec.load();
      eopts.model = e2e_model.get();
      eopts.vote = e2e_vote.cfg;
      eopts.search = e2e_search.cfg;
      eopts.threshold = topts;
      const auto res = run_e2e(truth, eopts);
      Json doc;
      doc["spec"] = truth.label();
      doc["bank_pairs"] = res.bank_pairs;
      doc["row_pairs"] = res.row_pairs;
      doc["bank_threshold"] = to_json(res.bank_threshold);
      doc["banks"] = to_json(res.bank);
      doc["row_threshold"] = to_json(res.row_threshold);
      doc["rows"] = to_json(res.rows);
      doc["evaluation"] = to_json(res.evaluation);
      write_text(e2e_out, doc.dump(2) + "\n");
      std::ostringstream s;
      s << "bank masks " << res.bank.k << ", row masks " << res.rows.k_prime << '\n'
        << render_summary(res.evaluation);
      say(s.str());
      return 0;
    }

    if (*pr) {
      if (!pr_show.empty()) {
        write_text(pr_out, serialize_spec(load_preset(pr_show)));
        return 0;
      }
      for (const auto& name : preset_names()) {
        const auto spec = load_preset(name);
        std::cout << name << "  n=" << spec.address_bits() << " k=" << spec.k()
                  << " k'=" << spec.k_prime() << "  " << spec.label() << '\n';
      }
      return 0;
    }
  } catch (const StageError& e) {
    std::cerr << "knock: stage " << e.stage() << " failed [" << to_string(e.kind()) << "] "
              << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const Error& e) {
    std::cerr << "knock: [" << to_string(e.kind()) << "] " << e.what() << '\n';
    return exit_code_for(e.kind());
  }
  return 2;
}

}  // namespace knock
