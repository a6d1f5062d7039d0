#include <memory>

#include "cli_support.hpp"
#include "commands.hpp"
#include "mlock/cracker.hpp"
#include "mlock/distinguisher.hpp"
#include "mlock/errors.hpp"

namespace mlock::cli {

namespace {

// Reference distribution for a locked file when none is given: the
// pre-transform table, or the shuffled payload (a permutation of the real
// values). Plain AES payloads say nothing about the plaintext.
std::optional<DistributionStats> implicit_reference(const LockedModel& locked) {
  switch (locked.descriptor.kind) {
    case TransformKind::PretransformedAES:
      return stats_from_pretransform(*locked.pretransform, std::size_t{1} << 16, globals().seed_or(0));
    case TransformKind::Shuffle:
      return compute_stats(unflatten(locked.payload, locked.descriptor.schema));
    case TransformKind::AES:
      break;
  }
  return std::nullopt;
}

json stats_json(const DistributionStats& s) {
  json j;
  j["sample_size"] = s.sample_size;
  j["byte_count"] = s.byte_count;
  j["nonfinite"] = s.nonfinite;
  j["mean"] = s.mean;
  j["variance"] = s.variance;
  j["kurtosis"] = s.kurtosis;
  j["edges"] = s.edges;
  j["edge_cdf"] = s.edge_cdf;
  j["value_histogram"] = s.value_histogram;
  j["byte_histogram"] = s.byte_histogram;
  return j;
}

// ---------------------------------------------------------------------------

struct CrackArgs {
  std::string locked;
  unsigned bits = 12;
  std::string strategy = "stat";
  unsigned workers = 1;
  double alpha = kDefaultAlpha;
  std::string reference;
  std::optional<std::uint64_t> data_seed;
};

void add_crack_command(CLI::App& app) {
  auto a = std::make_shared<CrackArgs>();
  auto* sub = app.add_subcommand("crack", "Brute-force the fingerprint of a locked model");
  sub->add_option("locked", a->locked, "locked model (MLCK)")->required()->check(CLI::ExistingFile);
  sub->add_option("--bits", a->bits, "search space is 2^bits clock fingerprints")
      ->check(CLI::Range(1u, 20u))
      ->capture_default_str();
  sub->add_option("--strategy", a->strategy, "stat: distinguisher before evaluation; acc: evaluate every candidate")
      ->check(CLI::IsMember({"stat", "acc"}))
      ->capture_default_str();
  sub->add_option("--workers", a->workers)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--alpha", a->alpha, "distinguisher level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->add_option("--reference", a->reference, "parameter store with the expected value distribution")
      ->check(CLI::ExistingFile);
  sub->add_option("--data-seed", a->data_seed, "override the task seed recorded in the model");
  sub->callback([a] {
    const LockedModel locked = load_locked(a->locked);
    CrackConfig cfg;
    cfg.bits = a->bits;
    cfg.strategy = a->strategy == "stat" ? CrackStrategy::StatFirst : CrackStrategy::AccuracyOnly;
    cfg.alpha = a->alpha;
    cfg.workers = a->workers;
    std::optional<DistributionStats> reference;
    if (!a->reference.empty()) {
      reference = compute_stats(load_store(a->reference));
    } else if (cfg.strategy == CrackStrategy::StatFirst) {
      reference = implicit_reference(locked);
      if (!reference) throw UsageError("plain AES payloads need --reference for the stat strategy");
    }
    const BlobTask task = task_for(locked.meta, a->data_seed);
    cfg.classes = task.test.classes;
    const CrackReport r = brute_force_report(locked, cfg, tinynet_oracle(task.test), reference ? &*reference : nullptr);

    json out;
    out["command"] = "crack";
    out["kind"] = std::string(kind_name(locked.descriptor.kind));
    out["bits"] = cfg.bits;
    out["strategy"] = a->strategy;
    out["workers"] = cfg.workers;
    out["found"] = r.found.has_value();
    out["found_index"] = r.found_index ? json(*r.found_index) : json(nullptr);
    out["fingerprint"] = r.found ? json(r.found->symbols) : json(nullptr);
    out["found_accuracy"] = r.found ? json(r.found_accuracy) : json(nullptr);
    out["best_index"] = r.best_index;
    out["best_accuracy"] = r.best_accuracy;
    out["candidates_tested"] = r.candidates_tested;
    out["discarded"] = r.discarded;
    out["evaluated"] = r.evaluated;
    out["confirmed"] = r.confirmed;
    out["wall_time_s"] = r.wall_time_s;
    out["detransform_time_s"] = r.detransform_time_s;
    out["stat_time_s"] = r.stat_time_s;
    out["eval_time_s"] = r.eval_time_s;
    const double busy = r.detransform_time_s + r.stat_time_s + r.eval_time_s;
    out["eval_share"] = busy > 0.0 ? r.eval_time_s / busy : 0.0;
    emit(out);
    if (!r.found) {
      throw NotFound("no candidate in 2^" + std::to_string(cfg.bits) + " beat chance; best was index " +
                     std::to_string(r.best_index));
    }
  });
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string model;
  std::string reference;
  double alpha = kDefaultAlpha;
};

void add_stats_command(CLI::App& app) {
  auto a = std::make_shared<StatsArgs>();
  auto* sub = app.add_subcommand("stats", "Distribution statistics and distinguisher verdicts");
  sub->add_option("model", a->model, "parameter store (MLPS) or locked model (MLCK)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--reference", a->reference, "parameter store to compare against")->check(CLI::ExistingFile);
  sub->add_option("--alpha", a->alpha)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->callback([a] {
    json out;
    out["command"] = "stats";
    out["model"] = a->model;
    ParamStore candidate;
    std::optional<DistributionStats> reference;
    if (sniff(a->model) == FileKind::Locked) {
      const LockedModel locked = load_locked(a->model);
      // The payload read as parameters, as an attacker without the key sees it.
      candidate = unflatten(locked.payload, locked.descriptor.schema);
      out["file_type"] = "locked";
      out["kind"] = std::string(kind_name(locked.descriptor.kind));
      if (a->reference.empty()) reference = implicit_reference(locked);
    } else {
      candidate = load_store(a->model);
      out["file_type"] = "store";
    }
    if (!a->reference.empty()) reference = compute_stats(load_store(a->reference));
    const DistributionStats s = compute_stats(candidate);
    out["stats"] = stats_json(s);
    if (s.byte_count >= kMinUniformityBytes) {
      const TestResult u = uniformity_chi2(s.byte_histogram);
      out["uniformity"] = {{"statistic", u.statistic}, {"p_value", u.p_value}};
    } else {
      out["uniformity"] = nullptr;
    }
    if (reference) {
      const DistinguishReport d = distinguish_report(candidate, *reference, a->alpha);
      out["verdict"] = std::string(verdict_name(d.verdict));
      out["value_ks"] = {{"statistic", d.value_ks.statistic}, {"p_value", d.value_ks.p_value}};
    } else {
      out["verdict"] = nullptr;
      out["value_ks"] = nullptr;
    }
    if (globals().format == Format::Json) {
      emit(out);
      return;
    }
    // Text and CSV: headline numbers, then the value histogram as a table.
    json flat;
    flat["model"] = out["model"];
    flat["file_type"] = out["file_type"];
    if (out.contains("kind")) flat["kind"] = out["kind"];
    flat["sample_size"] = s.sample_size;
    flat["mean"] = s.mean;
    flat["variance"] = s.variance;
    flat["kurtosis"] = s.kurtosis;
    if (!out["uniformity"].is_null()) flat["uniformity_p"] = out["uniformity"]["p_value"];
    if (reference) {
      flat["verdict"] = out["verdict"];
      flat["value_ks_p"] = out["value_ks"]["p_value"];
    }
    json curve = json::array();
    for (std::size_t i = 0; i < s.value_histogram.size(); ++i) {
      curve.push_back({{"bin", i},
                       {"upper_edge", i < s.edges.size() ? json(s.edges[i]) : json("inf")},
                       {"count", s.value_histogram[i]}});
    }
    flat["curve"] = curve;
    emit(flat);
  });
}

}  // namespace

void register_analysis_commands(CLI::App& app) {
  add_crack_command(app);
  add_stats_command(app);
}

}  // namespace mlock::cli
