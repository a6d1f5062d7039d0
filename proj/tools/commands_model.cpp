#include <memory>
#include <sstream>

#include "cli_support.hpp"
#include "commands.hpp"
#include "mlock/errors.hpp"
#include "mlock/softlock.hpp"

namespace mlock::cli {

namespace {

const std::vector<std::string> kDtypes = {"fp32", "fp16", "minifloat16", "minifloat8", "int8"};

std::optional<std::uint64_t> opt_seed(const std::optional<std::uint64_t>& flag) {
  return flag ? flag : globals().seed;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string out;
  unsigned epochs = 30;
  double lr = 0.01;
  std::size_t batch = 64;
  std::string dtype = "fp32";
  std::optional<std::uint64_t> data_seed;
  std::size_t train_size = 2000;
  std::size_t test_size = 2000;
};

void add_train_command(CLI::App& app) {
  auto a = std::make_shared<TrainArgs>();
  auto* sub = app.add_subcommand("train", "Train the reference classifier on the blob task");
  sub->add_option("--out,-o", a->out, "output parameter store (MLPS)")->required();
  sub->add_option("--epochs", a->epochs)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--lr", a->lr)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--batch", a->batch)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--dtype", a->dtype, "storage format")->check(CLI::IsMember(kDtypes))->capture_default_str();
  sub->add_option("--data-seed", a->data_seed, "blob task seed (defaults to --seed)");
  sub->add_option("--train-size", a->train_size)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--test-size", a->test_size)->check(CLI::PositiveNumber)->capture_default_str();
  sub->callback([a] {
    const Dtype dtype = parse_dtype_flag(a->dtype);
    const std::uint64_t seed = globals().seed_or(0);
    BlobConfig blobs;
    blobs.seed = opt_seed(a->data_seed).value_or(0);
    blobs.train_size = a->train_size;
    blobs.test_size = a->test_size;
    const BlobTask task = make_blobs(blobs);
    TinyNet net(kDefaultWidths, seed);
    TrainConfig cfg;
    cfg.epochs = a->epochs;
    cfg.lr = a->lr;
    cfg.batch = a->batch;
    cfg.seed = seed + 1;
    const TrainLog tl = train(net, task.train, cfg, [&](unsigned e) {
      log(LogLevel::Debug, "epoch " + std::to_string(e + 1));
    });
    ParamStore store = net.to_store(dtype);
    store.meta()["task"] = "blobs";
    store.meta()["data.seed"] = std::to_string(blobs.seed);
    store.meta()["data.train_size"] = std::to_string(blobs.train_size);
    store.meta()["data.test_size"] = std::to_string(blobs.test_size);
    save_store(store, a->out);
    // Accuracy as stored, so lossy dtypes report what eval will see.
    const TinyNet stored = TinyNet::from_store(store);
    json out;
    out["command"] = "train";
    out["out"] = a->out;
    out["dtype"] = a->dtype;
    out["parameters"] = stored.parameter_count();
    out["data_seed"] = blobs.seed;
    out["final_loss"] = tl.epoch_loss.back();
    out["train_accuracy"] = evaluate(stored, task.train).accuracy;
    out["test_accuracy"] = evaluate(stored, task.test).accuracy;
    json curve = json::array();
    for (std::size_t e = 0; e < tl.epoch_loss.size(); ++e) {
      curve.push_back({{"epoch", e + 1}, {"loss", tl.epoch_loss[e]}});
    }
    out["curve"] = curve;
    emit(out);
  });
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string model;
  double prune = 0.0;
  std::string scheme = "fp32";
  std::optional<std::uint64_t> data_seed;
  std::string split = "test";
};

void add_eval_command(CLI::App& app) {
  auto a = std::make_shared<EvalArgs>();
  auto* sub = app.add_subcommand("eval", "Accuracy and latency of a stored model");
  sub->add_option("model", a->model, "parameter store (MLPS)")->required()->check(CLI::ExistingFile);
  sub->add_option("--prune", a->prune, "l1-unstructured pruning fraction")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sub->add_option("--scheme", a->scheme, "fake-quantization format")
      ->check(CLI::IsMember(kDtypes))
      ->capture_default_str();
  sub->add_option("--data-seed", a->data_seed, "override the task seed recorded in the store");
  sub->add_option("--split", a->split)->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  sub->callback([a] {
    const Dtype scheme = parse_dtype_flag(a->scheme);
    const ParamStore store = load_store(a->model);
    const TinyNet net = TinyNet::from_store(store);
    const BlobTask task = task_for(store.meta(), a->data_seed);
    const Dataset& data = a->split == "train" ? task.train : task.test;
    const EvalReport r = evaluate(net, data, Constraint{a->prune, scheme});
    json out;
    out["command"] = "eval";
    out["model"] = a->model;
    out["split"] = a->split;
    out["samples"] = data.size();
    out["prune"] = a->prune;
    out["scheme"] = a->scheme;
    out["accuracy"] = r.accuracy;
    out["latency_s"] = r.latency_s;
    out["throughput"] = r.throughput;
    emit(out);
  });
}

// ---------------------------------------------------------------------------
// Soft locking. The constraint pair is recorded in the output store so
// `attack` can default to it.

struct ConstraintArgs {
  std::string mode = "sparsity";
  double p1 = 0.0;
  double p2 = 0.5;
  std::string auth_scheme = "fp32";
  std::string unauth_scheme = "minifloat8";
};

void add_constraint_options(CLI::App* sub, ConstraintArgs& c, bool required_mode) {
  auto* mode = sub->add_option("--mode", c.mode, "what the lock keys on")
                   ->check(CLI::IsMember({"sparsity", "quant"}))
                   ->capture_default_str();
  if (required_mode) mode->required();
  sub->add_option("--p1", c.p1, "authorized pruning fraction")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->add_option("--p2", c.p2, "unauthorized pruning fraction")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->add_option("--auth-scheme", c.auth_scheme)->check(CLI::IsMember(kDtypes))->capture_default_str();
  sub->add_option("--unauth-scheme", c.unauth_scheme)->check(CLI::IsMember(kDtypes))->capture_default_str();
}

SoftLockConfig base_config(const ConstraintArgs& c) {
  if (c.mode == "sparsity") return sparsity_lock_config(c.p1, c.p2);
  return quant_lock_config(parse_dtype_flag(c.auth_scheme), parse_dtype_flag(c.unauth_scheme));
}

struct SoftlockArgs {
  std::string model;
  std::string out;
  ConstraintArgs c;
  std::optional<double> lambda;
  std::optional<double> epsilon;
  std::optional<unsigned> epochs;
  std::optional<double> lr;
  std::optional<std::uint64_t> data_seed;
};

void add_softlock_command(CLI::App& app) {
  auto a = std::make_shared<SoftlockArgs>();
  auto* sub = app.add_subcommand("softlock", "Fine-tune a model so it degrades under an unauthorized configuration");
  sub->add_option("model", a->model, "trained parameter store (MLPS)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out,-o", a->out, "output parameter store (MLPS)")->required();
  add_constraint_options(sub, a->c, true);
  sub->add_option("--lambda", a->lambda, "weight of the unauthorized term")->check(CLI::NonNegativeNumber);
  sub->add_option("--epsilon", a->epsilon, "unauthorized cross-entropy target")->check(CLI::PositiveNumber);
  sub->add_option("--epochs", a->epochs)->check(CLI::PositiveNumber);
  sub->add_option("--lr", a->lr)->check(CLI::PositiveNumber);
  sub->add_option("--data-seed", a->data_seed, "override the task seed recorded in the store");
  sub->callback([a] {
    SoftLockConfig cfg = base_config(a->c);
    if (a->lambda) cfg.lambda = *a->lambda;
    if (a->epsilon) cfg.epsilon = *a->epsilon;
    if (a->epochs) cfg.train.epochs = *a->epochs;
    if (a->lr) cfg.train.lr = *a->lr;
    cfg.train.seed = globals().seed_or(0);
    validate(cfg);

    const ParamStore store = load_store(a->model);
    const TinyNet original = TinyNet::from_store(store);
    const BlobTask task = task_for(store.meta(), a->data_seed);
    TinyNet locked = original;
    json curve = json::array();
    auto record = [&](std::size_t step) {
      curve.push_back({{"step", step},
                       {"acc_auth", evaluate(locked, task.test, cfg.authorized).accuracy},
                       {"acc_unauth", evaluate(locked, task.test, cfg.unauthorized).accuracy}});
    };
    record(0);
    auto on_epoch = [&](unsigned e) { record(e + 1); };
    if (a->c.mode == "sparsity") {
      sparsity_lock_train(locked, task.train, cfg, on_epoch);
    } else {
      quant_lock_train(locked, task.train, cfg, on_epoch);
    }
    ParamStore out_store = locked.to_store(store.tensors().front().dtype);
    for (const auto& [k, v] : store.meta()) out_store.meta().emplace(k, v);
    out_store.meta()["softlock.mode"] = a->c.mode;
    if (a->c.mode == "sparsity") {
      out_store.meta()["softlock.p1"] = json(a->c.p1).dump();
      out_store.meta()["softlock.p2"] = json(a->c.p2).dump();
    } else {
      out_store.meta()["softlock.auth_scheme"] = a->c.auth_scheme;
      out_store.meta()["softlock.unauth_scheme"] = a->c.unauth_scheme;
    }
    save_store(out_store, a->out);

    const LockReport r = lock_metrics(original, locked, task.test, cfg);
    json out;
    out["command"] = "softlock";
    out["out"] = a->out;
    out["mode"] = a->c.mode;
    out["lambda"] = cfg.lambda;
    out["epsilon"] = cfg.epsilon;
    out["epochs"] = cfg.train.epochs;
    out["lr"] = cfg.train.lr;
    out["acc_original"] = r.acc_original;
    out["acc_original_unauthorized"] = r.acc_original_unauthorized;
    out["acc_locked_authorized"] = r.acc_locked_authorized;
    out["acc_locked_unauthorized"] = r.acc_locked_unauthorized;
    out["delta_orig"] = r.delta_orig;
    out["delta_lock"] = r.delta_lock;
    out["delta_base"] = r.delta_base;
    out["curve"] = curve;
    emit(out);
  });
}

// ---------------------------------------------------------------------------

struct AttackArgs {
  std::string model;
  std::string kind = "retrain";
  ConstraintArgs c;
  unsigned epochs = 10;
  double lr = 0.005;
  std::string noise = "0,0.05,0.1,0.2,0.5,1";
  unsigned trials = 10;
  std::optional<std::uint64_t> data_seed;
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "' in list");
    }
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

// Flags win; otherwise the lock recorded by `softlock` is used.
void fill_from_meta(ConstraintArgs& c, const ParamStore::Meta& meta, const CLI::App* sub) {
  auto get = [&](const char* key) -> std::optional<std::string> {
    const auto it = meta.find(key);
    if (it == meta.end()) return std::nullopt;
    return it->second;
  };
  if (sub->count("--mode") == 0) {
    if (auto m = get("softlock.mode")) c.mode = *m;
  }
  if (sub->count("--p1") == 0) {
    if (auto v = get("softlock.p1")) c.p1 = std::stod(*v);
  }
  if (sub->count("--p2") == 0) {
    if (auto v = get("softlock.p2")) c.p2 = std::stod(*v);
  }
  if (sub->count("--auth-scheme") == 0) {
    if (auto v = get("softlock.auth_scheme")) c.auth_scheme = *v;
  }
  if (sub->count("--unauth-scheme") == 0) {
    if (auto v = get("softlock.unauth_scheme")) c.unauth_scheme = *v;
  }
}

void add_attack_command(CLI::App& app) {
  auto a = std::make_shared<AttackArgs>();
  auto* sub = app.add_subcommand("attack", "Try to remove a soft lock");
  sub->add_option("model", a->model, "soft-locked parameter store (MLPS)")->required()->check(CLI::ExistingFile);
  sub->add_option("--kind", a->kind, "attack")->check(CLI::IsMember({"retrain", "noise"}))->capture_default_str();
  add_constraint_options(sub, a->c, false);
  sub->add_option("--epochs", a->epochs, "retrain: fine-tuning budget")->capture_default_str();
  sub->add_option("--lr", a->lr, "retrain: learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--noise", a->noise, "noise: comma-separated multiples of each tensor's std")
      ->capture_default_str();
  sub->add_option("--trials", a->trials, "noise: draws per level")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--data-seed", a->data_seed, "override the task seed recorded in the store");
  sub->callback([a, sub] {
    const std::vector<double> levels = a->kind == "noise" ? parse_list(a->noise) : std::vector<double>{};
    const ParamStore store = load_store(a->model);
    fill_from_meta(a->c, store.meta(), sub);
    const SoftLockConfig cfg = base_config(a->c);
    const TinyNet net = TinyNet::from_store(store);
    const BlobTask task = task_for(store.meta(), a->data_seed);
    const std::uint64_t seed = globals().seed_or(0);
    json out;
    out["command"] = "attack";
    out["kind"] = a->kind;
    out["mode"] = a->c.mode;
    json curve = json::array();
    if (a->kind == "retrain") {
      const RecoveryCurve rc = attack_retrain(net, task.train, task.test, cfg.unauthorized, a->epochs, a->lr, seed,
                                              cfg.authorized);
      for (std::size_t i = 0; i < rc.unauthorized.size(); ++i) {
        curve.push_back({{"step", i}, {"acc_auth", rc.authorized[i]}, {"acc_unauth", rc.unauthorized[i]}});
      }
      out["epochs"] = a->epochs;
      out["lr"] = a->lr;
      out["final_acc_unauth"] = rc.unauthorized.back();
    } else {
      for (const NoisePoint& p : attack_noise(net, task.test, cfg.unauthorized, levels, a->trials, seed)) {
        curve.push_back({{"noise_param", p.noise_param}, {"mean_acc", p.mean_accuracy}, {"std_acc", p.std_accuracy}});
      }
      out["trials"] = a->trials;
    }
    out["curve"] = curve;
    emit(out);
  });
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  unsigned dim = 2048;
  double sparsity = 0.995;
  std::size_t batch = 16;
  unsigned reps = 7;
};

void add_bench_command(CLI::App& app) {
  auto a = std::make_shared<BenchArgs>();
  auto* sub = app.add_subcommand("bench", "Sparse kernel versus masked-dense emulation");
  sub->add_option("--dim", a->dim)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--sparsity", a->sparsity)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->add_option("--batch", a->batch)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--reps", a->reps)->check(CLI::PositiveNumber)->capture_default_str();
  sub->callback([a] {
    const SparseBenchResult r = bench_sparse_vs_emulated(a->dim, a->sparsity, a->batch, a->reps, globals().seed_or(0));
    json out;
    out["command"] = "bench";
    out["dim"] = r.dim;
    out["sparsity"] = r.sparsity;
    out["batch"] = r.batch;
    out["nnz"] = r.nnz;
    out["real_latency_s"] = r.real.latency_s;
    out["real_throughput"] = r.real.throughput;
    out["emulated_latency_s"] = r.emulated.latency_s;
    out["emulated_throughput"] = r.emulated.throughput;
    out["speedup"] = r.emulated.latency_s / r.real.latency_s;
    out["relative_error"] = r.relative_error;
    emit(out);
  });
}

}  // namespace

void register_model_commands(CLI::App& app) {
  add_train_command(app);
  add_eval_command(app);
  add_softlock_command(app);
  add_attack_command(app);
  add_bench_command(app);
}

}  // namespace mlock::cli
