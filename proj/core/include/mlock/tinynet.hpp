#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlock/dtype.hpp"
#include "mlock/param_store.hpp"

namespace mlock {

struct Dataset {
  std::vector<float> inputs;  // row-major, size() x dims
  std::vector<int> labels;
  unsigned dims = 2;
  unsigned classes = 4;

  std::size_t size() const noexcept { return labels.size(); }
};

struct BlobConfig {
  std::uint64_t seed = 0;
  std::size_t train_size = 2000;
  std::size_t test_size = 2000;
  unsigned classes = 4;
  double spread = 1.0;   // per-axis standard deviation
  double radius = 2.0;   // centres sit at (+-radius, +-radius) for k=4
};

struct BlobTask {
  Dataset train;
  Dataset test;
};

// Balanced k-class Gaussian blobs in 2-D. Centres for k=4 are the corners
// (+-r, +-r); other k place them evenly on a circle of radius r*sqrt(2).
BlobTask make_blobs(const BlobConfig& cfg = {});

// Parameters of one dense layer chain, ordered W1, b1, W2, b2, ...
template <class T>
using ParamList = std::vector<std::vector<T>>;

// Fully connected ReLU classifier. Parameters are held as float tensors
// named fcN.weight [out, in] and fcN.bias [out].
class TinyNet {
 public:
  TinyNet() = default;
  TinyNet(std::vector<unsigned> widths, std::uint64_t seed);

  const std::vector<unsigned>& widths() const noexcept { return widths_; }
  unsigned classes() const noexcept { return widths_.back(); }
  std::size_t layer_count() const noexcept { return widths_.size() - 1; }

  ParamList<float>& params() noexcept { return params_; }
  const ParamList<float>& params() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept;

  // Round trip through a ParamStore. `dtype` selects the storage format;
  // from_store decodes any dtype back to float.
  ParamStore to_store(Dtype dtype = Dtype::FP32) const;
  static TinyNet from_store(const ParamStore& store);

  bool operator==(const TinyNet&) const = default;

 private:
  std::vector<unsigned> widths_;
  ParamList<float> params_;
};

inline const std::vector<unsigned> kDefaultWidths = {2, 64, 64, 4};

// Mean cross-entropy over `batch` and, if `grad` is non-null, its gradient
// with respect to every parameter (same layout as params).
template <class T>
T loss_and_grad(const std::vector<unsigned>& widths, const ParamList<T>& params, const Dataset& data,
                std::span<const std::size_t> batch, ParamList<T>* grad);

// Logits for every sample, row-major [n, classes].
std::vector<float> forward(const TinyNet& net, const Dataset& data);
std::vector<float> forward(const std::vector<unsigned>& widths, const ParamList<float>& params, const Dataset& data);

// Index of the largest logit. NaN logits never win; all-NaN rows give 0.
int argmax_class(std::span<const float> logits);
double accuracy(const std::vector<unsigned>& widths, const ParamList<float>& params, const Dataset& data);

// ---------------------------------------------------------------------------
// Pruning and quantization

// One keep-flag per element, aligned with the tensors it was computed for.
using Mask = std::vector<std::vector<std::uint8_t>>;

// Global l1-unstructured pruning over rank >= 2 tensors (weights). Removes
// floor(p * n) entries, smallest |value| first, ties by (tensor, index).
Mask prune_l1_unstructured(const ParamStore& store, double p);
Mask prune_l1_unstructured(const std::vector<unsigned>& widths, const ParamList<float>& params, double p);
void apply_mask(ParamList<float>& params, const Mask& mask);
ParamStore apply_mask(const ParamStore& store, const Mask& mask);

// Quantize then dequantize. FP32 is the identity; INT8 uses a symmetric
// per-tensor scale max|w| / 127.
void fake_quantize_inplace(std::span<float> values, Dtype scheme);
ParamStore fake_quantize(const ParamStore& store, Dtype scheme);
void fake_quantize(ParamList<float>& params, Dtype scheme);

// ---------------------------------------------------------------------------
// Training and evaluation

// Deployment-time modification applied in the forward pass.
struct Constraint {
  double prune = 0.0;              // l1-unstructured fraction
  std::optional<Dtype> scheme;     // fake-quantization format

  bool active() const noexcept { return prune > 0.0 || (scheme && *scheme != Dtype::FP32); }
};

// Parameters the network actually computes with under `c`; `mask` receives
// the pruning mask when pruning is active.
ParamList<float> constrained_params(const TinyNet& net, const Constraint& c, Mask* mask = nullptr);

struct TrainConfig {
  unsigned epochs = 30;
  double lr = 0.01;
  std::size_t batch = 64;
  std::uint64_t seed = 0;
  Constraint constraint;  // straight-through fine-tuning under a constraint
};

// Per-batch objective: returns the loss and fills `grad` (same layout as the
// net's parameters). Throwing aborts training.
using Objective = std::function<double(const TinyNet& net, std::span<const std::size_t> batch, ParamList<float>& grad)>;

struct TrainLog {
  std::vector<double> epoch_loss;
};

// Adam over mini-batches drawn in a seeded order. Deterministic for a given
// seed. Throws TrainingDiverged when the loss becomes non-finite.
TrainLog train(TinyNet& net, const Dataset& data, const TrainConfig& cfg,
               const std::function<void(unsigned epoch)>& on_epoch = {});
TrainLog train_objective(TinyNet& net, const Dataset& data, const TrainConfig& cfg, const Objective& objective,
                         const std::function<void(unsigned epoch)>& on_epoch = {});

// Cross-entropy objective under a constraint, straight-through for both
// pruning (masked weights get no gradient) and quantization.
double constrained_loss_grad(const TinyNet& net, const Dataset& data, std::span<const std::size_t> batch,
                             const Constraint& c, ParamList<float>& grad);

struct EvalReport {
  double accuracy = 0.0;
  double latency_s = 0.0;      // wall time of one pass over the split
  double throughput = 0.0;     // multiply-adds per second
};

EvalReport evaluate(const TinyNet& net, const Dataset& data, const Mask* mask = nullptr,
                    std::optional<Dtype> scheme = std::nullopt);
EvalReport evaluate(const TinyNet& net, const Dataset& data, const Constraint& c);

// ---------------------------------------------------------------------------
// Sparse kernel versus masked-dense emulation

struct KernelTiming {
  double latency_s = 0.0;   // median over repetitions
  double throughput = 0.0;  // useful multiply-adds per second
};

struct SparseBenchResult {
  unsigned dim = 0;
  double sparsity = 0.0;
  std::size_t batch = 0;
  std::size_t nnz = 0;
  KernelTiming real;      // CSR kernel
  KernelTiming emulated;  // mask applied to dense weights, then dense matmul
  double relative_error = 0.0;
};

SparseBenchResult bench_sparse_vs_emulated(unsigned dim, double sparsity, std::size_t batch = 16,
                                           unsigned repetitions = 7, std::uint64_t seed = 0);

}  // namespace mlock
