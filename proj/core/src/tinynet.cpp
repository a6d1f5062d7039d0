#include "mlock/tinynet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mlock/errors.hpp"

namespace mlock {

BlobTask make_blobs(const BlobConfig& cfg) {
  if (cfg.classes < 2) throw InvalidArgument("blob task needs at least two classes");
  std::vector<std::pair<double, double>> centres;
  if (cfg.classes == 4) {
    centres = {{-cfg.radius, -cfg.radius}, {cfg.radius, -cfg.radius}, {-cfg.radius, cfg.radius}, {cfg.radius, cfg.radius}};
  } else {
    const double r = cfg.radius * std::sqrt(2.0);
    for (unsigned c = 0; c < cfg.classes; ++c) {
      const double a = 2.0 * 3.14159265358979323846 * c / cfg.classes;
      centres.emplace_back(r * std::cos(a), r * std::sin(a));
    }
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.spread);
  auto sample = [&](std::size_t n) {
    Dataset d;
    d.dims = 2;
    d.classes = cfg.classes;
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % cfg.classes);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (int y : labels) {
      const auto& c = centres[static_cast<std::size_t>(y)];
      d.inputs.push_back(static_cast<float>(c.first + noise(rng)));
      d.inputs.push_back(static_cast<float>(c.second + noise(rng)));
      d.labels.push_back(y);
    }
    return d;
  };
  BlobTask t;
  t.train = sample(cfg.train_size);
  t.test = sample(cfg.test_size);
  return t;
}

// ---------------------------------------------------------------------------

TinyNet::TinyNet(std::vector<unsigned> widths, std::uint64_t seed) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw InvalidArgument("network needs an input and an output width");
  for (auto w : widths_) {
    if (w == 0) throw InvalidArgument("layer widths must be positive");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const unsigned in = widths_[l];
    const unsigned out = widths_[l + 1];
    const float bound = static_cast<float>(std::sqrt(6.0 / in));
    std::uniform_real_distribution<float> init(-bound, bound);
    std::vector<float> w(static_cast<std::size_t>(in) * out);
    for (auto& v : w) v = init(rng);
    params_.push_back(std::move(w));
    params_.emplace_back(out, 0.0f);
  }
}

std::size_t TinyNet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

ParamStore TinyNet::to_store(Dtype dtype) const {
  ParamStore store;
  std::string arch = "mlp:";
  for (std::size_t i = 0; i < widths_.size(); ++i) arch += (i ? "-" : "") + std::to_string(widths_[i]);
  for (std::size_t l = 0; l < layer_count(); ++l) {
    for (int part = 0; part < 2; ++part) {
      const auto& v = params_[2 * l + static_cast<std::size_t>(part)];
      ParamTensor t;
      t.name = "fc" + std::to_string(l + 1) + (part == 0 ? ".weight" : ".bias");
      t.shape = part == 0 ? Shape{widths_[l + 1], widths_[l]} : Shape{widths_[l + 1]};
      t.dtype = dtype;
      t.data.resize(v.size() * byte_width(dtype));
      AffineParams affine;
      if (dtype == Dtype::INT8) {
        float m = 0.0f;
        for (float x : v) m = std::max(m, std::abs(x));
        affine.scale = m > 0.0f ? m / 127.0f : 1.0f;
        store.set_affine(t.name, affine);
      }
      for (std::size_t i = 0; i < v.size(); ++i) t.set_code(i, encode_value(v[i], dtype, affine));
      store.add(std::move(t));
    }
  }
  store.meta()["arch"] = arch;
  store.meta()["classes"] = std::to_string(classes());
  return store;
}

TinyNet TinyNet::from_store(const ParamStore& store) {
  if (store.size() < 2 || store.size() % 2 != 0) throw SchemaError("store does not hold weight/bias pairs");
  TinyNet net;
  for (std::size_t l = 0; l < store.size() / 2; ++l) {
    const auto& w = store.tensor(2 * l);
    const auto& b = store.tensor(2 * l + 1);
    const std::string prefix = "fc" + std::to_string(l + 1);
    if (w.name != prefix + ".weight" || b.name != prefix + ".bias") {
      throw SchemaError("unexpected tensor names '" + w.name + "', '" + b.name + "'");
    }
    if (w.shape.size() != 2 || b.shape.size() != 1 || b.shape[0] != w.shape[0]) {
      throw SchemaError("layer " + prefix + " has inconsistent shapes");
    }
    if (l == 0) {
      net.widths_.push_back(static_cast<unsigned>(w.shape[1]));
    } else if (w.shape[1] != net.widths_.back()) {
      throw SchemaError("layer " + prefix + " does not chain with the previous layer");
    }
    net.widths_.push_back(static_cast<unsigned>(w.shape[0]));
    net.params_.push_back(store.values(2 * l));
    net.params_.push_back(store.values(2 * l + 1));
  }
  return net;
}

// ---------------------------------------------------------------------------

template <class T>
T loss_and_grad(const std::vector<unsigned>& widths, const ParamList<T>& params, const Dataset& data,
                std::span<const std::size_t> batch, ParamList<T>* grad) {
  const std::size_t layers = widths.size() - 1;
  if (grad != nullptr) {
    grad->resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) (*grad)[i].assign(params[i].size(), T(0));
  }
  std::vector<std::vector<T>> act(layers + 1);  // post-activation per layer
  std::vector<T> delta;
  std::vector<T> next;
  T total = 0;
  const T inv_n = T(1) / static_cast<T>(batch.size());

  for (std::size_t s : batch) {
    act[0].assign(data.inputs.begin() + static_cast<std::ptrdiff_t>(s * data.dims),
                  data.inputs.begin() + static_cast<std::ptrdiff_t>((s + 1) * data.dims));
    for (std::size_t l = 0; l < layers; ++l) {
      const unsigned in = widths[l];
      const unsigned out = widths[l + 1];
      const auto& w = params[2 * l];
      const auto& b = params[2 * l + 1];
      auto& z = act[l + 1];
      z.assign(out, T(0));
      for (unsigned o = 0; o < out; ++o) {
        T acc = b[o];
        const T* row = w.data() + static_cast<std::size_t>(o) * in;
        for (unsigned i = 0; i < in; ++i) acc += row[i] * act[l][i];
        z[o] = (l + 1 < layers && acc < T(0)) ? T(0) : acc;
      }
    }
    // Softmax cross-entropy on the logits.
    const auto& logits = act[layers];
    const T mx = *std::max_element(logits.begin(), logits.end());
    T sum = 0;
    for (T v : logits) sum += std::exp(v - mx);
    const T lse = mx + std::log(sum);
    const int y = data.labels[s];
    total += lse - logits[static_cast<std::size_t>(y)];
    if (grad == nullptr) continue;

    delta.resize(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) {
      delta[c] = (std::exp(logits[c] - lse) - (static_cast<int>(c) == y ? T(1) : T(0))) * inv_n;
    }
    for (std::size_t l = layers; l-- > 0;) {
      const unsigned in = widths[l];
      const unsigned out = widths[l + 1];
      auto& gw = (*grad)[2 * l];
      auto& gb = (*grad)[2 * l + 1];
      const auto& w = params[2 * l];
      for (unsigned o = 0; o < out; ++o) {
        gb[o] += delta[o];
        T* grow = gw.data() + static_cast<std::size_t>(o) * in;
        for (unsigned i = 0; i < in; ++i) grow[i] += delta[o] * act[l][i];
      }
      if (l == 0) break;
      next.assign(in, T(0));
      for (unsigned o = 0; o < out; ++o) {
        const T* row = w.data() + static_cast<std::size_t>(o) * in;
        for (unsigned i = 0; i < in; ++i) next[i] += row[i] * delta[o];
      }
      for (unsigned i = 0; i < in; ++i) {
        if (!(act[l][i] > T(0))) next[i] = T(0);
      }
      delta.swap(next);
    }
  }
  return total * inv_n;
}

template float loss_and_grad<float>(const std::vector<unsigned>&, const ParamList<float>&, const Dataset&,
                                    std::span<const std::size_t>, ParamList<float>*);
template double loss_and_grad<double>(const std::vector<unsigned>&, const ParamList<double>&, const Dataset&,
                                      std::span<const std::size_t>, ParamList<double>*);

std::vector<float> forward(const std::vector<unsigned>& widths, const ParamList<float>& params, const Dataset& data) {
  const std::size_t layers = widths.size() - 1;
  const std::size_t n = data.size();
  std::vector<float> cur(data.inputs.begin(), data.inputs.begin() + static_cast<std::ptrdiff_t>(n * data.dims));
  std::vector<float> nxt;
  for (std::size_t l = 0; l < layers; ++l) {
    const unsigned in = widths[l];
    const unsigned out = widths[l + 1];
    const auto& w = params[2 * l];
    const auto& b = params[2 * l + 1];
    nxt.assign(n * out, 0.0f);
    for (std::size_t s = 0; s < n; ++s) {
      const float* x = cur.data() + s * in;
      float* z = nxt.data() + s * out;
      for (unsigned o = 0; o < out; ++o) {
        const float* row = w.data() + static_cast<std::size_t>(o) * in;
        float acc = b[o];
        for (unsigned i = 0; i < in; ++i) acc += row[i] * x[i];
        z[o] = (l + 1 < layers && acc < 0.0f) ? 0.0f : acc;
      }
    }
    cur.swap(nxt);
  }
  return cur;
}

std::vector<float> forward(const TinyNet& net, const Dataset& data) { return forward(net.widths(), net.params(), data); }

int argmax_class(std::span<const float> logits) {
  int best = 0;
  float best_v = 0.0f;
  bool seen = false;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    if (std::isnan(logits[c])) continue;
    if (!seen || logits[c] > best_v) {
      best = static_cast<int>(c);
      best_v = logits[c];
      seen = true;
    }
  }
  return best;
}

double accuracy(const std::vector<unsigned>& widths, const ParamList<float>& params, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const auto logits = forward(widths, params, data);
  const std::size_t k = widths.back();
  std::size_t hit = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    if (argmax_class(std::span<const float>(logits.data() + s * k, k)) == data.labels[s]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------

namespace {

struct PruneEntry {
  float mag;
  std::uint32_t tensor;
  std::uint32_t index;
};

Mask prune_entries(const std::vector<std::size_t>& sizes, const std::vector<bool>& is_weight,
                   const std::function<float(std::size_t, std::size_t)>& value, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("pruning fraction must lie in [0, 1]");
  Mask mask(sizes.size());
  std::vector<PruneEntry> entries;
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    mask[t].assign(sizes[t], 1);
    if (!is_weight[t]) continue;
    for (std::size_t i = 0; i < sizes[t]; ++i) {
      float m = std::abs(value(t, i));
      if (std::isnan(m)) m = std::numeric_limits<float>::infinity();
      entries.push_back({m, static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(i)});
    }
  }
  const auto count = static_cast<std::size_t>(std::floor(p * static_cast<double>(entries.size()) + 1e-9));
  if (count == 0) return mask;
  auto less = [](const PruneEntry& a, const PruneEntry& b) {
    if (a.mag != b.mag) return a.mag < b.mag;
    if (a.tensor != b.tensor) return a.tensor < b.tensor;
    return a.index < b.index;
  };
  if (count < entries.size()) {
    std::nth_element(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(count), entries.end(), less);
  }
  for (std::size_t k = 0; k < std::min(count, entries.size()); ++k) mask[entries[k].tensor][entries[k].index] = 0;
  return mask;
}

}  // namespace

Mask prune_l1_unstructured(const ParamStore& store, double p) {
  std::vector<std::vector<float>> values;
  std::vector<std::size_t> sizes;
  std::vector<bool> is_weight;
  for (std::size_t t = 0; t < store.size(); ++t) {
    values.push_back(store.values(t));
    sizes.push_back(values.back().size());
    is_weight.push_back(store.tensor(t).shape.size() >= 2);
  }
  return prune_entries(sizes, is_weight, [&](std::size_t t, std::size_t i) { return values[t][i]; }, p);
}

Mask prune_l1_unstructured(const std::vector<unsigned>& widths, const ParamList<float>& params, double p) {
  (void)widths;
  std::vector<std::size_t> sizes;
  std::vector<bool> is_weight;
  for (std::size_t t = 0; t < params.size(); ++t) {
    sizes.push_back(params[t].size());
    is_weight.push_back(t % 2 == 0);
  }
  return prune_entries(sizes, is_weight, [&](std::size_t t, std::size_t i) { return params[t][i]; }, p);
}

void apply_mask(ParamList<float>& params, const Mask& mask) {
  if (mask.size() != params.size()) throw SchemaError("mask does not match the parameter list");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (mask[t].size() != params[t].size()) throw SchemaError("mask does not match the parameter list");
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      if (!mask[t][i]) params[t][i] = 0.0f;
    }
  }
}

ParamStore apply_mask(const ParamStore& store, const Mask& mask) {
  if (mask.size() != store.size()) throw SchemaError("mask does not match the store");
  ParamStore out = store;
  auto& tensors = out.mutable_tensors();
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    if (mask[t].size() != tensors[t].count()) throw SchemaError("mask does not match the store");
    const AffineParams a = tensors[t].dtype == Dtype::INT8 ? store.affine(tensors[t].name) : AffineParams{};
    const std::uint32_t zero = encode_value(0.0, tensors[t].dtype, a);
    for (std::size_t i = 0; i < mask[t].size(); ++i) {
      if (!mask[t][i]) tensors[t].set_code(i, zero);
    }
  }
  return out;
}

void fake_quantize_inplace(std::span<float> values, Dtype scheme) {
  switch (scheme) {
    case Dtype::FP32: return;
    case Dtype::FP16:
    case Dtype::MiniFloat16:
    case Dtype::MiniFloat8: {
      const MiniFloatFormat fmt = scheme == Dtype::FP16        ? kHalf
                                  : scheme == Dtype::MiniFloat16 ? kMiniFloat16
                                                                 : kMiniFloat8;
      for (auto& v : values) {
        v = static_cast<float>(minifloat_decode(minifloat_encode(v, fmt, Overflow::Saturate), fmt));
      }
      return;
    }
    case Dtype::INT8: {
      float m = 0.0f;
      for (float v : values) {
        if (std::isfinite(v)) m = std::max(m, std::abs(v));
      }
      if (m == 0.0f) return;
      const double md = m;
      for (auto& v : values) {
        const double q = std::clamp(std::nearbyint(static_cast<double>(v) * 127.0 / md), -127.0, 127.0);
        v = static_cast<float>(q * md / 127.0);
      }
      return;
    }
  }
}

void fake_quantize(ParamList<float>& params, Dtype scheme) {
  for (auto& t : params) fake_quantize_inplace(t, scheme);
}

ParamStore fake_quantize(const ParamStore& store, Dtype scheme) {
  ParamStore out;
  for (std::size_t t = 0; t < store.size(); ++t) {
    auto v = store.values(t);
    fake_quantize_inplace(v, scheme);
    out.add_fp32(store.tensor(t).name, store.tensor(t).shape, v);
  }
  for (const auto& [k, v] : store.meta()) {
    if (!k.starts_with("int8.")) out.meta()[k] = v;
  }
  return out;
}

// ---------------------------------------------------------------------------

ParamList<float> constrained_params(const TinyNet& net, const Constraint& c, Mask* mask) {
  ParamList<float> p = net.params();
  if (c.prune > 0.0) {
    Mask m = prune_l1_unstructured(net.widths(), p, c.prune);
    apply_mask(p, m);
    if (mask != nullptr) *mask = std::move(m);
  }
  if (c.scheme) fake_quantize(p, *c.scheme);
  return p;
}

double constrained_loss_grad(const TinyNet& net, const Dataset& data, std::span<const std::size_t> batch,
                             const Constraint& c, ParamList<float>& grad) {
  if (!c.active()) return loss_and_grad(net.widths(), net.params(), data, batch, &grad);
  Mask mask;
  const auto p = constrained_params(net, c, &mask);
  const double loss = loss_and_grad(net.widths(), p, data, batch, &grad);
  if (!mask.empty()) {
    for (std::size_t t = 0; t < grad.size(); ++t) {
      for (std::size_t i = 0; i < grad[t].size(); ++i) {
        if (!mask[t][i]) grad[t][i] = 0.0f;
      }
    }
  }
  return loss;
}

TrainLog train(TinyNet& net, const Dataset& data, const TrainConfig& cfg,
               const std::function<void(unsigned)>& on_epoch) {
  const Constraint c = cfg.constraint;
  return train_objective(
      net, data, cfg,
      [&](const TinyNet& n, std::span<const std::size_t> batch, ParamList<float>& g) {
        return constrained_loss_grad(n, data, batch, c, g);
      },
      on_epoch);
}

TrainLog train_objective(TinyNet& net, const Dataset& data, const TrainConfig& cfg, const Objective& objective,
                         const std::function<void(unsigned)>& on_epoch) {
  if (cfg.batch == 0) throw InvalidArgument("batch size must be positive");
  if (data.size() == 0) throw InvalidArgument("training set is empty");
  constexpr float kBeta1 = 0.9f;
  constexpr float kBeta2 = 0.999f;
  constexpr float kEps = 1e-8f;
  auto& params = net.params();
  ParamList<float> m(params.size());
  ParamList<float> v(params.size());
  for (std::size_t t = 0; t < params.size(); ++t) {
    m[t].assign(params[t].size(), 0.0f);
    v[t].assign(params[t].size(), 0.0f);
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  ParamList<float> grad;
  TrainLog log;
  std::uint64_t step = 0;

  for (unsigned epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t len = std::min(cfg.batch, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, len);
      const double loss = objective(net, batch, grad);
      ++step;
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("loss became non-finite at step " + std::to_string(step) + " (epoch " +
                               std::to_string(epoch) + ")");
      }
      const float lr_t = static_cast<float>(cfg.lr * std::sqrt(1.0 - std::pow(kBeta2, step)) /
                                            (1.0 - std::pow(kBeta1, step)));
      for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t i = 0; i < params[t].size(); ++i) {
          const float g = grad[t][i];
          m[t][i] = kBeta1 * m[t][i] + (1.0f - kBeta1) * g;
          v[t][i] = kBeta2 * v[t][i] + (1.0f - kBeta2) * g * g;
          params[t][i] -= lr_t * m[t][i] / (std::sqrt(v[t][i]) + kEps);
        }
      }
      epoch_loss += loss;
      ++batches;
    }
    log.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
    if (on_epoch) on_epoch(epoch);
  }
  return log;
}

namespace {

double multiply_adds(const std::vector<unsigned>& widths, std::size_t samples) {
  double macs = 0.0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) macs += static_cast<double>(widths[l]) * widths[l + 1];
  return macs * static_cast<double>(samples);
}

}  // namespace

EvalReport evaluate(const TinyNet& net, const Dataset& data, const Mask* mask, std::optional<Dtype> scheme) {
  ParamList<float> p = net.params();
  if (mask != nullptr) apply_mask(p, *mask);
  if (scheme) fake_quantize(p, *scheme);
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport r;
  r.accuracy = accuracy(net.widths(), p, data);
  r.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.throughput = r.latency_s > 0.0 ? multiply_adds(net.widths(), data.size()) / r.latency_s : 0.0;
  return r;
}

EvalReport evaluate(const TinyNet& net, const Dataset& data, const Constraint& c) {
  Mask mask;
  if (c.prune > 0.0) mask = prune_l1_unstructured(net.widths(), net.params(), c.prune);
  return evaluate(net, data, mask.empty() ? nullptr : &mask, c.scheme);
}

// ---------------------------------------------------------------------------

namespace {

struct Csr {
  std::vector<std::uint32_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<float> val;
};

// Y[dim x batch] = A X, X row-major [dim x batch].
void csr_spmm(const Csr& a, const std::vector<float>& x, std::size_t batch, std::vector<float>& y) {
  const std::size_t rows = a.row_ptr.size() - 1;
  std::fill(y.begin(), y.end(), 0.0f);
  for (std::size_t i = 0; i < rows; ++i) {
    float* yr = y.data() + i * batch;
    for (std::uint32_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      const float w = a.val[k];
      const float* xr = x.data() + static_cast<std::size_t>(a.col[k]) * batch;
      for (std::size_t j = 0; j < batch; ++j) yr[j] += w * xr[j];
    }
  }
}

void masked_dense(const std::vector<float>& w, const std::vector<std::uint8_t>& mask, std::vector<float>& scratch,
                  const std::vector<float>& x, std::size_t dim, std::size_t batch, std::vector<float>& y) {
  for (std::size_t i = 0; i < w.size(); ++i) scratch[i] = mask[i] ? w[i] : 0.0f;
  std::fill(y.begin(), y.end(), 0.0f);
  for (std::size_t i = 0; i < dim; ++i) {
    float* yr = y.data() + i * batch;
    const float* wr = scratch.data() + i * dim;
    for (std::size_t k = 0; k < dim; ++k) {
      const float a = wr[k];
      const float* xr = x.data() + k * batch;
      for (std::size_t j = 0; j < batch; ++j) yr[j] += a * xr[j];
    }
  }
}

// Median per-call latency; each repetition runs enough calls to last >= 2 ms.
template <class F>
double time_kernel(F&& fn, unsigned repetitions) {
  using clock = std::chrono::steady_clock;
  std::vector<double> samples;
  fn();  // warm-up
  for (unsigned r = 0; r < std::max(1u, repetitions); ++r) {
    std::size_t calls = 0;
    const auto t0 = clock::now();
    double elapsed = 0.0;
    do {
      fn();
      ++calls;
      elapsed = std::chrono::duration<double>(clock::now() - t0).count();
    } while (elapsed < 2e-3);
    samples.push_back(elapsed / static_cast<double>(calls));
  }
  std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2), samples.end());
  return samples[samples.size() / 2];
}

}  // namespace

SparseBenchResult bench_sparse_vs_emulated(unsigned dim, double sparsity, std::size_t batch, unsigned repetitions,
                                           std::uint64_t seed) {
  if (dim == 0 || batch == 0) throw InvalidArgument("benchmark needs positive dim and batch");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) throw InvalidArgument("sparsity must lie in [0, 1]");
  const std::size_t n = static_cast<std::size_t>(dim) * dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> w(n);
  for (auto& v : w) v = normal(rng);
  std::vector<float> x(static_cast<std::size_t>(dim) * batch);
  for (auto& v : x) v = normal(rng);

  // Exactly round((1 - s) * n) kept entries at random positions.
  const auto keep = static_cast<std::size_t>(std::llround((1.0 - sparsity) * static_cast<double>(n)));
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t k = 0; k < keep; ++k) mask[idx[k]] = 1;

  Csr csr;
  csr.row_ptr.push_back(0);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      if (mask[i * dim + j]) {
        csr.col.push_back(static_cast<std::uint32_t>(j));
        csr.val.push_back(w[i * dim + j]);
      }
    }
    csr.row_ptr.push_back(static_cast<std::uint32_t>(csr.col.size()));
  }

  std::vector<float> y_real(static_cast<std::size_t>(dim) * batch);
  std::vector<float> y_emu(y_real.size());
  std::vector<float> scratch(n);

  SparseBenchResult r;
  r.dim = dim;
  r.sparsity = sparsity;
  r.batch = batch;
  r.nnz = keep;
  r.real.latency_s = time_kernel([&] { csr_spmm(csr, x, batch, y_real); }, repetitions);
  r.emulated.latency_s = time_kernel([&] { masked_dense(w, mask, scratch, x, dim, batch, y_emu); }, repetitions);
  const double useful = static_cast<double>(keep) * static_cast<double>(batch);
  r.real.throughput = useful / r.real.latency_s;
  r.emulated.throughput = useful / r.emulated.latency_s;

  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < y_real.size(); ++i) {
    const double d = static_cast<double>(y_real[i]) - y_emu[i];
    diff += d * d;
    ref += static_cast<double>(y_emu[i]) * y_emu[i];
  }
  r.relative_error = ref > 0.0 ? std::sqrt(diff / ref) : std::sqrt(diff);
  return r;
}

}  // namespace mlock
