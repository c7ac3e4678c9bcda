#include "fedgsca/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fedgsca/credal.hpp"
#include "fedgsca/error.hpp"

namespace fedgsca {

namespace {

constexpr double kProbFloor = 1e-12;

std::vector<int> layer_widths(const Architecture& arch) {
  std::vector<int> w;
  w.push_back(arch.input_dim);
  w.insert(w.end(), arch.hidden.begin(), arch.hidden.end());
  w.push_back(arch.num_classes);
  return w;
}

void check_arch(const Architecture& arch) {
  if (arch.input_dim < 1) throw ShapeError("architecture: input_dim must be >= 1");
  if (arch.num_classes < 2) throw ShapeError("architecture: num_classes must be >= 2");
  for (int h : arch.hidden)
    if (h < 1) throw ShapeError("architecture: hidden widths must be >= 1");
}

// Activations of every layer for one input; acts[0] is the input itself.
struct Forward {
  std::vector<std::vector<double>> acts;
  std::vector<double> logits;
};

Forward forward(const ModelParams& params, std::span<const double> x) {
  const auto& arch = params.architecture();
  if (static_cast<int>(x.size()) != arch.input_dim)
    throw ShapeError("feature dimension " + std::to_string(x.size()) + " does not match model input " +
                     std::to_string(arch.input_dim));
  Forward f;
  f.acts.emplace_back(x.begin(), x.end());
  const auto v = params.values();
  for (int l = 0; l < params.num_layers(); ++l) {
    const int in = params.layer_in(l), out = params.layer_out(l);
    const double* W = v.data() + params.weight_offset(l);
    const double* b = v.data() + params.bias_offset(l);
    const auto& h = f.acts.back();
    std::vector<double> a(out);
    for (int o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = W + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) s += row[i] * h[i];
      a[o] = s;
    }
    if (l + 1 == params.num_layers()) {
      f.logits = std::move(a);
    } else {
      for (double& z : a) z = std::tanh(z);
      f.acts.push_back(std::move(a));
    }
  }
  return f;
}

}  // namespace

std::size_t Architecture::parameter_count() const {
  auto w = layer_widths(*this);
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l)
    n += static_cast<std::size_t>(w[l]) * w[l + 1] + w[l + 1];
  return n;
}

ModelParams::ModelParams(Architecture arch) : arch_(std::move(arch)) {
  check_arch(arch_);
  values_.assign(arch_.parameter_count(), 0.0);
}

ModelParams::ModelParams(Architecture arch, std::vector<double> values)
    : arch_(std::move(arch)), values_(std::move(values)) {
  check_arch(arch_);
  if (values_.size() != arch_.parameter_count())
    throw ShapeError("parameter vector has " + std::to_string(values_.size()) + " entries, architecture needs " +
                     std::to_string(arch_.parameter_count()));
}

int ModelParams::layer_in(int layer) const {
  return layer == 0 ? arch_.input_dim : arch_.hidden[layer - 1];
}

int ModelParams::layer_out(int layer) const {
  return layer < static_cast<int>(arch_.hidden.size()) ? arch_.hidden[layer] : arch_.num_classes;
}

std::size_t ModelParams::weight_offset(int layer) const {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l) off += static_cast<std::size_t>(layer_in(l)) * layer_out(l) + layer_out(l);
  return off;
}

std::size_t ModelParams::bias_offset(int layer) const {
  return weight_offset(layer) + static_cast<std::size_t>(layer_in(layer)) * layer_out(layer);
}

bool ModelParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
  ModelParams p(arch);
  if (arch.hidden.empty()) return p;
  Rng rng(derive_seed(seed, {stream::kInit}));
  for (int l = 0; l < p.num_layers(); ++l) {
    std::normal_distribution<double> w(0.0, 1.0 / std::sqrt(static_cast<double>(p.layer_in(l))));
    auto vals = p.values();
    for (std::size_t i = p.weight_offset(l); i < p.bias_offset(l); ++i) vals[i] = w(rng);
  }
  return p;
}

std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> p(z.size());
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> logits(const ModelParams& params, std::span<const double> features) {
  return forward(params, features).logits;
}

std::vector<double> predict_proba(const ModelParams& params, std::span<const double> features) {
  return softmax(forward(params, features).logits);
}

std::vector<double> per_sample_ce_loss(const ModelParams& params, std::span<const Sample> samples) {
  std::vector<double> losses;
  losses.reserve(samples.size());
  const int C = params.architecture().num_classes;
  for (const auto& s : samples) {
    if (s.observed_label < 0 || s.observed_label >= C) throw ShapeError("label out of range");
    auto p = predict_proba(params, s.features);
    losses.push_back(-std::log(std::max(p[s.observed_label], kProbFloor)));
  }
  return losses;
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::CE: return "ce";
    case LossKind::RCL: return "rcl";
    case LossKind::UCL: return "ucl";
  }
  return "?";
}

SampleLoss sample_loss(std::span<const double> probs, int label, LossKind kind, const LossContext& ctx) {
  SampleLoss out;
  out.dlogits.assign(probs.begin(), probs.end());
  if (kind == LossKind::CE) {
    out.loss = -std::log(std::max(probs[label], kProbFloor));
    out.dlogits[label] -= 1.0;
    return out;
  }
  CredalLoss cl = kind == LossKind::RCL ? rcl_loss(probs, build_possibility(label, probs, ctx.beta, ctx.alpha))
                                        : ucl_loss(probs, label, ctx.beta, ctx.alpha);
  out.loss = cl.loss;
  if (!cl.active) {
    std::fill(out.dlogits.begin(), out.dlogits.end(), 0.0);
  } else {
    for (std::size_t c = 0; c < probs.size(); ++c) out.dlogits[c] = probs[c] - cl.target[c];
  }
  return out;
}

BatchGradient batch_gradient(const ModelParams& params, std::span<const Sample> batch, LossKind kind,
                             const LossContext& ctx) {
  BatchGradient g;
  g.grad.assign(params.size(), 0.0);
  if (batch.empty()) return g;
  const auto v = params.values();
  const int L = params.num_layers();
  const int C = params.architecture().num_classes;
  const double scale = 1.0 / static_cast<double>(batch.size());

  for (const auto& s : batch) {
    if (s.observed_label < 0 || s.observed_label >= C) throw ShapeError("label out of range");
    Forward f = forward(params, s.features);
    auto probs = softmax(f.logits);
    SampleLoss sl = sample_loss(probs, s.observed_label, kind, ctx);
    if (!std::isfinite(sl.loss) ||
        !std::all_of(sl.dlogits.begin(), sl.dlogits.end(), [](double d) { return std::isfinite(d); }))
      throw TrainingError("non-finite loss gradient at sample id " + std::to_string(s.id));
    g.mean_loss += sl.loss * scale;

    std::vector<double> delta = std::move(sl.dlogits);
    for (int l = L - 1; l >= 0; --l) {
      const int in = params.layer_in(l), out = params.layer_out(l);
      const auto& h = f.acts[l];
      double* dW = g.grad.data() + params.weight_offset(l);
      double* db = g.grad.data() + params.bias_offset(l);
      for (int o = 0; o < out; ++o) {
        const double d = delta[o] * scale;
        if (d == 0.0) continue;
        db[o] += d;
        double* row = dW + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) row[i] += d * h[i];
      }
      if (l == 0) break;
      const double* W = v.data() + params.weight_offset(l);
      std::vector<double> prev(in, 0.0);
      for (int o = 0; o < out; ++o) {
        const double* row = W + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) prev[i] += row[i] * delta[o];
      }
      for (int i = 0; i < in; ++i) prev[i] *= 1.0 - h[i] * h[i];
      delta = std::move(prev);
    }
  }
  return g;
}

ModelParams sgd_step(const ModelParams& params, std::span<const Sample> batch, LossKind kind, const LossContext& ctx,
                     double lr, double weight_decay) {
  if (lr < 0.0) throw std::invalid_argument("sgd_step: learning rate must be nonnegative");
  ModelParams next = params;
  if (lr == 0.0) return next;
  BatchGradient g = batch_gradient(params, batch, kind, ctx);
  auto vals = next.values();
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] -= lr * (g.grad[i] + weight_decay * vals[i]);
  return next;
}

void validate(const TrainConfig& cfg) {
  if (cfg.local_epochs < 1) throw ValidationError("fed.train.local_epochs", "must be >= 1");
  if (cfg.batch_size < 1) throw ValidationError("fed.train.batch_size", "must be >= 1");
  if (!(cfg.base_learning_rate > 0.0)) throw ValidationError("fed.train.learning_rate", "must be > 0");
  if (!(cfg.lr_drop_factor > 0.0)) throw ValidationError("fed.train.lr_drop_factor", "must be > 0");
  if (!(cfg.weight_decay >= 0.0)) throw ValidationError("fed.train.weight_decay", "must be >= 0");
  for (std::size_t i = 0; i < cfg.lr_drop_points.size(); ++i) {
    double p = cfg.lr_drop_points[i];
    if (!(p > 0.0 && p <= 1.0))
      throw ValidationError("fed.train.lr_drop_points[" + std::to_string(i) + "]", "must lie in (0, 1]");
  }
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i)
    if (cfg.hidden[i] < 1) throw ValidationError("fed.train.hidden[" + std::to_string(i) + "]", "must be >= 1");
}

double learning_rate_at(const TrainConfig& cfg, int round, int total_rounds) {
  double lr = cfg.base_learning_rate;
  for (double p : cfg.lr_drop_points) {
    // Round the product before the ceiling: 0.7 * 10 is 7.000000000000001.
    const double boundary = std::ceil(std::round(p * total_rounds * 1e9) / 1e9);
    if (round >= boundary) lr *= cfg.lr_drop_factor;
  }
  return lr;
}

ModelParams train_epochs(ModelParams params, std::span<const Sample> data, int epochs, int batch_size, double lr,
                         double weight_decay, LossKind kind, const LossContext& ctx, Rng& rng) {
  if (data.empty()) return params;
  std::vector<std::size_t> order(data.size());
  std::vector<Sample> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(data[order[i]]);
      params = sgd_step(params, batch, kind, ctx, lr, weight_decay);
    }
  }
  return params;
}

ModelParams fedavg_combine(std::span<const WeightedModel> models) {
  if (models.empty()) throw std::invalid_argument("fedavg_combine: no models");
  const Architecture& arch = models.front().params->architecture();
  double total = 0.0;
  for (const auto& m : models) {
    if (m.params->architecture() != arch) throw ShapeError("fedavg_combine: architecture mismatch");
    if (!(m.weight > 0.0)) throw std::invalid_argument("fedavg_combine: weights must be positive");
    total += m.weight;
  }
  ModelParams out(arch);
  auto acc = out.values();
  for (const auto& m : models) {
    const double w = m.weight / total;
    auto src = m.params->values();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * src[i];
  }
  return out;
}

double squared_distance(const ModelParams& a, const ModelParams& b) {
  if (a.architecture() != b.architecture()) throw ShapeError("squared_distance: architecture mismatch");
  double s = 0.0;
  auto va = a.values(), vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = va[i] - vb[i];
    s += d * d;
  }
  return s;
}

namespace {

constexpr char kMagic[4] = {'F', 'G', 'M', 'P'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated model file");
  return v;
}

}  // namespace

// Host byte order; every supported target is little-endian.
void save_params(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto& arch = params.architecture();
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.input_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.num_classes));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(arch.hidden.size()));
  for (int h : arch.hidden) put<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  put<std::uint64_t>(out, params.size());
  out.write(reinterpret_cast<const char*>(params.values().data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error("not a model file");
  if (get<std::uint32_t>(in) != kFormatVersion) throw std::runtime_error("unsupported model file version");
  Architecture arch;
  arch.input_dim = static_cast<int>(get<std::uint32_t>(in));
  arch.num_classes = static_cast<int>(get<std::uint32_t>(in));
  const auto n_hidden = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_hidden; ++i) arch.hidden.push_back(static_cast<int>(get<std::uint32_t>(in)));
  const auto count = get<std::uint64_t>(in);
  if (count != arch.parameter_count()) throw ShapeError("model file parameter count does not match header");
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("truncated model file");
  return ModelParams(std::move(arch), std::move(values));
}

}  // namespace fedgsca
