#include "bcgauth/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bcgauth/errors.hpp"
#include "bcgauth/fsio.hpp"
#include "bcgauth/rng.hpp"

namespace bcgauth {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Genome traits
// ---------------------------------------------------------------------------

namespace {

constexpr int kConvLayerDomain[] = {1, 2, 3};
constexpr int kFilterDomain[] = {4, 8, 16, 32};
constexpr int kKernelDomain[] = {3, 5, 7, 9, 11};
constexpr int kPoolDomain[] = {1, 2, 3};
constexpr Activation kActivationDomain[] = {Activation::ReLU, Activation::Tanh};
constexpr int kDenseLayerDomain[] = {1, 2};
constexpr int kDenseUnitDomain[] = {16, 32, 64, 128};
constexpr double kDropoutDomain[] = {0.0, 0.25, 0.5};
constexpr double kLearningRateDomain[] = {1e-2, 1e-3, 1e-4};
constexpr int kBatchDomain[] = {16, 32, 64};

template <typename T, std::size_t N>
int index_of(const T (&domain)[N], T value) {
  for (std::size_t i = 0; i < N; ++i)
    if (domain[i] == value) return static_cast<int>(i);
  return -1;
}

constexpr double kMomentum = 0.9;

}  // namespace

int trait_domain_size(int trait) {
  switch (trait) {
    case 0: return 3;   // n_conv_layers
    case 1: return 4;   // filters_per_layer
    case 2: return 5;   // kernel_time
    case 3: return 3;   // pool_time
    case 4: return 2;   // conv_activation
    case 5: return 2;   // n_dense_layers
    case 6: return 4;   // dense_units
    case 7: return 3;   // dropout_rate
    case 8: return 3;   // learning_rate
    case 9: return 3;   // batch_size
  }
  fail(ErrorKind::Config, "trait index out of range: " + std::to_string(trait));
}

int trait_choice(const CnnGenome& g, int trait) {
  int idx = -1;
  switch (trait) {
    case 0: idx = index_of(kConvLayerDomain, g.n_conv_layers); break;
    case 1: idx = index_of(kFilterDomain, g.filters_per_layer); break;
    case 2: idx = index_of(kKernelDomain, g.kernel_time); break;
    case 3: idx = index_of(kPoolDomain, g.pool_time); break;
    case 4: idx = index_of(kActivationDomain, g.conv_activation); break;
    case 5: idx = index_of(kDenseLayerDomain, g.n_dense_layers); break;
    case 6: idx = index_of(kDenseUnitDomain, g.dense_units); break;
    case 7: idx = index_of(kDropoutDomain, g.dropout_rate); break;
    case 8: idx = index_of(kLearningRateDomain, g.learning_rate); break;
    case 9: idx = index_of(kBatchDomain, g.batch_size); break;
    default:
      fail(ErrorKind::Config, "trait index out of range: " + std::to_string(trait));
  }
  if (idx < 0)
    fail(ErrorKind::Config,
         "genome trait " + std::to_string(trait) + " holds an off-domain value");
  return idx;
}

void set_trait_choice(CnnGenome& g, int trait, int choice) {
  if (choice < 0 || choice >= trait_domain_size(trait))
    fail(ErrorKind::Config, "trait choice out of range");
  switch (trait) {
    case 0: g.n_conv_layers = kConvLayerDomain[choice]; break;
    case 1: g.filters_per_layer = kFilterDomain[choice]; break;
    case 2: g.kernel_time = kKernelDomain[choice]; break;
    case 3: g.pool_time = kPoolDomain[choice]; break;
    case 4: g.conv_activation = kActivationDomain[choice]; break;
    case 5: g.n_dense_layers = kDenseLayerDomain[choice]; break;
    case 6: g.dense_units = kDenseUnitDomain[choice]; break;
    case 7: g.dropout_rate = kDropoutDomain[choice]; break;
    case 8: g.learning_rate = kLearningRateDomain[choice]; break;
    case 9: g.batch_size = kBatchDomain[choice]; break;
  }
}

std::vector<int> conv_stage_times(const CnnGenome& genome, int input_time) {
  std::vector<int> times;
  int t = input_time;
  for (int l = 0; l < genome.n_conv_layers; ++l) {
    if (t < genome.kernel_time) return {};
    t = t - genome.kernel_time + 1;
    t = t / genome.pool_time;
    if (t < 1) return {};
    times.push_back(t);
  }
  return times;
}

bool genome_valid(const CnnGenome& genome, int input_time) {
  return !conv_stage_times(genome, input_time).empty();
}

json genome_to_json(const CnnGenome& g) {
  return json{{"n_conv_layers", g.n_conv_layers},
              {"filters_per_layer", g.filters_per_layer},
              {"kernel_time", g.kernel_time},
              {"pool_time", g.pool_time},
              {"conv_activation",
               g.conv_activation == Activation::ReLU ? "relu" : "tanh"},
              {"n_dense_layers", g.n_dense_layers},
              {"dense_units", g.dense_units},
              {"dropout_rate", g.dropout_rate},
              {"learning_rate", g.learning_rate},
              {"batch_size", g.batch_size}};
}

CnnGenome genome_from_json(const json& j) {
  CnnGenome g;
  try {
    g.n_conv_layers = j.at("n_conv_layers").get<int>();
    g.filters_per_layer = j.at("filters_per_layer").get<int>();
    g.kernel_time = j.at("kernel_time").get<int>();
    g.pool_time = j.at("pool_time").get<int>();
    const std::string act = j.at("conv_activation").get<std::string>();
    if (act == "relu")
      g.conv_activation = Activation::ReLU;
    else if (act == "tanh")
      g.conv_activation = Activation::Tanh;
    else
      fail(ErrorKind::Parse, "genome: unknown activation '" + act + "'");
    g.n_dense_layers = j.at("n_dense_layers").get<int>();
    g.dense_units = j.at("dense_units").get<int>();
    g.dropout_rate = j.at("dropout_rate").get<double>();
    g.learning_rate = j.at("learning_rate").get<double>();
    g.batch_size = j.at("batch_size").get<int>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("genome: ") + e.what());
  }
  for (int trait = 0; trait < kGenomeTraitCount; ++trait)
    trait_choice(g, trait);  // throws on off-domain values
  return g;
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

std::size_t CnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : conv_layers) n += l.weights.size() + l.bias.size();
  for (const auto& l : dense_layers) n += l.weights.size() + l.bias.size();
  n += output_layer.weights.size() + output_layer.bias.size();
  return n;
}

namespace {

void init_conv(ConvLayer& layer, Rng& rng) {
  layer.weights.resize(static_cast<std::size_t>(layer.out_channels) *
                       layer.in_channels * layer.kernel);
  layer.bias.assign(layer.out_channels, 0.0);
  const double bound =
      1.0 / std::sqrt(static_cast<double>(layer.in_channels) * layer.kernel);
  for (auto& w : layer.weights) w = rng.uniform(-bound, bound);
}

void init_dense(DenseLayer& layer, Rng& rng) {
  layer.weights.resize(static_cast<std::size_t>(layer.out_size) * layer.in_size);
  layer.bias.assign(layer.out_size, 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_size));
  for (auto& w : layer.weights) w = rng.uniform(-bound, bound);
}

}  // namespace

CnnModel build_model(const CnnGenome& genome, int w_s, std::uint64_t seed) {
  const int input_time = w_s * PipelineConfig::rate_hz;
  const auto stage_times = conv_stage_times(genome, input_time);
  if (stage_times.empty())
    fail(ErrorKind::InvalidGenome,
         "genome collapses the time axis below 1 sample for a " +
             std::to_string(input_time) + "-sample input");

  CnnModel model;
  model.genome = genome;
  model.input_time = input_time;
  model.stage_times = stage_times;

  Rng rng(substream(seed, "init"));
  int in_channels = 6;
  for (int l = 0; l < genome.n_conv_layers; ++l) {
    ConvLayer layer;
    layer.in_channels = in_channels;
    layer.out_channels = genome.filters_per_layer;
    layer.kernel = genome.kernel_time;
    init_conv(layer, rng);
    model.conv_layers.push_back(std::move(layer));
    in_channels = genome.filters_per_layer;
  }

  int in_size = genome.filters_per_layer * stage_times.back();
  for (int l = 0; l < genome.n_dense_layers; ++l) {
    DenseLayer layer;
    layer.in_size = in_size;
    layer.out_size = genome.dense_units;
    init_dense(layer, rng);
    model.dense_layers.push_back(std::move(layer));
    in_size = genome.dense_units;
  }

  model.output_layer.in_size = in_size;
  model.output_layer.out_size = 1;
  init_dense(model.output_layer, rng);
  return model;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Stable binary cross-entropy from the logit.
double bce_from_logit(double z, double y) {
  const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z))
                                  : std::log1p(std::exp(z));
  return softplus - y * z;
}

struct Workspace {
  // Per conv stage: pre-activation, activated, pooled outputs + argmax.
  std::vector<std::vector<double>> conv_pre;
  std::vector<std::vector<double>> conv_post;
  std::vector<std::vector<double>> pooled;
  std::vector<std::vector<int>> pool_argmax;
  // Dense activations (post-ReLU, post-dropout) and dropout masks.
  std::vector<std::vector<double>> dense_post;
  std::vector<std::vector<double>> dropout_mask;
  double logit = 0.0;

  // Gradient scratch, mirrored shapes.
  std::vector<std::vector<double>> d_conv_in;  // per conv layer input
  std::vector<std::vector<double>> d_conv_pre;
  std::vector<std::vector<double>> d_pooled;
  std::vector<std::vector<double>> d_dense;  // per dense layer output
};

void resize_workspace(Workspace& ws, const CnnModel& model) {
  const int n_conv = static_cast<int>(model.conv_layers.size());
  ws.conv_pre.resize(n_conv);
  ws.conv_post.resize(n_conv);
  ws.pooled.resize(n_conv);
  ws.pool_argmax.resize(n_conv);
  ws.d_conv_in.resize(n_conv);
  ws.d_conv_pre.resize(n_conv);
  ws.d_pooled.resize(n_conv);
  int t_in = model.input_time;
  for (int l = 0; l < n_conv; ++l) {
    const auto& layer = model.conv_layers[l];
    const int t_conv = t_in - layer.kernel + 1;
    const int t_pool = model.stage_times[l];
    ws.conv_pre[l].resize(static_cast<std::size_t>(layer.out_channels) * t_conv);
    ws.conv_post[l].resize(ws.conv_pre[l].size());
    ws.pooled[l].resize(static_cast<std::size_t>(layer.out_channels) * t_pool);
    ws.pool_argmax[l].resize(ws.pooled[l].size());
    ws.d_conv_in[l].resize(static_cast<std::size_t>(layer.in_channels) * t_in);
    ws.d_conv_pre[l].resize(ws.conv_pre[l].size());
    ws.d_pooled[l].resize(ws.pooled[l].size());
    t_in = t_pool;
  }
  const int n_dense = static_cast<int>(model.dense_layers.size());
  ws.dense_post.resize(n_dense);
  ws.dropout_mask.resize(n_dense);
  ws.d_dense.resize(n_dense);
  for (int l = 0; l < n_dense; ++l) {
    ws.dense_post[l].resize(model.dense_layers[l].out_size);
    ws.dropout_mask[l].resize(model.dense_layers[l].out_size);
    ws.d_dense[l].resize(model.dense_layers[l].out_size);
  }
}

// Forward pass into the workspace. When `dropout_rng` is non-null, dropout
// masks are drawn (training mode); otherwise dropout is disabled.
void forward_cached(const CnnModel& model, const double* input, Workspace& ws,
                    Rng* dropout_rng) {
  const int n_conv = static_cast<int>(model.conv_layers.size());
  const double* in = input;
  int t_in = model.input_time;

  for (int l = 0; l < n_conv; ++l) {
    const auto& layer = model.conv_layers[l];
    const int t_conv = t_in - layer.kernel + 1;
    auto& pre = ws.conv_pre[l];

    for (int o = 0; o < layer.out_channels; ++o) {
      double* out_row = pre.data() + static_cast<std::size_t>(o) * t_conv;
      std::fill(out_row, out_row + t_conv, layer.bias[o]);
      for (int i = 0; i < layer.in_channels; ++i) {
        const double* in_row = in + static_cast<std::size_t>(i) * t_in;
        const double* w_row =
            layer.weights.data() +
            (static_cast<std::size_t>(o) * layer.in_channels + i) * layer.kernel;
        for (int k = 0; k < layer.kernel; ++k) {
          const double w = w_row[k];
          const double* src = in_row + k;
          for (int t = 0; t < t_conv; ++t) out_row[t] += w * src[t];
        }
      }
    }

    auto& post = ws.conv_post[l];
    if (model.genome.conv_activation == Activation::ReLU) {
      for (std::size_t i = 0; i < pre.size(); ++i)
        post[i] = pre[i] > 0.0 ? pre[i] : 0.0;
    } else {
      for (std::size_t i = 0; i < pre.size(); ++i) post[i] = std::tanh(pre[i]);
    }

    const int p = model.genome.pool_time;
    const int t_pool = model.stage_times[l];
    auto& pooled = ws.pooled[l];
    auto& argmax = ws.pool_argmax[l];
    for (int o = 0; o < layer.out_channels; ++o) {
      const double* row = post.data() + static_cast<std::size_t>(o) * t_conv;
      for (int u = 0; u < t_pool; ++u) {
        int best = u * p;
        double best_v = row[best];
        for (int j = u * p + 1; j < (u + 1) * p; ++j) {
          if (row[j] > best_v) {
            best_v = row[j];
            best = j;
          }
        }
        pooled[static_cast<std::size_t>(o) * t_pool + u] = best_v;
        argmax[static_cast<std::size_t>(o) * t_pool + u] = best;
      }
    }

    in = pooled.data();
    t_in = t_pool;
  }

  // Dense stack; the last pooled map is already flat [channels][time].
  const double* h = in;
  for (std::size_t l = 0; l < model.dense_layers.size(); ++l) {
    const auto& layer = model.dense_layers[l];
    auto& post = ws.dense_post[l];
    for (int o = 0; o < layer.out_size; ++o) {
      const double* w_row =
          layer.weights.data() + static_cast<std::size_t>(o) * layer.in_size;
      double acc = layer.bias[o];
      for (int i = 0; i < layer.in_size; ++i) acc += w_row[i] * h[i];
      post[o] = acc > 0.0 ? acc : 0.0;  // hidden dense layers are ReLU
    }
    auto& mask = ws.dropout_mask[l];
    if (dropout_rng != nullptr && model.genome.dropout_rate > 0.0) {
      const double keep = 1.0 - model.genome.dropout_rate;
      for (int o = 0; o < layer.out_size; ++o) {
        mask[o] = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
        post[o] *= mask[o];
      }
    } else {
      std::fill(mask.begin(), mask.end(), 1.0);
    }
    h = post.data();
  }

  const auto& out = model.output_layer;
  double acc = out.bias[0];
  for (int i = 0; i < out.in_size; ++i) acc += out.weights[i] * h[i];
  ws.logit = acc;
}

struct Gradients {
  std::vector<ConvLayer> conv;
  std::vector<DenseLayer> dense;
  DenseLayer output;
};

Gradients make_zero_like(const CnnModel& model) {
  Gradients g;
  g.conv = model.conv_layers;
  g.dense = model.dense_layers;
  g.output = model.output_layer;
  for (auto& l : g.conv) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  for (auto& l : g.dense) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  std::fill(g.output.weights.begin(), g.output.weights.end(), 0.0);
  std::fill(g.output.bias.begin(), g.output.bias.end(), 0.0);
  return g;
}

void zero_gradients(Gradients& g) {
  for (auto& l : g.conv) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  for (auto& l : g.dense) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  std::fill(g.output.weights.begin(), g.output.weights.end(), 0.0);
  std::fill(g.output.bias.begin(), g.output.bias.end(), 0.0);
}

// Accumulates d(loss)/d(params) into `grads` for one example whose forward
// pass is cached in `ws`. d_logit is d(loss)/d(logit).
void backward(const CnnModel& model, const double* input, Workspace& ws,
              double d_logit, Gradients& grads) {
  const int n_dense = static_cast<int>(model.dense_layers.size());

  // Output layer.
  const double* last_h = n_dense > 0 ? ws.dense_post[n_dense - 1].data()
                                     : ws.pooled.back().data();
  grads.output.bias[0] += d_logit;
  std::vector<double>& d_last =
      n_dense > 0 ? ws.d_dense[n_dense - 1] : ws.d_pooled.back();
  for (int i = 0; i < model.output_layer.in_size; ++i) {
    grads.output.weights[i] += d_logit * last_h[i];
    d_last[i] = d_logit * model.output_layer.weights[i];
  }

  // Hidden dense layers, last to first.
  for (int l = n_dense - 1; l >= 0; --l) {
    const auto& layer = model.dense_layers[l];
    auto& d_out = ws.d_dense[l];
    // Through dropout, then ReLU. dense_post holds mask-scaled activations,
    // so post > 0 identifies surviving active units.
    for (int o = 0; o < layer.out_size; ++o) {
      d_out[o] *= ws.dropout_mask[l][o];
      if (ws.dense_post[l][o] <= 0.0) d_out[o] = 0.0;
    }
    const double* h_in = l > 0 ? ws.dense_post[l - 1].data()
                               : ws.pooled.back().data();
    std::vector<double>& d_in = l > 0 ? ws.d_dense[l - 1] : ws.d_pooled.back();
    std::fill(d_in.begin(), d_in.end(), 0.0);
    auto& g = grads.dense[l];
    for (int o = 0; o < layer.out_size; ++o) {
      const double go = d_out[o];
      if (go == 0.0) continue;
      g.bias[o] += go;
      const double* w_row =
          layer.weights.data() + static_cast<std::size_t>(o) * layer.in_size;
      double* gw_row =
          g.weights.data() + static_cast<std::size_t>(o) * layer.in_size;
      for (int i = 0; i < layer.in_size; ++i) {
        gw_row[i] += go * h_in[i];
        d_in[i] += go * w_row[i];
      }
    }
  }

  // Conv stack, last to first.
  const int n_conv = static_cast<int>(model.conv_layers.size());
  for (int l = n_conv - 1; l >= 0; --l) {
    const auto& layer = model.conv_layers[l];
    const int t_in = l == 0 ? model.input_time : model.stage_times[l - 1];
    const int t_conv = t_in - layer.kernel + 1;
    const int t_pool = model.stage_times[l];

    // Pool backward into the activated map, then through the activation.
    auto& d_pre = ws.d_conv_pre[l];
    std::fill(d_pre.begin(), d_pre.end(), 0.0);
    const auto& d_pooled = ws.d_pooled[l];
    for (int o = 0; o < layer.out_channels; ++o) {
      for (int u = 0; u < t_pool; ++u) {
        const std::size_t pooled_idx = static_cast<std::size_t>(o) * t_pool + u;
        const int src = ws.pool_argmax[l][pooled_idx];
        d_pre[static_cast<std::size_t>(o) * t_conv + src] += d_pooled[pooled_idx];
      }
    }
    if (model.genome.conv_activation == Activation::ReLU) {
      const auto& pre = ws.conv_pre[l];
      for (std::size_t i = 0; i < d_pre.size(); ++i)
        if (pre[i] <= 0.0) d_pre[i] = 0.0;
    } else {
      const auto& post = ws.conv_post[l];
      for (std::size_t i = 0; i < d_pre.size(); ++i)
        d_pre[i] *= 1.0 - post[i] * post[i];
    }

    const double* in = l == 0 ? input : ws.pooled[l - 1].data();
    auto& g = grads.conv[l];
    std::vector<double>& d_in = ws.d_conv_in[l];
    std::fill(d_in.begin(), d_in.end(), 0.0);
    for (int o = 0; o < layer.out_channels; ++o) {
      const double* d_row = d_pre.data() + static_cast<std::size_t>(o) * t_conv;
      double bias_acc = 0.0;
      for (int t = 0; t < t_conv; ++t) bias_acc += d_row[t];
      g.bias[o] += bias_acc;
      for (int i = 0; i < layer.in_channels; ++i) {
        const double* in_row = in + static_cast<std::size_t>(i) * t_in;
        double* d_in_row = d_in.data() + static_cast<std::size_t>(i) * t_in;
        const std::size_t w_base =
            (static_cast<std::size_t>(o) * layer.in_channels + i) * layer.kernel;
        for (int k = 0; k < layer.kernel; ++k) {
          const double w = layer.weights[w_base + k];
          const double* src = in_row + k;
          double* dst = d_in_row + k;
          double w_acc = 0.0;
          for (int t = 0; t < t_conv; ++t) {
            w_acc += d_row[t] * src[t];
            dst[t] += d_row[t] * w;
          }
          g.weights[w_base + k] += w_acc;
        }
      }
    }
    if (l > 0) ws.d_pooled[l - 1] = d_in;  // same layout: [channels][time]
  }
}

std::vector<double*> param_ptrs(CnnModel& model) {
  std::vector<double*> ptrs;
  auto add = [&ptrs](std::vector<double>& v) {
    for (auto& x : v) ptrs.push_back(&x);
  };
  for (auto& l : model.conv_layers) {
    add(l.weights);
    add(l.bias);
  }
  for (auto& l : model.dense_layers) {
    add(l.weights);
    add(l.bias);
  }
  add(model.output_layer.weights);
  add(model.output_layer.bias);
  return ptrs;
}

std::vector<double*> param_ptrs(Gradients& grads) {
  std::vector<double*> ptrs;
  auto add = [&ptrs](std::vector<double>& v) {
    for (auto& x : v) ptrs.push_back(&x);
  };
  for (auto& l : grads.conv) {
    add(l.weights);
    add(l.bias);
  }
  for (auto& l : grads.dense) {
    add(l.weights);
    add(l.bias);
  }
  add(grads.output.weights);
  add(grads.output.bias);
  return ptrs;
}

void check_input(const CnnModel& model, const SegmentTensor& x) {
  if (x.time_len != model.input_time ||
      x.data.size() != static_cast<std::size_t>(6) * model.input_time)
    fail(ErrorKind::Shape,
         "forward: tensor time length " + std::to_string(x.time_len) +
             " does not match model input " + std::to_string(model.input_time));
  for (const double v : x.data)
    if (!std::isfinite(v))
      fail(ErrorKind::Input, "forward: non-finite value in input tensor");
}

}  // namespace

double forward(const CnnModel& model, const SegmentTensor& x) {
  check_input(model, x);
  Workspace ws;
  resize_workspace(ws, model);
  forward_cached(model, x.data.data(), ws, nullptr);
  return sigmoid(ws.logit);
}

std::pair<double, double> batch_class_weights(int p, int n) {
  const double total = p + n;
  const double w_pos = p > 0 ? total / (2.0 * p) : 0.0;
  const double w_neg = n > 0 ? total / (2.0 * n) : 0.0;
  return {w_pos, w_neg};
}

TrainReport train(CnnModel& model, const TrainSet& data, std::uint64_t seed) {
  if (data.positives.empty() || data.negatives.empty())
    fail(ErrorKind::Training, "train: both classes must be non-empty");

  struct Example {
    const SegmentTensor* tensor;
    double label;
  };
  std::vector<Example> examples;
  examples.reserve(data.positives.size() + data.negatives.size());
  for (const auto& t : data.positives) examples.push_back({&t, 1.0});
  for (const auto& t : data.negatives) examples.push_back({&t, 0.0});
  for (const auto& e : examples) check_input(model, *e.tensor);

  Workspace ws;
  resize_workspace(ws, model);
  Gradients grads = make_zero_like(model);
  Gradients velocity = make_zero_like(model);
  const auto params = param_ptrs(model);
  const auto grad_vals = param_ptrs(grads);
  const auto vel_vals = param_ptrs(velocity);

  const int batch_size = model.genome.batch_size;
  const double lr = model.genome.learning_rate;
  const bool use_dropout = model.genome.dropout_rate > 0.0;

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  TrainReport report;
  report.seed = seed;
  report.loss_curve.reserve(kTrainEpochs);

  for (int epoch = 0; epoch < kTrainEpochs; ++epoch) {
    Rng shuffle_rng(substream(seed, "shuffle", epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      int p = 0, n = 0;
      for (std::size_t i = begin; i < end; ++i)
        (examples[order[i]].label > 0.5 ? p : n)++;
      const auto [w_pos, w_neg] = batch_class_weights(p, n);
      const double batch_total = static_cast<double>(end - begin);

      zero_gradients(grads);
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& ex = examples[order[i]];
        // Dropout masks keyed on (epoch, dataset index): independent of the
        // shuffle order and therefore reproducible.
        Rng dropout_rng(substream(seed, "dropout", epoch, order[i]));
        forward_cached(model, ex.tensor->data.data(), ws,
                       use_dropout ? &dropout_rng : nullptr);
        const double weight = (ex.label > 0.5 ? w_pos : w_neg) / batch_total;
        batch_loss += weight * bce_from_logit(ws.logit, ex.label);
        const double d_logit = weight * (sigmoid(ws.logit) - ex.label);
        backward(model, ex.tensor->data.data(), ws, d_logit, grads);
      }

      for (std::size_t i = 0; i < params.size(); ++i) {
        *vel_vals[i] = kMomentum * *vel_vals[i] + *grad_vals[i];
        *params[i] -= lr * *vel_vals[i];
      }

      epoch_loss += batch_loss * batch_total;
      epoch_count += end - begin;
    }
    report.loss_curve.push_back(epoch_loss / static_cast<double>(epoch_count));
  }

  report.epochs_run = kTrainEpochs;
  report.final_loss = report.loss_curve.back();
  return report;
}

double grad_check(CnnModel& model, const SegmentTensor& x, int label) {
  check_input(model, x);
  const double y = label > 0 ? 1.0 : 0.0;

  Workspace ws;
  resize_workspace(ws, model);
  forward_cached(model, x.data.data(), ws, nullptr);
  Gradients grads = make_zero_like(model);
  backward(model, x.data.data(), ws, sigmoid(ws.logit) - y, grads);

  auto params = param_ptrs(model);
  auto analytic = param_ptrs(grads);

  // Random parameter subset, fixed internal stream for reproducibility.
  std::vector<std::size_t> indices(params.size());
  std::iota(indices.begin(), indices.end(), 0);
  Rng rng(substream(0x6772616463686bull, "grad_check"));
  const std::size_t n_checks = std::min<std::size_t>(64, params.size());
  for (std::size_t i = 0; i < n_checks; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i),
                        static_cast<std::int64_t>(indices.size()) - 1));
    std::swap(indices[i], indices[j]);
  }

  const double h = 1e-5;
  double max_rel = 0.0;
  for (std::size_t i = 0; i < n_checks; ++i) {
    double& theta = *params[indices[i]];
    const double saved = theta;
    theta = saved + h;
    forward_cached(model, x.data.data(), ws, nullptr);
    const double loss_hi = bce_from_logit(ws.logit, y);
    theta = saved - h;
    forward_cached(model, x.data.data(), ws, nullptr);
    const double loss_lo = bce_from_logit(ws.logit, y);
    theta = saved;

    const double numeric = (loss_hi - loss_lo) / (2.0 * h);
    const double exact = *analytic[indices[i]];
    if (std::max(std::abs(numeric), std::abs(exact)) < 1e-8) continue;
    const double rel = std::abs(exact - numeric) /
                       std::max(std::abs(exact) + std::abs(numeric), 1e-12);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kModelFormat = "bcgauth-model-v1";

json conv_to_json(const ConvLayer& l) {
  return json{{"in_channels", l.in_channels},
              {"out_channels", l.out_channels},
              {"kernel", l.kernel},
              {"weights", l.weights},
              {"bias", l.bias}};
}

json dense_to_json(const DenseLayer& l) {
  return json{{"in_size", l.in_size},
              {"out_size", l.out_size},
              {"weights", l.weights},
              {"bias", l.bias}};
}

ConvLayer conv_from_json(const json& j) {
  ConvLayer l;
  l.in_channels = j.at("in_channels").get<int>();
  l.out_channels = j.at("out_channels").get<int>();
  l.kernel = j.at("kernel").get<int>();
  l.weights = j.at("weights").get<std::vector<double>>();
  l.bias = j.at("bias").get<std::vector<double>>();
  if (l.weights.size() != static_cast<std::size_t>(l.in_channels) *
                              l.out_channels * l.kernel ||
      l.bias.size() != static_cast<std::size_t>(l.out_channels))
    fail(ErrorKind::Parse, "model: conv layer sizes inconsistent");
  return l;
}

DenseLayer dense_from_json(const json& j) {
  DenseLayer l;
  l.in_size = j.at("in_size").get<int>();
  l.out_size = j.at("out_size").get<int>();
  l.weights = j.at("weights").get<std::vector<double>>();
  l.bias = j.at("bias").get<std::vector<double>>();
  if (l.weights.size() !=
          static_cast<std::size_t>(l.in_size) * l.out_size ||
      l.bias.size() != static_cast<std::size_t>(l.out_size))
    fail(ErrorKind::Parse, "model: dense layer sizes inconsistent");
  return l;
}

}  // namespace

void save_model(const CnnModel& model, const std::filesystem::path& path) {
  json j;
  j["format"] = kModelFormat;
  j["genome"] = genome_to_json(model.genome);
  j["input_time"] = model.input_time;
  j["stage_times"] = model.stage_times;
  json convs = json::array();
  for (const auto& l : model.conv_layers) convs.push_back(conv_to_json(l));
  j["conv_layers"] = convs;
  json denses = json::array();
  for (const auto& l : model.dense_layers) denses.push_back(dense_to_json(l));
  j["dense_layers"] = denses;
  j["output_layer"] = dense_to_json(model.output_layer);
  const auto dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  write_text_atomic(path, j.dump() + "\n");
}

CnnModel load_model(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kModelFormat)
      fail(ErrorKind::Parse, path.string() + ": unsupported model format");
    CnnModel model;
    model.genome = genome_from_json(j.at("genome"));
    model.input_time = j.at("input_time").get<int>();
    model.stage_times = j.at("stage_times").get<std::vector<int>>();
    for (const auto& l : j.at("conv_layers"))
      model.conv_layers.push_back(conv_from_json(l));
    for (const auto& l : j.at("dense_layers"))
      model.dense_layers.push_back(dense_from_json(l));
    model.output_layer = dense_from_json(j.at("output_layer"));
    return model;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
}

}  // namespace bcgauth
