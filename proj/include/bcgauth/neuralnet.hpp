// Self-contained convolutional network used as the per-subject verifier.
//
// Topology is fixed by a 10-trait genome: 1-D convolutions slide along the
// time axis while spanning the full 2x3 sensor/axis plane (the six input
// channels), followed by max pooling, dense layers and a single sigmoid
// output reporting a confidence in [0, 1]. Training is class-weighted
// binary cross-entropy under mini-batch gradient descent with momentum,
// for a fixed 100 epochs. Everything is double precision and bit
// deterministic for a given (genome, seed, data).
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcgauth/bcg_pipeline.hpp"

namespace bcgauth {

enum class Activation { ReLU, Tanh };

struct CnnGenome {
  int n_conv_layers = 2;         // 1..3
  int filters_per_layer = 8;     // {4, 8, 16, 32}
  int kernel_time = 7;           // {3, 5, 7, 9, 11}
  int pool_time = 2;             // {1, 2, 3}
  Activation conv_activation = Activation::ReLU;
  int n_dense_layers = 1;        // 1..2
  int dense_units = 32;          // {16, 32, 64, 128}
  double dropout_rate = 0.25;    // {0.0, 0.25, 0.5}
  double learning_rate = 1e-3;   // {1e-2, 1e-3, 1e-4}
  int batch_size = 32;           // {16, 32, 64}

  bool operator==(const CnnGenome&) const = default;
};

// Trait-indexed view of the genome for the genetic algorithm: every trait
// is a choice index into its (small, fixed) value domain.
inline constexpr int kGenomeTraitCount = 10;
int trait_domain_size(int trait);
int trait_choice(const CnnGenome& genome, int trait);
void set_trait_choice(CnnGenome& genome, int trait, int choice);

// Time-axis length after each conv+pool stage; empty if some stage would
// collapse below one sample (invalid genome for this input length).
std::vector<int> conv_stage_times(const CnnGenome& genome, int input_time);
bool genome_valid(const CnnGenome& genome, int input_time);

nlohmann::json genome_to_json(const CnnGenome& genome);
CnnGenome genome_from_json(const nlohmann::json& j);

struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  std::vector<double> weights;  // [out][in][k]
  std::vector<double> bias;     // [out]
};

struct DenseLayer {
  int in_size = 0;
  int out_size = 0;
  std::vector<double> weights;  // [out][in]
  std::vector<double> bias;     // [out]
};

struct CnnModel {
  CnnGenome genome;
  int input_time = 0;
  std::vector<ConvLayer> conv_layers;
  std::vector<int> stage_times;     // time length after each conv+pool
  std::vector<DenseLayer> dense_layers;  // hidden layers (ReLU)
  DenseLayer output_layer;               // single logit -> sigmoid

  std::size_t parameter_count() const;
};

struct TrainSet {
  std::vector<SegmentTensor> positives;
  std::vector<SegmentTensor> negatives;
};

inline constexpr int kTrainEpochs = 100;

struct TrainReport {
  int epochs_run = 0;
  std::vector<double> loss_curve;  // mean weighted loss per epoch
  double final_loss = 0.0;
  std::uint64_t seed = 0;
};

// Deterministic fan-in-scaled uniform initialization.
CnnModel build_model(const CnnGenome& genome, int w_s, std::uint64_t seed);

// Inference: dropout disabled, output in [0, 1].
double forward(const CnnModel& model, const SegmentTensor& x);

// Per-batch class weighting: positives and negatives contribute equal total
// weight. Returns (w_pos, w_neg) for a batch of p positives, n negatives.
std::pair<double, double> batch_class_weights(int p, int n);

// Exactly kTrainEpochs epochs of shuffled mini-batch SGD (momentum 0.9);
// mutates the model in place.
TrainReport train(CnnModel& model, const TrainSet& data, std::uint64_t seed);

// Compares analytic gradients against central finite differences on a
// random subset of parameters; returns the max relative error. Entries
// where both gradients are below 1e-8 in magnitude are skipped.
double grad_check(CnnModel& model, const SegmentTensor& x, int label);

// Versioned JSON serialization; load reproduces forward outputs bit-exactly.
void save_model(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_model(const std::filesystem::path& path);

}  // namespace bcgauth
