#include "bcgauth/neuralnet.hpp"

#include <doctest.h>

#include <cmath>

#include "bcgauth/errors.hpp"
#include "bcgauth/rng.hpp"
#include "test_util.hpp"

using namespace bcgauth;
using bcgauth::test::TempDir;

namespace {

SegmentTensor random_tensor(int time_len, Rng& rng, double scale = 1.0) {
  SegmentTensor t;
  t.time_len = time_len;
  t.data.resize(6 * static_cast<std::size_t>(time_len));
  for (auto& v : t.data) v = scale * rng.uniform(-1.0, 1.0);
  return t;
}

SegmentTensor constant_tensor(int time_len, double value) {
  SegmentTensor t;
  t.time_len = time_len;
  t.data.assign(6 * static_cast<std::size_t>(time_len), value);
  return t;
}

CnnGenome minimal_genome() {
  CnnGenome g;
  g.n_conv_layers = 1;
  g.filters_per_layer = 4;
  g.kernel_time = 3;
  g.pool_time = 1;
  g.conv_activation = Activation::ReLU;
  g.n_dense_layers = 1;
  g.dense_units = 16;
  g.dropout_rate = 0.0;
  g.learning_rate = 1e-2;
  g.batch_size = 16;
  return g;
}

}  // namespace

TEST_CASE("minimal genome accepts (2,3,150) and outputs a confidence") {
  const auto model = build_model(minimal_genome(), 3, 1);
  Rng rng(5);
  const auto x = random_tensor(150, rng);
  const double c = forward(model, x);
  CHECK(c >= 0.0);
  CHECK(c <= 1.0);
}

TEST_CASE("build_model is deterministic in (genome, seed)") {
  const auto a = build_model(minimal_genome(), 3, 99);
  const auto b = build_model(minimal_genome(), 3, 99);
  const auto c = build_model(minimal_genome(), 3, 100);
  CHECK(a.conv_layers[0].weights == b.conv_layers[0].weights);
  CHECK(a.output_layer.weights == b.output_layer.weights);
  CHECK(a.conv_layers[0].weights != c.conv_layers[0].weights);
}

TEST_CASE("stage times follow the conv/pool arithmetic") {
  CnnGenome g = minimal_genome();
  g.n_conv_layers = 3;
  g.kernel_time = 3;
  g.pool_time = 3;
  const auto times = conv_stage_times(g, 150);
  REQUIRE(times.size() == 3);
  CHECK(times[0] == 49);  // (150-2)/3
  CHECK(times[1] == 15);  // (49-2)/3
  CHECK(times[2] == 4);   // (15-2)/3
  CHECK(genome_valid(g, 150));
}

TEST_CASE("a genome that collapses the time axis is rejected") {
  CnnGenome g = minimal_genome();
  g.n_conv_layers = 3;
  g.kernel_time = 11;
  g.pool_time = 3;
  CHECK(!genome_valid(g, 150));
  try {
    build_model(g, 3, 1);
    FAIL("expected invalid-genome error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidGenome);
  }
}

TEST_CASE("forward stays in [0,1] on random tensors (property)") {
  Rng rng(17);
  CnnGenome g = minimal_genome();
  g.n_conv_layers = 2;
  g.pool_time = 2;
  const auto model = build_model(g, 3, 7);
  for (int trial = 0; trial < 50; ++trial) {
    const double c = forward(model, random_tensor(150, rng, 50.0));
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
  }
}

TEST_CASE("all-zero input gives exactly 0.5 with zero-initialized biases") {
  const auto model = build_model(minimal_genome(), 3, 3);
  CHECK(forward(model, constant_tensor(150, 0.0)) == 0.5);
}

TEST_CASE("forward is bit-deterministic") {
  const auto model = build_model(minimal_genome(), 3, 11);
  Rng rng(23);
  const auto x = random_tensor(150, rng);
  CHECK(forward(model, x) == forward(model, x));
}

TEST_CASE("forward rejects mismatched shapes and non-finite input") {
  const auto model = build_model(minimal_genome(), 3, 1);
  Rng rng(2);
  try {
    forward(model, random_tensor(100, rng));
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Shape);
  }
  auto x = random_tensor(150, rng);
  x.data[37] = std::numeric_limits<double>::quiet_NaN();
  try {
    forward(model, x);
    FAIL("expected input error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Input);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(31);
  SUBCASE("minimal ReLU genome") {
    auto model = build_model(minimal_genome(), 3, 5);
    const auto x = random_tensor(150, rng);
    CHECK(grad_check(model, x, 1) < 1e-4);
    CHECK(grad_check(model, x, 0) < 1e-4);
  }
  SUBCASE("tanh genome with pooling") {
    CnnGenome g = minimal_genome();
    g.conv_activation = Activation::Tanh;
    g.n_conv_layers = 2;
    g.pool_time = 2;
    g.filters_per_layer = 8;
    auto model = build_model(g, 3, 6);
    const auto x = random_tensor(150, rng);
    CHECK(grad_check(model, x, 1) < 1e-4);
  }
  SUBCASE("deep genome with two dense layers") {
    CnnGenome g = minimal_genome();
    g.n_conv_layers = 3;
    g.kernel_time = 5;
    g.pool_time = 2;
    g.n_dense_layers = 2;
    g.dense_units = 32;
    auto model = build_model(g, 3, 8);
    const auto x = random_tensor(150, rng);
    CHECK(grad_check(model, x, 0) < 1e-4);
  }
}

TEST_CASE("grad_check skips the saturated stationary point") {
  auto model = build_model(minimal_genome(), 3, 5);
  model.output_layer.bias[0] = 40.0;  // sigmoid saturates at ~1
  Rng rng(37);
  const auto x = random_tensor(150, rng);
  CHECK(grad_check(model, x, 1) == 0.0);  // all gradients below the floor
}

TEST_CASE("training separates a tiny separable set perfectly") {
  CnnGenome g = minimal_genome();
  auto model = build_model(g, 3, 13);
  TrainSet data;
  for (int i = 0; i < 6; ++i) {
    data.positives.push_back(constant_tensor(150, 0.5));
    data.negatives.push_back(constant_tensor(150, -0.5));
  }
  const auto report = train(model, data, 101);
  CHECK(report.epochs_run == kTrainEpochs);
  CHECK(report.loss_curve.size() == static_cast<std::size_t>(kTrainEpochs));
  for (const auto& t : data.positives) CHECK(forward(model, t) > 0.5);
  for (const auto& t : data.negatives) CHECK(forward(model, t) < 0.5);
  // Loss settles at or below its starting point.
  CHECK(report.final_loss <= report.loss_curve.front() * 1.05);
}

TEST_CASE("training shrinks the loss on a noisy separable set") {
  CnnGenome g = minimal_genome();
  g.dropout_rate = 0.25;
  auto model = build_model(g, 3, 17);
  Rng rng(41);
  TrainSet data;
  for (int i = 0; i < 12; ++i) {
    auto pos = random_tensor(150, rng, 0.3);
    for (auto& v : pos.data) v += 0.4;
    data.positives.push_back(std::move(pos));
    data.negatives.push_back(random_tensor(150, rng, 0.3));
  }
  const auto report = train(model, data, 7);
  CHECK(report.final_loss <= report.loss_curve.front() * 1.05);
  CHECK(report.final_loss < report.loss_curve.front());
}

TEST_CASE("training is deterministic in (genome, seed, data)") {
  TrainSet data;
  Rng rng(43);
  for (int i = 0; i < 4; ++i) {
    data.positives.push_back(random_tensor(150, rng, 1.0));
    data.negatives.push_back(random_tensor(150, rng, 1.0));
  }
  CnnGenome g = minimal_genome();
  g.dropout_rate = 0.25;  // exercises the seeded dropout path

  auto a = build_model(g, 3, 3);
  auto b = build_model(g, 3, 3);
  const auto ra = train(a, data, 55);
  const auto rb = train(b, data, 55);
  CHECK(ra.loss_curve == rb.loss_curve);
  CHECK(a.conv_layers[0].weights == b.conv_layers[0].weights);
  CHECK(a.output_layer.weights == b.output_layer.weights);

  auto c = build_model(g, 3, 3);
  const auto rc = train(c, data, 56);
  CHECK(ra.loss_curve != rc.loss_curve);
}

TEST_CASE("per-batch class weights balance the classes") {
  Rng rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    const int p = static_cast<int>(rng.uniform_int(1, 40));
    const int n = static_cast<int>(rng.uniform_int(1, 40));
    const auto [w_pos, w_neg] = batch_class_weights(p, n);
    CHECK(std::abs(p * w_pos - n * w_neg) < 1e-9);
    CHECK(std::abs(p * w_pos + n * w_neg - (p + n)) < 1e-9);
  }
}

TEST_CASE("training requires both classes") {
  auto model = build_model(minimal_genome(), 3, 1);
  TrainSet data;
  data.positives.push_back(constant_tensor(150, 1.0));
  try {
    train(model, data, 1);
    FAIL("expected training error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Training);
  }
}

TEST_CASE("saved models reload with bit-identical outputs") {
  TempDir dir("model_io");
  CnnGenome g = minimal_genome();
  g.n_conv_layers = 2;
  g.pool_time = 2;
  auto model = build_model(g, 3, 77);

  Rng rng(53);
  TrainSet data;
  for (int i = 0; i < 3; ++i) {
    data.positives.push_back(random_tensor(150, rng));
    data.negatives.push_back(random_tensor(150, rng));
  }
  train(model, data, 9);

  const auto path = dir.path() / "model.json";
  save_model(model, path);
  const auto loaded = load_model(path);
  CHECK(loaded.genome == model.genome);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_tensor(150, rng);
    CHECK(forward(loaded, x) == forward(model, x));
  }
}

TEST_CASE("genome JSON round-trips and rejects off-domain values") {
  CnnGenome g = minimal_genome();
  g.conv_activation = Activation::Tanh;
  g.dense_units = 128;
  const auto j = genome_to_json(g);
  CHECK(genome_from_json(j) == g);

  auto bad = j;
  bad["learning_rate"] = 0.005;  // not in the declared domain
  try {
    genome_from_json(bad);
    FAIL("expected config/parse error");
  } catch (const Error&) {
  }
}

TEST_CASE("trait machinery covers all ten traits") {
  CnnGenome g;
  for (int trait = 0; trait < kGenomeTraitCount; ++trait) {
    const int size = trait_domain_size(trait);
    CHECK(size >= 2);
    for (int choice = 0; choice < size; ++choice) {
      set_trait_choice(g, trait, choice);
      CHECK(trait_choice(g, trait) == choice);
    }
  }
}
