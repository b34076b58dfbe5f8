#include "bcgauth/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bcgauth/errors.hpp"

namespace bcgauth {

int GaConfig::n_elites() const {
  return static_cast<int>(std::llround(population * elite_fraction));
}

void GaConfig::validate() const {
  if (population < 2) fail(ErrorKind::Config, "ga: population must be >= 2");
  if (generations < 1) fail(ErrorKind::Config, "ga: generations must be >= 1");
  if (elite_fraction <= 0.0 || elite_fraction >= 1.0)
    fail(ErrorKind::Config, "ga: elite_fraction must lie in (0, 1)");
  if (random_parents < 0)
    fail(ErrorKind::Config, "ga: random_parents must be >= 0");
  if (mutation_rate < 0.0 || mutation_rate > 1.0)
    fail(ErrorKind::Config, "ga: mutation_rate must lie in [0, 1]");
  const int elites = n_elites();
  if (elites < 1) fail(ErrorKind::Config, "ga: elite_fraction yields no elites");
  if (elites + random_parents >= population)
    fail(ErrorKind::Config, "ga: parents must number fewer than the population");
  if (elites + random_parents + children_per_gen != population)
    fail(ErrorKind::Config,
         "ga: elites (" + std::to_string(elites) + ") + random parents (" +
             std::to_string(random_parents) + ") + children (" +
             std::to_string(children_per_gen) + ") must equal the population (" +
             std::to_string(population) + ")");
  if (n_parents() < 2)
    fail(ErrorKind::Config, "ga: need at least two parents for crossover");
}

void TuneSet::validate() const {
  if (tensors.size() != labels.size())
    fail(ErrorKind::Config, "tune set: tensors/labels length mismatch");
  if (tensors.empty()) fail(ErrorKind::Config, "tune set: empty");
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (!has_pos || !has_neg)
    fail(ErrorKind::Config, "tune set: needs both positive and negative labels");
}

double fitness_score(double far, double frr) { return far * far + frr * frr; }

CnnGenome random_genome(Rng& rng) {
  CnnGenome g;
  for (int trait = 0; trait < kGenomeTraitCount; ++trait)
    set_trait_choice(
        g, trait,
        static_cast<int>(rng.uniform_int(0, trait_domain_size(trait) - 1)));
  return g;
}

ScoredGenome evaluate_genome(const CnnGenome& genome, const TrainSet& train_data,
                             const TuneSet& tune, int w_s,
                             std::uint64_t train_seed) {
  tune.validate();
  if (train_data.positives.empty() || train_data.negatives.empty())
    fail(ErrorKind::Training, "evaluate_genome: empty training class");

  if (!genome_valid(genome, w_s * PipelineConfig::rate_hz))
    return {genome, 1.0, 1.0, fitness_score(1.0, 1.0)};

  CnnModel model = build_model(genome, w_s, train_seed);
  train(model, train_data, train_seed);

  // One-shot scoring at the fixed tuning threshold.
  std::size_t pos_total = 0, neg_total = 0, false_accept = 0, false_reject = 0;
  for (std::size_t i = 0; i < tune.tensors.size(); ++i) {
    const bool accept = forward(model, tune.tensors[i]) > 0.5;
    if (tune.labels[i] == 1) {
      ++pos_total;
      if (!accept) ++false_reject;
    } else {
      ++neg_total;
      if (accept) ++false_accept;
    }
  }
  const double far = static_cast<double>(false_accept) / neg_total;
  const double frr = static_cast<double>(false_reject) / pos_total;
  return {genome, far, frr, fitness_score(far, frr)};
}

std::vector<std::size_t> select_parent_indices(
    const std::vector<ScoredGenome>& scored, const GaConfig& cfg, Rng& rng) {
  cfg.validate();
  if (scored.size() != static_cast<std::size_t>(cfg.population))
    fail(ErrorKind::Config,
         "select_parents: got " + std::to_string(scored.size()) +
             " scored genomes for a population of " +
             std::to_string(cfg.population));

  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&scored](std::size_t a, std::size_t b) {
                     return scored[a].score < scored[b].score;
                   });

  const std::size_t n_elites = static_cast<std::size_t>(cfg.n_elites());
  std::vector<std::size_t> picked(order.begin(), order.begin() + n_elites);

  // Distinct uniform picks from the bottom of the ranking.
  std::vector<std::size_t> rest(order.begin() + n_elites, order.end());
  for (int i = 0; i < cfg.random_parents; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(i, static_cast<std::int64_t>(rest.size()) - 1));
    std::swap(rest[i], rest[j]);
    picked.push_back(rest[i]);
  }
  return picked;
}

std::vector<CnnGenome> select_parents(const std::vector<ScoredGenome>& scored,
                                      const GaConfig& cfg, Rng& rng) {
  std::vector<CnnGenome> parents;
  for (const auto idx : select_parent_indices(scored, cfg, rng))
    parents.push_back(scored[idx].genome);
  return parents;
}

CnnGenome crossover(const CnnGenome& a, const CnnGenome& b, Rng& rng) {
  CnnGenome child;
  for (int trait = 0; trait < kGenomeTraitCount; ++trait) {
    const CnnGenome& source = rng.bernoulli(0.5) ? a : b;
    set_trait_choice(child, trait, trait_choice(source, trait));
  }
  return child;
}

CnnGenome mutate(const CnnGenome& g, double rate, Rng& rng) {
  CnnGenome out = g;
  for (int trait = 0; trait < kGenomeTraitCount; ++trait) {
    if (rng.bernoulli(rate))
      set_trait_choice(
          out, trait,
          static_cast<int>(rng.uniform_int(0, trait_domain_size(trait) - 1)));
  }
  return out;
}

GaResult run_ga(const GaConfig& cfg, const TrainSet& train_data,
                const TuneSet& tune, int w_s, const GenomeLogFn& log) {
  cfg.validate();
  tune.validate();

  Rng ops_rng(substream(cfg.seed, "ga-ops"));
  auto eval_seed = [&cfg](int generation, int index) {
    return substream(cfg.seed, "ga-eval", static_cast<std::uint64_t>(generation),
                     static_cast<std::uint64_t>(index));
  };

  std::vector<ScoredGenome> population;
  population.reserve(cfg.population);
  for (int i = 0; i < cfg.population; ++i) {
    const CnnGenome genome = random_genome(ops_rng);
    population.push_back(
        evaluate_genome(genome, train_data, tune, w_s, eval_seed(0, i)));
    if (log) log(0, i, population.back(), false);
  }

  GaResult result;
  result.best = population.front();
  auto track_best = [&result](const ScoredGenome& candidate) {
    if (candidate.score < result.best.score) result.best = candidate;
  };
  auto record_generation = [&result](const std::vector<ScoredGenome>& gen) {
    std::vector<double> scores;
    scores.reserve(gen.size());
    for (const auto& s : gen) scores.push_back(s.score);
    result.history.push_back(std::move(scores));
  };

  for (const auto& s : population) track_best(s);
  record_generation(population);

  for (int gen = 1; gen < cfg.generations; ++gen) {
    const auto parent_indices = select_parent_indices(population, cfg, ops_rng);
    std::vector<ScoredGenome> next;
    next.reserve(cfg.population);
    // Parents persist unchanged; their scores are deterministic for the
    // seed they were trained with, so they are carried over, not retrained.
    for (const auto idx : parent_indices) next.push_back(population[idx]);
    if (log)
      for (std::size_t i = 0; i < next.size(); ++i)
        log(gen, static_cast<int>(i), next[i], true);

    const int n_parents = static_cast<int>(parent_indices.size());
    for (int child = 0; child < cfg.children_per_gen; ++child) {
      const auto a = static_cast<std::size_t>(ops_rng.uniform_int(0, n_parents - 1));
      auto b = static_cast<std::size_t>(ops_rng.uniform_int(0, n_parents - 2));
      if (b >= a) ++b;  // two distinct parents
      const CnnGenome genome = mutate(
          crossover(next[a].genome, next[b].genome, ops_rng), cfg.mutation_rate,
          ops_rng);
      const int index = n_parents + child;
      next.push_back(
          evaluate_genome(genome, train_data, tune, w_s, eval_seed(gen, index)));
      if (log) log(gen, index, next.back(), false);
      track_best(next.back());
    }

    population = std::move(next);
    record_generation(population);
  }
  return result;
}

}  // namespace bcgauth
