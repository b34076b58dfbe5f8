// Genetic search over CNN genomes: population 20, fitness (FAR)^2 + (FRR)^2
// on a held-out tune split, 25% elites plus 3 random parents, 12 children by
// uniform per-trait crossover, 15% per-trait mutation, 10 generations.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bcgauth/neuralnet.hpp"

namespace bcgauth {

struct GaConfig {
  int population = 20;
  int generations = 10;
  double elite_fraction = 0.25;
  int random_parents = 3;
  int children_per_gen = 12;
  double mutation_rate = 0.15;
  std::uint64_t seed = 0;

  int n_elites() const;
  int n_parents() const { return n_elites() + random_parents; }

  // elites + random parents + children must reconstitute the population.
  void validate() const;
};

struct ScoredGenome {
  CnnGenome genome;
  double far = 0.0;
  double frr = 0.0;
  double score = 0.0;  // far^2 + frr^2, lower is better
};

// Labeled segment tensors for fitness scoring (1 = target subject).
struct TuneSet {
  std::vector<SegmentTensor> tensors;
  std::vector<int> labels;

  void validate() const;
};

double fitness_score(double far, double frr);

CnnGenome random_genome(Rng& rng);

// Builds and trains a model, scores the tune set at threshold 0.5 and
// returns FAR/FRR/score. Genomes that collapse the time axis score the
// declared worst case (far = frr = 1) instead of aborting the search.
ScoredGenome evaluate_genome(const CnnGenome& genome, const TrainSet& train,
                             const TuneSet& tune, int w_s,
                             std::uint64_t train_seed);

// Positions of the chosen parents in `scored`: the n_elites lowest scores
// (ties broken by position) plus random_parents distinct uniform picks from
// the remainder.
std::vector<std::size_t> select_parent_indices(
    const std::vector<ScoredGenome>& scored, const GaConfig& cfg, Rng& rng);

std::vector<CnnGenome> select_parents(const std::vector<ScoredGenome>& scored,
                                      const GaConfig& cfg, Rng& rng);

// Each trait copied from either parent with probability 1/2.
CnnGenome crossover(const CnnGenome& a, const CnnGenome& b, Rng& rng);

// Each trait independently re-drawn uniformly from its domain with
// probability `rate` (the redraw may repeat the current value).
CnnGenome mutate(const CnnGenome& g, double rate, Rng& rng);

// Called once per population member per generation; `cached` marks parents
// carried over with their previous score.
using GenomeLogFn =
    std::function<void(int generation, int index, const ScoredGenome&, bool cached)>;

struct GaResult {
  ScoredGenome best;  // best score seen across all generations
  std::vector<std::vector<double>> history;  // per-generation score lists
};

GaResult run_ga(const GaConfig& cfg, const TrainSet& train, const TuneSet& tune,
                int w_s, const GenomeLogFn& log = {});

}  // namespace bcgauth
