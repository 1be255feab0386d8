#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <json.hpp>

#include "coaplab/classifiers.hpp"
#include "coaplab/dataset.hpp"
#include "coaplab/features.hpp"
#include "coaplab/random.hpp"

namespace coaplab {

struct GaConfig {
  std::size_t population_size = 40;
  std::size_t generations = 30;
  double crossover_rate = 0.9;
  double mutation_rate = 0.02;
  std::size_t elitism_count = 2;
  std::size_t k = kSelectedWidth;
  std::size_t fitness_folds = 3;
  std::size_t fitness_tree_depth = 6;
  std::uint64_t rng_seed = 17;

  void validate(std::size_t width) const;
};

struct Chromosome {
  FeatureMask mask;
  std::optional<double> fitness;
  bool operator==(const Chromosome&) const = default;
};

/// Uniformly random k-subsets; one child stream per chromosome.
std::vector<Chromosome> init_population(const GaConfig& cfg, std::size_t width = kSchemaWidth);

/// Mean stratified k-fold accuracy of a depth-capped tree on the masked columns. Results are memoised
/// per mask; folds depend only on the data and cfg.rng_seed.
class FitnessEvaluator {
 public:
  FitnessEvaluator(const FeatureDataset& data, const GaConfig& cfg);

  double operator()(const FeatureMask& mask);
  std::size_t evaluations() const { return evaluations_; }
  std::size_t cache_size() const { return cache_.size(); }

 private:
  const FeatureDataset& data_;
  GaConfig cfg_;
  std::vector<std::size_t> folds_;
  std::map<std::uint64_t, double> cache_;
  std::size_t evaluations_ = 0;
};

double fitness(const Chromosome& c, const FeatureDataset& data, const GaConfig& cfg);

/// Tournament (size 2) selection, uniform crossover repaired to popcount k, popcount-preserving swap
/// mutation. The elitism_count fittest survive unchanged, in their original relative order, at the front.
std::vector<Chromosome> select_crossover_mutate(const std::vector<Chromosome>& population, const GaConfig& cfg,
                                                Rng& rng);

struct GaResult {
  FeatureMask best_mask;
  double best_fitness = 0.0;
  std::vector<double> best_history;  // best of each generation's population, generation 0 first
  std::vector<double> mean_history;
  std::size_t evaluations = 0;
};

GaResult run_ga(const FeatureDataset& data, const GaConfig& cfg);

nlohmann::json ga_report_json(const GaResult& result, const GaConfig& cfg,
                              const FeatureSchema& schema = FeatureSchema::canonical());

}  // namespace coaplab
