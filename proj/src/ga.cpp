#include "coaplab/ga.hpp"

#include <algorithm>
#include <numeric>

#include "coaplab/error.hpp"

namespace coaplab {
namespace {

FeatureMask random_subset(Rng& rng, std::size_t width, std::size_t k) {
  std::vector<std::size_t> pool(width);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(width - 1)));
    std::swap(pool[i], pool[j]);
  }
  return FeatureMask::from_indices(width, std::span<const std::size_t>(pool).first(k));
}

std::size_t pick(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n - 1)));
}

std::size_t tournament(const std::vector<Chromosome>& pop, Rng& rng) {
  const std::size_t a = pick(rng, pop.size());
  const std::size_t b = pick(rng, pop.size());
  const double fa = pop[a].fitness.value_or(0.0);
  const double fb = pop[b].fitness.value_or(0.0);
  if (fa != fb) return fa > fb ? a : b;
  return std::min(a, b);
}

// Brings popcount back to k, preferring bits either parent carried when adding.
void repair(FeatureMask& child, const FeatureMask& a, const FeatureMask& b, std::size_t k, Rng& rng) {
  while (child.popcount() > k) {
    const auto on = child.indices();
    child.set(on[pick(rng, on.size())], false);
  }
  while (child.popcount() < k) {
    std::vector<std::size_t> preferred, other;
    for (std::size_t i = 0; i < child.width(); ++i) {
      if (child.test(i)) continue;
      (a.test(i) || b.test(i) ? preferred : other).push_back(i);
    }
    const auto& from = preferred.empty() ? other : preferred;
    child.set(from[pick(rng, from.size())]);
  }
}

void mutate(FeatureMask& mask, double rate, Rng& rng) {
  if (rate <= 0) return;
  for (std::size_t i : mask.indices()) {
    if (!rng.bernoulli(rate)) continue;
    std::vector<std::size_t> off;
    for (std::size_t j = 0; j < mask.width(); ++j) {
      if (!mask.test(j)) off.push_back(j);
    }
    if (off.empty()) return;
    mask.set(i, false);
    mask.set(off[pick(rng, off.size())]);
  }
}

}  // namespace

void GaConfig::validate(std::size_t width) const {
  if (population_size < 2) throw ConfigError("population_size must be at least 2");
  if (elitism_count > population_size) throw ConfigError("elitism_count exceeds population_size");
  if (!(crossover_rate >= 0 && crossover_rate <= 1) || !(mutation_rate >= 0 && mutation_rate <= 1)) {
    throw ConfigError("rates must lie in [0, 1]");
  }
  if (k == 0 || k > width) throw ConfigError("k must lie in [1, " + std::to_string(width) + "]");
  if (fitness_folds < 2) throw ConfigError("fitness_folds must be at least 2");
}

std::vector<Chromosome> init_population(const GaConfig& cfg, std::size_t width) {
  cfg.validate(width);
  std::vector<Chromosome> pop;
  pop.reserve(cfg.population_size);
  for (std::size_t i = 0; i < cfg.population_size; ++i) {
    Rng rng(mix_seed(cfg.rng_seed, i));
    pop.push_back({random_subset(rng, width, cfg.k), std::nullopt});
  }
  return pop;
}

FitnessEvaluator::FitnessEvaluator(const FeatureDataset& data, const GaConfig& cfg) : data_(data), cfg_(cfg) {
  data.validate();
  if (data.size() == 0 || !data.has_both_classes()) throw DataError("fitness needs data with both classes");
  folds_ = stratified_folds(data.y, cfg.fitness_folds, mix_seed(cfg.rng_seed, 0xF01D));
}

double FitnessEvaluator::operator()(const FeatureMask& mask) {
  check_mask_width(mask, data_.features());
  if (const auto it = cache_.find(mask.bits()); it != cache_.end()) return it->second;
  ++evaluations_;

  const auto columns = mask.indices();
  FeatureDataset projected;
  std::vector<double> values;
  values.reserve(data_.size() * columns.size());
  for (std::size_t i = 0; i < data_.size(); ++i) {
    for (std::size_t c : columns) values.push_back(data_.x(i, c));
  }
  projected.x = Matrix(data_.size(), columns.size(), std::move(values));
  projected.y = data_.y;

  TreeParams params;
  params.max_depth = cfg_.fitness_tree_depth;
  double total = 0.0;
  for (std::size_t fold = 0; fold < cfg_.fitness_folds; ++fold) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < data_.size(); ++i) (folds_[i] == fold ? test : train).push_back(i);
    if (train.empty() || test.empty()) throw DataError("a fitness fold is empty");
    const DecisionTreeModel tree = tree_fit(projected, train, params, nullptr);
    std::size_t correct = 0;
    for (std::size_t i : test) correct += tree_predict(tree, projected.x.row(i)) == projected.y[i] ? 1 : 0;
    total += static_cast<double>(correct) / static_cast<double>(test.size());
  }
  const double value = total / static_cast<double>(cfg_.fitness_folds);
  cache_.emplace(mask.bits(), value);
  return value;
}

double fitness(const Chromosome& c, const FeatureDataset& data, const GaConfig& cfg) {
  FitnessEvaluator eval(data, cfg);
  return eval(c.mask);
}

std::vector<Chromosome> select_crossover_mutate(const std::vector<Chromosome>& population, const GaConfig& cfg,
                                                Rng& rng) {
  if (population.empty()) throw DataError("empty population");
  for (const auto& c : population) {
    if (!c.fitness) throw DataError("select_crossover_mutate needs evaluated fitness");
  }
  const std::size_t width = population.front().mask.width();
  cfg.validate(width);

  std::vector<std::size_t> ranked(population.size());
  std::iota(ranked.begin(), ranked.end(), 0);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](std::size_t a, std::size_t b) { return *population[a].fitness > *population[b].fitness; });
  std::vector<std::size_t> elites(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(cfg.elitism_count));
  std::sort(elites.begin(), elites.end());

  std::vector<Chromosome> next;
  next.reserve(population.size());
  for (std::size_t e : elites) next.push_back(population[e]);
  while (next.size() < population.size()) {
    const Chromosome& a = population[tournament(population, rng)];
    const Chromosome& b = population[tournament(population, rng)];
    FeatureMask child = a.mask;
    if (rng.bernoulli(cfg.crossover_rate)) {
      FeatureMask mixed(width);
      for (std::size_t i = 0; i < width; ++i) mixed.set(i, rng.bernoulli(0.5) ? a.mask.test(i) : b.mask.test(i));
      repair(mixed, a.mask, b.mask, cfg.k, rng);
      child = mixed;
    }
    mutate(child, cfg.mutation_rate, rng);
    next.push_back({child, std::nullopt});
  }
  return next;
}

GaResult run_ga(const FeatureDataset& data, const GaConfig& cfg) {
  cfg.validate(data.features());
  FitnessEvaluator eval(data, cfg);
  std::vector<Chromosome> pop = init_population(cfg, data.features());
  Rng rng(mix_seed(cfg.rng_seed, 0x6A));
  GaResult result;
  result.best_fitness = -1.0;

  for (std::size_t gen = 0;; ++gen) {
    double sum = 0.0;
    double generation_best = -1.0;
    for (auto& c : pop) {
      if (!c.fitness) c.fitness = eval(c.mask);
      sum += *c.fitness;
      generation_best = std::max(generation_best, *c.fitness);
      // Strictly greater: earlier chromosomes win ties.
      if (*c.fitness > result.best_fitness) {
        result.best_fitness = *c.fitness;
        result.best_mask = c.mask;
      }
    }
    result.best_history.push_back(generation_best);
    result.mean_history.push_back(sum / static_cast<double>(pop.size()));
    if (gen == cfg.generations) break;
    pop = select_crossover_mutate(pop, cfg, rng);
  }
  result.evaluations = eval.evaluations();
  return result;
}

nlohmann::json ga_report_json(const GaResult& result, const GaConfig& cfg, const FeatureSchema& schema) {
  return {{"config",
           {{"population_size", cfg.population_size},
            {"generations", cfg.generations},
            {"crossover_rate", cfg.crossover_rate},
            {"mutation_rate", cfg.mutation_rate},
            {"elitism_count", cfg.elitism_count},
            {"k", cfg.k},
            {"fitness_folds", cfg.fitness_folds},
            {"fitness_tree_depth", cfg.fitness_tree_depth},
            {"rng_seed", cfg.rng_seed}}},
          {"best_fitness", result.best_history},
          {"mean_fitness", result.mean_history},
          {"evaluations", result.evaluations},
          {"final_fitness", result.best_fitness},
          {"final_mask", mask_column_names(result.best_mask, schema)}};
}

}  // namespace coaplab
