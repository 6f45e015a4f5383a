#pragma once

// Enumeration of the efficient-training configuration space and the
// time-optimal feasible configuration for a (model, machine).

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "ptplan/core.hpp"
#include "ptplan/memory.hpp"
#include "ptplan/steptime.hpp"

namespace ptplan {

struct Infeasible {
  Limiting limiting = Limiting::gpu;
};

struct SearchEntry {
  TrainConfig config;
  std::variant<StepEstimate, Infeasible> result;

  [[nodiscard]] bool feasible() const { return std::holds_alternative<StepEstimate>(result); }
  [[nodiscard]] const StepEstimate& estimate() const { return std::get<StepEstimate>(result); }
};

struct Best {
  TrainConfig config;
  StepEstimate estimate;
};

struct SearchOutcome {
  std::optional<Best> best;
  std::vector<SearchEntry> table;
  std::optional<StepEstimate> naive;
};

// Memory-saving combinations crossed with maximal free-lunch flags. The
// combination count is 12 on one GPU and 22 otherwise, whatever the model
// capabilities or GPU generation; those only change flag values.
inline std::vector<TrainConfig> enumerate_configs(int n_gpus, Generation generation,
                                                  const ModelSpec& model) {
  std::vector<TrainConfig> out;
  for (bool ckpt : {false, true}) {
    for (Sharding s : kAllShardings) {
      for (bool offload : {false, true}) {
        if (offload && s == Sharding::none) continue;
        if (n_gpus == 1 && s != Sharding::none && !offload) continue;
        TrainConfig c;
        c.act_checkpointing = ckpt;
        c.sharding = s;
        c.offload = offload;
        c.compile = model.supports_compile && !is_zero(s);
        c.custom_kernels = model.supports_custom_kernels;
        c.tf32 = generation != Generation::pre_ampere;
        out.push_back(c);
      }
    }
  }
  return out;
}

// Out-of-the-box settings: no free-lunch or memory-saving methods.
inline TrainConfig naive_config() { return TrainConfig{}; }

// Largest power of two <= micro such that micro x n divides the global batch.
inline std::int64_t divisor_compatible_micro(std::int64_t micro, std::int64_t global_batch,
                                             int n_gpus) {
  while (micro > 1 && (global_batch % (micro * n_gpus)) != 0) micro /= 2;
  if (micro == 1 && global_batch % n_gpus != 0) return 0;
  return micro;
}

// Fill micro_batch/grad_accum_steps by the max-batch search and evaluate.
inline SearchEntry evaluate_config(const ModelSpec& model, const MachineSpec& machine,
                                   TrainConfig config, const PerfParams& params) {
  std::int64_t micro = max_micro_batch(model, config, machine, params);
  micro = divisor_compatible_micro(micro, model.global_batch_size, machine.n_gpus);
  if (micro == 0) {
    config.micro_batch = 0;
    config.grad_accum_steps = 0;
    return {config, Infeasible{infeasibility_reason(model, config, machine, params)}};
  }
  config.micro_batch = micro;
  config.grad_accum_steps = model.global_batch_size / (micro * machine.n_gpus);
  return {config, estimate_step(model, config, machine, params)};
}

// Index of the minimum-days feasible entry; ties prefer fewer memory-saving
// methods, then earlier (canonical) position.
inline std::optional<std::size_t> best_index(const std::vector<SearchEntry>& table) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!table[i].feasible()) continue;
    if (!best) {
      best = i;
      continue;
    }
    const double d = table[i].estimate().days;
    const double bd = table[*best].estimate().days;
    if (d < bd || (d == bd && table[i].config.memory_saving_count() <
                                  table[*best].config.memory_saving_count()))
      best = i;
  }
  return best;
}

inline std::optional<StepEstimate> naive_estimate(const ModelSpec& model,
                                                  const MachineSpec& machine,
                                                  const PerfParams& params) {
  auto e = evaluate_config(model, machine, naive_config(), params);
  if (!e.feasible()) return std::nullopt;
  return e.estimate();
}

inline SearchOutcome optimize(const ModelSpec& model, const MachineSpec& machine,
                              const PerfParams& params) {
  SearchOutcome out;
  for (const auto& c : enumerate_configs(machine.n_gpus, machine.gpu.generation, model))
    out.table.push_back(evaluate_config(model, machine, c, params));
  if (auto i = best_index(out.table)) out.best = Best{out.table[*i].config, out.table[*i].estimate()};
  out.naive = naive_estimate(model, machine, params);
  return out;
}

// The free-lunch-only entry (no memory-saving method) of a search table.
inline const SearchEntry* free_lunch_entry(const SearchOutcome& outcome) {
  for (const auto& e : outcome.table)
    if (e.config.memory_saving_count() == 0) return &e;
  return nullptr;
}

}  // namespace ptplan
