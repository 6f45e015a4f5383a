#pragma once

// Per-GPU and host memory accounting, feasibility, and the power-of-two
// maximum micro-batch search.

#include <cstdint>

#include "ptplan/core.hpp"

namespace ptplan {

struct MemoryBreakdown {
  double weights_bytes = 0;
  double grads_bytes = 0;
  double optimizer_bytes = 0;
  double activation_bytes = 0;
  double overhead_bytes = 0;
  // This GPU's share of model states held in host RAM.
  double host_offloaded_bytes = 0;

  [[nodiscard]] double gpu_total() const {
    return weights_bytes + grads_bytes + optimizer_bytes + activation_bytes + overhead_bytes;
  }
  [[nodiscard]] double state_total() const {
    return weights_bytes + grads_bytes + optimizer_bytes + host_offloaded_bytes;
  }
};

enum class Limiting { none, gpu, host };

inline std::string_view to_string(Limiting l) {
  switch (l) {
    case Limiting::none: return "none";
    case Limiting::gpu: return "gpu";
    case Limiting::host: return "host";
  }
  return "?";
}

struct FitResult {
  bool fits = false;
  MemoryBreakdown breakdown;
  Limiting limiting = Limiting::none;
};

// Unsharded per-replica bytes of (weights, grads, optimizer). Mixed precision
// keeps 16-bit weights/grads plus an fp32 master copy and two Adam moments.
struct StateBytes {
  double weights, grads, optimizer;
};

inline StateBytes full_state_bytes(const ModelSpec& model) {
  const double p = static_cast<double>(model.param_count);
  if (model.mixed_precision()) return {2 * p, 2 * p, 12 * p};
  return {4 * p, 4 * p, 8 * p};
}

inline MemoryBreakdown model_state_bytes(const ModelSpec& model, const TrainConfig& config,
                                         int n_gpus) {
  const auto full = full_state_bytes(model);
  MemoryBreakdown b;
  b.weights_bytes = full.weights;
  b.grads_bytes = full.grads;
  b.optimizer_bytes = full.optimizer;

  const int stage = sharding_stage(config.sharding);
  const double n = static_cast<double>(n_gpus);
  if (stage >= 1) b.optimizer_bytes /= n;
  if (stage >= 2) b.grads_bytes /= n;
  if (stage >= 3) b.weights_bytes /= n;

  if (config.offload && stage >= 1) {
    b.host_offloaded_bytes = b.optimizer_bytes;
    b.optimizer_bytes = 0;
    if (stage == 3) {
      b.host_offloaded_bytes += b.weights_bytes;
      b.weights_bytes = 0;
    }
  }
  return b;
}

namespace detail {

// Activation elements of one layer for one sample, before the per-element
// coefficient: positions x hidden for sequence models, pixels for convnets.
inline double layer_elements(const ModelSpec& model) {
  if (model.family == Family::conv)
    return static_cast<double>(model.image_size) * static_cast<double>(model.image_size);
  return model.tokens_per_sample() * static_cast<double>(model.hidden_size);
}

// Scale of the kernel-fusable term: attention scores hold heads x seq
// elements per position against hidden elements for the linear part.
inline double fusable_scale(const ModelSpec& model) {
  if (model.num_heads > 0 && model.hidden_size > 0)
    return static_cast<double>(model.num_heads) * model.tokens_per_sample() /
           static_cast<double>(model.hidden_size);
  return 1.0;
}

// Stored activation elements per layer element.
inline double activation_coefficient(const ModelSpec& model, bool custom_kernels,
                                     const PerfParams& params) {
  double c = params.act(model.family);
  if (!custom_kernels) c += params.fusable(model.family) * fusable_scale(model);
  return c;
}

}  // namespace detail

inline double activation_bytes(const ModelSpec& model, std::int64_t micro_batch,
                               bool act_checkpointing, bool custom_kernels,
                               const PerfParams& params) {
  if (micro_batch <= 0) return 0.0;
  const double per_layer = detail::layer_elements(model) * static_cast<double>(micro_batch) *
                           model.element_bytes();
  const double coeff = detail::activation_coefficient(model, custom_kernels, params);
  const double layers = static_cast<double>(model.num_layers);
  if (!act_checkpointing) return coeff * layers * per_layer;
  // One stored checkpoint per layer plus the working set of the layer being
  // recomputed.
  return layers * per_layer + coeff * per_layer;
}

inline double usable_gpu_bytes(const GpuSpec& gpu, const PerfParams& params) {
  return gpu.memory_bytes * (1.0 - params.mem_headroom_frac);
}

inline FitResult fits(const ModelSpec& model, const TrainConfig& config,
                      const MachineSpec& machine, const PerfParams& params) {
  FitResult r;
  r.breakdown = model_state_bytes(model, config, machine.n_gpus);
  r.breakdown.activation_bytes = activation_bytes(model, config.micro_batch,
                                                  config.act_checkpointing,
                                                  config.custom_kernels, params);
  r.breakdown.overhead_bytes = params.framework_overhead_bytes;

  const bool gpu_ok = r.breakdown.gpu_total() <= usable_gpu_bytes(machine.gpu, params);
  const bool host_ok =
      r.breakdown.host_offloaded_bytes * machine.n_gpus <= machine.host_ram_bytes;
  r.fits = gpu_ok && host_ok;
  r.limiting = !gpu_ok ? Limiting::gpu : (!host_ok ? Limiting::host : Limiting::none);
  return r;
}

// Largest power-of-two micro-batch that fits, capped at the replication
// batch per GPU; 0 when even a single sample does not fit. Compilation never
// changes memory, so it is ignored here.
inline std::int64_t max_micro_batch(const ModelSpec& model, TrainConfig config,
                                    const MachineSpec& machine, const PerfParams& params) {
  config.compile = false;
  const std::int64_t cap = model.global_batch_size / machine.n_gpus;
  std::int64_t best = 0;
  for (std::int64_t b = 1; b <= cap; b *= 2) {
    config.micro_batch = b;
    if (!fits(model, config, machine, params).fits) break;
    best = b;
  }
  return best;
}

// Why max_micro_batch returned 0: the limiting resource at batch 1.
inline Limiting infeasibility_reason(const ModelSpec& model, TrainConfig config,
                                     const MachineSpec& machine, const PerfParams& params) {
  config.micro_batch = 1;
  return fits(model, config, machine, params).limiting;
}

}  // namespace ptplan
