#pragma once

// Step-time model: one optimizer step is grad_accum_steps forward/backward
// passes at the micro-batch, one parameter update, and the step's
// communication. Training time extrapolates the step linearly.

#include <cstdint>

#include "ptplan/analytic.hpp"
#include "ptplan/core.hpp"
#include "ptplan/memory.hpp"

namespace ptplan {

struct StepEstimate {
  double pass_seconds = 0;
  double update_seconds = 0;
  double comm_seconds = 0;
  double step_seconds = 0;
  double days = 0;
};

// FLOPs of one forward/backward pass over one sample. Derived from the
// model's total training FLOPs so that the step model and the analytic
// estimate agree in the ideal limit; without an override this is
// 6 x params x seq_len.
inline double flops_per_sample(const ModelSpec& model) {
  if (!model.total_training_flops_override && model.is_token_model())
    return 6.0 * static_cast<double>(model.param_count) * static_cast<double>(model.seq_len);
  return training_flops(model) /
         (static_cast<double>(model.training_steps) *
          static_cast<double>(model.global_batch_size));
}

// Throughput saturation in per-GPU tokens of one pass.
inline double saturation(const ModelSpec& model, std::int64_t micro_batch,
                         const PerfParams& params) {
  const double tokens = model.tokens_per_sample() * static_cast<double>(micro_batch);
  return tokens / (tokens + params.batch_halfsat_tokens);
}

inline double free_lunch_multiplier(const ModelSpec& model, const TrainConfig& config,
                                    const GpuSpec& gpu, const PerfParams& params) {
  double m = 1.0;
  if (config.compile) m *= params.mult_compile;
  if (config.custom_kernels) m *= params.mult_kernels;
  // TF32 only touches fp32 matmuls; 16-bit mixed precision gains nothing.
  if (config.tf32 && !model.mixed_precision()) m *= params.tf32_multiplier(gpu.id);
  return m;
}

// Slowdown from running unfused when the model has custom kernels: the
// materialized intermediates grow with the fusable-activation scale.
inline double unfused_factor(const ModelSpec& model, const TrainConfig& config,
                             const PerfParams& params) {
  if (!model.supports_custom_kernels || config.custom_kernels) return 1.0;
  return 1.0 + params.unfused_overhead * detail::fusable_scale(model);
}

inline double pass_time(const ModelSpec& model, const TrainConfig& config,
                        const MachineSpec& machine, const PerfParams& params) {
  double flops = flops_per_sample(model) * static_cast<double>(config.micro_batch);
  if (config.act_checkpointing) flops *= 1.0 + params.ckpt_recompute_frac;
  flops *= unfused_factor(model, config, params);
  const double rate = machine.gpu.peak_half_flops * params.mfu(machine.gpu.id, model.family) *
                      saturation(model, config.micro_batch, params) *
                      free_lunch_multiplier(model, config, machine.gpu, params);
  return flops / rate;
}

inline double comm_time(const ModelSpec& model, const TrainConfig& config,
                        const MachineSpec& machine, const PerfParams& params) {
  const int n = machine.n_gpus;
  double seconds = 0.0;
  if (n > 1) {
    const auto full = full_state_bytes(model);
    const double ring = static_cast<double>(n - 1) / static_cast<double>(n);
    const double bw = params.comm_efficiency * machine.intra_node_bw_bytes;
    seconds += 2.0 * full.grads * ring / bw;
    if (sharding_stage(config.sharding) == 3)
      seconds += static_cast<double>(config.grad_accum_steps) * full.weights * ring / bw;
  }
  if (config.offload) {
    const double host = model_state_bytes(model, config, n).host_offloaded_bytes;
    seconds += 2.0 * host / (params.host_efficiency * machine.host_device_bw_bytes);
  }
  return seconds;
}

inline double update_time(const ModelSpec& model, const TrainConfig& config,
                          const MachineSpec& machine, const PerfParams& params) {
  double bytes = params.update_bytes_per_param * static_cast<double>(model.param_count);
  if (sharding_stage(config.sharding) >= 1) bytes /= static_cast<double>(machine.n_gpus);
  const double bw = config.offload ? params.host_efficiency * machine.host_device_bw_bytes
                                   : machine.gpu.mem_bandwidth_bytes;
  return bytes / bw;
}

// Assemble a step without checking memory; micro_batch and grad_accum_steps
// must be set.
inline StepEstimate estimate_step(const ModelSpec& model, const TrainConfig& config,
                                  const MachineSpec& machine, const PerfParams& params) {
  StepEstimate e;
  e.pass_seconds = pass_time(model, config, machine, params);
  e.update_seconds = update_time(model, config, machine, params);
  e.comm_seconds = comm_time(model, config, machine, params);
  e.step_seconds = static_cast<double>(config.grad_accum_steps) * e.pass_seconds +
                   e.update_seconds + e.comm_seconds;
  e.days = e.step_seconds * static_cast<double>(model.training_steps) / kSecondsPerDay;
  return e;
}

inline StepEstimate training_days(const ModelSpec& model, const TrainConfig& config,
                                  const MachineSpec& machine, const PerfParams& params) {
  if (config.micro_batch < 1 || config.grad_accum_steps < 1)
    throw PlanError(ErrorCode::invalid_input, "micro_batch and grad_accum_steps must be set");
  if (auto v = validate(model, machine, config); !v.empty())
    throw PlanError(ErrorCode::invalid_input, v.front().code + ": " + v.front().message);
  if (const auto f = fits(model, config, machine, params); !f.fits)
    throw PlanError(ErrorCode::infeasible_config,
                    config.key() + " exceeds " + std::string(to_string(f.limiting)) + " memory");
  return estimate_step(model, config, machine, params);
}

}  // namespace ptplan
