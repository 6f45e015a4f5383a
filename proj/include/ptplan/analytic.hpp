#pragma once

// Idealized training-time inference: total training FLOPs divided by the
// aggregate peak 16-bit throughput, i.e. 100% utilization of every GPU.

#include "ptplan/core.hpp"

namespace ptplan {

struct AnalyticEstimate {
  double total_flops = 0;
  double aggregate_throughput = 0;  // FLOPs/sec over all GPUs
  double days = 0;
};

// global_batch_size x seq_len x training_steps, as a double (the product
// overflows nothing but is consumed as a real quantity everywhere).
inline double tokens_processed(const ModelSpec& model) {
  if (!model.is_token_model())
    throw PlanError(ErrorCode::not_a_token_model, model.id + " has no token sequence");
  return static_cast<double>(model.global_batch_size) * static_cast<double>(model.seq_len) *
         static_cast<double>(model.training_steps);
}

// 6 FLOPs per parameter per token: 2 forward, 4 backward.
inline double six_pt_flops(const ModelSpec& model) {
  return 6.0 * static_cast<double>(model.param_count) * tokens_processed(model);
}

inline double training_flops(const ModelSpec& model) {
  if (model.total_training_flops_override) return *model.total_training_flops_override;
  if (!model.is_token_model())
    throw PlanError(ErrorCode::no_estimator_available,
                    model.id + " is a vision model without a FLOPs override");
  return six_pt_flops(model);
}

inline AnalyticEstimate analytic_days(const ModelSpec& model, const MachineSpec& machine) {
  AnalyticEstimate e;
  e.total_flops = training_flops(model);
  e.aggregate_throughput = static_cast<double>(machine.n_gpus) * machine.gpu.peak_half_flops;
  e.days = e.total_flops / e.aggregate_throughput / kSecondsPerDay;
  return e;
}

}  // namespace ptplan
