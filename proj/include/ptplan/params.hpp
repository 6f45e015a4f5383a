#pragma once

// Documented starting values for PerfParams. Calibration starts here; the
// shipped (calibrated) values live in shipped_params.hpp.

#include "ptplan/core.hpp"

namespace ptplan {

inline PerfParams default_params() {
  PerfParams p;
  p.default_mfu = 0.4;
  p.mult_compile = 1.10;
  p.mult_kernels = 1.25;
  p.unfused_overhead = 0.02;
  p.default_mult_tf32 = 1.08;
  p.ckpt_recompute_frac = 1.0 / 3.0;
  p.batch_halfsat_tokens = 8192.0;
  p.comm_efficiency = 0.7;
  p.host_efficiency = 0.5;
  p.update_bytes_per_param = 16.0;
  p.act_coeff = {{Family::decoder, 16.0},
                 {Family::encoder, 16.0},
                 {Family::ssm, 16.0},
                 {Family::conv, 64.0},
                 {Family::vit, 16.0}};
  // Attention families: fp16 scores, softmax output and dropout mask per head
  // (about 2.5 elements per score). ssm: the unfused selective scan keeps an
  // expanded state of 2 x d_state per position.
  p.fusable_coeff = {{Family::decoder, 2.5},
                     {Family::encoder, 2.5},
                     {Family::ssm, 32.0},
                     {Family::conv, 0.0},
                     {Family::vit, 2.5}};
  p.framework_overhead_bytes = 1.5 * kGiB;
  p.mem_headroom_frac = 0.08;
  return p;
}

// Parameters where every multiplier and loss is switched off: full
// utilization, no saturation penalty, free updates and an infinitely fast
// interconnect. Used to check the step model against the analytic estimate.
inline PerfParams ideal_params() {
  PerfParams p = default_params();
  p.default_mfu = 1.0;
  p.mfu_base.clear();
  p.mult_compile = p.mult_kernels = p.default_mult_tf32 = 1.0;
  p.unfused_overhead = 0.0;
  p.mult_tf32.clear();
  p.batch_halfsat_tokens = 0.0;
  p.update_bytes_per_param = 0.0;
  p.comm_efficiency = std::numeric_limits<double>::infinity();
  p.host_efficiency = std::numeric_limits<double>::infinity();
  return p;
}

}  // namespace ptplan
