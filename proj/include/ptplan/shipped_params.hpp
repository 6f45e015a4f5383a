#pragma once

// Calibrated PerfParams shipped with the planner: the output of
// `ptplan calibrate --fixtures` from default_params(). Regenerate with
// tools/regen_shipped_params.sh; a test checks the two stay in sync.

#include "ptplan/catalog_io.hpp"

namespace ptplan {

inline constexpr const char* kShippedParamsYaml = R"yaml(
perf_params_version: 1
mfu_base:
  a100:
    conv: 0.22985494448857935
    decoder: 0.51635259950523893
    encoder: 0.28448335684413922
    ssm: 0.075284028990107818
    vit: 0.087775874998943723
  a6000:
    conv: 0.43847043581160944
    decoder: 0.51536867372356265
    encoder: 0.24749175463173412
    ssm: 0.11438354125824575
    vit: 0.17540958532068929
  h100:
    conv: 0.23130450708241002
    decoder: 0.40804492018423705
    encoder: 0.22739554441835957
    ssm: 0.055861889958469454
    vit: 0.093571047760313067
  rtx3090:
    conv: 1
    decoder: 0.79244236767885812
    encoder: 0.46671374052981046
    ssm: 0.21635748794552009
    vit: 0.36708863863290575
default_mfu: 0.40000000000000002
mult_compile: 1.5584848674173908
mult_kernels: 1
unfused_overhead: 0.060052523937455519
mult_tf32:
  a100: 2.5769072701682942
  a6000: 1.2464342149795185
  h100: 1.9147319104407881
  rtx3090: 1
default_mult_tf32: 1.0800000000000001
ckpt_recompute_frac: 1
batch_halfsat_tokens: 1132.5359681520818
comm_efficiency: 0.039167833961279951
host_efficiency: 0.010355656613371648
update_bytes_per_param: 4
act_coeff:
  decoder: 16
  encoder: 16
  ssm: 16
  conv: 64
  vit: 16
fusable_coeff:
  decoder: 4
  encoder: 2.5
  ssm: 32
  conv: 0
  vit: 2.5
framework_overhead_bytes: 1610612736
mem_headroom_frac: 0.080000000000000002
)yaml";

inline const PerfParams& shipped_params() {
  static const PerfParams params = parse_perf_params(kShippedParamsYaml);
  return params;
}

}  // namespace ptplan
