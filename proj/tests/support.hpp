#pragma once

// Shared helpers for the unit tests and the acceptance binary.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ptplan/calibrate.hpp"
#include "ptplan/core.hpp"
#include "ptplan/fixtures.hpp"
#include "ptplan/memory.hpp"
#include "ptplan/params.hpp"
#include "ptplan/steptime.hpp"

namespace support {

using namespace ptplan;

inline bool close_rel(double a, double b, double rel) {
  return std::fabs(a - b) <= rel * std::fabs(b);
}

// ---------------------------------------------------------------------------
// Randomized specs for memory properties
// ---------------------------------------------------------------------------

struct RandomCase {
  ModelSpec model;
  MachineSpec machine;
  PerfParams params;
  std::int64_t micro_batch = 1;
  bool ckpt = false;
  bool kernels = false;
};

inline RandomCase random_case(std::mt19937_64& rng) {
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto log_uni = [&](double lo, double hi) { return std::exp(uni(std::log(lo), std::log(hi))); };
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };

  RandomCase c;
  ModelSpec& m = c.model;
  m.id = "random";
  m.family = kAllFamilies[static_cast<std::size_t>(pick(5))];
  m.param_count = static_cast<std::int64_t>(log_uni(1e6, 3e10));
  m.hidden_size = std::int64_t{64} << pick(8);
  m.num_layers = 2 + pick(95);
  m.num_heads = m.family == Family::conv ? 0 : std::int64_t{1} << pick(7);
  if (m.family == Family::conv || m.family == Family::vit) {
    m.image_size = 32 * (1 + pick(16));
    m.num_classes = 1000;
  } else {
    m.seq_len = std::int64_t{128} << pick(7);
    m.vocab_size = 50000;
  }
  m.global_batch_size = std::int64_t{1} << (4 + pick(8));
  m.training_steps = 1000;
  m.precision = static_cast<Precision>(pick(3));
  m.supports_custom_kernels = pick(2) == 1;

  const int counts[] = {1, 2, 4, 8, 16};
  c.machine.n_gpus = counts[pick(5)];
  c.machine.gpu.id = "g";
  c.machine.gpu.memory_bytes = log_uni(8, 160) * kGiB;
  c.machine.gpu.peak_half_flops = 1e14;
  c.machine.gpu.mem_bandwidth_bytes = 1e12;
  c.machine.host_ram_bytes = c.machine.n_gpus * log_uni(16, 512) * kGiB;
  c.machine.intra_node_bw_bytes = 1e11;
  c.machine.host_device_bw_bytes = 3e10;

  c.params = default_params();
  for (Family f : kAllFamilies) {
    c.params.act_coeff[f] = uni(2, 64);
    c.params.fusable_coeff[f] = uni(0, 8);
  }
  c.params.framework_overhead_bytes = uni(0, 4) * kGiB;
  c.params.mem_headroom_frac = uni(0, 0.2);

  c.micro_batch = std::int64_t{1} << pick(10);
  c.ckpt = pick(2) == 1;
  c.kernels = pick(2) == 1;
  return c;
}

inline TrainConfig config_of(const RandomCase& c, Sharding s, bool offload) {
  TrainConfig cfg;
  cfg.sharding = s;
  cfg.offload = offload;
  cfg.act_checkpointing = c.ckpt;
  cfg.custom_kernels = c.kernels;
  cfg.micro_batch = c.micro_batch;
  cfg.grad_accum_steps = 1;
  return cfg;
}

// Violation counts of the four memory properties over `cases` random specs.
struct PropertyCounts {
  int cases = 0;
  int sharding = 0;
  int single_gpu = 0;
  int offload = 0;
  int micro_batch = 0;

  [[nodiscard]] int total() const { return sharding + single_gpu + offload + micro_batch; }
};

inline PropertyCounts check_memory_properties(int cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PropertyCounts out;
  const Sharding by_stage[] = {Sharding::none, Sharding::zero1, Sharding::zero2, Sharding::zero3};
  for (int i = 0; i < cases; ++i, ++out.cases) {
    const RandomCase c = random_case(rng);
    const int n = c.machine.n_gpus;

    // Per-GPU bytes never grow with the sharding stage, and feasibility
    // is never lost by sharding more.
    bool ok = true;
    for (int s = 1; s < 4; ++s) {
      const auto lo = config_of(c, by_stage[s - 1], false);
      const auto hi = config_of(c, by_stage[s], false);
      const auto a = fits(c.model, lo, c.machine, c.params);
      const auto b = fits(c.model, hi, c.machine, c.params);
      if (b.breakdown.gpu_total() > a.breakdown.gpu_total()) ok = false;
      if (a.fits && !b.fits) ok = false;
    }
    for (auto [zero, fsdp] : {std::pair{Sharding::zero2, Sharding::fsdp2},
                              std::pair{Sharding::zero3, Sharding::fsdp3}}) {
      const auto a = model_state_bytes(c.model, config_of(c, zero, false), n);
      const auto b = model_state_bytes(c.model, config_of(c, fsdp, false), n);
      if (a.gpu_total() != b.gpu_total()) ok = false;
    }
    out.sharding += !ok;

    // On one GPU, sharding without offload changes nothing.
    ok = true;
    MachineSpec single = c.machine;
    single.n_gpus = 1;
    const auto none = fits(c.model, config_of(c, Sharding::none, false), single, c.params);
    for (Sharding s : kAllShardings) {
      const auto r = fits(c.model, config_of(c, s, false), single, c.params);
      if (r.fits != none.fits || r.breakdown.gpu_total() != none.breakdown.gpu_total() ||
          r.breakdown.host_offloaded_bytes != 0)
        ok = false;
    }
    out.single_gpu += !ok;

    // Offload moves bytes between GPU and host and never creates or drops
    // any; it never increases the GPU total.
    ok = true;
    for (Sharding s : kAllShardings) {
      if (s == Sharding::none) continue;
      const auto kept = model_state_bytes(c.model, config_of(c, s, false), n);
      const auto moved = model_state_bytes(c.model, config_of(c, s, true), n);
      if (!close_rel(moved.state_total(), kept.state_total(), 1e-12)) ok = false;
      if (moved.gpu_total() > kept.gpu_total()) ok = false;
      if (!(moved.host_offloaded_bytes > 0)) ok = false;
    }
    out.offload += !ok;

    // Activation bytes grow with the micro-batch; a batch that fits implies
    // every smaller one fits.
    ok = true;
    for (Sharding s : {Sharding::none, Sharding::zero3}) {
      auto cfg = config_of(c, s, false);
      bool prev_fits = true;
      double prev_act = 0;
      for (std::int64_t b = 1; b <= 1024; b *= 2) {
        cfg.micro_batch = b;
        const auto r = fits(c.model, cfg, c.machine, c.params);
        if (!(r.breakdown.activation_bytes > prev_act)) ok = false;
        if (r.fits && !prev_fits) ok = false;
        prev_act = r.breakdown.activation_bytes;
        prev_fits = r.fits;
      }
    }
    out.micro_batch += !ok;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic measurement records from known parameters
// ---------------------------------------------------------------------------

inline PerfParams synthetic_truth() {
  PerfParams p = default_params();
  const char* gpus[] = {"rtx3090", "a6000", "a100", "h100"};
  const double base[] = {0.31, 0.27, 0.42, 0.36};
  for (int g = 0; g < 4; ++g) {
    p.mfu_base[{gpus[g], Family::decoder}] = base[g];
    p.mfu_base[{gpus[g], Family::encoder}] = base[g] * 0.8;
    p.mfu_base[{gpus[g], Family::ssm}] = base[g] * 0.6;
    p.mfu_base[{gpus[g], Family::conv}] = base[g] * 0.5;
    p.mfu_base[{gpus[g], Family::vit}] = base[g] * 0.7;
  }
  p.mult_compile = 1.23;
  p.mult_kernels = 1.41;
  p.unfused_overhead = 0.035;
  p.mult_tf32 = {{"a6000", 1.7}, {"a100", 2.4}, {"h100", 2.1}};
  p.ckpt_recompute_frac = 0.29;
  p.batch_halfsat_tokens = 3000.0;
  p.comm_efficiency = 0.55;
  p.host_efficiency = 0.37;
  p.update_bytes_per_param = 14.0;
  return p;
}

// Pass and update timings for every model on every single-GPU machine and on
// 4-GPU machines, over flag, batch and offload variations.
inline std::vector<MeasurementRecord> synthetic_records(const Catalog& catalog,
                                                        const PerfParams& truth) {
  std::vector<MeasurementRecord> out;
  for (const auto& model : catalog.models) {
    for (const auto& machine : catalog.machines) {
      if (machine.n_gpus != 1 && machine.n_gpus != 4) continue;
      for (int variant = 0; variant < 8; ++variant) {
        TrainConfig c;
        c.compile = variant & 1;
        c.custom_kernels = (variant >> 1) & 1;
        c.act_checkpointing = (variant >> 2) & 1;
        c.tf32 = machine.gpu.supports_tf32() && variant % 3 == 0;
        c.sharding = machine.n_gpus > 1 && variant >= 4 ? Sharding::zero2 : Sharding::none;
        c.offload = c.sharding != Sharding::none && variant % 2 == 0;
        c.micro_batch = std::int64_t{1} << (variant % 4);
        c.grad_accum_steps = 1;
        if (!model.supports_custom_kernels) c.custom_kernels = false;
        MeasurementRecord r;
        r.model_id = model.id;
        r.gpu_id = machine.gpu.id;
        r.n_gpus = machine.n_gpus;
        r.config = c;
        r.pass_seconds = pass_time(model, c, machine, truth);
        r.update_seconds = update_time(model, c, machine, truth);
        r.timestamp = "2024-01-01T00:00:00Z";
        out.push_back(r);
      }
    }
  }
  return out;
}

// Worst relative error of the fitted parameters against the truth, over the
// parameters calibration reports as fitted.
struct RoundTrip {
  double worst = 0;
  std::string worst_name;
  std::size_t fitted = 0;
};

inline RoundTrip synthetic_round_trip(const Catalog& catalog) {
  const PerfParams truth = synthetic_truth();
  const auto records = synthetic_records(catalog, truth);
  const auto result = calibrate(catalog, records, {});
  const ParamSpace space = param_space_for(observations_from_records(records), catalog);
  const auto want = space.read(truth);
  const auto got = space.read(result.params);
  RoundTrip rt;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const std::string name = space.name(i);
    if (std::find(result.fitted.begin(), result.fitted.end(), name) == result.fitted.end())
      continue;
    ++rt.fitted;
    const double err = std::fabs(got[i] / want[i] - 1.0);
    if (err >= rt.worst) {
      rt.worst = err;
      rt.worst_name = name;
    }
  }
  return rt;
}

}  // namespace support
