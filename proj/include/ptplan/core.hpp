#pragma once

// Domain types shared by every planner module. Everything here is a plain
// value type; once loaded, catalogs are never mutated.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <tuple>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ptplan {

inline constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;
inline constexpr double kSecondsPerDay = 86400.0;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorCode {
  not_a_token_model,
  no_estimator_available,
  infeasible_config,
  unknown_gpu,
  unknown_tier,
  unknown_model,
  unknown_machine,
  invalid_input,
  degenerate_fit,
  empty_selection,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::not_a_token_model: return "not-a-token-model";
    case ErrorCode::no_estimator_available: return "no-estimator-available";
    case ErrorCode::infeasible_config: return "infeasible-config";
    case ErrorCode::unknown_gpu: return "unknown-gpu";
    case ErrorCode::unknown_tier: return "unknown-tier";
    case ErrorCode::unknown_model: return "unknown-model";
    case ErrorCode::unknown_machine: return "unknown-machine";
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::degenerate_fit: return "degenerate-fit";
    case ErrorCode::empty_selection: return "empty-selection";
  }
  return "unknown";
}

class PlanError : public std::runtime_error {
 public:
  PlanError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// ---------------------------------------------------------------------------
// Enumerations and their text names (the names are the on-disk spelling).
// ---------------------------------------------------------------------------

enum class Family { decoder, encoder, ssm, conv, vit };
enum class Precision { fp32, fp16_mixed, bf16_mixed };
enum class Optimizer { adam, adamw };
enum class Generation { pre_ampere, ampere, hopper };
enum class Sharding { none, zero1, zero2, zero3, fsdp2, fsdp3 };

inline constexpr std::array kAllFamilies = {Family::decoder, Family::encoder, Family::ssm,
                                            Family::conv, Family::vit};
inline constexpr std::array kAllShardings = {Sharding::none,  Sharding::zero1, Sharding::zero2,
                                             Sharding::zero3, Sharding::fsdp2, Sharding::fsdp3};

namespace detail {

template <typename E, std::size_t N>
struct EnumNames {
  std::array<std::pair<E, std::string_view>, N> entries;

  [[nodiscard]] std::string_view name(E e) const {
    for (const auto& [v, s] : entries)
      if (v == e) return s;
    return "?";
  }
  [[nodiscard]] std::optional<E> parse(std::string_view s) const {
    for (const auto& [v, n] : entries)
      if (n == s) return v;
    return std::nullopt;
  }
};

inline constexpr EnumNames<Family, 5> kFamilyNames{{{{Family::decoder, "decoder"},
                                                      {Family::encoder, "encoder"},
                                                      {Family::ssm, "ssm"},
                                                      {Family::conv, "conv"},
                                                      {Family::vit, "vit"}}}};
inline constexpr EnumNames<Precision, 3> kPrecisionNames{{{{Precision::fp32, "fp32"},
                                                           {Precision::fp16_mixed, "fp16_mixed"},
                                                           {Precision::bf16_mixed, "bf16_mixed"}}}};
inline constexpr EnumNames<Optimizer, 2> kOptimizerNames{
    {{{Optimizer::adam, "adam"}, {Optimizer::adamw, "adamw"}}}};
inline constexpr EnumNames<Generation, 3> kGenerationNames{{{{Generation::pre_ampere, "pre_ampere"},
                                                             {Generation::ampere, "ampere"},
                                                             {Generation::hopper, "hopper"}}}};
inline constexpr EnumNames<Sharding, 6> kShardingNames{{{{Sharding::none, "none"},
                                                         {Sharding::zero1, "zero1"},
                                                         {Sharding::zero2, "zero2"},
                                                         {Sharding::zero3, "zero3"},
                                                         {Sharding::fsdp2, "fsdp2"},
                                                         {Sharding::fsdp3, "fsdp3"}}}};

template <typename E, typename Names>
E parse_or_throw(const Names& names, std::string_view s, std::string_view what) {
  if (auto v = names.parse(s)) return *v;
  throw PlanError(ErrorCode::invalid_input,
                  "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

}  // namespace detail

inline std::string_view to_string(Family f) { return detail::kFamilyNames.name(f); }
inline std::string_view to_string(Precision p) { return detail::kPrecisionNames.name(p); }
inline std::string_view to_string(Optimizer o) { return detail::kOptimizerNames.name(o); }
inline std::string_view to_string(Generation g) { return detail::kGenerationNames.name(g); }
inline std::string_view to_string(Sharding s) { return detail::kShardingNames.name(s); }

template <typename E>
E parse_enum(std::string_view s);
template <>
inline Family parse_enum<Family>(std::string_view s) {
  return detail::parse_or_throw<Family>(detail::kFamilyNames, s, "family");
}
template <>
inline Precision parse_enum<Precision>(std::string_view s) {
  return detail::parse_or_throw<Precision>(detail::kPrecisionNames, s, "precision");
}
template <>
inline Optimizer parse_enum<Optimizer>(std::string_view s) {
  return detail::parse_or_throw<Optimizer>(detail::kOptimizerNames, s, "optimizer");
}
template <>
inline Generation parse_enum<Generation>(std::string_view s) {
  return detail::parse_or_throw<Generation>(detail::kGenerationNames, s, "generation");
}
template <>
inline Sharding parse_enum<Sharding>(std::string_view s) {
  return detail::parse_or_throw<Sharding>(detail::kShardingNames, s, "sharding");
}

// Which model states a sharding mode partitions: 1 optimizer, 2 +gradients,
// 3 +weights. FSDP modes share the arithmetic of the matching Zero stage.
inline constexpr int sharding_stage(Sharding s) {
  switch (s) {
    case Sharding::none: return 0;
    case Sharding::zero1: return 1;
    case Sharding::zero2:
    case Sharding::fsdp2: return 2;
    case Sharding::zero3:
    case Sharding::fsdp3: return 3;
  }
  return 0;
}

inline constexpr bool is_zero(Sharding s) {
  return s == Sharding::zero1 || s == Sharding::zero2 || s == Sharding::zero3;
}

// ---------------------------------------------------------------------------
// Catalog entities
// ---------------------------------------------------------------------------

struct ModelSpec {
  std::string id;
  Family family = Family::decoder;
  std::int64_t param_count = 0;
  std::int64_t seq_len = 0;
  std::int64_t vocab_size = 0;
  std::int64_t image_size = 0;
  std::int64_t num_classes = 0;
  std::int64_t hidden_size = 0;
  std::int64_t num_layers = 0;
  std::int64_t num_heads = 0;
  std::int64_t global_batch_size = 0;
  std::int64_t training_steps = 0;
  Precision precision = Precision::fp32;
  Optimizer optimizer = Optimizer::adam;
  bool supports_compile = true;
  bool supports_custom_kernels = true;
  std::optional<double> total_training_flops_override;

  [[nodiscard]] bool is_token_model() const { return seq_len > 0 && vocab_size > 0; }
  [[nodiscard]] bool is_image_model() const { return image_size > 0 && num_classes > 0; }
  [[nodiscard]] bool mixed_precision() const { return precision != Precision::fp32; }
  // Bytes per activation element.
  [[nodiscard]] double element_bytes() const { return mixed_precision() ? 2.0 : 4.0; }

  // Sequence positions one sample occupies: the text sequence for token
  // models, 16x16 patches for image models.
  [[nodiscard]] double tokens_per_sample() const {
    if (is_token_model()) return static_cast<double>(seq_len);
    const double side = static_cast<double>(image_size) / 16.0;
    return side * side;
  }
};

struct GpuSpec {
  std::string id;
  double memory_bytes = 0;
  double peak_half_flops = 0;
  Generation generation = Generation::ampere;
  double unit_price_usd = 0;
  double mem_bandwidth_bytes = 0;

  [[nodiscard]] bool supports_tf32() const { return generation != Generation::pre_ampere; }
};

struct MachineSpec {
  GpuSpec gpu;
  int n_gpus = 1;
  double system_price_usd = 0;
  double host_ram_bytes = 0;
  double intra_node_bw_bytes = 0;
  double host_device_bw_bytes = 0;

  [[nodiscard]] std::string id() const { return gpu.id + "x" + std::to_string(n_gpus); }
};

// One point of the efficient-training search space. micro_batch and
// grad_accum_steps are 0 while unset.
struct TrainConfig {
  bool compile = false;
  bool custom_kernels = false;
  bool tf32 = false;
  bool act_checkpointing = false;
  Sharding sharding = Sharding::none;
  bool offload = false;
  std::int64_t micro_batch = 0;
  std::int64_t grad_accum_steps = 0;

  [[nodiscard]] int memory_saving_count() const {
    return int(act_checkpointing) + int(sharding != Sharding::none) + int(offload);
  }

  // Compact, stable label such as "c1k1t0|ckpt0|fsdp3|off1".
  [[nodiscard]] std::string key() const {
    std::string s;
    s += "c" + std::to_string(int(compile));
    s += "k" + std::to_string(int(custom_kernels));
    s += "t" + std::to_string(int(tf32));
    s += "|ckpt" + std::to_string(int(act_checkpointing));
    s += "|" + std::string(to_string(sharding));
    s += "|off" + std::to_string(int(offload));
    return s;
  }

  // Ordering of the memory-saving part only; used for canonical table order.
  [[nodiscard]] auto memory_saving_tuple() const {
    return std::tuple(int(act_checkpointing), static_cast<int>(sharding), int(offload));
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Calibratable coefficients of the step-time and memory models.
struct PerfParams {
  // Base model-FLOPs utilization keyed by (gpu id, family); default_mfu covers
  // pairs never calibrated.
  std::map<std::pair<std::string, Family>, double> mfu_base;
  double default_mfu = 0.4;

  double mult_compile = 1.10;
  double mult_kernels = 1.25;
  // Extra pass time per unit of the fusable-activation scale when a model
  // with custom kernels runs without them.
  double unfused_overhead = 0.0;
  // TF32 speedup for fp32 models, per GPU id, with a fallback.
  std::map<std::string, double> mult_tf32;
  double default_mult_tf32 = 1.08;

  double ckpt_recompute_frac = 1.0 / 3.0;
  double batch_halfsat_tokens = 8192.0;
  double comm_efficiency = 0.7;
  double host_efficiency = 0.5;
  double update_bytes_per_param = 16.0;

  // Activation elements stored per layer per (position x hidden) element.
  std::map<Family, double> act_coeff;
  // Per-layer activation term that fused custom kernels never materialize:
  // attention scores (scaled by heads x seq / hidden) or an unfused scan state.
  std::map<Family, double> fusable_coeff;
  double framework_overhead_bytes = 1.5 * kGiB;
  double mem_headroom_frac = 0.08;

  [[nodiscard]] double mfu(const std::string& gpu_id, Family f) const {
    auto it = mfu_base.find({gpu_id, f});
    return it == mfu_base.end() ? default_mfu : it->second;
  }
  [[nodiscard]] double tf32_multiplier(const std::string& gpu_id) const {
    auto it = mult_tf32.find(gpu_id);
    return it == mult_tf32.end() ? default_mult_tf32 : it->second;
  }
  [[nodiscard]] double act(Family f) const {
    auto it = act_coeff.find(f);
    return it == act_coeff.end() ? 16.0 : it->second;
  }
  [[nodiscard]] double fusable(Family f) const {
    auto it = fusable_coeff.find(f);
    return it == fusable_coeff.end() ? 0.0 : it->second;
  }

  friend bool operator==(const PerfParams&, const PerfParams&) = default;
};

struct MeasurementRecord {
  std::string model_id;
  std::string gpu_id;
  int n_gpus = 1;
  TrainConfig config;
  std::optional<double> pass_seconds;
  std::optional<double> update_seconds;
  bool oom = false;
  std::string timestamp;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  std::string code;
  std::string message;
  friend bool operator==(const Violation&, const Violation&) = default;
};

// Every TrainConfig invariant that fails for this (model, machine). Empty
// means the configuration is valid. micro_batch/grad_accum_steps are only
// checked when set.
inline std::vector<Violation> validate(const ModelSpec& model, const MachineSpec& machine,
                                       const TrainConfig& config) {
  std::vector<Violation> out;
  if (config.offload && config.sharding == Sharding::none)
    out.push_back({"offload-requires-sharding", "offloading is only allowed with sharding"});
  if (machine.n_gpus == 1 && config.sharding != Sharding::none && !config.offload)
    out.push_back({"sharding-noop-on-1gpu", "sharding without offload does nothing on 1 GPU"});
  if (config.compile && is_zero(config.sharding))
    out.push_back({"compile-with-zero", "compilation is incompatible with Zero sharding"});
  if (config.compile && !model.supports_compile)
    out.push_back({"compile-unsupported", model.id + " cannot be compiled"});
  if (config.custom_kernels && !model.supports_custom_kernels)
    out.push_back({"kernels-unsupported", model.id + " has no custom kernels"});
  if (config.tf32 && !machine.gpu.supports_tf32())
    out.push_back({"tf32-unavailable", machine.gpu.id + " predates TF32"});
  if (config.micro_batch != 0 || config.grad_accum_steps != 0) {
    if (config.micro_batch < 1 || config.grad_accum_steps < 1 ||
        config.micro_batch * config.grad_accum_steps * machine.n_gpus != model.global_batch_size)
      out.push_back({"batch-mismatch",
                     "micro_batch x grad_accum_steps x n_gpus must equal global_batch_size"});
  }
  return out;
}

inline bool is_power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

// ModelSpec invariants; returns human-readable problems.
inline std::vector<std::string> check_model(const ModelSpec& m) {
  std::vector<std::string> out;
  if (m.id.empty()) out.push_back("empty id");
  if (m.param_count <= 0) out.push_back("param_count must be positive");
  if (m.global_batch_size <= 0) out.push_back("global_batch_size must be positive");
  if (m.training_steps <= 0) out.push_back("training_steps must be positive");
  if (!m.is_token_model() && !m.is_image_model())
    out.push_back("needs seq_len+vocab_size or image_size+num_classes");
  if (m.hidden_size <= 0 || m.num_layers <= 0) out.push_back("hidden_size/num_layers must be positive");
  if (m.total_training_flops_override && !(*m.total_training_flops_override > 0))
    out.push_back("total_training_flops_override must be positive");
  return out;
}

inline std::vector<std::string> check_gpu(const GpuSpec& g) {
  std::vector<std::string> out;
  if (g.id.empty()) out.push_back("empty id");
  if (!(g.memory_bytes > 0) || !(g.peak_half_flops > 0) || !(g.unit_price_usd > 0) ||
      !(g.mem_bandwidth_bytes > 0))
    out.push_back(g.id + ": all GPU quantities must be positive");
  return out;
}

inline std::vector<std::string> check_machine(const MachineSpec& m) {
  std::vector<std::string> out;
  if (m.n_gpus != 1 && m.n_gpus != 2 && m.n_gpus != 4 && m.n_gpus != 8)
    out.push_back(m.id() + ": n_gpus must be 1, 2, 4 or 8");
  if (!(m.system_price_usd > 0) || !(m.host_ram_bytes > 0) || !(m.intra_node_bw_bytes > 0) ||
      !(m.host_device_bw_bytes > 0))
    out.push_back(m.id() + ": all machine quantities must be positive");
  return out;
}

inline std::vector<std::string> check_params(const PerfParams& p) {
  std::vector<std::string> out;
  auto frac = [&](double v, const char* name) {
    if (!(v > 0 && v <= 1)) out.push_back(std::string(name) + " must be in (0,1]");
  };
  auto pos = [&](double v, const char* name) {
    if (!(v > 0)) out.push_back(std::string(name) + " must be positive");
  };
  auto mult = [&](double v, const char* name) {
    if (!(v >= 1)) out.push_back(std::string(name) + " must be >= 1");
  };
  for (const auto& [k, v] : p.mfu_base) frac(v, "mfu_base");
  frac(p.default_mfu, "default_mfu");
  mult(p.mult_compile, "mult_compile");
  mult(p.mult_kernels, "mult_kernels");
  if (!(p.unfused_overhead >= 0)) out.push_back("unfused_overhead must be non-negative");
  for (const auto& [k, v] : p.mult_tf32) mult(v, "mult_tf32");
  mult(p.default_mult_tf32, "mult_tf32");
  pos(p.ckpt_recompute_frac, "ckpt_recompute_frac");
  pos(p.batch_halfsat_tokens, "batch_halfsat_tokens");
  frac(p.comm_efficiency, "comm_efficiency");
  frac(p.host_efficiency, "host_efficiency");
  pos(p.update_bytes_per_param, "update_bytes_per_param");
  for (const auto& [k, v] : p.act_coeff) pos(v, "act_coeff");
  for (const auto& [k, v] : p.fusable_coeff)
    if (v < 0) out.push_back("fusable_coeff must be non-negative");
  pos(p.framework_overhead_bytes, "framework_overhead_bytes");
  if (!(p.mem_headroom_frac >= 0 && p.mem_headroom_frac < 1))
    out.push_back("mem_headroom_frac must be in [0,1)");
  return out;
}

}  // namespace ptplan
