#pragma once

// Fitting PerfParams to observations: harness measurement records (pass and
// update seconds) and day-level result grids. Memory coefficients are fit to
// the observed feasibility pattern first; timing coefficients are then fit by
// a deterministic compass search on squared log-ratio residuals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "ptplan/catalog.hpp"
#include "ptplan/core.hpp"
#include "ptplan/grid.hpp"
#include "ptplan/memory.hpp"
#include "ptplan/params.hpp"
#include "ptplan/search.hpp"
#include "ptplan/steptime.hpp"

namespace ptplan {

enum class Quantity { pass_seconds, update_seconds, naive_days, optimal_days };

inline std::string_view to_string(Quantity q) {
  switch (q) {
    case Quantity::pass_seconds: return "pass_seconds";
    case Quantity::update_seconds: return "update_seconds";
    case Quantity::naive_days: return "naive_days";
    case Quantity::optimal_days: return "optimal_days";
  }
  return "?";
}

struct Observation {
  Quantity quantity = Quantity::optimal_days;
  CellKey cell;
  // Fully specified for records; the naive config for naive cells; unused
  // for optimal cells, whose configuration is searched.
  TrainConfig config;
  double observed = 0;
};

inline bool record_less(const MeasurementRecord& a, const MeasurementRecord& b) {
  auto key = [](const MeasurementRecord& r) {
    return std::tuple(r.model_id, r.gpu_id, r.n_gpus, r.config.key(), r.config.micro_batch,
                      r.config.grad_accum_steps, r.oom, r.pass_seconds.value_or(-1),
                      r.update_seconds.value_or(-1), r.timestamp);
  };
  return key(a) < key(b);
}

// Canonically ordered timing observations; OOM records carry no timing.
inline std::vector<Observation> observations_from_records(std::vector<MeasurementRecord> records) {
  std::stable_sort(records.begin(), records.end(), record_less);
  std::vector<Observation> out;
  for (const auto& r : records) {
    if (r.oom) continue;
    const CellKey cell{r.model_id, r.gpu_id, r.n_gpus};
    if (r.pass_seconds) out.push_back({Quantity::pass_seconds, cell, r.config, *r.pass_seconds});
    if (r.update_seconds)
      out.push_back({Quantity::update_seconds, cell, r.config, *r.update_seconds});
  }
  return out;
}

// One observation per feasible cell of a naive or optimal grid.
inline std::vector<Observation> observations_from_grid(const ResultGrid& grid) {
  if (grid.label != GridLabel::naive && grid.label != GridLabel::optimal)
    throw PlanError(ErrorCode::invalid_input, "only naive and optimal grids can be fit");
  const Quantity q = grid.label == GridLabel::naive ? Quantity::naive_days : Quantity::optimal_days;
  std::vector<Observation> out;
  for (const auto& [cell, days] : grid.cells)
    if (days) out.push_back({q, cell, naive_config(), *days});
  return out;
}

// ---------------------------------------------------------------------------
// Parameter space: the timing coefficients as a flat vector.
// ---------------------------------------------------------------------------

struct ParamSpace {
  std::vector<std::pair<std::string, Family>> mfu_keys;
  std::vector<std::string> tf32_gpus;

  [[nodiscard]] std::size_t compile_slot() const { return mfu_keys.size(); }
  [[nodiscard]] std::size_t kernels_slot() const { return compile_slot() + 1; }
  [[nodiscard]] std::size_t tf32_slot(std::size_t i) const { return kernels_slot() + 1 + i; }
  [[nodiscard]] std::size_t ckpt_slot() const { return tf32_slot(tf32_gpus.size()); }
  [[nodiscard]] std::size_t halfsat_slot() const { return ckpt_slot() + 1; }
  [[nodiscard]] std::size_t comm_slot() const { return ckpt_slot() + 2; }
  [[nodiscard]] std::size_t host_slot() const { return ckpt_slot() + 3; }
  [[nodiscard]] std::size_t update_slot() const { return ckpt_slot() + 4; }
  [[nodiscard]] std::size_t unfused_slot() const { return ckpt_slot() + 5; }
  [[nodiscard]] std::size_t size() const { return unfused_slot() + 1; }

  [[nodiscard]] std::size_t mfu_slot(const std::string& gpu, Family f) const {
    auto it = std::find(mfu_keys.begin(), mfu_keys.end(), std::pair(gpu, f));
    return static_cast<std::size_t>(it - mfu_keys.begin());
  }
  [[nodiscard]] std::optional<std::size_t> tf32_index(const std::string& gpu) const {
    auto it = std::find(tf32_gpus.begin(), tf32_gpus.end(), gpu);
    if (it == tf32_gpus.end()) return std::nullopt;
    return tf32_slot(static_cast<std::size_t>(it - tf32_gpus.begin()));
  }

  [[nodiscard]] std::string name(std::size_t i) const {
    if (i < mfu_keys.size())
      return "mfu_base[" + mfu_keys[i].first + "," + std::string(to_string(mfu_keys[i].second)) + "]";
    if (i == compile_slot()) return "mult_compile";
    if (i == kernels_slot()) return "mult_kernels";
    if (i < ckpt_slot()) return "mult_tf32[" + tf32_gpus[i - tf32_slot(0)] + "]";
    if (i == ckpt_slot()) return "ckpt_recompute_frac";
    if (i == halfsat_slot()) return "batch_halfsat_tokens";
    if (i == comm_slot()) return "comm_efficiency";
    if (i == host_slot()) return "host_efficiency";
    if (i == update_slot()) return "update_bytes_per_param";
    return "unfused_overhead";
  }

  [[nodiscard]] std::pair<double, double> bounds(std::size_t i) const {
    if (i < mfu_keys.size()) return {0.005, 1.0};
    if (i == compile_slot() || i == kernels_slot()) return {1.0, 4.0};
    if (i < ckpt_slot()) return {1.0, 16.0};
    if (i == ckpt_slot()) return {0.05, 1.0};
    if (i == halfsat_slot()) return {16.0, 1e6};
    if (i == comm_slot() || i == host_slot()) return {0.01, 1.0};
    if (i == update_slot()) return {4.0, 64.0};
    return {1e-4, 1.0};
  }

  [[nodiscard]] std::vector<double> read(const PerfParams& p) const {
    std::vector<double> v(size());
    for (std::size_t i = 0; i < mfu_keys.size(); ++i)
      v[i] = p.mfu(mfu_keys[i].first, mfu_keys[i].second);
    v[compile_slot()] = p.mult_compile;
    v[kernels_slot()] = p.mult_kernels;
    for (std::size_t i = 0; i < tf32_gpus.size(); ++i) v[tf32_slot(i)] = p.tf32_multiplier(tf32_gpus[i]);
    v[ckpt_slot()] = p.ckpt_recompute_frac;
    v[halfsat_slot()] = p.batch_halfsat_tokens;
    v[comm_slot()] = p.comm_efficiency;
    v[host_slot()] = p.host_efficiency;
    v[update_slot()] = p.update_bytes_per_param;
    v[unfused_slot()] = p.unfused_overhead;
    return v;
  }

  void write(const std::vector<double>& v, PerfParams& p) const {
    for (std::size_t i = 0; i < mfu_keys.size(); ++i) p.mfu_base[mfu_keys[i]] = v[i];
    p.mult_compile = v[compile_slot()];
    p.mult_kernels = v[kernels_slot()];
    for (std::size_t i = 0; i < tf32_gpus.size(); ++i) p.mult_tf32[tf32_gpus[i]] = v[tf32_slot(i)];
    p.ckpt_recompute_frac = v[ckpt_slot()];
    p.batch_halfsat_tokens = v[halfsat_slot()];
    p.comm_efficiency = v[comm_slot()];
    p.host_efficiency = v[host_slot()];
    p.update_bytes_per_param = v[update_slot()];
    p.unfused_overhead = v[unfused_slot()];
  }
};

// ---------------------------------------------------------------------------
// Compiled step terms. Everything that does not depend on the timing
// coefficients is folded into constants once, so a loss evaluation is a few
// multiplications per (observation, candidate config).
// ---------------------------------------------------------------------------

struct StepTerm {
  TrainConfig config;     // with micro_batch and grad_accum_steps set
  std::size_t mfu = 0;    // slot
  std::optional<std::size_t> tf32;  // slot, when the TF32 multiplier applies
  bool compile = false;
  bool kernels = false;
  bool ckpt = false;
  double pass_units = 0;  // gas x FLOPs per pass / peak
  double tokens = 0;      // per-GPU tokens of one pass
  double unfused_scale = 0;  // fusable scale when running unfused, else 0
  double update_units = 0;  // params / shards / bandwidth
  bool update_on_host = false;
  double comm_units = 0;  // interconnect bytes / bandwidth
  double host_units = 0;  // host-link bytes / bandwidth
  double scale = 1;       // seconds -> observed unit

  [[nodiscard]] double value(const std::vector<double>& v, const ParamSpace& s) const {
    double total = 0;
    if (pass_units > 0) {
      double mult = 1.0;
      if (compile) mult *= v[s.compile_slot()];
      if (kernels) mult *= v[s.kernels_slot()];
      if (tf32) mult *= v[*tf32];
      const double sat = tokens / (tokens + v[s.halfsat_slot()]);
      double work = ckpt ? pass_units * (1.0 + v[s.ckpt_slot()]) : pass_units;
      if (unfused_scale > 0) work *= 1.0 + v[s.unfused_slot()] * unfused_scale;
      total += work / (v[mfu] * sat * mult);
    }
    if (update_units > 0)
      total += update_units * v[s.update_slot()] / (update_on_host ? v[s.host_slot()] : 1.0);
    if (comm_units > 0) total += comm_units / v[s.comm_slot()];
    if (host_units > 0) total += host_units / v[s.host_slot()];
    return total * scale;
  }
};

struct CompiledObservation {
  Observation obs;
  std::vector<StepTerm> candidates;  // empty when predicted infeasible
};

// Prediction for one observation: the fastest candidate and its index.
inline std::optional<std::pair<double, std::size_t>> predict(const CompiledObservation& c,
                                                             const std::vector<double>& v,
                                                             const ParamSpace& s) {
  std::optional<std::pair<double, std::size_t>> best;
  for (std::size_t i = 0; i < c.candidates.size(); ++i) {
    const double d = c.candidates[i].value(v, s);
    if (!best || d < best->first) best = {d, i};
  }
  return best;
}

namespace detail {

inline StepTerm compile_term(const ModelSpec& model, const MachineSpec& machine,
                             const TrainConfig& config, const ParamSpace& space, bool pass,
                             bool update, bool comm, double scale) {
  StepTerm t;
  t.config = config;
  t.mfu = space.mfu_slot(machine.gpu.id, model.family);
  if (config.tf32 && !model.mixed_precision()) t.tf32 = space.tf32_index(machine.gpu.id);
  t.compile = config.compile;
  t.kernels = config.custom_kernels;
  t.ckpt = config.act_checkpointing;
  t.scale = scale;
  const double mb = static_cast<double>(config.micro_batch);
  if (pass) {
    const double gas = comm ? static_cast<double>(config.grad_accum_steps) : 1.0;
    t.pass_units = gas * flops_per_sample(model) * mb / machine.gpu.peak_half_flops;
    t.tokens = model.tokens_per_sample() * mb;
    if (model.supports_custom_kernels && !config.custom_kernels)
      t.unfused_scale = detail::fusable_scale(model);
  }
  if (update) {
    double units = static_cast<double>(model.param_count);
    if (sharding_stage(config.sharding) >= 1) units /= static_cast<double>(machine.n_gpus);
    t.update_on_host = config.offload;
    t.update_units = units / (config.offload ? machine.host_device_bw_bytes
                                             : machine.gpu.mem_bandwidth_bytes);
  }
  if (comm) {
    // comm_time with unit efficiencies, split by link.
    PerfParams unit;
    unit.comm_efficiency = 1.0;
    unit.host_efficiency = std::numeric_limits<double>::infinity();
    t.comm_units = comm_time(model, config, machine, unit);
    if (config.offload)
      t.host_units =
          2.0 * model_state_bytes(model, config, machine.n_gpus).host_offloaded_bytes /
          machine.host_device_bw_bytes;
  }
  return t;
}

inline TrainConfig with_batch(const ModelSpec& model, const MachineSpec& machine, TrainConfig c,
                              const PerfParams& params) {
  std::int64_t micro = max_micro_batch(model, c, machine, params);
  micro = divisor_compatible_micro(micro, model.global_batch_size, machine.n_gpus);
  c.micro_batch = micro;
  c.grad_accum_steps = micro == 0 ? 0 : model.global_batch_size / (micro * machine.n_gpus);
  return c;
}

}  // namespace detail

// Candidate step terms for an observation, using the memory model of params
// to size micro-batches for searched and naive cells.
inline CompiledObservation compile_observation(const Observation& obs, const Catalog& catalog,
                                               const ParamSpace& space,
                                               const PerfParams& params) {
  const ModelSpec& model = catalog.model(obs.cell.model_id);
  const MachineSpec& machine = catalog.machine(obs.cell.gpu_id, obs.cell.n_gpus);
  const double days = static_cast<double>(model.training_steps) / kSecondsPerDay;
  CompiledObservation c{obs, {}};
  switch (obs.quantity) {
    case Quantity::pass_seconds:
      c.candidates.push_back(
          detail::compile_term(model, machine, obs.config, space, true, false, false, 1.0));
      break;
    case Quantity::update_seconds:
      c.candidates.push_back(
          detail::compile_term(model, machine, obs.config, space, false, true, false, 1.0));
      break;
    case Quantity::naive_days: {
      auto cfg = detail::with_batch(model, machine, naive_config(), params);
      if (cfg.micro_batch > 0)
        c.candidates.push_back(
            detail::compile_term(model, machine, cfg, space, true, true, true, days));
      break;
    }
    case Quantity::optimal_days:
      for (const auto& base : enumerate_configs(machine.n_gpus, machine.gpu.generation, model)) {
        auto cfg = detail::with_batch(model, machine, base, params);
        if (cfg.micro_batch > 0)
          c.candidates.push_back(
              detail::compile_term(model, machine, cfg, space, true, true, true, days));
      }
      break;
  }
  return c;
}

// The timing coefficients touched by a set of observations.
inline ParamSpace param_space_for(const std::vector<Observation>& obs, const Catalog& catalog) {
  std::set<std::pair<std::string, Family>> mfu;
  std::set<std::string> tf32;
  for (const auto& o : obs) {
    const auto& model = catalog.model(o.cell.model_id);
    mfu.insert({o.cell.gpu_id, model.family});
    if (!model.mixed_precision() && catalog.gpu(o.cell.gpu_id).supports_tf32())
      tf32.insert(o.cell.gpu_id);
  }
  return {{mfu.begin(), mfu.end()}, {tf32.begin(), tf32.end()}};
}

// ---------------------------------------------------------------------------
// Identifiability
// ---------------------------------------------------------------------------

// Which slots the observations can pin down. mfu needs one observation;
// on/off multipliers need both states under the same mfu; the saturation
// point needs two token counts under the same mfu; additive bandwidth terms
// need two observations. The unfused overhead additionally needs two
// distinct fusable scales, or it cannot be told apart from mult_kernels.
inline std::vector<bool> identifiable(const std::vector<CompiledObservation>& obs,
                                      const ParamSpace& s) {
  std::vector<bool> out(s.size(), false);
  std::map<std::size_t, std::set<std::pair<std::size_t, bool>>> flag_states;  // slot -> (mfu, on)
  std::map<std::size_t, std::set<double>> tokens;                             // mfu -> counts
  std::vector<int> additive(s.size(), 0);
  std::set<double> unfused_scales;
  for (const auto& o : obs) {
    std::set<std::size_t> touched;
    for (const auto& t : o.candidates) {
      if (t.pass_units > 0) {
        out[t.mfu] = true;
        flag_states[s.compile_slot()].insert({t.mfu, t.compile});
        flag_states[s.kernels_slot()].insert({t.mfu, t.kernels});
        flag_states[s.ckpt_slot()].insert({t.mfu, t.ckpt});
        for (std::size_t i = 0; i < s.tf32_gpus.size(); ++i)
          if (t.mfu < s.mfu_keys.size() && s.mfu_keys[t.mfu].first == s.tf32_gpus[i])
            flag_states[s.tf32_slot(i)].insert({t.mfu, t.tf32.has_value()});
        tokens[t.mfu].insert(t.tokens);
        if (t.unfused_scale > 0 || t.kernels) {
          flag_states[s.unfused_slot()].insert({t.mfu, t.unfused_scale > 0});
          if (t.unfused_scale > 0) unfused_scales.insert(t.unfused_scale);
        }
      }
      if (t.update_units > 0) touched.insert(s.update_slot());
      if (t.comm_units > 0) touched.insert(s.comm_slot());
      if (t.host_units > 0 || (t.update_units > 0 && t.update_on_host))
        touched.insert(s.host_slot());
    }
    for (auto slot : touched) ++additive[slot];
  }
  for (const auto& [slot, states] : flag_states) {
    std::map<std::size_t, int> seen;
    for (const auto& [mfu, on] : states) seen[mfu] |= on ? 2 : 1;
    out[slot] = std::any_of(seen.begin(), seen.end(), [](const auto& kv) {
      return kv.second == 3;
    });
  }
  out[s.unfused_slot()] = out[s.unfused_slot()] && unfused_scales.size() >= 2;
  out[s.halfsat_slot()] = std::any_of(tokens.begin(), tokens.end(),
                                      [](const auto& kv) { return kv.second.size() >= 2; });
  for (auto slot : {s.update_slot(), s.comm_slot(), s.host_slot()})
    out[slot] = out[slot] || additive[slot] >= 2;
  return out;
}

// ---------------------------------------------------------------------------
// Memory coefficients from observed feasibility
// ---------------------------------------------------------------------------

struct FeasibilityObservation {
  std::string model_id;
  std::string gpu_id;
  int n_gpus = 1;
  // Naive settings, the whole search space, or one record's configuration.
  enum class Scope { naive, search, record } scope = Scope::search;
  TrainConfig config;
  bool feasible = false;
};

inline std::vector<FeasibilityObservation> feasibility_from_grid(const ResultGrid& grid) {
  std::vector<FeasibilityObservation> out;
  const auto scope = grid.label == GridLabel::naive ? FeasibilityObservation::Scope::naive
                                                    : FeasibilityObservation::Scope::search;
  for (const auto& [cell, days] : grid.cells)
    out.push_back({cell.model_id, cell.gpu_id, cell.n_gpus, scope, naive_config(),
                   days.has_value()});
  return out;
}

inline std::vector<FeasibilityObservation> feasibility_from_records(
    const std::vector<MeasurementRecord>& records) {
  std::vector<FeasibilityObservation> out;
  for (const auto& r : records)
    if (r.config.micro_batch > 0)
      out.push_back({r.model_id, r.gpu_id, r.n_gpus, FeasibilityObservation::Scope::record,
                     r.config, !r.oom});
  return out;
}

inline bool predicted_feasible(const FeasibilityObservation& o, const Catalog& catalog,
                               const PerfParams& params) {
  const auto& model = catalog.model(o.model_id);
  const auto& machine = catalog.machine(o.gpu_id, o.n_gpus);
  switch (o.scope) {
    case FeasibilityObservation::Scope::record:
      return fits(model, o.config, machine, params).fits;
    case FeasibilityObservation::Scope::naive:
      return detail::with_batch(model, machine, naive_config(), params).micro_batch > 0;
    case FeasibilityObservation::Scope::search:
      for (const auto& c : enumerate_configs(machine.n_gpus, machine.gpu.generation, model))
        if (detail::with_batch(model, machine, c, params).micro_batch > 0) return true;
      return false;
  }
  return false;
}

inline constexpr std::array kActGrid = {2.0,  3.0,  4.0,  6.0,  8.0,   12.0,  16.0,
                                        24.0, 32.0, 48.0, 64.0, 96.0, 128.0, 192.0, 256.0};
inline constexpr std::array kFusableGrid = {0.0, 0.5, 1.0, 1.5, 2.0,  2.5,  3.0,  3.5,  4.0,
                                            5.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0};

struct MemoryFit {
  PerfParams params;
  std::size_t mismatches = 0;
  std::size_t observations = 0;
};

// Per family, the (act_coeff, fusable_coeff) grid point with the fewest
// feasibility mismatches; ties go to the point nearest the starting values.
inline MemoryFit fit_memory(const std::vector<FeasibilityObservation>& obs, const Catalog& catalog,
                            PerfParams params) {
  MemoryFit out;
  out.observations = obs.size();
  std::map<Family, std::vector<const FeasibilityObservation*>> by_family;
  for (const auto& o : obs) by_family[catalog.model(o.model_id).family].push_back(&o);
  for (const auto& [family, list] : by_family) {
    const double act0 = params.act(family);
    const double fus0 = params.fusable(family);
    std::optional<std::tuple<std::size_t, double, double, double>> best;  // miss, dist, act, fus
    for (double act : kActGrid) {
      for (double fus : kFusableGrid) {
        PerfParams trial = params;
        trial.act_coeff[family] = act;
        trial.fusable_coeff[family] = fus;
        std::size_t miss = 0;
        for (const auto* o : list)
          if (predicted_feasible(*o, catalog, trial) != o->feasible) ++miss;
        const double dist =
            std::abs(std::log(act / act0)) + std::abs(std::log((fus + 1.0) / (fus0 + 1.0)));
        if (!best || std::tie(miss, dist) < std::tie(std::get<0>(*best), std::get<1>(*best)))
          best = {miss, dist, act, fus};
      }
    }
    params.act_coeff[family] = std::get<2>(*best);
    params.fusable_coeff[family] = std::get<3>(*best);
    out.mismatches += std::get<0>(*best);
  }
  out.params = params;
  return out;
}

// ---------------------------------------------------------------------------
// Timing fit
// ---------------------------------------------------------------------------

struct CalibrationOptions {
  PerfParams start = default_params();
  bool fit_memory = true;
  double initial_step = 1.0;  // natural-log units
  double final_step = 1e-5;
  int max_sweeps = 2000;
};

struct Residual {
  Observation obs;
  std::optional<TrainConfig> config;  // the configuration behind the prediction
  std::optional<double> predicted;
  std::optional<double> log_ratio;  // log(observed / predicted)
};

struct CalibrationResult {
  PerfParams params;
  std::vector<std::string> fitted;
  std::vector<std::string> frozen;
  bool degenerate = false;
  std::size_t observations = 0;
  std::size_t feasibility_mismatches = 0;
  std::vector<Residual> residuals;
  double rms = 0;  // over observations with a prediction
};

inline double fit_loss(const std::vector<CompiledObservation>& obs, const std::vector<double>& v,
                       const ParamSpace& s) {
  double loss = 0;
  for (const auto& o : obs) {
    if (auto p = predict(o, v, s)) {
      const double r = std::log(o.obs.observed / p->first);
      loss += r * r;
    }
  }
  return loss;
}

// Compass search over the free slots in log space: each slot tries a
// multiplicative step up and down; the step halves after a sweep with no
// improvement.
inline std::vector<double> compass_search(const std::vector<CompiledObservation>& obs,
                                          std::vector<double> v, const std::vector<bool>& free,
                                          const ParamSpace& s, const CalibrationOptions& opt) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!free[i]) continue;
    const auto [lo, hi] = s.bounds(i);
    v[i] = std::clamp(v[i], lo, hi);
  }
  double cur = fit_loss(obs, v, s);
  double step = opt.initial_step;
  for (int sweep = 0; sweep < opt.max_sweeps && step >= opt.final_step; ++sweep) {
    bool improved = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!free[i]) continue;
      const auto [lo, hi] = s.bounds(i);
      const double old = v[i];
      for (double dir : {1.0, -1.0}) {
        const double trial = std::clamp(old * std::exp(dir * step), lo, hi);
        if (trial == v[i]) continue;
        v[i] = trial;
        const double l = fit_loss(obs, v, s);
        if (l < cur - 1e-15 * (1.0 + cur)) {
          cur = l;
          improved = true;
          break;
        }
        v[i] = old;
      }
    }
    if (!improved) step *= 0.5;
  }
  return v;
}

inline CalibrationResult calibrate(const Catalog& catalog,
                                   const std::vector<MeasurementRecord>& records,
                                   const std::vector<ResultGrid>& grids,
                                   const CalibrationOptions& opt = {}) {
  std::vector<Observation> obs = observations_from_records(records);
  for (const auto& g : grids) {
    auto more = observations_from_grid(g);
    obs.insert(obs.end(), more.begin(), more.end());
  }
  if (obs.empty()) throw PlanError(ErrorCode::degenerate_fit, "no timing observations");

  CalibrationResult result;
  PerfParams params = opt.start;
  if (opt.fit_memory) {
    std::vector<FeasibilityObservation> feas = feasibility_from_records(records);
    for (const auto& g : grids) {
      auto more = feasibility_from_grid(g);
      feas.insert(feas.end(), more.begin(), more.end());
    }
    std::sort(feas.begin(), feas.end(), [](const auto& a, const auto& b) {
      return std::tie(a.model_id, a.gpu_id, a.n_gpus, a.scope) <
             std::tie(b.model_id, b.gpu_id, b.n_gpus, b.scope);
    });
    if (!grids.empty()) {
      auto mem = fit_memory(feas, catalog, params);
      params = mem.params;
      result.feasibility_mismatches = mem.mismatches;
    }
  }

  const ParamSpace space = param_space_for(obs, catalog);
  std::vector<CompiledObservation> compiled;
  compiled.reserve(obs.size());
  for (const auto& o : obs) compiled.push_back(compile_observation(o, catalog, space, params));

  const auto free = identifiable(compiled, space);
  std::size_t n_free = 0;
  for (std::size_t i = 0; i < free.size(); ++i) {
    (free[i] ? result.fitted : result.frozen).push_back(space.name(i));
    n_free += free[i];
  }
  result.observations = obs.size();
  result.degenerate = obs.size() < n_free;

  const auto v = compass_search(compiled, space.read(params), free, space, opt);
  space.write(v, params);
  result.params = params;

  double sq = 0;
  std::size_t n = 0;
  for (const auto& c : compiled) {
    Residual r{c.obs, std::nullopt, std::nullopt, std::nullopt};
    if (auto p = predict(c, v, space)) {
      r.config = c.candidates[p->second].config;
      r.predicted = p->first;
      r.log_ratio = std::log(c.obs.observed / p->first);
      sq += *r.log_ratio * *r.log_ratio;
      ++n;
    }
    result.residuals.push_back(r);
  }
  result.rms = n > 0 ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
  return result;
}

// For families without any fitted mfu, use the per-GPU geometric mean of the
// fitted families.
inline PerfParams fill_unseen_families(PerfParams params, const std::vector<std::string>& gpu_ids) {
  for (const auto& gpu : gpu_ids) {
    double log_sum = 0;
    int n = 0;
    for (const auto& [key, v] : params.mfu_base)
      if (key.first == gpu) {
        log_sum += std::log(v);
        ++n;
      }
    if (n == 0) continue;
    const double mean = std::exp(log_sum / n);
    for (Family f : kAllFamilies) params.mfu_base.try_emplace({gpu, f}, mean);
  }
  return params;
}

// ---------------------------------------------------------------------------
// Leave-one-model-out validation on result grids
// ---------------------------------------------------------------------------

struct HeldOutCell {
  CellKey cell;
  GridLabel label = GridLabel::optimal;
  double observed = 0;
  std::optional<double> predicted;

  [[nodiscard]] std::optional<double> ratio() const {
    if (!predicted) return std::nullopt;
    return *predicted / observed;
  }
};

inline ResultGrid without_model(const ResultGrid& g, const std::string& model_id, bool keep) {
  ResultGrid out;
  out.label = g.label;
  for (const auto& [k, v] : g.cells)
    if ((k.model_id == model_id) == keep) out.cells[k] = v;
  return out;
}

// Fit on every model but one, then predict that model's feasible cells with
// the full planner (search for optimal cells, naive settings for naive ones).
inline std::vector<HeldOutCell> leave_one_model_out(const Catalog& catalog,
                                                    const std::vector<ResultGrid>& grids,
                                                    const CalibrationOptions& opt = {}) {
  std::set<std::string> model_ids;
  for (const auto& g : grids)
    for (const auto& [k, v] : g.cells) model_ids.insert(k.model_id);
  std::vector<std::string> gpu_ids;
  for (const auto& g : catalog.gpus) gpu_ids.push_back(g.id);

  std::vector<HeldOutCell> out;
  for (const auto& held : model_ids) {
    std::vector<ResultGrid> train;
    for (const auto& g : grids) train.push_back(without_model(g, held, false));
    const PerfParams params =
        fill_unseen_families(calibrate(catalog, {}, train, opt).params, gpu_ids);
    const auto& model = catalog.model(held);
    for (const auto& g : grids) {
      for (const auto& [k, days] : without_model(g, held, true).cells) {
        if (!days) continue;
        const auto& machine = catalog.machine(k.gpu_id, k.n_gpus);
        HeldOutCell h{k, g.label, *days, std::nullopt};
        if (g.label == GridLabel::naive) {
          if (auto e = naive_estimate(model, machine, params)) h.predicted = e->days;
        } else if (auto o = optimize(model, machine, params); o.best) {
          h.predicted = o.best->estimate.days;
        }
        out.push_back(h);
      }
    }
  }
  return out;
}

}  // namespace ptplan
