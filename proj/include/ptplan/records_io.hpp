#pragma once

// MeasurementRecord JSONL: one object per line, field names as in the type.

#include <nlohmann/json.hpp>

#include <istream>
#include <set>
#include <string>
#include <vector>

#include "ptplan/core.hpp"

namespace ptplan {

namespace jsonio {

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
  throw PlanError(ErrorCode::invalid_input, where + ": " + what);
}

inline void check_fields(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::set<std::string>& required, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) fail(where, "unknown field '" + key + "'");
  for (const auto& key : required)
    if (!j.contains(key)) fail(where, "missing field '" + key + "'");
}

template <typename T>
T get(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(where, std::string("bad value for '") + key + "'");
  }
}

}  // namespace jsonio

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"compile", c.compile},
          {"custom_kernels", c.custom_kernels},
          {"tf32", c.tf32},
          {"act_checkpointing", c.act_checkpointing},
          {"sharding", std::string(to_string(c.sharding))},
          {"offload", c.offload},
          {"micro_batch", c.micro_batch},
          {"grad_accum_steps", c.grad_accum_steps}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& where) {
  using jsonio::get;
  const std::set<std::string> fields = {"compile",   "custom_kernels", "tf32",
                                        "act_checkpointing", "sharding", "offload",
                                        "micro_batch", "grad_accum_steps"};
  jsonio::check_fields(j, fields, fields, where);
  TrainConfig c;
  c.compile = get<bool>(j, "compile", where);
  c.custom_kernels = get<bool>(j, "custom_kernels", where);
  c.tf32 = get<bool>(j, "tf32", where);
  c.act_checkpointing = get<bool>(j, "act_checkpointing", where);
  c.sharding = parse_enum<Sharding>(get<std::string>(j, "sharding", where));
  c.offload = get<bool>(j, "offload", where);
  c.micro_batch = get<std::int64_t>(j, "micro_batch", where);
  c.grad_accum_steps = get<std::int64_t>(j, "grad_accum_steps", where);
  return c;
}

inline nlohmann::json to_json(const MeasurementRecord& r) {
  nlohmann::json j = {{"model_id", r.model_id},
                      {"gpu_id", r.gpu_id},
                      {"n_gpus", r.n_gpus},
                      {"config", to_json(r.config)}};
  if (r.pass_seconds) j["pass_seconds"] = *r.pass_seconds;
  if (r.update_seconds) j["update_seconds"] = *r.update_seconds;
  j["oom"] = r.oom;
  j["timestamp"] = r.timestamp;
  return j;
}

inline MeasurementRecord record_from_json(const nlohmann::json& j, const std::string& where) {
  using jsonio::get;
  jsonio::check_fields(j,
                       {"model_id", "gpu_id", "n_gpus", "config", "pass_seconds",
                        "update_seconds", "oom", "timestamp"},
                       {"model_id", "gpu_id", "n_gpus", "config", "oom", "timestamp"}, where);
  MeasurementRecord r;
  r.model_id = get<std::string>(j, "model_id", where);
  r.gpu_id = get<std::string>(j, "gpu_id", where);
  r.n_gpus = get<int>(j, "n_gpus", where);
  r.config = train_config_from_json(j.at("config"), where + " config");
  r.oom = get<bool>(j, "oom", where);
  r.timestamp = get<std::string>(j, "timestamp", where);
  if (j.contains("pass_seconds")) r.pass_seconds = get<double>(j, "pass_seconds", where);
  if (j.contains("update_seconds")) r.update_seconds = get<double>(j, "update_seconds", where);
  if (r.oom && (r.pass_seconds || r.update_seconds))
    jsonio::fail(where, "an oom record carries no timings");
  if (!r.oom && !(r.pass_seconds && *r.pass_seconds > 0 && r.update_seconds &&
                  *r.update_seconds > 0))
    jsonio::fail(where, "pass_seconds and update_seconds must be positive");
  if (r.n_gpus < 1) jsonio::fail(where, "n_gpus must be positive");
  return r;
}

// Blank lines are skipped; errors name the 1-based line.
inline std::vector<MeasurementRecord> parse_records(std::istream& in,
                                                    const std::string& source = "records") {
  std::vector<MeasurementRecord> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(n);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      jsonio::fail(where, "malformed JSON");
    }
    out.push_back(record_from_json(j, where));
  }
  return out;
}

inline std::string records_jsonl(const std::vector<MeasurementRecord>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

}  // namespace ptplan
