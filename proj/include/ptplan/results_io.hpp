#pragma once

// Result serialization: ResultGrid CSV, calibration residual CSV, search
// outcomes as JSON/CSV/text, long-format plot CSV and run manifests.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ptplan/calibrate.hpp"
#include "ptplan/core.hpp"
#include "ptplan/grid.hpp"
#include "ptplan/records_io.hpp"
#include "ptplan/search.hpp"

namespace ptplan {

// Fixed-format number text so identical runs give identical bytes.
inline std::string num(double v, int significant = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant, v);
  return buf;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string config_hash(Quantity q, const TrainConfig& c) {
  return hex64(fnv1a(std::string(to_string(q)) + "|" + c.key() + "|" +
                     std::to_string(c.micro_batch) + "|" + std::to_string(c.grad_accum_steps)));
}

namespace csv {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace csv

// ---------------------------------------------------------------------------
// ResultGrid
// ---------------------------------------------------------------------------

inline std::string result_grid_csv(const ResultGrid& g) {
  std::string out = "model_id,gpu_id,n_gpus,days\n";
  for (const auto& [k, d] : g.cells)
    out += k.model_id + "," + k.gpu_id + "," + std::to_string(k.n_gpus) + "," +
           (d ? num(*d, 10) : std::string("inf")) + "\n";
  return out;
}

inline ResultGrid parse_result_grid(std::istream& in, GridLabel label,
                                    const std::string& source = "grid") {
  auto fail = [&](int line, const std::string& what) {
    throw PlanError(ErrorCode::invalid_input, source + ":" + std::to_string(line) + ": " + what);
  };
  ResultGrid g;
  g.label = label;
  std::string line;
  if (!std::getline(in, line) || csv::strip_cr(line) != "model_id,gpu_id,n_gpus,days")
    fail(1, "expected header model_id,gpu_id,n_gpus,days");
  for (int n = 2; std::getline(in, line); ++n) {
    line = csv::strip_cr(line);
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 4) fail(n, "expected 4 columns");
    CellKey key{f[0], f[1], 0};
    try {
      std::size_t used = 0;
      key.n_gpus = std::stoi(f[2], &used);
      if (used != f[2].size() || key.n_gpus < 1) fail(n, "bad n_gpus");
      if (f[3] == "inf") {
        g.cells[key] = std::nullopt;
      } else {
        const double d = std::stod(f[3], &used);
        if (used != f[3].size() || !(d > 0)) fail(n, "days must be positive or inf");
        g.cells[key] = d;
      }
    } catch (const std::logic_error&) {
      fail(n, "bad number");
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Calibration residuals
// ---------------------------------------------------------------------------

inline std::string residuals_csv(const std::vector<Residual>& rs) {
  std::string out = "model_id,gpu_id,n_gpus,config_hash,observed,predicted,log_ratio\n";
  for (const auto& r : rs) {
    const TrainConfig cfg = r.config.value_or(r.obs.config);
    out += r.obs.cell.model_id + "," + r.obs.cell.gpu_id + "," +
           std::to_string(r.obs.cell.n_gpus) + "," + config_hash(r.obs.quantity, cfg) + "," +
           num(r.obs.observed, 10) + "," + (r.predicted ? num(*r.predicted, 10) : "inf") + "," +
           (r.log_ratio ? num(*r.log_ratio, 10) : "inf") + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Search outcomes
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const StepEstimate& e) {
  return {{"pass_seconds", e.pass_seconds},
          {"update_seconds", e.update_seconds},
          {"comm_seconds", e.comm_seconds},
          {"step_seconds", e.step_seconds},
          {"days", e.days}};
}

inline nlohmann::json to_json(const SearchOutcome& o, const CellKey& cell) {
  nlohmann::json j;
  j["model_id"] = cell.model_id;
  j["gpu_id"] = cell.gpu_id;
  j["n_gpus"] = cell.n_gpus;
  j["best"] = o.best ? nlohmann::json{{"config", to_json(o.best->config)},
                                      {"estimate", to_json(o.best->estimate)}}
                     : nlohmann::json(nullptr);
  j["naive"] = o.naive ? to_json(*o.naive) : nlohmann::json(nullptr);
  j["table"] = nlohmann::json::array();
  for (const auto& e : o.table) {
    nlohmann::json row = {{"config", to_json(e.config)}};
    if (e.feasible())
      row["estimate"] = to_json(e.estimate());
    else
      row["infeasible"] = std::string(to_string(std::get<Infeasible>(e.result).limiting));
    j["table"].push_back(row);
  }
  return j;
}

inline std::string search_outcome_csv(const SearchOutcome& o) {
  std::string out =
      "compile,custom_kernels,tf32,act_checkpointing,sharding,offload,micro_batch,"
      "grad_accum_steps,days,reason\n";
  for (const auto& e : o.table) {
    const auto& c = e.config;
    out += std::to_string(c.compile) + "," + std::to_string(c.custom_kernels) + "," +
           std::to_string(c.tf32) + "," + std::to_string(c.act_checkpointing) + "," +
           std::string(to_string(c.sharding)) + "," + std::to_string(c.offload) + "," +
           std::to_string(c.micro_batch) + "," + std::to_string(c.grad_accum_steps) + ",";
    if (e.feasible())
      out += num(e.estimate().days, 10) + ",\n";
    else
      out += ",out-of-" + std::string(to_string(std::get<Infeasible>(e.result).limiting)) +
             "-memory\n";
  }
  return out;
}

inline std::string aligned_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (width.size() <= i) width.push_back(0);
      width[i] = std::max(width[i], r[i].size());
    }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      line += r[i];
      if (i + 1 < r.size()) line += std::string(width[i] - r[i].size() + 2, ' ');
    }
    out += line + "\n";
  }
  return out;
}

inline std::string search_outcome_text(const SearchOutcome& o) {
  std::vector<std::vector<std::string>> rows = {
      {"config", "micro_batch", "gas", "days"}};
  for (const auto& e : o.table) {
    const bool best = o.best && e.feasible() && e.config == o.best->config;
    rows.push_back({e.config.key() + (best ? " *" : ""), std::to_string(e.config.micro_batch),
                    std::to_string(e.config.grad_accum_steps),
                    e.feasible() ? num(e.estimate().days, 4)
                                 : "infeasible (" +
                                       std::string(to_string(std::get<Infeasible>(e.result).limiting)) +
                                       ")"});
  }
  std::string out = aligned_table(rows);
  if (o.best)
    out += "best: " + o.best->config.key() + " " + num(o.best->estimate.days, 4) + " days\n";
  else
    out += "best: infeasible\n";
  out += "naive: " + (o.naive ? num(o.naive->days, 4) + " days" : std::string("infeasible")) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Plot-ready long format: one row per (series, cell).
// ---------------------------------------------------------------------------

inline std::string long_csv(const std::vector<ResultGrid>& grids) {
  std::string out = "series,model_id,gpu_id,n_gpus,days\n";
  for (const auto& g : grids)
    for (const auto& [k, d] : g.cells)
      out += std::string(to_string(g.label)) + "," + k.model_id + "," + k.gpu_id + "," +
             std::to_string(k.n_gpus) + "," + (d ? num(*d, 10) : std::string("inf")) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::map<std::string, int> catalog_versions;
  std::string perf_params_hash;
  std::string timestamp;
  std::vector<std::string> output_paths;
};

inline nlohmann::json to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"catalog_versions", m.catalog_versions},
          {"perf_params_hash", m.perf_params_hash},
          {"timestamp", m.timestamp},
          {"output_paths", m.output_paths}};
}

}  // namespace ptplan
