#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "ptplan/core.hpp"

namespace ptplan {

struct PriceCatalog {
  std::map<std::string, double> gpu_prices;
  std::map<int, double> system_prices;  // keyed by GPUs per machine
  int lifespan_days = 1825;
};

// Per-field provenance notes for one entity, e.g. {"hidden_size": "external"}.
using Provenance = std::map<std::string, std::string>;

struct Catalog {
  int version = 1;
  std::vector<ModelSpec> models;
  std::vector<GpuSpec> gpus;
  std::vector<MachineSpec> machines;
  PriceCatalog prices;
  std::map<std::string, Provenance> provenance;  // by entity id

  [[nodiscard]] const ModelSpec& model(const std::string& id) const {
    auto it = std::find_if(models.begin(), models.end(), [&](const auto& m) { return m.id == id; });
    if (it == models.end()) throw PlanError(ErrorCode::unknown_model, id);
    return *it;
  }

  [[nodiscard]] const GpuSpec& gpu(const std::string& id) const {
    auto it = std::find_if(gpus.begin(), gpus.end(), [&](const auto& g) { return g.id == id; });
    if (it == gpus.end()) throw PlanError(ErrorCode::unknown_gpu, id);
    return *it;
  }

  [[nodiscard]] const MachineSpec& machine(const std::string& gpu_id, int n_gpus) const {
    auto it = std::find_if(machines.begin(), machines.end(), [&](const auto& m) {
      return m.gpu.id == gpu_id && m.n_gpus == n_gpus;
    });
    if (it == machines.end())
      throw PlanError(ErrorCode::unknown_machine, gpu_id + "x" + std::to_string(n_gpus));
    return *it;
  }

  [[nodiscard]] bool has_model(const std::string& id) const {
    return std::any_of(models.begin(), models.end(), [&](const auto& m) { return m.id == id; });
  }
};

// All entity invariants, including the host-RAM allocation rule of 64 GiB per
// GPU for every machine.
inline std::vector<std::string> check_catalog(const Catalog& c) {
  std::vector<std::string> out;
  auto append = [&](std::vector<std::string> v) { out.insert(out.end(), v.begin(), v.end()); };
  for (const auto& m : c.models) append(check_model(m));
  for (const auto& g : c.gpus) append(check_gpu(g));
  for (const auto& m : c.machines) {
    append(check_machine(m));
    if (m.host_ram_bytes < m.n_gpus * 64.0 * kGiB)
      out.push_back(m.id() + ": host RAM below 64 GiB per GPU");
  }
  for (const auto& [id, v] : c.prices.gpu_prices)
    if (!(v > 0)) out.push_back("price of " + id + " must be positive");
  for (const auto& [n, v] : c.prices.system_prices)
    if (!(v > 0)) out.push_back("system price must be positive");
  if (c.prices.lifespan_days <= 0) out.push_back("lifespan_days must be positive");
  return out;
}

}  // namespace ptplan
