#pragma once

// YAML persistence for catalogs and PerfParams. A catalog directory holds
// catalog.yaml (version header), models.yaml, gpus.yaml and machines.yaml
// (one document per entity) and prices.yaml. Unknown fields are errors.

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ptplan/catalog.hpp"
#include "ptplan/core.hpp"

namespace ptplan {

inline constexpr int kCatalogVersion = 1;
inline constexpr int kPerfParamsVersion = 1;

namespace yamlio {

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
  throw PlanError(ErrorCode::invalid_input, where + ": " + what);
}

inline void check_fields(const YAML::Node& doc, const std::set<std::string>& allowed,
                         const std::set<std::string>& required, const std::string& where) {
  if (!doc.IsMap()) fail(where, "expected a mapping");
  for (const auto& kv : doc) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(where, "unknown field '" + key + "'");
  }
  for (const auto& key : required)
    if (!doc[key]) fail(where, "missing field '" + key + "'");
}

template <typename T>
T get(const YAML::Node& doc, const std::string& key, const std::string& where) {
  try {
    return doc[key].as<T>();
  } catch (const YAML::Exception& e) {
    fail(where, "bad value for '" + key + "'");
  }
}

template <typename T>
T get_or(const YAML::Node& doc, const std::string& key, T fallback, const std::string& where) {
  return doc[key] ? get<T>(doc, key, where) : fallback;
}

inline std::vector<YAML::Node> load_all(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path.string(), "cannot open");
  try {
    return YAML::LoadAll(in);
  } catch (const YAML::Exception& e) {
    fail(path.string(), e.what());
  }
}

inline YAML::Node load_one(const std::filesystem::path& path) {
  auto docs = load_all(path);
  if (docs.size() != 1) fail(path.string(), "expected exactly one document");
  return docs.front();
}

inline Provenance read_provenance(const YAML::Node& doc, const std::string& where) {
  Provenance p;
  if (!doc["provenance"]) return p;
  if (!doc["provenance"].IsMap()) fail(where, "provenance must be a mapping");
  for (const auto& kv : doc["provenance"])
    p[kv.first.as<std::string>()] = kv.second.as<std::string>();
  return p;
}

inline YAML::Emitter& start(YAML::Emitter& out) {
  out.SetDoublePrecision(std::numeric_limits<double>::max_digits10);
  return out;
}

}  // namespace yamlio

// ---------------------------------------------------------------------------
// Entities
// ---------------------------------------------------------------------------

inline ModelSpec model_from_yaml(const YAML::Node& doc, const std::string& where) {
  using namespace yamlio;
  check_fields(doc,
               {"id", "family", "param_count", "seq_len", "vocab_size", "image_size",
                "num_classes", "hidden_size", "num_layers", "num_heads", "global_batch_size",
                "training_steps", "precision", "optimizer", "supports_compile",
                "supports_custom_kernels", "total_training_flops_override", "provenance"},
               {"id", "family", "param_count", "hidden_size", "num_layers", "global_batch_size",
                "training_steps", "precision", "optimizer"},
               where);
  ModelSpec m;
  m.id = get<std::string>(doc, "id", where);
  m.family = parse_enum<Family>(get<std::string>(doc, "family", where));
  m.param_count = get<std::int64_t>(doc, "param_count", where);
  m.seq_len = get_or<std::int64_t>(doc, "seq_len", 0, where);
  m.vocab_size = get_or<std::int64_t>(doc, "vocab_size", 0, where);
  m.image_size = get_or<std::int64_t>(doc, "image_size", 0, where);
  m.num_classes = get_or<std::int64_t>(doc, "num_classes", 0, where);
  m.hidden_size = get<std::int64_t>(doc, "hidden_size", where);
  m.num_layers = get<std::int64_t>(doc, "num_layers", where);
  m.num_heads = get_or<std::int64_t>(doc, "num_heads", 0, where);
  m.global_batch_size = get<std::int64_t>(doc, "global_batch_size", where);
  m.training_steps = get<std::int64_t>(doc, "training_steps", where);
  m.precision = parse_enum<Precision>(get<std::string>(doc, "precision", where));
  m.optimizer = parse_enum<Optimizer>(get<std::string>(doc, "optimizer", where));
  m.supports_compile = get_or<bool>(doc, "supports_compile", true, where);
  m.supports_custom_kernels = get_or<bool>(doc, "supports_custom_kernels", true, where);
  if (doc["total_training_flops_override"] && !doc["total_training_flops_override"].IsNull())
    m.total_training_flops_override = get<double>(doc, "total_training_flops_override", where);
  if (auto problems = check_model(m); !problems.empty()) fail(where, problems.front());
  return m;
}

inline GpuSpec gpu_from_yaml(const YAML::Node& doc, const std::string& where) {
  using namespace yamlio;
  const std::set<std::string> fields = {"id",         "memory_bytes",   "peak_half_flops",
                                        "generation", "unit_price_usd", "mem_bandwidth_bytes"};
  auto allowed = fields;
  allowed.insert("provenance");
  check_fields(doc, allowed, fields, where);
  GpuSpec g;
  g.id = get<std::string>(doc, "id", where);
  g.memory_bytes = get<double>(doc, "memory_bytes", where);
  g.peak_half_flops = get<double>(doc, "peak_half_flops", where);
  g.generation = parse_enum<Generation>(get<std::string>(doc, "generation", where));
  g.unit_price_usd = get<double>(doc, "unit_price_usd", where);
  g.mem_bandwidth_bytes = get<double>(doc, "mem_bandwidth_bytes", where);
  if (auto problems = check_gpu(g); !problems.empty()) fail(where, problems.front());
  return g;
}

// The gpu field names a GPU document by id.
inline MachineSpec machine_from_yaml(const YAML::Node& doc, const std::vector<GpuSpec>& gpus,
                                     const std::string& where) {
  using namespace yamlio;
  const std::set<std::string> fields = {"gpu",            "n_gpus",
                                        "system_price_usd", "host_ram_bytes",
                                        "intra_node_bw_bytes", "host_device_bw_bytes"};
  auto allowed = fields;
  allowed.insert("provenance");
  check_fields(doc, allowed, fields, where);
  MachineSpec m;
  const auto gpu_id = get<std::string>(doc, "gpu", where);
  auto it = std::find_if(gpus.begin(), gpus.end(), [&](const auto& g) { return g.id == gpu_id; });
  if (it == gpus.end()) fail(where, "unknown gpu '" + gpu_id + "'");
  m.gpu = *it;
  m.n_gpus = get<int>(doc, "n_gpus", where);
  m.system_price_usd = get<double>(doc, "system_price_usd", where);
  m.host_ram_bytes = get<double>(doc, "host_ram_bytes", where);
  m.intra_node_bw_bytes = get<double>(doc, "intra_node_bw_bytes", where);
  m.host_device_bw_bytes = get<double>(doc, "host_device_bw_bytes", where);
  if (auto problems = check_machine(m); !problems.empty()) fail(where, problems.front());
  return m;
}

inline PriceCatalog prices_from_yaml(const YAML::Node& doc, const std::string& where) {
  using namespace yamlio;
  check_fields(doc, {"gpu_prices", "system_prices", "lifespan_days"},
               {"gpu_prices", "system_prices", "lifespan_days"}, where);
  PriceCatalog p;
  try {
    p.gpu_prices = doc["gpu_prices"].as<std::map<std::string, double>>();
    p.system_prices = doc["system_prices"].as<std::map<int, double>>();
  } catch (const YAML::Exception&) {
    fail(where, "prices must be mappings of numbers");
  }
  p.lifespan_days = get<int>(doc, "lifespan_days", where);
  return p;
}

// ---------------------------------------------------------------------------
// Catalog directories
// ---------------------------------------------------------------------------

inline Catalog load_catalog(const std::filesystem::path& dir) {
  using namespace yamlio;
  Catalog c;
  const auto header_path = dir / "catalog.yaml";
  const auto header = load_one(header_path);
  check_fields(header, {"catalog_version"}, {"catalog_version"}, header_path.string());
  c.version = get<int>(header, "catalog_version", header_path.string());
  if (c.version != kCatalogVersion)
    fail(header_path.string(), "unsupported catalog_version " + std::to_string(c.version));

  auto each = [&](const char* file, auto&& fn) {
    const auto path = dir / file;
    const auto docs = load_all(path);
    for (std::size_t i = 0; i < docs.size(); ++i)
      fn(docs[i], path.string() + " document " + std::to_string(i + 1));
  };
  each("models.yaml", [&](const YAML::Node& d, const std::string& where) {
    auto m = model_from_yaml(d, where);
    if (c.has_model(m.id)) fail(where, "duplicate model '" + m.id + "'");
    if (auto p = read_provenance(d, where); !p.empty()) c.provenance[m.id] = p;
    c.models.push_back(std::move(m));
  });
  each("gpus.yaml", [&](const YAML::Node& d, const std::string& where) {
    auto g = gpu_from_yaml(d, where);
    if (auto p = read_provenance(d, where); !p.empty()) c.provenance[g.id] = p;
    c.gpus.push_back(std::move(g));
  });
  each("machines.yaml", [&](const YAML::Node& d, const std::string& where) {
    auto m = machine_from_yaml(d, c.gpus, where);
    if (auto p = read_provenance(d, where); !p.empty()) c.provenance[m.id()] = p;
    c.machines.push_back(std::move(m));
  });
  const auto prices_path = dir / "prices.yaml";
  c.prices = prices_from_yaml(load_one(prices_path), prices_path.string());
  if (auto problems = check_catalog(c); !problems.empty())
    fail(dir.string(), problems.front());
  return c;
}

namespace yamlio {

inline void emit_provenance(YAML::Emitter& out, const Catalog& c, const std::string& id) {
  auto it = c.provenance.find(id);
  if (it == c.provenance.end() || it->second.empty()) return;
  out << YAML::Key << "provenance" << YAML::Value << YAML::BeginMap;
  for (const auto& [k, v] : it->second) out << YAML::Key << k << YAML::Value << v;
  out << YAML::EndMap;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path.string(), "cannot write");
  out << text << '\n';
}

}  // namespace yamlio

inline std::string models_yaml(const Catalog& c) {
  YAML::Emitter out;
  yamlio::start(out);
  for (const auto& m : c.models) {
    out << YAML::BeginDoc << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << m.id;
    out << YAML::Key << "family" << YAML::Value << std::string(to_string(m.family));
    out << YAML::Key << "param_count" << YAML::Value << m.param_count;
    out << YAML::Key << "seq_len" << YAML::Value << m.seq_len;
    out << YAML::Key << "vocab_size" << YAML::Value << m.vocab_size;
    out << YAML::Key << "image_size" << YAML::Value << m.image_size;
    out << YAML::Key << "num_classes" << YAML::Value << m.num_classes;
    out << YAML::Key << "hidden_size" << YAML::Value << m.hidden_size;
    out << YAML::Key << "num_layers" << YAML::Value << m.num_layers;
    out << YAML::Key << "num_heads" << YAML::Value << m.num_heads;
    out << YAML::Key << "global_batch_size" << YAML::Value << m.global_batch_size;
    out << YAML::Key << "training_steps" << YAML::Value << m.training_steps;
    out << YAML::Key << "precision" << YAML::Value << std::string(to_string(m.precision));
    out << YAML::Key << "optimizer" << YAML::Value << std::string(to_string(m.optimizer));
    out << YAML::Key << "supports_compile" << YAML::Value << m.supports_compile;
    out << YAML::Key << "supports_custom_kernels" << YAML::Value << m.supports_custom_kernels;
    if (m.total_training_flops_override)
      out << YAML::Key << "total_training_flops_override" << YAML::Value
          << *m.total_training_flops_override;
    yamlio::emit_provenance(out, c, m.id);
    out << YAML::EndMap;
  }
  return out.c_str();
}

inline std::string gpus_yaml(const Catalog& c) {
  YAML::Emitter out;
  yamlio::start(out);
  for (const auto& g : c.gpus) {
    out << YAML::BeginDoc << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << g.id;
    out << YAML::Key << "memory_bytes" << YAML::Value << g.memory_bytes;
    out << YAML::Key << "peak_half_flops" << YAML::Value << g.peak_half_flops;
    out << YAML::Key << "generation" << YAML::Value << std::string(to_string(g.generation));
    out << YAML::Key << "unit_price_usd" << YAML::Value << g.unit_price_usd;
    out << YAML::Key << "mem_bandwidth_bytes" << YAML::Value << g.mem_bandwidth_bytes;
    yamlio::emit_provenance(out, c, g.id);
    out << YAML::EndMap;
  }
  return out.c_str();
}

inline std::string machines_yaml(const Catalog& c) {
  YAML::Emitter out;
  yamlio::start(out);
  for (const auto& m : c.machines) {
    out << YAML::BeginDoc << YAML::BeginMap;
    out << YAML::Key << "gpu" << YAML::Value << m.gpu.id;
    out << YAML::Key << "n_gpus" << YAML::Value << m.n_gpus;
    out << YAML::Key << "system_price_usd" << YAML::Value << m.system_price_usd;
    out << YAML::Key << "host_ram_bytes" << YAML::Value << m.host_ram_bytes;
    out << YAML::Key << "intra_node_bw_bytes" << YAML::Value << m.intra_node_bw_bytes;
    out << YAML::Key << "host_device_bw_bytes" << YAML::Value << m.host_device_bw_bytes;
    yamlio::emit_provenance(out, c, m.id());
    out << YAML::EndMap;
  }
  return out.c_str();
}

inline std::string prices_yaml(const PriceCatalog& p) {
  YAML::Emitter out;
  yamlio::start(out);
  out << YAML::BeginMap;
  out << YAML::Key << "gpu_prices" << YAML::Value << YAML::BeginMap;
  for (const auto& [id, v] : p.gpu_prices) out << YAML::Key << id << YAML::Value << v;
  out << YAML::EndMap;
  out << YAML::Key << "system_prices" << YAML::Value << YAML::BeginMap;
  for (const auto& [n, v] : p.system_prices) out << YAML::Key << n << YAML::Value << v;
  out << YAML::EndMap;
  out << YAML::Key << "lifespan_days" << YAML::Value << p.lifespan_days;
  out << YAML::EndMap;
  return out.c_str();
}

// Writes the five catalog files; returns their paths.
inline std::vector<std::filesystem::path> save_catalog(const Catalog& c,
                                                       const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::vector<std::pair<const char*, std::string>> files = {
      {"catalog.yaml", "catalog_version: " + std::to_string(c.version)},
      {"models.yaml", models_yaml(c)},
      {"gpus.yaml", gpus_yaml(c)},
      {"machines.yaml", machines_yaml(c)},
      {"prices.yaml", prices_yaml(c.prices)},
  };
  std::vector<std::filesystem::path> out;
  for (const auto& [name, text] : files) {
    yamlio::write_text(dir / name, text);
    out.push_back(dir / name);
  }
  return out;
}

// ---------------------------------------------------------------------------
// PerfParams
// ---------------------------------------------------------------------------

inline std::string perf_params_yaml(const PerfParams& p) {
  YAML::Emitter out;
  yamlio::start(out);
  out << YAML::BeginMap;
  out << YAML::Key << "perf_params_version" << YAML::Value << kPerfParamsVersion;
  out << YAML::Key << "mfu_base" << YAML::Value << YAML::BeginMap;
  std::map<std::string, std::map<std::string, double>> nested;
  for (const auto& [k, v] : p.mfu_base) nested[k.first][std::string(to_string(k.second))] = v;
  for (const auto& [gpu, fams] : nested) {
    out << YAML::Key << gpu << YAML::Value << YAML::BeginMap;
    for (const auto& [f, v] : fams) out << YAML::Key << f << YAML::Value << v;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  out << YAML::Key << "default_mfu" << YAML::Value << p.default_mfu;
  out << YAML::Key << "mult_compile" << YAML::Value << p.mult_compile;
  out << YAML::Key << "mult_kernels" << YAML::Value << p.mult_kernels;
  out << YAML::Key << "unfused_overhead" << YAML::Value << p.unfused_overhead;
  out << YAML::Key << "mult_tf32" << YAML::Value << YAML::BeginMap;
  for (const auto& [g, v] : p.mult_tf32) out << YAML::Key << g << YAML::Value << v;
  out << YAML::EndMap;
  out << YAML::Key << "default_mult_tf32" << YAML::Value << p.default_mult_tf32;
  out << YAML::Key << "ckpt_recompute_frac" << YAML::Value << p.ckpt_recompute_frac;
  out << YAML::Key << "batch_halfsat_tokens" << YAML::Value << p.batch_halfsat_tokens;
  out << YAML::Key << "comm_efficiency" << YAML::Value << p.comm_efficiency;
  out << YAML::Key << "host_efficiency" << YAML::Value << p.host_efficiency;
  out << YAML::Key << "update_bytes_per_param" << YAML::Value << p.update_bytes_per_param;
  auto family_map = [&](const char* key, const std::map<Family, double>& m) {
    out << YAML::Key << key << YAML::Value << YAML::BeginMap;
    for (const auto& [f, v] : m) out << YAML::Key << std::string(to_string(f)) << YAML::Value << v;
    out << YAML::EndMap;
  };
  family_map("act_coeff", p.act_coeff);
  family_map("fusable_coeff", p.fusable_coeff);
  out << YAML::Key << "framework_overhead_bytes" << YAML::Value << p.framework_overhead_bytes;
  out << YAML::Key << "mem_headroom_frac" << YAML::Value << p.mem_headroom_frac;
  out << YAML::EndMap;
  return out.c_str();
}

inline PerfParams perf_params_from_yaml(const YAML::Node& doc, const std::string& where) {
  using namespace yamlio;
  const std::set<std::string> fields = {
      "perf_params_version", "mfu_base",          "default_mfu",
      "mult_compile",        "mult_kernels",      "unfused_overhead",
      "mult_tf32",           "default_mult_tf32", "ckpt_recompute_frac",
      "batch_halfsat_tokens", "comm_efficiency",  "host_efficiency",
      "update_bytes_per_param", "act_coeff",      "fusable_coeff",
      "framework_overhead_bytes", "mem_headroom_frac"};
  check_fields(doc, fields, fields, where);
  if (get<int>(doc, "perf_params_version", where) != kPerfParamsVersion)
    fail(where, "unsupported perf_params_version");
  PerfParams p;
  try {
    for (const auto& [gpu, fams] :
         doc["mfu_base"].as<std::map<std::string, std::map<std::string, double>>>())
      for (const auto& [f, v] : fams) p.mfu_base[{gpu, parse_enum<Family>(f)}] = v;
    p.mult_tf32 = doc["mult_tf32"].as<std::map<std::string, double>>();
    for (const auto& [f, v] : doc["act_coeff"].as<std::map<std::string, double>>())
      p.act_coeff[parse_enum<Family>(f)] = v;
    for (const auto& [f, v] : doc["fusable_coeff"].as<std::map<std::string, double>>())
      p.fusable_coeff[parse_enum<Family>(f)] = v;
  } catch (const YAML::Exception&) {
    fail(where, "malformed coefficient map");
  }
  p.default_mfu = get<double>(doc, "default_mfu", where);
  p.mult_compile = get<double>(doc, "mult_compile", where);
  p.mult_kernels = get<double>(doc, "mult_kernels", where);
  p.unfused_overhead = get<double>(doc, "unfused_overhead", where);
  p.default_mult_tf32 = get<double>(doc, "default_mult_tf32", where);
  p.ckpt_recompute_frac = get<double>(doc, "ckpt_recompute_frac", where);
  p.batch_halfsat_tokens = get<double>(doc, "batch_halfsat_tokens", where);
  p.comm_efficiency = get<double>(doc, "comm_efficiency", where);
  p.host_efficiency = get<double>(doc, "host_efficiency", where);
  p.update_bytes_per_param = get<double>(doc, "update_bytes_per_param", where);
  p.framework_overhead_bytes = get<double>(doc, "framework_overhead_bytes", where);
  p.mem_headroom_frac = get<double>(doc, "mem_headroom_frac", where);
  if (auto problems = check_params(p); !problems.empty()) fail(where, problems.front());
  return p;
}

inline PerfParams parse_perf_params(const std::string& text) {
  try {
    return perf_params_from_yaml(YAML::Load(text), "perf params");
  } catch (const YAML::Exception& e) {
    yamlio::fail("perf params", e.what());
  }
}

inline PerfParams load_perf_params(const std::filesystem::path& path) {
  return perf_params_from_yaml(yamlio::load_one(path), path.string());
}

inline void save_perf_params(const PerfParams& p, const std::filesystem::path& path) {
  yamlio::write_text(path, perf_params_yaml(p));
}

}  // namespace ptplan
