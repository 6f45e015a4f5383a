#pragma once

// Bundled catalogs and published result tables. Architecture dimensions
// (hidden_size, num_layers, num_heads) come from the public model configs and
// are tagged "external"; parameter counts are nominal sizes.

#include <array>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ptplan/catalog.hpp"
#include "ptplan/grid.hpp"

namespace ptplan::fixtures {

inline constexpr std::array kGpuIds = {"rtx3090", "a6000", "a100", "h100"};
inline constexpr std::array kGpuCounts = {1, 2, 4, 8};
inline constexpr std::array kPythiaIds = {"pythia-160m", "pythia-410m", "pythia-1b",
                                          "pythia-2.8b", "pythia-6.9b"};

namespace detail {

inline ModelSpec pythia(const char* id, double params, std::int64_t hidden, std::int64_t layers,
                        std::int64_t heads, Precision prec, double flops) {
  ModelSpec m;
  m.id = id;
  m.family = Family::decoder;
  m.param_count = static_cast<std::int64_t>(params);
  m.seq_len = 2049;
  m.vocab_size = 50000;
  m.hidden_size = hidden;
  m.num_layers = layers;
  m.num_heads = heads;
  m.global_batch_size = 1024;
  m.training_steps = 143000;
  m.precision = prec;
  m.optimizer = Optimizer::adam;
  m.total_training_flops_override = flops;
  return m;
}

inline GpuSpec gpu(const char* id, double mem_gib, double peak, Generation gen, double price,
                   double bw) {
  return GpuSpec{id, mem_gib * kGiB, peak, gen, price, bw};
}

}  // namespace detail

inline std::vector<ModelSpec> models() {
  using detail::pythia;
  std::vector<ModelSpec> out = {
      pythia("pythia-160m", 160e6, 768, 12, 12, Precision::fp16_mixed, 2.9e20),
      pythia("pythia-410m", 410e6, 1024, 24, 16, Precision::fp16_mixed, 8.2e20),
      pythia("pythia-1b", 1.0e9, 2048, 16, 8, Precision::bf16_mixed, 1.9e21),
      pythia("pythia-2.8b", 2.8e9, 2560, 32, 32, Precision::fp16_mixed, 5.4e21),
      pythia("pythia-6.9b", 6.9e9, 4096, 32, 32, Precision::fp16_mixed, 1.3e22),
  };

  ModelSpec roberta;
  roberta.id = "roberta";
  roberta.family = Family::encoder;
  roberta.param_count = 360'000'000;
  roberta.seq_len = 512;
  roberta.vocab_size = 50000;
  roberta.hidden_size = 1024;
  roberta.num_layers = 24;
  roberta.num_heads = 16;
  roberta.global_batch_size = 8192;
  roberta.training_steps = 500000;
  roberta.precision = Precision::fp16_mixed;
  roberta.optimizer = Optimizer::adam;
  roberta.supports_custom_kernels = false;
  roberta.total_training_flops_override = 4.8e21;
  out.push_back(roberta);

  ModelSpec mamba;
  mamba.id = "mamba";
  mamba.family = Family::ssm;
  mamba.param_count = 2'800'000'000;
  mamba.seq_len = 4096;
  mamba.vocab_size = 50000;
  mamba.hidden_size = 2560;
  mamba.num_layers = 64;
  mamba.num_heads = 0;
  mamba.global_batch_size = 128;
  mamba.training_steps = 572000;
  mamba.precision = Precision::bf16_mixed;
  mamba.optimizer = Optimizer::adamw;
  mamba.supports_compile = false;
  mamba.total_training_flops_override = 8.7e20;
  out.push_back(mamba);

  ModelSpec convnext;
  convnext.id = "convnext";
  convnext.family = Family::conv;
  convnext.param_count = 390'000'000;
  convnext.image_size = 224;
  convnext.num_classes = 22000;
  convnext.hidden_size = 2048;
  convnext.num_layers = 36;
  convnext.global_batch_size = 4096;
  convnext.training_steps = 312000;
  convnext.precision = Precision::fp32;
  convnext.optimizer = Optimizer::adamw;
  convnext.supports_custom_kernels = false;
  convnext.total_training_flops_override = 1.4e21;
  out.push_back(convnext);

  ModelSpec vit;
  vit.id = "vit";
  vit.family = Family::vit;
  vit.param_count = 330'000'000;
  vit.seq_len = 256;
  vit.image_size = 224;
  vit.num_classes = 22000;
  vit.hidden_size = 1024;
  vit.num_layers = 24;
  vit.num_heads = 16;
  vit.global_batch_size = 4096;
  vit.training_steps = 312000;
  vit.precision = Precision::fp32;
  vit.optimizer = Optimizer::adam;
  vit.total_training_flops_override = 4.7e20;
  out.push_back(vit);
  return out;
}

inline std::vector<GpuSpec> gpus() {
  using detail::gpu;
  return {
      gpu("rtx3090", 24, 7.1e13, Generation::ampere, 1300, 936e9),
      gpu("a6000", 48, 1.6e14, Generation::ampere, 4800, 768e9),
      gpu("a100", 80, 3.1e14, Generation::ampere, 19000, 2039e9),
      gpu("h100", 80, 7.6e14, Generation::hopper, 30000, 3350e9),
  };
}

inline PriceCatalog prices() {
  PriceCatalog p;
  for (const auto& g : gpus()) p.gpu_prices[g.id] = g.unit_price_usd;
  p.system_prices = {{1, 1020.41}, {2, 1456.29}, {4, 7482.00}, {8, 10673.00}};
  p.lifespan_days = 1825;
  return p;
}

// Per-GPU-pair link bandwidth (one direction) and host link bandwidth.
inline double intra_node_bandwidth(const std::string& gpu_id, int n_gpus) {
  if (gpu_id == "a100") return 300e9;   // NVSwitch
  if (gpu_id == "h100") return 450e9;   // NVSwitch
  if (gpu_id == "a6000") return n_gpus <= 2 ? 56.25e9 : 32e9;  // NVLink pairs, PCIe beyond
  return 32e9;                          // PCIe 4.0 x16
}

inline std::vector<MachineSpec> machines() {
  const auto p = prices();
  std::vector<MachineSpec> out;
  for (const auto& g : gpus()) {
    for (int n : kGpuCounts) {
      MachineSpec m;
      m.gpu = g;
      m.n_gpus = n;
      m.system_price_usd = p.system_prices.at(n);
      m.host_ram_bytes = n * 64.0 * kGiB;
      m.intra_node_bw_bytes = intra_node_bandwidth(g.id, n);
      m.host_device_bw_bytes = g.id == "h100" ? 64e9 : 32e9;
      out.push_back(m);
    }
  }
  return out;
}

inline Catalog catalog() {
  Catalog c;
  c.version = 1;
  c.models = models();
  c.gpus = gpus();
  c.machines = machines();
  c.prices = prices();
  for (const auto& m : c.models) {
    c.provenance[m.id] = {{"param_count", "nominal"},
                          {"hidden_size", "external"},
                          {"num_layers", "external"},
                          {"num_heads", "external"}};
    if (m.vocab_size > 0) c.provenance[m.id]["vocab_size"] = "nominal";
    if (m.num_classes > 0) c.provenance[m.id]["num_classes"] = "nominal";
  }
  for (const auto& m : c.machines)
    c.provenance[m.id()] = {{"intra_node_bw_bytes", "external"},
                            {"host_device_bw_bytes", "external"}};
  for (const auto& g : c.gpus) c.provenance[g.id] = {{"mem_bandwidth_bytes", "external"}};
  return c;
}

namespace detail {

inline constexpr std::array<const char*, 9> kRowModels = {
    "pythia-160m", "pythia-410m", "pythia-1b", "pythia-2.8b", "pythia-6.9b",
    "roberta",     "mamba",       "convnext",  "vit"};

// Rows of 16 values ordered rtx3090 x{1,2,4,8}, a6000, a100, h100; "-" is
// infeasible.
inline ResultGrid parse_rows(GridLabel label, const char* text) {
  ResultGrid g;
  g.label = label;
  std::istringstream in(text);
  for (const char* model : kRowModels) {
    for (const char* gpu : kGpuIds) {
      for (int n : kGpuCounts) {
        std::string tok;
        in >> tok;
        g.cells[{model, gpu, n}] = tok == "-" ? std::nullopt : std::optional(std::stod(tok));
      }
    }
  }
  return g;
}

}  // namespace detail

// Empirical days with the best discovered settings.
inline ResultGrid optimal_days() {
  return detail::parse_rows(GridLabel::optimal, R"(
41 18 6 3 29 15 7 4 14 7 3 2 7 4 2 1
151 69 35 19 105 49 26 15 50 25 12 6 25 13 6 3
370 109 77 30 152 72 40 22 72 36 18 9 34 16 8 4
1515 1040 485 177 934 292 150 88 342 148 71 35 166 77 31 15
- 7157 1769 1250 - 1110 819 264 - 488 170 77 - 220 69 32
1070 559 266 170 826 423 213 114 394 197 100 50 175 88 44 23
1992 1217 444 304 1414 483 259 193 500 263 133 67 277 145 74 37
154 133 49 27 168 68 33 22 59 30 16 8 31 16 8 5
156 87 45 29 111 56 31 16 53 26 14 7 27 14 7 4
)");
}

// Empirical days with out-of-the-box settings.
inline ResultGrid naive_days() {
  return detail::parse_rows(GridLabel::naive, R"(
125 92 46 20 124 63 35 19 71 36 18 9 42 21 11 5
430 431 226 69 421 213 150 64 232 117 59 30 137 69 35 18
- - - - 326 238 82 41 160 81 41 21 90 45 23 12
- - - - - - - - - - - - - - - -
- - - - - - - - - - - - - - - -
1560 1095 418 420 1375 1125 489 185 685 345 174 87 399 201 101 51
- - - - - - - - - - - - - - - -
240 196 60 30 233 166 68 30 236 119 60 31 - 49 25 13
255 218 63 33 243 158 72 31 246 124 62 32 93 47 24 12
)");
}

// GPUs and days used for the original training runs; Mamba is unknown.
struct OriginalRun {
  std::string model_id;
  std::optional<int> n_gpus;
  std::optional<double> days;
  std::string hardware;
};

inline std::vector<OriginalRun> original_runs() {
  return {
      {"pythia-160m", 32, 1, "A100 (40 GB)"}, {"pythia-410m", 32, 3, "A100 (40 GB)"},
      {"pythia-1b", 64, 3, "A100 (40 GB)"},   {"pythia-2.8b", 64, 9, "A100 (40 GB)"},
      {"pythia-6.9b", 128, 10, "A100 (40 GB)"}, {"roberta", 1024, 1, "V100 (32 GB)"},
      {"mamba", std::nullopt, std::nullopt, "A100 (80 GB)"},
      {"convnext", 128, 3, "V100 (32 GB)"},   {"vit", 8, 30, "TPUv3-core"},
  };
}

}  // namespace ptplan::fixtures
