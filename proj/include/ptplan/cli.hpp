#pragma once

// Command-line front end. dispatch() takes the argument vector (without the
// program name) and returns the process exit code: 0 ok, 2 infeasible,
// 3 invalid input, 4 degenerate calibration.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "ptplan/analytic.hpp"
#include "ptplan/calibrate.hpp"
#include "ptplan/catalog_io.hpp"
#include "ptplan/cost.hpp"
#include "ptplan/fixtures.hpp"
#include "ptplan/records_io.hpp"
#include "ptplan/report.hpp"
#include "ptplan/results_io.hpp"
#include "ptplan/search.hpp"
#include "ptplan/shipped_params.hpp"

namespace ptplan::cli {

inline constexpr const char* kCatalogEnv = "PTPLAN_CATALOG_DIR";

enum Exit : int { ok = 0, infeasible = 2, invalid = 3, degenerate = 4 };

inline int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::infeasible_config: return infeasible;
    case ErrorCode::degenerate_fit: return degenerate;
    default: return invalid;
  }
}

// Named payload files of one command; the first is also printed.
struct Output {
  std::vector<std::pair<std::string, std::string>> files;
  int code = ok;
};

struct Context {
  std::string catalog_dir;  // empty: bundled catalog
  std::string params_file;  // empty: shipped parameters
  std::string out_dir;
  std::string command;

  [[nodiscard]] Catalog catalog() const {
    std::string dir = catalog_dir;
    if (dir.empty())
      if (const char* env = std::getenv(kCatalogEnv); env && *env) dir = env;
    return dir.empty() ? fixtures::catalog() : load_catalog(dir);
  }
  [[nodiscard]] PerfParams params() const {
    return params_file.empty() ? shipped_params() : load_perf_params(params_file);
  }
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_outputs(const Context& ctx, const Output& out, const Catalog& catalog,
                          const PerfParams& params) {
  namespace fs = std::filesystem;
  fs::create_directories(ctx.out_dir);
  RunManifest m;
  m.command = ctx.command;
  m.catalog_versions = {{"catalog", catalog.version}, {"perf_params", kPerfParamsVersion}};
  m.perf_params_hash = hex64(fnv1a(perf_params_yaml(params)));
  m.timestamp = utc_timestamp();
  for (const auto& [name, text] : out.files) {
    const fs::path path = fs::path(ctx.out_dir) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw PlanError(ErrorCode::invalid_input, "cannot write " + path.string());
    f << text;
    m.output_paths.push_back(path.string());
  }
  std::ofstream f(fs::path(ctx.out_dir) / "manifest.json", std::ios::binary);
  f << to_json(m).dump(2) << "\n";
}

struct Cell {
  std::string model;
  std::string gpu;
  int n = 1;
};

inline void add_cell_options(CLI::App* app, Cell& c) {
  app->add_option("--model", c.model, "model id")->required();
  app->add_option("--gpu", c.gpu, "GPU id")->required();
  app->add_option("--n", c.n, "GPUs per machine")->required();
}

inline std::string analytic_text(const ModelSpec& model, const MachineSpec& machine,
                                 const AnalyticEstimate& e) {
  return model.id + " on " + machine.id() + "\n" + "total_flops           " +
         num(e.total_flops) + "\n" + "aggregate_throughput  " + num(e.aggregate_throughput) +
         " FLOP/s\n" + "days                  " + num(e.days, 3) + "\n";
}

inline std::vector<ResultGrid> bundled_grids() {
  return {fixtures::optimal_days(), fixtures::naive_days()};
}

inline ResultGrid read_grid(const std::string& path, GridLabel label) {
  std::ifstream in(path);
  if (!in) throw PlanError(ErrorCode::invalid_input, "cannot open " + path);
  return parse_result_grid(in, label, path);
}

inline bool is_pythia(const CellKey& k) { return k.model_id.rfind("pythia-", 0) == 0; }

inline std::string summary_json(const SpeedupSummary& s) {
  return nlohmann::json{{"mean", s.mean}, {"ci_low", s.ci_low}, {"ci_high", s.ci_high}, {"n", s.n}}
             .dump(2) +
         "\n";
}

inline std::string choice_row(const MachineChoice& c) {
  return c.machine.id() + "," + num(c.cost, 10) + "," + num(c.days, 10) + "\n";
}

inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pre-training feasibility, time and cost planner", "ptplan"};
  app.require_subcommand(1);
  Context ctx;
  app.add_option("--catalog", ctx.catalog_dir,
                 std::string("catalog directory (default: $") + kCatalogEnv + " or bundled)");
  app.add_option("--params", ctx.params_file, "PerfParams file (default: shipped)");
  app.add_option("--out", ctx.out_dir, "write result files and a manifest here");

  std::function<Output()> run;

  Cell cell;
  auto* analytic = app.add_subcommand("analytic", "FLOPs over peak throughput");
  add_cell_options(analytic, cell);
  analytic->callback([&] {
    run = [&] {
      const auto cat = ctx.catalog();
      const auto& model = cat.model(cell.model);
      const auto& machine = cat.machine(cell.gpu, cell.n);
      const auto e = analytic_days(model, machine);
      nlohmann::json j = {{"model_id", model.id},   {"gpu_id", cell.gpu},
                          {"n_gpus", cell.n},       {"total_flops", e.total_flops},
                          {"aggregate_throughput", e.aggregate_throughput},
                          {"days", e.days}};
      return Output{{{"analytic.txt", analytic_text(model, machine, e)},
                     {"analytic.json", j.dump(2) + "\n"}}};
    };
  });

  std::string format = "text";
  auto* search = app.add_subcommand("search", "optimal efficient-training configuration");
  add_cell_options(search, cell);
  search->add_option("--format", format, "text, json or csv")
      ->check(CLI::IsMember({"text", "json", "csv"}));
  search->callback([&] {
    run = [&] {
      const auto cat = ctx.catalog();
      const auto o = optimize(cat.model(cell.model), cat.machine(cell.gpu, cell.n), ctx.params());
      const CellKey key{cell.model, cell.gpu, cell.n};
      std::vector<std::pair<std::string, std::string>> files = {
          {"search.txt", search_outcome_text(o)},
          {"search.json", to_json(o, key).dump(2) + "\n"},
          {"search.csv", search_outcome_csv(o)}};
      if (format == "json") std::swap(files[0], files[1]);
      if (format == "csv") std::swap(files[0], files[2]);
      return Output{files, o.best ? ok : infeasible};
    };
  });

  auto* naive = app.add_subcommand("naive", "out-of-the-box settings");
  add_cell_options(naive, cell);
  naive->callback([&] {
    run = [&] {
      const auto cat = ctx.catalog();
      const auto& model = cat.model(cell.model);
      const auto& machine = cat.machine(cell.gpu, cell.n);
      const auto params = ctx.params();
      const auto entry = evaluate_config(model, machine, naive_config(), params);
      if (!entry.feasible())
        return Output{{{"naive.txt", model.id + " on " + machine.id() + ": infeasible (" +
                                         std::string(to_string(
                                             std::get<Infeasible>(entry.result).limiting)) +
                                         " memory)\n"}},
                      infeasible};
      const auto& e = entry.estimate();
      nlohmann::json j = {{"model_id", model.id}, {"gpu_id", cell.gpu}, {"n_gpus", cell.n},
                          {"config", to_json(entry.config)}, {"estimate", to_json(e)}};
      return Output{{{"naive.txt", model.id + " on " + machine.id() + ": " + num(e.days, 4) +
                                       " days (micro_batch " +
                                       std::to_string(entry.config.micro_batch) + ", gas " +
                                       std::to_string(entry.config.grad_accum_steps) + ")\n"},
                     {"naive.json", j.dump(2) + "\n"}}};
    };
  });

  std::vector<std::string> record_files;
  std::string optimal_csv, naive_csv;
  bool use_fixtures = false;
  auto* calib = app.add_subcommand("calibrate", "fit PerfParams to records and day tables");
  calib->add_option("--records", record_files, "MeasurementRecord JSONL files");
  calib->add_option("--optimal-grid", optimal_csv, "optimal-days ResultGrid CSV");
  calib->add_option("--naive-grid", naive_csv, "naive-days ResultGrid CSV");
  calib->add_flag("--fixtures", use_fixtures, "fit the bundled optimal and naive tables");
  calib->callback([&] {
    run = [&] {
      const auto cat = ctx.catalog();
      std::vector<MeasurementRecord> records;
      for (const auto& path : record_files) {
        std::ifstream in(path);
        if (!in) throw PlanError(ErrorCode::invalid_input, "cannot open " + path);
        auto more = parse_records(in, path);
        records.insert(records.end(), more.begin(), more.end());
      }
      std::vector<ResultGrid> grids;
      if (use_fixtures) grids = bundled_grids();
      if (!optimal_csv.empty()) grids.push_back(read_grid(optimal_csv, GridLabel::optimal));
      if (!naive_csv.empty()) grids.push_back(read_grid(naive_csv, GridLabel::naive));
      CalibrationOptions opt;
      opt.start = ctx.params_file.empty() ? default_params() : ctx.params();
      const auto r = calibrate(cat, records, grids, opt);
      std::string summary = "observations " + std::to_string(r.observations) + "\n" +
                            "residual_rms " + num(r.rms, 4) + "\n" +
                            "feasibility_mismatches " +
                            std::to_string(r.feasibility_mismatches) + "\n";
      for (const auto& f : r.frozen) summary += "frozen " + f + "\n";
      if (r.degenerate) summary += "degenerate: fewer observations than free parameters\n";
      return Output{{{"perf_params.yaml", perf_params_yaml(r.params) + "\n"},
                     {"residuals.csv", residuals_csv(r.residuals)},
                     {"calibration.txt", summary}},
                    r.degenerate ? degenerate : ok};
    };
  });

  auto* cost = app.add_subcommand("cost", "hardware cost-benefit");
  cost->require_subcommand(1);
  std::string model_id, source = "predicted";
  double budget = std::numeric_limits<double>::infinity();
  auto days_source = [&](const Catalog& cat, const ResultGrid& table) -> DaysSource {
    if (source == "table") return grid_days(table, model_id);
    const auto& model = cat.model(model_id);
    return [model, params = ctx.params()](const MachineSpec& m) -> std::optional<double> {
      auto o = optimize(model, m, params);
      if (!o.best) return std::nullopt;
      return o.best->estimate.days;
    };
  };
  auto* budget_cmd = cost->add_subcommand("budget", "fastest machine within a budget");
  budget_cmd->add_option("--model", model_id)->required();
  budget_cmd->add_option("--budget", budget, "USD (default: unbounded)");
  budget_cmd->add_option("--source", source, "predicted or table")
      ->check(CLI::IsMember({"predicted", "table"}));
  budget_cmd->callback([&] {
    run = [&] {
      const auto cat = ctx.catalog();
      (void)cat.model(model_id);
      const auto table = fixtures::optimal_days();
      const auto c = best_under_budget(budget, cat.machines, cat.prices, days_source(cat, table));
      if (!c) return Output{{{"budget.csv", "machine,cost_usd,days\n"}}, infeasible};
      return Output{{{"budget.csv", "machine,cost_usd,days\n" + choice_row(*c)}}};
    };
  });
  auto* pareto = cost->add_subcommand("pareto", "cost vs days frontier");
  pareto->add_option("--model", model_id)->required();
  pareto->add_option("--source", source, "predicted or table")
      ->check(CLI::IsMember({"predicted", "table"}));
  pareto->callback([&] {
    run = [&] {
      const auto cat = ctx.catalog();
      (void)cat.model(model_id);
      const auto table = fixtures::optimal_days();
      auto options = machine_options(cat.machines, cat.prices, days_source(cat, table));
      std::string csv_all = "machine,cost_usd,days\n", csv_front = csv_all;
      for (const auto& c : options) csv_all += choice_row(c);
      for (const auto& c : pareto_frontier(options, to_point)) csv_front += choice_row(c);
      return Output{{{"pareto.csv", csv_front}, {"machines.csv", csv_all}}};
    };
  });
  double days = 0;
  auto* experiment = cost->add_subcommand("experiment", "lifespan-normalized cost of a run");
  experiment->add_option("--gpu", cell.gpu)->required();
  experiment->add_option("--n", cell.n)->required();
  experiment->add_option("--days", days)->required();
  experiment->callback([&] {
    run = [&] {
      const auto cat = ctx.catalog();
      const auto& m = cat.machine(cell.gpu, cell.n);
      const double usd = experiment_cost(m, days, cat.prices);
      return Output{{{"experiment.csv", "machine,days,machine_cost_usd,experiment_cost_usd\n" +
                                            m.id() + "," + num(days, 10) + "," +
                                            num(machine_cost(m, cat.prices), 10) + "," +
                                            num(usd, 10) + "\n"}}};
    };
  });

  auto* report = app.add_subcommand("report", "aggregate statistics over result grids");
  report->require_subcommand(1);
  std::string scope = "pythia";
  auto grids_or_bundled = [&] {
    ResultGrid opt = optimal_csv.empty() ? fixtures::optimal_days()
                                         : read_grid(optimal_csv, GridLabel::optimal);
    ResultGrid nai = naive_csv.empty() ? fixtures::naive_days()
                                       : read_grid(naive_csv, GridLabel::naive);
    return std::pair(opt, nai);
  };
  auto scope_filter = [&](bool multi_gpu_only) -> CellFilter {
    return [&, multi_gpu_only](const CellKey& k) {
      return (scope == "all" || is_pythia(k)) && (!multi_gpu_only || k.n_gpus > 1);
    };
  };
  for (auto* sub : {report->add_subcommand("speedups", "naive over optimal days"),
                    report->add_subcommand("feasibility", "feasibility per model-GPU pair"),
                    report->add_subcommand("gpudays", "GPU-days against the original runs"),
                    report->add_subcommand("combos", "spread among memory-saving combinations")}) {
    sub->add_option("--optimal-grid", optimal_csv, "optimal-days ResultGrid CSV");
    sub->add_option("--naive-grid", naive_csv, "naive-days ResultGrid CSV");
    sub->add_option("--scope", scope, "pythia or all")->check(CLI::IsMember({"pythia", "all"}));
  }
  report->get_subcommand("speedups")->callback([&] {
    run = [&] {
      const auto [opt, nai] = grids_or_bundled();
      const auto s = speedup_summary(nai, opt, scope_filter(false));
      return Output{{{"speedups.txt", "mean " + num(s.mean, 4) + " ci [" + num(s.ci_low, 4) +
                                          ", " + num(s.ci_high, 4) + "] n " +
                                          std::to_string(s.n) + "\n"},
                     {"speedups.json", summary_json(s)},
                     {"long.csv", long_csv({opt, nai})}}};
    };
  });
  report->get_subcommand("feasibility")->callback([&] {
    run = [&] {
      const auto [opt, nai] = grids_or_bundled();
      const auto m = combination_feasibility(nai, opt, scope_filter(true));
      std::string csv = "model_id,gpu_id,class\n";
      for (const auto& [k, f] : m.cells)
        csv += k.model_id + "," + k.gpu_id + "," + std::string(to_string(f)) + "\n";
      const std::string total = std::to_string(m.cells.size());
      return Output{{{"feasibility.txt",
                      "naive infeasible " + std::to_string(m.naive_infeasible()) + " of " + total +
                          "\noptimal feasible " + std::to_string(m.optimal_feasible()) + " of " +
                          total + "\n"},
                     {"feasibility.csv", csv}}};
    };
  });
  report->get_subcommand("gpudays")->callback([&] {
    run = [&] {
      const auto [opt, nai] = grids_or_bundled();
      const auto c = gpu_days_comparison(fixtures::original_runs(), opt);
      std::string csv = "model_id,original_gpu_days,our_gpu_days,ratio\n";
      for (const auto& r : c.rows)
        csv += r.model_id + "," + num(r.original_gpu_days, 10) + "," + num(r.our_gpu_days, 10) +
               "," + num(r.ratio, 10) + "\n";
      return Output{{{"gpudays.txt", "mean ratio " + num(c.mean_ratio, 4) + " over " +
                                         std::to_string(c.rows.size()) + " models\n"},
                     {"gpudays.csv", csv}}};
    };
  });
  report->get_subcommand("combos")->callback([&] {
    run = [&] {
      const auto cat = ctx.catalog();
      const auto params = ctx.params();
      std::vector<ComboGroup> groups;
      for (const auto& model : cat.models) {
        if (scope == "pythia" && !is_pythia({model.id, "", 0})) continue;
        for (const auto& m : cat.machines) {
          auto g = combo_group(optimize(model, m, params));
          if (!g.feasible_days.empty()) groups.push_back(std::move(g));
        }
      }
      const auto s = combo_spread(groups);
      nlohmann::json j = {{"best_vs_median", s.best_vs_median},
                          {"best_vs_worst", s.best_vs_worst},
                          {"groups", s.groups}};
      j["median_vs_freelunch"] =
          s.median_vs_freelunch ? nlohmann::json(*s.median_vs_freelunch) : nlohmann::json(nullptr);
      return Output{{{"combos.txt",
                      "best_vs_median " + num(s.best_vs_median, 4) + "\nbest_vs_worst " +
                          num(s.best_vs_worst, 4) + "\nmedian_vs_freelunch " +
                          (s.median_vs_freelunch ? num(*s.median_vs_freelunch, 4) : "n/a") +
                          "\ngroups " + std::to_string(s.groups) + "\n"},
                     {"combos.json", j.dump(2) + "\n"}}};
    };
  });

  auto* fx = app.add_subcommand("fixtures", "bundled data");
  fx->require_subcommand(1);
  std::string export_dir;
  auto* fx_export = fx->add_subcommand("export", "write the bundled catalog and tables");
  fx_export->add_option("dir", export_dir, "target directory")->required();
  fx_export->callback([&] {
    run = [&] {
      namespace fs = std::filesystem;
      const auto cat = fixtures::catalog();
      const auto written = save_catalog(cat, fs::path(export_dir) / "catalog");
      const auto write = [&](const fs::path& p, const std::string& text) {
        std::ofstream f(p, std::ios::binary);
        if (!f) throw PlanError(ErrorCode::invalid_input, "cannot write " + p.string());
        f << text;
      };
      write(fs::path(export_dir) / "optimal_days.csv", result_grid_csv(fixtures::optimal_days()));
      write(fs::path(export_dir) / "naive_days.csv", result_grid_csv(fixtures::naive_days()));
      std::string runs = "model_id,n_gpus,days,hardware\n";
      for (const auto& r : fixtures::original_runs())
        runs += r.model_id + "," + (r.n_gpus ? std::to_string(*r.n_gpus) : "") + "," +
                (r.days ? num(*r.days) : "") + "," + r.hardware + "\n";
      write(fs::path(export_dir) / "original_runs.csv", runs);
      save_perf_params(shipped_params(), fs::path(export_dir) / "perf_params.yaml");
      std::string listing;
      for (const auto& p : written) listing += p.string() + "\n";
      for (const char* name :
           {"optimal_days.csv", "naive_days.csv", "original_runs.csv", "perf_params.yaml"})
        listing += (fs::path(export_dir) / name).string() + "\n";
      return Output{{{"exported.txt", listing}}};
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return invalid;
  }

  for (const auto& a : args) ctx.command += (ctx.command.empty() ? "" : " ") + a;
  try {
    const Output result = run();
    if (!result.files.empty()) out << result.files.front().second;
    if (!ctx.out_dir.empty()) write_outputs(ctx, result, ctx.catalog(), ctx.params());
    return result.code;
  } catch (const PlanError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return invalid;
  }
}

}  // namespace ptplan::cli
