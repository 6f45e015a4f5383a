#include "catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ptplan/catalog_io.hpp"
#include "ptplan/fixtures.hpp"
#include "ptplan/records_io.hpp"
#include "ptplan/results_io.hpp"
#include "ptplan/shipped_params.hpp"

using namespace ptplan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ptplan_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const PlanError& e) {
    return e.code();
  }
  return ErrorCode::empty_selection;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

const char* kRecord =
    R"({"model_id":"pythia-1b","gpu_id":"a100","n_gpus":4,"config":{"compile":true,)"
    R"("custom_kernels":true,"tf32":false,"act_checkpointing":false,"sharding":"fsdp2",)"
    R"("offload":false,"micro_batch":16,"grad_accum_steps":16},"pass_seconds":2.5,)"
    R"("update_seconds":0.1,"oom":false,"timestamp":"2024-05-01T12:00:00Z"})";

}  // namespace

TEST_CASE("catalog directories round trip") {
  const auto dir = scratch("catalog");
  const Catalog original = fixtures::catalog();
  const auto paths = save_catalog(original, dir);
  CHECK(paths.size() == 5);
  const Catalog loaded = load_catalog(dir);
  CHECK(loaded.version == original.version);
  CHECK(models_yaml(loaded) == models_yaml(original));
  CHECK(gpus_yaml(loaded) == gpus_yaml(original));
  CHECK(machines_yaml(loaded) == machines_yaml(original));
  CHECK(prices_yaml(loaded.prices) == prices_yaml(original.prices));
  CHECK(loaded.provenance == original.provenance);
  REQUIRE(loaded.models.size() == original.models.size());
  for (std::size_t i = 0; i < loaded.models.size(); ++i) {
    const auto& a = loaded.models[i];
    const auto& b = original.models[i];
    CHECK(a.id == b.id);
    CHECK(a.param_count == b.param_count);
    CHECK(a.total_training_flops_override == b.total_training_flops_override);
    CHECK(a.supports_compile == b.supports_compile);
  }
  CHECK(loaded.machine("a6000", 4).intra_node_bw_bytes == 32e9);
  CHECK(loaded.prices.system_prices == original.prices.system_prices);
}

TEST_CASE("catalog loading rejects bad input") {
  const auto dir = scratch("bad_catalog");
  save_catalog(fixtures::catalog(), dir);

  spit(dir / "catalog.yaml", "catalog_version: 2\n");
  CHECK(message_of([&] { load_catalog(dir); }).find("unsupported catalog_version") !=
        std::string::npos);
  spit(dir / "catalog.yaml", "catalog_version: 1\n");

  const std::string models = slurp(dir / "models.yaml");
  spit(dir / "models.yaml", models + "---\nid: x\nfamily: decoder\ncolour: blue\n");
  const auto msg = message_of([&] { load_catalog(dir); });
  CHECK(msg.find("unknown field 'colour'") != std::string::npos);
  CHECK(msg.find("document 10") != std::string::npos);

  spit(dir / "models.yaml", models + "---\nid: vit\nfamily: wizard\n");
  CHECK(code_of([&] { load_catalog(dir); }) == ErrorCode::invalid_input);
  spit(dir / "models.yaml", models);

  const std::string machines = slurp(dir / "machines.yaml");
  spit(dir / "machines.yaml", machines + "---\ngpu: tpu\nn_gpus: 1\n");
  CHECK(code_of([&] { load_catalog(dir); }) == ErrorCode::invalid_input);
  spit(dir / "machines.yaml", machines);

  CHECK_NOTHROW(load_catalog(dir));
  fs::remove(dir / "prices.yaml");
  CHECK(message_of([&] { load_catalog(dir); }).find("cannot open") != std::string::npos);
}

TEST_CASE("perf params round trip exactly") {
  for (const PerfParams& p : {default_params(), shipped_params(), ideal_params()}) {
    if (!check_params(p).empty()) continue;
    CHECK(parse_perf_params(perf_params_yaml(p)) == p);
  }
  const auto dir = scratch("params");
  save_perf_params(shipped_params(), dir / "p.yaml");
  CHECK(load_perf_params(dir / "p.yaml") == shipped_params());
}

TEST_CASE("perf params reject unknown fields, old versions and bad values") {
  const std::string good = perf_params_yaml(default_params());
  CHECK(code_of([&] { parse_perf_params(good + "\nextra: 1"); }) == ErrorCode::invalid_input);
  std::string v2 = good;
  v2.replace(v2.find("perf_params_version: 1"), 22, "perf_params_version: 9");
  CHECK(message_of([&] { parse_perf_params(v2); }).find("perf_params_version") !=
        std::string::npos);
  std::string bad = good;
  bad.replace(bad.find("mult_compile: "), 14, "mult_compile: 0.5 #");
  CHECK(message_of([&] { parse_perf_params(bad); }).find("mult_compile must be >= 1") !=
        std::string::npos);
  CHECK(code_of([&] { parse_perf_params("{"); }) == ErrorCode::invalid_input);
}

TEST_CASE("measurement records parse and round trip") {
  std::istringstream in(std::string(kRecord) + "\n\n" + kRecord + "\n");
  const auto records = parse_records(in);
  REQUIRE(records.size() == 2);
  const auto& r = records[0];
  CHECK(r.model_id == "pythia-1b");
  CHECK(r.n_gpus == 4);
  CHECK(r.config.sharding == Sharding::fsdp2);
  CHECK(r.config.micro_batch == 16);
  CHECK(r.pass_seconds == 2.5);
  CHECK(r.update_seconds == 0.1);
  std::istringstream again(records_jsonl(records));
  const auto back = parse_records(again);
  REQUIRE(back.size() == 2);
  CHECK(records_jsonl(back) == records_jsonl(records));
}

TEST_CASE("oom records carry no timings") {
  MeasurementRecord r;
  r.model_id = "pythia-6.9b";
  r.gpu_id = "rtx3090";
  r.oom = true;
  r.timestamp = "t";
  const auto j = to_json(r);
  CHECK_FALSE(j.contains("pass_seconds"));
  std::istringstream in(j.dump() + "\n");
  CHECK(parse_records(in).front().oom);

  auto with_time = j;
  with_time["pass_seconds"] = 1.0;
  CHECK(code_of([&] { record_from_json(with_time, "x"); }) == ErrorCode::invalid_input);
}

TEST_CASE("record errors name the line") {
  const std::string rec = kRecord;
  auto line_error = [](const std::string& text) {
    std::istringstream in(text);
    return message_of([&] { parse_records(in, "runs.jsonl"); });
  };
  CHECK(line_error(rec + "\nnot json\n").find("runs.jsonl:2: malformed JSON") != std::string::npos);
  std::string neg = rec;
  neg.replace(neg.find("2.5"), 3, "-1");
  CHECK(line_error(neg).find("runs.jsonl:1") != std::string::npos);
  std::string extra = rec;
  extra.insert(1, R"("gpu_temp":70,)");
  CHECK(line_error(extra).find("unknown field 'gpu_temp'") != std::string::npos);
  std::string missing = rec;
  missing.replace(missing.find(R"("tf32":false,)"), 13, "");
  CHECK(line_error(missing).find("missing field 'tf32'") != std::string::npos);
  std::string sharding = rec;
  sharding.replace(sharding.find("fsdp2"), 5, "zero9");
  CHECK(!line_error(sharding).empty());
}

TEST_CASE("result grids round trip through CSV") {
  const auto g = fixtures::naive_days();
  const std::string text = result_grid_csv(g);
  CHECK(text.rfind("model_id,gpu_id,n_gpus,days\n", 0) == 0);
  CHECK(text.find("pythia-6.9b,a100,1,inf\n") != std::string::npos);
  std::istringstream in(text);
  const auto back = parse_result_grid(in, GridLabel::naive);
  CHECK(back.cells == g.cells);
  CHECK(result_grid_csv(back) == text);
}

TEST_CASE("result grid parse errors") {
  auto err = [](const std::string& text) {
    std::istringstream in(text);
    return message_of([&] { parse_result_grid(in, GridLabel::optimal, "t.csv"); });
  };
  CHECK(err("a,b\n").find("t.csv:1") != std::string::npos);
  CHECK(err("model_id,gpu_id,n_gpus,days\nm,g,2\n").find("t.csv:2: expected 4 columns") !=
        std::string::npos);
  CHECK(err("model_id,gpu_id,n_gpus,days\nm,g,x,3\n").find("t.csv:2") != std::string::npos);
  CHECK(err("model_id,gpu_id,n_gpus,days\nm,g,2,-3\n").find("positive") != std::string::npos);
  std::istringstream crlf("model_id,gpu_id,n_gpus,days\r\nm,g,2,3.5\r\n");
  CHECK(parse_result_grid(crlf, GridLabel::optimal).days({"m", "g", 2}) == 3.5);
}

TEST_CASE("config hashes are stable and distinguish configurations") {
  TrainConfig a;
  a.micro_batch = 4;
  a.grad_accum_steps = 8;
  TrainConfig b = a;
  b.grad_accum_steps = 16;
  CHECK(config_hash(Quantity::naive_days, a) == config_hash(Quantity::naive_days, a));
  CHECK(config_hash(Quantity::naive_days, a) != config_hash(Quantity::naive_days, b));
  CHECK(config_hash(Quantity::naive_days, a) != config_hash(Quantity::optimal_days, a));
  CHECK(config_hash(Quantity::naive_days, a).size() == 16);
  // FNV-1a of the empty string.
  CHECK(hex64(fnv1a("")) == "cbf29ce484222325");
}

TEST_CASE("search outcomes serialize") {
  const auto cat = fixtures::catalog();
  const CellKey cell{"pythia-1b", "a100", 4};
  const auto o = optimize(cat.model(cell.model_id), cat.machine("a100", 4), shipped_params());
  const auto j = to_json(o, cell);
  CHECK(j["table"].size() == 22);
  CHECK(j["best"]["estimate"]["days"] == o.best->estimate.days);
  CHECK(j["naive"]["days"] == o.naive->days);
  const auto csv_text = search_outcome_csv(o);
  CHECK(std::count(csv_text.begin(), csv_text.end(), '\n') == 23);
  const auto text = search_outcome_text(o);
  CHECK(text.find(" * ") != std::string::npos);
  CHECK(text.find("best: " + o.best->config.key()) != std::string::npos);

  const auto none = optimize(cat.model("pythia-6.9b"), cat.machine("rtx3090", 1), shipped_params());
  CHECK(to_json(none, {"pythia-6.9b", "rtx3090", 1})["best"].is_null());
  CHECK(search_outcome_csv(none).find("out-of-gpu-memory") != std::string::npos);
  CHECK(search_outcome_text(none).find("best: infeasible") != std::string::npos);
}

TEST_CASE("long format and residuals") {
  const auto long_text = long_csv({fixtures::optimal_days(), fixtures::naive_days()});
  CHECK(std::count(long_text.begin(), long_text.end(), '\n') == 1 + 2 * 144);
  CHECK(long_text.find("naive,vit,h100,8,12\n") != std::string::npos);

  Observation obs{Quantity::optimal_days, {"m", "g", 2}, {}, 10};
  Residual r{obs, TrainConfig{}, 5.0, std::log(2.0)};
  const auto text = residuals_csv({r});
  CHECK(text.rfind("model_id,gpu_id,n_gpus,config_hash,observed,predicted,log_ratio\n", 0) == 0);
  CHECK(text.find("m,g,2," + config_hash(Quantity::optimal_days, TrainConfig{}) + ",10,5,0.69314") !=
        std::string::npos);
}

TEST_CASE("numbers format identically every time") {
  CHECK(num(1.0 / 3.0) == "0.333333");
  CHECK(num(1.0 / 3.0, 10) == "0.3333333333");
  CHECK(num(12) == "12");
}
