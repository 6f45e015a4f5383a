#include "catch_amalgamated.hpp"

#include <algorithm>
#include <random>

#include "ptplan/calibrate.hpp"
#include "ptplan/catalog_io.hpp"
#include "ptplan/fixtures.hpp"
#include "ptplan/shipped_params.hpp"
#include "support.hpp"

using namespace ptplan;
using Catch::Matchers::WithinRel;

namespace {

std::vector<ResultGrid> tables() { return {fixtures::optimal_days(), fixtures::naive_days()}; }

MeasurementRecord record(const char* model, const char* gpu, int n, TrainConfig c, double pass,
                         double update) {
  MeasurementRecord r;
  r.model_id = model;
  r.gpu_id = gpu;
  r.n_gpus = n;
  r.config = c;
  r.pass_seconds = pass;
  r.update_seconds = update;
  r.timestamp = "t";
  return r;
}

TrainConfig batch(std::int64_t micro, std::int64_t gas) {
  TrainConfig c;
  c.micro_batch = micro;
  c.grad_accum_steps = gas;
  return c;
}

}  // namespace

TEST_CASE("compiled step terms agree with the step model") {
  const auto cat = fixtures::catalog();
  const auto params = support::synthetic_truth();
  std::vector<Observation> obs;
  for (const auto& model : cat.models)
    for (const auto& m : cat.machines) obs.push_back({Quantity::optimal_days, {model.id, m.gpu.id, m.n_gpus}, {}, 1});
  const ParamSpace space = param_space_for(obs, cat);
  const auto v = space.read(params);
  std::mt19937_64 rng(3);
  for (const auto& model : cat.models)
    for (const auto& m : cat.machines)
      for (const auto& base : enumerate_configs(m.n_gpus, m.gpu.generation, model)) {
        TrainConfig c = base;
        c.micro_batch = std::int64_t{1} << (rng() % 4);
        c.grad_accum_steps = model.global_batch_size / (c.micro_batch * m.n_gpus);
        const auto e = estimate_step(model, c, m, params);
        const auto day = detail::compile_term(model, m, c, space, true, true, true,
                                              model.training_steps / kSecondsPerDay);
        CHECK_THAT(day.value(v, space), WithinRel(e.days, 1e-12));
        const auto pass = detail::compile_term(model, m, c, space, true, false, false, 1.0);
        CHECK_THAT(pass.value(v, space), WithinRel(e.pass_seconds, 1e-12));
        const auto upd = detail::compile_term(model, m, c, space, false, true, false, 1.0);
        CHECK_THAT(upd.value(v, space), WithinRel(e.update_seconds, 1e-12));
      }
}

TEST_CASE("parameter space reads back what it writes") {
  const auto cat = fixtures::catalog();
  const auto space = param_space_for(observations_from_grid(fixtures::optimal_days()), cat);
  CHECK(space.mfu_keys.size() == 4 * 5);
  CHECK(space.tf32_gpus.size() == 4);
  PerfParams p = support::synthetic_truth();
  const auto v = space.read(p);
  PerfParams q = default_params();
  space.write(v, q);
  CHECK(space.read(q) == v);
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto [lo, hi] = space.bounds(i);
    CHECK(lo < hi);
    CHECK_FALSE(space.name(i).empty());
  }
}

TEST_CASE("synthetic records recover the parameters") {
  const auto rt = support::synthetic_round_trip(fixtures::catalog());
  INFO("worst: " << rt.worst_name);
  CHECK(rt.fitted >= 25);
  CHECK(rt.worst <= 0.05);
}

TEST_CASE("a single record fits only its mfu") {
  const auto cat = fixtures::catalog();
  const auto truth = support::synthetic_truth();
  const auto& model = cat.model("pythia-410m");
  const auto& m = cat.machine("a100", 1);
  const TrainConfig c = batch(4, 256);
  const auto r = record("pythia-410m", "a100", 1, c, pass_time(model, c, m, truth),
                        update_time(model, c, m, truth));
  const auto result = calibrate(cat, {r}, {});
  CHECK(result.fitted == std::vector<std::string>{"mfu_base[a100,decoder]"});
  CHECK_FALSE(result.degenerate);
  const PerfParams start = default_params();
  CHECK(result.params.mult_compile == start.mult_compile);
  CHECK(result.params.batch_halfsat_tokens == start.batch_halfsat_tokens);
  CHECK(result.params.update_bytes_per_param == start.update_bytes_per_param);
  // With everything else frozen at the start values the pass time is matched.
  CHECK_THAT(pass_time(model, c, m, result.params), WithinRel(*r.pass_seconds, 1e-4));
}

TEST_CASE("record order does not change the fit") {
  const auto cat = fixtures::catalog();
  auto records = support::synthetic_records(cat, support::synthetic_truth());
  records.resize(60);
  const auto a = calibrate(cat, records, {});
  std::shuffle(records.begin(), records.end(), std::mt19937_64(11));
  const auto b = calibrate(cat, records, {});
  CHECK(a.params == b.params);
}

TEST_CASE("oom records carry no timing observations") {
  MeasurementRecord r;
  r.model_id = "pythia-1b";
  r.gpu_id = "a100";
  r.oom = true;
  r.config = batch(1024, 1);
  CHECK(observations_from_records({r}).empty());
  REQUIRE(feasibility_from_records({r}).size() == 1);
  CHECK_FALSE(feasibility_from_records({r}).front().feasible);
}

TEST_CASE("calibration needs observations") {
  try {
    calibrate(fixtures::catalog(), {}, {});
    FAIL("expected an error");
  } catch (const PlanError& e) {
    CHECK(e.code() == ErrorCode::degenerate_fit);
  }
}

TEST_CASE("more free parameters than observations is degenerate") {
  ResultGrid one;
  one.label = GridLabel::optimal;
  one.cells[{"pythia-410m", "a100", 4}] = 12.0;
  const auto r = calibrate(fixtures::catalog(), {}, {one});
  CHECK(r.observations == 1);
  CHECK(r.fitted.size() > 1);
  CHECK(r.degenerate);
}

TEST_CASE("fit to the published tables") {
  const auto cat = fixtures::catalog();
  const auto r = calibrate(cat, {}, tables());
  CHECK(r.rms <= 0.35);
  CHECK_FALSE(r.degenerate);
  std::size_t feasible = 0;
  for (const auto& g : tables())
    for (const auto& [k, d] : g.cells) feasible += d.has_value();
  CHECK(r.observations == feasible);
  CHECK(r.residuals.size() == feasible);
  CHECK(r.feasibility_mismatches <= 2);
  CHECK(check_params(r.params).empty());
  for (const auto& res : r.residuals) {
    REQUIRE(res.predicted);
    CHECK(*res.log_ratio == std::log(res.obs.observed / *res.predicted));
  }
}

TEST_CASE("shipped parameters are the fit to the published tables") {
  const auto r = calibrate(fixtures::catalog(), {}, tables());
  CHECK(perf_params_yaml(r.params) == perf_params_yaml(shipped_params()));
}

TEST_CASE("memory fit reproduces the published feasibility") {
  const auto cat = fixtures::catalog();
  std::vector<FeasibilityObservation> feas;
  for (const auto& g : tables()) {
    auto more = feasibility_from_grid(g);
    feas.insert(feas.end(), more.begin(), more.end());
  }
  const auto fit = fit_memory(feas, cat, default_params());
  CHECK(fit.observations == feas.size());
  std::size_t miss = 0;
  for (const auto& o : feas) miss += predicted_feasible(o, cat, fit.params) != o.feasible;
  CHECK(miss == fit.mismatches);
  CHECK(miss <= 2);
  // Published "---" cells for 6.9B on one GPU stay infeasible.
  for (const auto& o : feas)
    if (o.model_id == "pythia-6.9b" && o.n_gpus == 1) CHECK_FALSE(predicted_feasible(o, cat, fit.params));
}

TEST_CASE("unseen families take the per-GPU geometric mean") {
  PerfParams p;
  p.mfu_base[{"a100", Family::decoder}] = 0.2;
  p.mfu_base[{"a100", Family::encoder}] = 0.8;
  const auto q = fill_unseen_families(p, {"a100", "h100"});
  CHECK_THAT(q.mfu("a100", Family::vit), WithinRel(0.4, 1e-12));
  CHECK(q.mfu("a100", Family::decoder) == 0.2);
  CHECK(q.mfu_base.count({"h100", Family::vit}) == 0);
}

TEST_CASE("leave-one-model-out covers every feasible cell once") {
  const auto cat = fixtures::catalog();
  // Two models keep this quick; the held-out model never enters its own fit.
  std::vector<ResultGrid> small;
  for (const auto& g : tables()) {
    ResultGrid s;
    s.label = g.label;
    for (const auto& [k, d] : g.cells)
      if (k.model_id == "pythia-160m" || k.model_id == "pythia-410m") s.cells[k] = d;
    small.push_back(s);
  }
  const auto held = leave_one_model_out(cat, small);
  CHECK(held.size() == 64);
  const auto fit_410m = fill_unseen_families(
      calibrate(cat, {}, {without_model(small[0], "pythia-160m", false),
                          without_model(small[1], "pythia-160m", false)})
          .params,
      {"rtx3090", "a6000", "a100", "h100"});
  for (const auto& h : held) {
    REQUIRE(h.predicted);
    CHECK(*h.ratio() == *h.predicted / h.observed);
    if (h.cell.model_id == "pythia-160m" && h.label == GridLabel::optimal) {
      const auto o = optimize(cat.model("pythia-160m"), cat.machine(h.cell.gpu_id, h.cell.n_gpus),
                              fit_410m);
      CHECK(*h.predicted == o.best->estimate.days);
    }
  }
}
