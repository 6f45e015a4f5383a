#include "catch_amalgamated.hpp"

#include <set>

#include "ptplan/fixtures.hpp"
#include "ptplan/params.hpp"
#include "ptplan/search.hpp"
#include "ptplan/shipped_params.hpp"

using namespace ptplan;

TEST_CASE("configuration counts are 12 on one GPU and 22 otherwise") {
  const auto cat = fixtures::catalog();
  for (const auto& model : cat.models)
    for (Generation g : {Generation::pre_ampere, Generation::ampere, Generation::hopper}) {
      CHECK(enumerate_configs(1, g, model).size() == 12);
      for (int n : {2, 4, 8}) CHECK(enumerate_configs(n, g, model).size() == 22);
    }
}

TEST_CASE("enumerated configurations are valid and distinct") {
  const auto cat = fixtures::catalog();
  for (const auto& model : cat.models)
    for (const auto& m : cat.machines) {
      std::set<std::string> keys;
      for (const auto& c : enumerate_configs(m.n_gpus, m.gpu.generation, model)) {
        CHECK(validate(model, m, c).empty());
        keys.insert(c.key());
      }
      CHECK(keys.size() == (m.n_gpus == 1 ? 12u : 22u));
    }
}

TEST_CASE("compile appears exactly where sharding allows it") {
  // On 2 GPUs: none x ckpt (2) + fsdp2 and fsdp3 x ckpt x offload (8).
  const auto cat = fixtures::catalog();
  for (const auto& model : cat.models) {
    std::size_t compiled = 0;
    for (const auto& c : enumerate_configs(2, Generation::ampere, model)) compiled += c.compile;
    CHECK(compiled == (model.supports_compile ? 10u : 0u));
  }
}

TEST_CASE("free-lunch flags follow capabilities") {
  const auto cat = fixtures::catalog();
  for (const auto& c : enumerate_configs(4, Generation::pre_ampere, cat.model("roberta"))) {
    CHECK_FALSE(c.tf32);
    CHECK_FALSE(c.custom_kernels);
  }
  for (const auto& c : enumerate_configs(4, Generation::hopper, cat.model("vit"))) {
    CHECK(c.tf32);
    CHECK(c.custom_kernels);
  }
}

TEST_CASE("divisor-compatible micro-batch") {
  CHECK(divisor_compatible_micro(64, 1024, 4) == 64);
  CHECK(divisor_compatible_micro(512, 1024, 4) == 256);
  CHECK(divisor_compatible_micro(8, 96, 8) == 4);
  CHECK(divisor_compatible_micro(1, 10, 4) == 0);
  CHECK(divisor_compatible_micro(0, 1024, 4) == 0);
}

TEST_CASE("evaluated entries fill the batch split") {
  const auto cat = fixtures::catalog();
  const auto& model = cat.model("pythia-410m");
  const auto& m = cat.machine("a100", 4);
  const auto e = evaluate_config(model, m, naive_config(), shipped_params());
  REQUIRE(e.feasible());
  CHECK(e.config.micro_batch * e.config.grad_accum_steps * 4 == 1024);
  CHECK(e.config.micro_batch ==
        max_micro_batch(model, naive_config(), m, shipped_params()));
}

TEST_CASE("best index prefers fewer memory-saving methods on ties") {
  StepEstimate five;
  five.days = 5;
  TrainConfig heavy;
  heavy.act_checkpointing = true;
  heavy.sharding = Sharding::fsdp2;
  TrainConfig light;
  light.sharding = Sharding::fsdp2;
  std::vector<SearchEntry> t = {{heavy, five}, {light, five}, {TrainConfig{}, Infeasible{}}};
  CHECK(best_index(t) == 1u);
  t = {{light, five}, {light, five}};
  CHECK(best_index(t) == 0u);
  CHECK_FALSE(best_index({{TrainConfig{}, Infeasible{}}}).has_value());
}

TEST_CASE("Pythia-6.9B never fits one GPU") {
  const auto cat = fixtures::catalog();
  for (const auto& gpu : cat.gpus) {
    const auto o = optimize(cat.model("pythia-6.9b"), cat.machine(gpu.id, 1), shipped_params());
    CHECK_FALSE(o.best.has_value());
    CHECK_FALSE(o.naive.has_value());
    CHECK(o.table.size() == 12);
    for (const auto& e : o.table) {
      REQUIRE_FALSE(e.feasible());
      const auto limiting = std::get<Infeasible>(e.result).limiting;
      CHECK(limiting != Limiting::none);
      if (!e.config.offload) CHECK(limiting == Limiting::gpu);
    }
  }
}

TEST_CASE("Pythia-2.8B is feasible on every multi-GPU machine") {
  const auto cat = fixtures::catalog();
  for (const auto& m : cat.machines)
    if (m.n_gpus > 1) CHECK(optimize(cat.model("pythia-2.8b"), m, shipped_params()).best);
}

TEST_CASE("naive Pythia-1B does not fit one RTX 3090") {
  const auto cat = fixtures::catalog();
  CHECK_FALSE(naive_estimate(cat.model("pythia-1b"), cat.machine("rtx3090", 1), shipped_params()));
}

TEST_CASE("search minimizes over its table") {
  const auto cat = fixtures::catalog();
  const auto& p = shipped_params();
  for (const auto& model : cat.models)
    for (const auto& m : cat.machines) {
      const auto o = optimize(model, m, p);
      if (!o.best) continue;
      for (const auto& e : o.table)
        if (e.feasible()) CHECK(o.best->estimate.days <= e.estimate().days);
      if (const auto* fl = free_lunch_entry(o); fl && fl->feasible()) {
        CHECK(o.best->estimate.days <= fl->estimate().days);
        // Restricted to the free-lunch entry, the best is that entry.
        std::vector<SearchEntry> only = {*fl};
        CHECK(best_index(only) == 0u);
      }
      if (o.naive) CHECK(o.naive->days >= o.best->estimate.days);
    }
}
