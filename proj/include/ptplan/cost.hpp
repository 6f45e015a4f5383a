#pragma once

// Hardware cost-benefit: machine prices, lifespan-normalized experiment cost,
// budget-constrained machine choice and the (cost, days) Pareto frontier.

#include <algorithm>
#include <functional>
#include <optional>
#include <vector>

#include "ptplan/catalog.hpp"
#include "ptplan/core.hpp"
#include "ptplan/grid.hpp"
#include "ptplan/search.hpp"

namespace ptplan {

inline double machine_cost(const MachineSpec& machine, const PriceCatalog& catalog) {
  auto g = catalog.gpu_prices.find(machine.gpu.id);
  if (g == catalog.gpu_prices.end()) throw PlanError(ErrorCode::unknown_gpu, machine.gpu.id);
  auto s = catalog.system_prices.find(machine.n_gpus);
  if (s == catalog.system_prices.end())
    throw PlanError(ErrorCode::unknown_tier, std::to_string(machine.n_gpus) + " GPUs");
  return machine.n_gpus * g->second + s->second;
}

inline double experiment_cost(const MachineSpec& machine, double days,
                              const PriceCatalog& catalog) {
  if (days < 0) throw PlanError(ErrorCode::invalid_input, "days must be non-negative");
  return machine_cost(machine, catalog) * days / static_cast<double>(catalog.lifespan_days);
}

struct MachineChoice {
  MachineSpec machine;
  double days = 0;
  double cost = 0;
};

// Training days for a machine, or nullopt when nothing fits.
using DaysSource = std::function<std::optional<double>(const MachineSpec&)>;

// Days from the model: the optimal searched configuration.
inline DaysSource predicted_days(const ModelSpec& model, const PerfParams& params) {
  return [&model, &params](const MachineSpec& m) -> std::optional<double> {
    auto out = optimize(model, m, params);
    if (!out.best) return std::nullopt;
    return out.best->estimate.days;
  };
}

// Days looked up in a result grid for one model.
inline DaysSource grid_days(const ResultGrid& grid, const std::string& model_id) {
  return [&grid, model_id](const MachineSpec& m) {
    return grid.days({model_id, m.gpu.id, m.n_gpus});
  };
}

// Every machine with a price and a feasible time, as (machine, days, cost).
inline std::vector<MachineChoice> machine_options(const std::vector<MachineSpec>& machines,
                                                  const PriceCatalog& catalog,
                                                  const DaysSource& days_of) {
  std::vector<MachineChoice> out;
  for (const auto& m : machines) {
    auto d = days_of(m);
    if (!d) continue;
    out.push_back({m, *d, machine_cost(m, catalog)});
  }
  return out;
}

// Fastest machine affordable within the budget; ties go to the cheaper one.
inline std::optional<MachineChoice> best_under_budget(double budget,
                                                      const std::vector<MachineSpec>& machines,
                                                      const PriceCatalog& catalog,
                                                      const DaysSource& days_of) {
  if (!(budget > 0)) throw PlanError(ErrorCode::invalid_input, "budget must be positive");
  std::optional<MachineChoice> best;
  for (auto& c : machine_options(machines, catalog, days_of)) {
    if (c.cost > budget) continue;
    if (!best || c.days < best->days || (c.days == best->days && c.cost < best->cost))
      best = c;
  }
  return best;
}

inline std::optional<MachineChoice> best_under_budget(const ModelSpec& model, double budget,
                                                      const PriceCatalog& catalog,
                                                      const std::vector<MachineSpec>& machines,
                                                      const PerfParams& params) {
  return best_under_budget(budget, machines, catalog, predicted_days(model, params));
}

struct CostPoint {
  double cost = 0;
  double days = 0;
  friend bool operator==(const CostPoint&, const CostPoint&) = default;
};

inline bool dominates(const CostPoint& a, const CostPoint& b) {
  return a.cost <= b.cost && a.days <= b.days && (a.cost < b.cost || a.days < b.days);
}

// Non-dominated points sorted by cost (then days). Exact duplicates are kept
// once each since neither dominates the other.
template <typename Point, typename Proj = std::identity>
std::vector<Point> pareto_frontier(std::vector<Point> points, Proj proj = {}) {
  std::vector<Point> out;
  for (const auto& p : points) {
    const CostPoint cp = proj(p);
    bool dominated = std::any_of(points.begin(), points.end(),
                                 [&](const Point& q) { return dominates(proj(q), cp); });
    if (!dominated) out.push_back(p);
  }
  std::stable_sort(out.begin(), out.end(), [&](const Point& a, const Point& b) {
    const CostPoint ca = proj(a), cb = proj(b);
    return ca.cost != cb.cost ? ca.cost < cb.cost : ca.days < cb.days;
  });
  return out;
}

inline CostPoint to_point(const MachineChoice& c) { return {c.cost, c.days}; }

}  // namespace ptplan
