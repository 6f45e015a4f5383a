#pragma once

// Aggregate statistics over result grids: average speedups with bootstrap
// confidence intervals, spread across configuration combinations, GPU-day
// comparisons against original training runs, and feasibility matrices.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "ptplan/core.hpp"
#include "ptplan/fixtures.hpp"
#include "ptplan/grid.hpp"
#include "ptplan/search.hpp"

namespace ptplan {

using CellFilter = std::function<bool(const CellKey&)>;

inline bool any_cell(const CellKey&) { return true; }

struct SpeedupSummary {
  double mean = 0;
  double ci_low = 0;
  double ci_high = 0;
  std::size_t n = 0;
};

struct BootstrapOptions {
  int resamples = 10000;
  std::uint64_t seed = 0;
  double confidence = 0.95;
};

// Percentile bootstrap of the arithmetic mean.
inline std::pair<double, double> bootstrap_mean_ci(const std::vector<double>& values,
                                                   const BootstrapOptions& opt = {}) {
  const std::size_t n = values.size();
  std::mt19937_64 rng(opt.seed);
  std::vector<double> means(static_cast<std::size_t>(opt.resamples));
  for (auto& m : means) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += values[rng() % n];
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - opt.confidence) / 2.0;
  auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::lround(q * static_cast<double>(means.size() - 1)));
    return means[idx];
  };
  return {at(alpha), at(1.0 - alpha)};
}

// Ratios base/better over cells feasible in both grids and accepted by the
// filter. Cells are visited in key order, so the result does not depend on
// how the grids were filled.
inline SpeedupSummary speedup_summary(const ResultGrid& base, const ResultGrid& better,
                                      const CellFilter& filter = any_cell,
                                      const BootstrapOptions& opt = {}) {
  std::vector<double> ratios;
  for (const auto& [key, days] : base.cells) {
    if (!days || !filter(key)) continue;
    const auto other = better.days(key);
    if (!other) continue;
    ratios.push_back(*days / *other);
  }
  if (ratios.empty()) throw PlanError(ErrorCode::empty_selection, "no cell feasible in both grids");
  SpeedupSummary s;
  s.n = ratios.size();
  s.mean = std::accumulate(ratios.begin(), ratios.end(), 0.0) / static_cast<double>(s.n);
  std::tie(s.ci_low, s.ci_high) = bootstrap_mean_ci(ratios, opt);
  return s;
}

// ---------------------------------------------------------------------------
// Spread among memory-saving combinations
// ---------------------------------------------------------------------------

struct ComboGroup {
  std::vector<double> feasible_days;  // one entry per feasible combination
  std::optional<double> free_lunch_days;
};

struct ComboSpread {
  double best_vs_median = 0;
  double best_vs_worst = 0;
  std::optional<double> median_vs_freelunch;
  std::size_t groups = 0;
};

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline ComboSpread combo_spread(const std::vector<ComboGroup>& groups) {
  ComboSpread s;
  double fl_sum = 0;
  std::size_t fl_n = 0;
  for (const auto& g : groups) {
    if (g.feasible_days.empty())
      throw PlanError(ErrorCode::invalid_input, "combo group without a feasible combination");
    const auto [lo, hi] = std::minmax_element(g.feasible_days.begin(), g.feasible_days.end());
    const double med = median(g.feasible_days);
    s.best_vs_median += med / *lo;
    s.best_vs_worst += *hi / *lo;
    if (g.free_lunch_days) {
      fl_sum += med / *g.free_lunch_days;
      ++fl_n;
    }
  }
  s.groups = groups.size();
  if (s.groups > 0) {
    s.best_vs_median /= static_cast<double>(s.groups);
    s.best_vs_worst /= static_cast<double>(s.groups);
  }
  if (fl_n > 0) s.median_vs_freelunch = fl_sum / static_cast<double>(fl_n);
  return s;
}

inline ComboGroup combo_group(const SearchOutcome& outcome) {
  ComboGroup g;
  for (const auto& e : outcome.table)
    if (e.feasible()) g.feasible_days.push_back(e.estimate().days);
  if (const auto* fl = free_lunch_entry(outcome); fl && fl->feasible())
    g.free_lunch_days = fl->estimate().days;
  return g;
}

// ---------------------------------------------------------------------------
// GPU-days against the original runs
// ---------------------------------------------------------------------------

struct GpuDaysRow {
  std::string model_id;
  double original_gpu_days = 0;
  double our_gpu_days = 0;
  double ratio = 0;
};

struct GpuDaysComparison {
  std::vector<GpuDaysRow> rows;
  double mean_ratio = 0;
};

inline GpuDaysComparison gpu_days_comparison(const std::vector<fixtures::OriginalRun>& originals,
                                             const ResultGrid& ours,
                                             const std::string& gpu_id = "a100", int n_gpus = 8) {
  GpuDaysComparison c;
  for (const auto& o : originals) {
    if (!o.n_gpus || !o.days) continue;
    const auto d = ours.days({o.model_id, gpu_id, n_gpus});
    if (!d) continue;
    GpuDaysRow r;
    r.model_id = o.model_id;
    r.original_gpu_days = *o.n_gpus * *o.days;
    r.our_gpu_days = n_gpus * *d;
    r.ratio = r.original_gpu_days / r.our_gpu_days;
    c.rows.push_back(r);
  }
  if (c.rows.empty()) throw PlanError(ErrorCode::empty_selection, "no model in both tables");
  for (const auto& r : c.rows) c.mean_ratio += r.ratio;
  c.mean_ratio /= static_cast<double>(c.rows.size());
  return c;
}

// ---------------------------------------------------------------------------
// Feasibility
// ---------------------------------------------------------------------------

enum class Feasibility { naive_feasible, optimal_only, infeasible };

inline std::string_view to_string(Feasibility f) {
  switch (f) {
    case Feasibility::naive_feasible: return "naive-feasible";
    case Feasibility::optimal_only: return "optimal-only";
    case Feasibility::infeasible: return "infeasible";
  }
  return "?";
}

struct FeasibilityMatrix {
  std::map<CellKey, Feasibility> cells;
  std::size_t naive_feasible = 0;
  std::size_t optimal_only = 0;
  std::size_t infeasible = 0;

  [[nodiscard]] std::size_t naive_infeasible() const { return optimal_only + infeasible; }
  [[nodiscard]] std::size_t optimal_feasible() const { return naive_feasible + optimal_only; }
};

inline Feasibility classify(bool naive_ok, bool optimal_ok) {
  if (naive_ok) return Feasibility::naive_feasible;
  return optimal_ok ? Feasibility::optimal_only : Feasibility::infeasible;
}

inline void count_into(FeasibilityMatrix& m, Feasibility f) {
  switch (f) {
    case Feasibility::naive_feasible: ++m.naive_feasible; break;
    case Feasibility::optimal_only: ++m.optimal_only; break;
    case Feasibility::infeasible: ++m.infeasible; break;
  }
}

// Per-cell classification over the cells of the naive grid.
inline FeasibilityMatrix feasibility_matrix(const ResultGrid& naive, const ResultGrid& optimal,
                                            const CellFilter& filter = any_cell) {
  FeasibilityMatrix m;
  for (const auto& [key, days] : naive.cells) {
    if (!filter(key)) continue;
    const auto f = classify(days.has_value(), optimal.days(key).has_value());
    m.cells[key] = f;
    count_into(m, f);
  }
  return m;
}

// One class per (model, gpu) combination: feasible if any accepted GPU count
// is. Keys carry n_gpus = 0.
inline FeasibilityMatrix combination_feasibility(const ResultGrid& naive,
                                                 const ResultGrid& optimal,
                                                 const CellFilter& filter = any_cell) {
  std::map<CellKey, std::pair<bool, bool>> any;
  for (const auto& [key, days] : naive.cells) {
    if (!filter(key)) continue;
    auto& [n_ok, o_ok] = any[{key.model_id, key.gpu_id, 0}];
    n_ok = n_ok || days.has_value();
    o_ok = o_ok || optimal.days(key).has_value();
  }
  FeasibilityMatrix m;
  for (const auto& [key, flags] : any) {
    const auto f = classify(flags.first, flags.second);
    m.cells[key] = f;
    count_into(m, f);
  }
  return m;
}

}  // namespace ptplan
