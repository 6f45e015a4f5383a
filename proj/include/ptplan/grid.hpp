#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>

#include "ptplan/core.hpp"

namespace ptplan {

struct CellKey {
  std::string model_id;
  std::string gpu_id;
  int n_gpus = 1;

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

enum class GridLabel { naive, free_lunch_only, optimal, analytic };

inline std::string_view to_string(GridLabel l) {
  switch (l) {
    case GridLabel::naive: return "naive";
    case GridLabel::free_lunch_only: return "free_lunch_only";
    case GridLabel::optimal: return "optimal";
    case GridLabel::analytic: return "analytic";
  }
  return "?";
}

inline GridLabel parse_grid_label(std::string_view s) {
  for (auto l : {GridLabel::naive, GridLabel::free_lunch_only, GridLabel::optimal,
                 GridLabel::analytic})
    if (to_string(l) == s) return l;
  throw PlanError(ErrorCode::invalid_input, "unknown grid label '" + std::string(s) + "'");
}

// Training days per (model, gpu, n_gpus); nullopt marks an infeasible cell.
struct ResultGrid {
  GridLabel label = GridLabel::optimal;
  std::map<CellKey, std::optional<double>> cells;

  [[nodiscard]] std::optional<double> days(const CellKey& k) const {
    auto it = cells.find(k);
    return it == cells.end() ? std::nullopt : it->second;
  }
  [[nodiscard]] bool contains(const CellKey& k) const { return cells.count(k) != 0; }
};

}  // namespace ptplan
