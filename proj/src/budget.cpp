#include "budget.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace bsplat {

void DensificationSchedule::validate() const {
  if (end_iter <= start_iter) {
    throw ConfigError("densification schedule needs end_iter > start_iter (got S=" + std::to_string(start_iter) +
                      ", E=" + std::to_string(end_iter) + ")");
  }
  if (interval < 1) throw ConfigError("densification interval must be >= 1");
  if (start_iter < 0) throw ConfigError("densification start_iter must be >= 0");
}

std::int64_t DensificationSchedule::event_at(std::int64_t iteration) const {
  if (iteration < start_iter || iteration > end_iter) return 0;
  if ((iteration - start_iter) % interval != 0) return 0;
  return (iteration - start_iter) / interval + 1;
}

std::int64_t event_count(const DensificationSchedule& schedule) {
  schedule.validate();
  return (schedule.end_iter - schedule.start_iter) / schedule.interval + 1;
}

std::int64_t quota(std::int64_t target, std::int64_t current, std::int64_t total_events, std::int64_t k) {
  if (k < 1 || k > total_events) {
    throw InvalidArgument("event index " + std::to_string(k) + " outside [1, " + std::to_string(total_events) + "]");
  }
  const std::int64_t gap = target - current;
  if (gap <= 0) return 0;
  // Non-negative integer division is the floor.
  return gap / (total_events - k + 1);
}

TopQSelection select_top_q(const Scene& scene, int region, std::int64_t q, std::span<const double> importance) {
  if (importance.size() != scene.primitives.size()) {
    throw InvalidArgument("importance has " + std::to_string(importance.size()) + " entries for " +
                          std::to_string(scene.primitives.size()) + " primitives");
  }
  TopQSelection out;
  if (q <= 0) return out;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    if (scene.assignment[i] != region || !scene.primitives[i].stats.observed) continue;
    if (!std::isfinite(importance[i])) {
      throw InvalidArgument("importance of primitive " + std::to_string(i) + " is not finite");
    }
    candidates.push_back(i);
  }
  const auto take = static_cast<std::size_t>(std::min<std::int64_t>(q, static_cast<std::int64_t>(candidates.size())));
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (importance[a] != importance[b]) return importance[a] > importance[b];
                      return a < b;
                    });
  candidates.resize(take);
  out.indices = std::move(candidates);
  out.deficit = q - static_cast<std::int64_t>(take);
  return out;
}

std::int64_t BudgetLedger::total_deficit(int region) const {
  std::int64_t sum = 0;
  for (const auto& e : events) {
    for (const auto& r : e.regions) {
      if (r.region == region) sum += r.deficit;
    }
  }
  return sum;
}

std::string BudgetLedger::to_csv() const {
  std::ostringstream out;
  out << "event,iteration,region,target,count_before,pruned,count_after_prune,quota,parents_requested,"
         "parents_selected,growth,deficit,count_after,overshoot,collapsed\n";
  for (const auto& e : events) {
    for (const auto& r : e.regions) {
      out << e.k << ',' << e.iteration << ',' << r.region << ',' << r.target << ',' << r.count_before << ','
          << r.pruned << ',' << r.count_after_prune << ',' << r.quota << ',' << r.parents_requested << ','
          << r.parents_selected << ',' << r.growth << ',' << r.deficit << ',' << r.count_after << ','
          << r.overshoot << ',' << r.collapsed << '\n';
    }
  }
  return out.str();
}

void BudgetLedger::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'", 0);
  out << to_csv();
}

BudgetController::BudgetController(const DensificationSchedule& schedule)
    : schedule_(schedule), total_events_(event_count(schedule)) {
  ledger_.total_events = total_events_;
}

const EventRecord& BudgetController::run_event(Scene& scene, std::int64_t k, const std::vector<bool>& prune_mask,
                                               std::span<const double> importance, const Densifier& densifier,
                                               Rng& rng, std::int64_t iteration,
                                               std::vector<std::ptrdiff_t>* source_index) {
  if (k < 1 || k > total_events_) {
    throw InvalidArgument("event index " + std::to_string(k) + " outside [1, " + std::to_string(total_events_) + "]");
  }
  const std::size_t n = scene.primitives.size();
  if (prune_mask.size() != n || importance.size() != n) {
    throw InvalidArgument("prune mask / importance size does not match the scene");
  }
  const int max_growth = densifier.max_growth();
  if (max_growth < 1) throw InvalidArgument("densifier must add at least one primitive per parent");

  assign_to_polygons(scene);
  EventRecord record;
  record.k = k;
  record.iteration = iteration;
  std::map<int, RegionEvent> regions;
  for (int id : scene.partition.region_ids()) {
    RegionEvent r;
    r.region = id;
    r.target = scene.partition.target(id);
    regions[id] = r;
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = regions[scene.assignment[i]];
    ++r.count_before;
    if (prune_mask[i]) ++r.pruned;
  }

  // Prune.
  Scene kept;
  kept.partition = scene.partition;
  std::vector<double> kept_importance;
  std::vector<std::ptrdiff_t> kept_source;
  kept.primitives.reserve(n);
  kept_importance.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (prune_mask[i]) continue;
    kept.primitives.push_back(std::move(scene.primitives[i]));
    kept_importance.push_back(importance[i]);
    kept_source.push_back(static_cast<std::ptrdiff_t>(i));
  }
  assign_to_polygons(kept);
  for (const auto& [id, count] : region_counts(kept)) regions[id].count_after_prune = count;

  // Densify, region by region in ascending id.
  std::vector<bool> selected(kept.primitives.size(), false);
  std::vector<GaussianPrimitive> children;
  for (auto& [id, r] : regions) {
    r.quota = quota(r.target, r.count_after_prune, total_events_, k);
    r.parents_requested = (r.quota + max_growth - 1) / max_growth;
    const TopQSelection sel = select_top_q(kept, id, r.parents_requested, kept_importance);
    r.parents_selected = static_cast<std::int64_t>(sel.indices.size());
    std::int64_t remaining = r.quota;
    for (std::size_t s = 0; s < sel.indices.size(); ++s) {
      const std::size_t parent_index = sel.indices[s];
      const int growth = static_cast<int>(std::min<std::int64_t>(max_growth, remaining));
      if (growth <= 0) break;
      const GaussianPrimitive& parent = kept.primitives[parent_index];
      std::vector<GaussianPrimitive> brood = densifier.densify(parent, growth, rng);
      if (static_cast<int>(brood.size()) != growth + 1) {
        throw InvalidArgument("densifier returned " + std::to_string(brood.size()) + " children for growth " +
                              std::to_string(growth));
      }
      bool leaves_region = false;
      for (const auto& c : brood) leaves_region |= kept.partition.region_of(c.mean.head<2>()) != id;
      if (leaves_region) {
        for (auto& c : brood) c.mean = parent.mean;
        ++r.collapsed;
      }
      for (auto& c : brood) children.push_back(std::move(c));
      selected[parent_index] = true;
      remaining -= growth;
      r.growth += growth;
    }
    r.deficit = r.quota - r.growth;
  }

  scene.primitives.clear();
  if (source_index) source_index->clear();
  for (std::size_t i = 0; i < kept.primitives.size(); ++i) {
    if (selected[i]) continue;
    scene.primitives.push_back(std::move(kept.primitives[i]));
    if (source_index) source_index->push_back(kept_source[i]);
  }
  for (auto& c : children) scene.primitives.push_back(std::move(c));
  if (source_index) source_index->resize(scene.primitives.size(), -1);
  for (auto& g : scene.primitives) g.stats.reset();
  assign_to_polygons(scene);
  for (const auto& [id, count] : region_counts(scene)) {
    auto& r = regions[id];
    r.count_after = count;
    r.overshoot = std::max<std::int64_t>(0, count - r.target);
  }

  for (auto& [id, r] : regions) record.regions.push_back(r);
  ledger_.events.push_back(std::move(record));
  return ledger_.events.back();
}

}  // namespace bsplat
