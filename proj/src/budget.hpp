#pragma once

#include "rng.hpp"
#include "scene.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace bsplat {

// Densification events happen at iterations S, S+D, ..., up to E.
struct DensificationSchedule {
  std::int64_t start_iter = 500;
  std::int64_t end_iter = 15000;
  std::int64_t interval = 100;

  void validate() const;  // ConfigError unless E > S and D >= 1
  // 1-based event index if `iteration` is an event, else 0.
  std::int64_t event_at(std::int64_t iteration) const;
  std::int64_t iteration_of(std::int64_t k) const { return start_iter + (k - 1) * interval; }
};

// K = floor((E - S) / D) + 1.
std::int64_t event_count(const DensificationSchedule& schedule);

// Net growth allowed for a region at event k of K: floor of
// max(0, (target - current) / (K - k + 1)); the last event takes the whole gap.
std::int64_t quota(std::int64_t target, std::int64_t current, std::int64_t total_events, std::int64_t k);

struct TopQSelection {
  std::vector<std::size_t> indices;  // descending importance, ties by lower index
  std::int64_t deficit = 0;          // q - indices.size()
};

// The q most important primitives of `region` that were observed this round.
TopQSelection select_top_q(const Scene& scene, int region, std::int64_t q, std::span<const double> importance);

// Replaces one parent with `growth + 1` children, growth in [1, max_growth()].
class Densifier {
 public:
  virtual ~Densifier() = default;
  virtual int max_growth() const = 0;
  virtual std::vector<GaussianPrimitive> densify(const GaussianPrimitive& parent, int growth, Rng& rng) const = 0;
};

struct RegionEvent {
  int region = 0;
  std::int64_t target = 0;
  std::int64_t count_before = 0;  // at event start, after re-assignment
  std::int64_t pruned = 0;
  std::int64_t count_after_prune = 0;
  std::int64_t quota = 0;
  std::int64_t parents_requested = 0;
  std::int64_t parents_selected = 0;
  std::int64_t growth = 0;   // net primitives added
  std::int64_t deficit = 0;  // quota - growth, carried into the next event's gap
  std::int64_t count_after = 0;
  std::int64_t overshoot = 0;   // max(0, count_after - target)
  std::int64_t collapsed = 0;   // parents whose offsets were dropped to stay in-region
};

struct EventRecord {
  std::int64_t k = 0;
  std::int64_t iteration = -1;
  std::vector<RegionEvent> regions;
};

struct BudgetLedger {
  std::int64_t total_events = 0;
  std::vector<EventRecord> events;

  std::int64_t total_deficit(int region) const;
  // One row per (event, region).
  void write_csv(const std::filesystem::path& path) const;
  std::string to_csv() const;
};

class BudgetController {
 public:
  // Region targets are read from scene.partition at each event.
  explicit BudgetController(const DensificationSchedule& schedule);

  std::int64_t total_events() const { return total_events_; }
  const BudgetLedger& ledger() const { return ledger_; }

  // Prune-then-densify for event k (1-based): removes primitives where
  // prune_mask is true, recounts regions, grows each region by its quota
  // using the most important observed primitives, refreshes assignments and
  // resets statistics. `prune_mask` and `importance` index the scene as given.
  // If `source_index` is set it receives, per output primitive, the input
  // index it survived from, or -1 for a newly created child.
  const EventRecord& run_event(Scene& scene, std::int64_t k, const std::vector<bool>& prune_mask,
                               std::span<const double> importance, const Densifier& densifier, Rng& rng,
                               std::int64_t iteration = -1, std::vector<std::ptrdiff_t>* source_index = nullptr);

 private:
  DensificationSchedule schedule_;
  std::int64_t total_events_;
  BudgetLedger ledger_;
};

}  // namespace bsplat
