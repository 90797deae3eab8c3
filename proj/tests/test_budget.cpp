#include <doctest.h>

#include "budget.hpp"
#include "budget_sim.hpp"

#include <random>

using namespace bsplat;
using namespace bsplat::testing;

TEST_CASE("event count") {
  CHECK(event_count({500, 15000, 100}) == 146);
  CHECK(event_count({0, 7, 7}) == 2);
  CHECK(event_count({0, 6, 7}) == 1);
  CHECK_THROWS_AS(event_count({10, 10, 5}), ConfigError);
  CHECK_THROWS_AS(event_count({10, 20, 0}), ConfigError);
}

TEST_CASE("schedule maps iterations to events") {
  DensificationSchedule s{500, 15000, 100};
  CHECK(s.event_at(499) == 0);
  CHECK(s.event_at(500) == 1);
  CHECK(s.event_at(550) == 0);
  CHECK(s.event_at(15000) == 146);
  CHECK(s.event_at(15100) == 0);
  CHECK(s.iteration_of(146) == 15000);
}

TEST_CASE("quota floors and the last event closes the gap") {
  CHECK(quota(1000, 400, 10, 1) == 60);
  CHECK(quota(1000, 920, 10, 10) == 80);
  CHECK(quota(1000, 1000, 10, 3) == 0);
  CHECK(quota(1000, 1200, 10, 3) == 0);
  CHECK(quota(10, 4, 2, 1) == 3);
  CHECK(quota(7, 0, 3, 1) == 2);
  CHECK_THROWS_AS(quota(10, 0, 3, 4), InvalidArgument);
}

TEST_CASE("top-q selection is an order statistic with index tie-breaks") {
  Scene s = counted_scene(unit_square_partition(0, 0), 4, 0);
  mark_all_observed(s);
  const std::vector<double> imp{5, 1, 9, 3};
  auto sel = select_top_q(s, 1, 2, imp);
  CHECK(sel.indices == std::vector<std::size_t>{2, 0});
  CHECK(sel.deficit == 0);
  CHECK(select_top_q(s, 1, 0, imp).indices.empty());

  const std::vector<double> tied{1, 2, 2, 2};
  CHECK(select_top_q(s, 1, 2, tied).indices == std::vector<std::size_t>{1, 2});

  s.primitives[2].stats.observed = false;
  CHECK(select_top_q(s, 1, 2, imp).indices == std::vector<std::size_t>{0, 3});

  const std::vector<double> bad{1, std::nan(""), 0, 0};
  CHECK_THROWS_AS(select_top_q(s, 1, 1, bad), InvalidArgument);
}

TEST_CASE("scarcity returns every candidate and records the deficit") {
  Scene s = counted_scene(unit_square_partition(0, 0), 3, 2);
  mark_all_observed(s);
  const std::vector<double> imp{0.3, 0.1, 0.2, 7, 8};
  const auto sel = select_top_q(s, 1, 5, imp);
  // Exhaustive check: every region-1 index appears and nothing else does.
  std::vector<std::size_t> expected;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.assignment[i] == 1) expected.push_back(i);
  auto got = sel.indices;
  std::sort(got.begin(), got.end());
  CHECK(got == expected);
  CHECK(sel.deficit == 2);
}

TEST_CASE("region at target is untouched apart from statistics") {
  Scene s = counted_scene(unit_square_partition(3, 2), 3, 2);
  mark_all_observed(s);
  s.primitives[0].stats.sum_abs_pixel_grad = 4.0;
  const Scene before = s;
  BudgetController c({0, 10, 10});
  CopyDensifier d;
  Rng rng(1);
  c.run_event(s, 1, std::vector<bool>(s.size(), false), std::vector<double>(s.size(), 1.0), d, rng);
  REQUIRE(s.size() == before.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(s.primitives[i].mean == before.primitives[i].mean);
    CHECK_FALSE(s.primitives[i].stats.observed);
    CHECK(s.primitives[i].stats.sum_abs_pixel_grad == 0.0);
  }
}

TEST_CASE("odd quota downgrades the last parent to a single clone") {
  Scene s = counted_scene(unit_square_partition(10, 0), 4, 0);
  mark_all_observed(s);
  BudgetController c({0, 10, 10});  // K = 2
  CopyDensifier d;
  Rng rng(1);
  const auto& rec = c.run_event(s, 1, std::vector<bool>(4, false), std::vector<double>{4, 3, 2, 1}, d, rng);
  const auto& r = rec.regions.back();
  CHECK(r.region == 1);
  CHECK(r.quota == 3);
  CHECK(r.parents_requested == 2);
  CHECK(r.growth == 3);
  CHECK(r.count_after == 7);
  CHECK(s.size() == 7);
}

TEST_CASE("children are appended and the survivors keep their order") {
  Scene s = counted_scene(unit_square_partition(6, 0), 4, 0);
  for (std::size_t i = 0; i < 4; ++i) s.primitives[i].mean.z() = static_cast<double>(i);
  mark_all_observed(s);
  BudgetController c({0, 0 + 1, 1});  // K = 2
  CopyDensifier d;
  Rng rng(1);
  c.run_event(s, 2, std::vector<bool>{false, true, false, false}, std::vector<double>{0, 0, 5, 0}, d, rng);
  // Pruned 1; gap 6 - 3 = 3 at the last event: parent 2 grows by 2, parent 0 by 1.
  REQUIRE(s.size() == 6);
  CHECK(s.primitives[0].mean.z() == 3.0);
  CHECK(s.primitives[1].mean.z() == 2.0);
  CHECK(s.primitives[2].mean.z() == 2.0);
  CHECK(s.primitives[3].mean.z() == 2.0);
  CHECK(s.primitives[4].mean.z() == 0.0);
  CHECK(s.primitives[5].mean.z() == 0.0);
}

namespace {
// Pushes children outside the parent's region.
class EscapingDensifier : public Densifier {
 public:
  int max_growth() const override { return 2; }
  std::vector<GaussianPrimitive> densify(const GaussianPrimitive& parent, int growth, Rng&) const override {
    std::vector<GaussianPrimitive> out(static_cast<std::size_t>(growth) + 1, parent);
    out.front().mean.x() += 10.0;
    return out;
  }
};
}  // namespace

TEST_CASE("children leaving the region collapse onto the parent mean") {
  Scene s = counted_scene(unit_square_partition(5, 0), 3, 0);
  mark_all_observed(s);
  BudgetController c({0, 1, 1});
  EscapingDensifier d;
  Rng rng(1);
  const auto& rec = c.run_event(s, 2, std::vector<bool>(3, false), std::vector<double>(3, 1.0), d, rng);
  CHECK(rec.regions.back().collapsed == 1);
  for (const auto& g : s.primitives) CHECK(g.mean == Vec3(0.5, 0.5, 0.0));
  CHECK(region_counts(s).at(1) == 5);
}

TEST_CASE("hand trace against the integer oracle, event by event") {
  const DensificationSchedule sched{0, 40, 10};  // K = 5
  Scene s = counted_scene(unit_square_partition(37, 11), 6, 20);
  BudgetController c(sched);
  CopyDensifier d;
  Rng rng(3);
  std::mt19937_64 prune_rng(3);
  std::int64_t roi = 6, bg = 20;
  for (std::int64_t k = 1; k <= 5; ++k) {
    mark_all_observed(s);
    // Halve every region before each event except the last.
    const double fraction = k < 5 ? 0.5 : 0.0;
    const auto mask = adversarial_mask(s, fraction, prune_rng);
    c.run_event(s, k, mask, std::vector<double>(s.size(), 0.0), d, rng);
    roi = oracle_after_event(37, k < 5 ? roi - roi / 2 : roi, 5, k, 2);
    bg = oracle_after_event(11, k < 5 ? bg - bg / 2 : bg, 5, k, 2);
    const auto counts = region_counts(s);
    CHECK(counts.at(1) == roi);
    CHECK(counts.at(0) == bg);
  }
  CHECK(roi == 37);
  CHECK(bg == 11);
}

TEST_CASE("adversarial pruning still converges to targets") {
  for (std::int64_t K : {1, 10, 146}) {
    const DensificationSchedule sched{0, K == 1 ? 5 : (K - 1) * 10, 10};
    REQUIRE(event_count(sched) == K);
    Scene s = counted_scene(unit_square_partition(1200, 800), 50, 30);
    BudgetLedger ledger;
    // Half of every region is pruned before each event but the last.
    const auto counts = simulate(
        s, sched, [K](std::int64_t k) { return k < K ? 0.5 : 0.0; }, 7 + static_cast<std::uint64_t>(K), &ledger);
    if (K == 1) {
      // 50 parents can add at most 100.
      CHECK(counts.at(1) == 150);
      CHECK(ledger.total_deficit(1) == 1200 - 150);
      continue;
    }
    CHECK(counts.at(1) == 1200);
    CHECK(counts.at(0) == 800);
    CHECK(ledger.events.back().regions.back().deficit == 0);
    for (const auto& e : ledger.events)
      for (const auto& r : e.regions) CHECK(r.quota >= 0);
  }
}

TEST_CASE("random pruning up to half converges whenever the last event has candidates") {
  std::mt19937_64 rng(21);
  int converged = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::int64_t K = 1 + static_cast<std::int64_t>(rng() % 12);
    const DensificationSchedule sched{0, K == 1 ? 1 : (K - 1) * 3, 3};
    std::uniform_real_distribution<double> frac(0.0, 0.5);
    std::vector<double> fractions;
    for (std::int64_t k = 0; k < K; ++k) fractions.push_back(frac(rng));
    Scene s = counted_scene(unit_square_partition(200, 90), 40 + trial, 30);
    BudgetLedger ledger;
    const auto counts = simulate(
        s, sched, [&](std::int64_t k) { return fractions[static_cast<std::size_t>(k - 1)]; }, trial, &ledger);
    for (int region : {0, 1}) {
      const std::int64_t target = region == 1 ? 200 : 90;
      CHECK(counts.at(region) <= target);
      if (final_supply_sufficed(ledger, region)) {
        CHECK(counts.at(region) == target);
        converged += region;
      } else {
        CHECK(counts.at(region) + ledger.events.back().regions[static_cast<std::size_t>(region)].deficit == target);
      }
    }
  }
  CHECK(converged > 20);
}

TEST_CASE("terminal scarcity undershoots and reports, never exceeds") {
  const DensificationSchedule sched{0, 10, 10};  // K = 2
  Scene s = counted_scene(unit_square_partition(100, 0), 2, 0);
  BudgetLedger ledger;
  const auto counts = simulate(s, sched, 0.0, 1, &ledger);
  CHECK(counts.at(1) < 100);
  CHECK(ledger.total_deficit(1) > 0);
  CHECK(counts.at(1) + ledger.events.back().regions.back().deficit == 100);
}

TEST_CASE("changing one region's target only changes that region") {
  const DensificationSchedule sched{0, 50, 10};
  Scene a = counted_scene(unit_square_partition(40, 30), 10, 10);
  Scene b = counted_scene(unit_square_partition(60, 30), 10, 10);
  const auto ca = simulate(a, sched, 0.25, 5);
  const auto cb = simulate(b, sched, 0.25, 5);
  CHECK(ca.at(0) == cb.at(0));
  CHECK(ca.at(1) == 40);
  CHECK(cb.at(1) == 60);
}

TEST_CASE("net growth equals target minus initial plus pruned") {
  const DensificationSchedule sched{0, 90, 10};
  Scene s = counted_scene(unit_square_partition(300, 100), 20, 15);
  BudgetLedger ledger;
  simulate(s, sched, 0.3, 11, &ledger);
  std::map<int, std::int64_t> growth, pruned;
  for (const auto& e : ledger.events)
    for (const auto& r : e.regions) {
      growth[r.region] += r.growth;
      pruned[r.region] += r.pruned;
    }
  CHECK(growth[1] == 300 - 20 + pruned[1]);
  CHECK(growth[0] == 100 - 15 + pruned[0]);
}

TEST_CASE("ledger csv has a header and one row per event and region") {
  const DensificationSchedule sched{0, 20, 10};
  Scene s = counted_scene(unit_square_partition(10, 5), 2, 2);
  BudgetLedger ledger;
  simulate(s, sched, 0.0, 2, &ledger);
  const std::string csv = ledger.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 2);
  CHECK(csv.rfind("event,iteration,region,target", 0) == 0);
}

TEST_CASE("identical inputs give identical scenes") {
  const DensificationSchedule sched{0, 30, 10};
  Scene a = counted_scene(unit_square_partition(40, 20), 5, 5);
  Scene b = a;
  simulate(a, sched, 0.4, 9);
  simulate(b, sched, 0.4, 9);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.primitives[i].mean == b.primitives[i].mean);
}
