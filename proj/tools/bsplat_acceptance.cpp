// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Exit status is 0 only when every selected criterion passes.

#include "budget.hpp"
#include "budget_sim.hpp"
#include "dataset_metrics.hpp"
#include "fixtures.hpp"
#include "fusion.hpp"
#include "ply.hpp"
#include "suite.hpp"
#include "support.hpp"
#include "trainer.hpp"
#include "workflows.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace bsplat;
using namespace bsplat::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void expect(bool ok, const std::string& what) {
    if (!ok) pass = false;
    details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(const std::string& what) { details.push_back("     " + what); }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}
std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string file_bytes(const Scene& s) {
  const fs::path p = fs::temp_directory_path() / "bsplat_acceptance.ply";
  save_scene(s, p);
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  fs::remove(p);
  return ss.str();
}

// ---- 1 ----
Outcome budget_determinism() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset data = fixtures::quad_dataset();
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainConfig c = fixtures::quad_config();
    c.seed = seed;
    Scene s = train(initial_scene(data, c), data.primary, {}, c).scene;
    assign_to_polygons(s);
    const auto counts = region_counts(s);
    const std::int64_t roi = counts.count(1) ? counts.at(1) : 0;
    o.expect(s.size() == 2000 && roi == 1200, "seed " + std::to_string(seed) + ": " + std::to_string(s.size()) +
                                                  " primitives, " + std::to_string(roi) + " in the ROI polygon");
  }
  const double secs = seconds_since(t0);
  o.expect(secs < 300.0, fmt("runtime %.1f s (< 300 s)", secs));
  return o;
}

// ---- 2 ----

// Independent count model: items are tracked one by one, the per-event
// quota is found by search rather than division.
std::vector<std::int64_t> brute_force_counts(std::int64_t target, std::int64_t initial, std::int64_t K,
                                             const std::vector<bool>& halve) {
  std::vector<int> items(static_cast<std::size_t>(initial), 1);
  std::vector<std::int64_t> trace;
  for (std::int64_t k = 1; k <= K; ++k) {
    if (halve[static_cast<std::size_t>(k - 1)]) items.resize(items.size() - items.size() / 2);
    const auto n = static_cast<std::int64_t>(items.size());
    const std::int64_t remaining = K - k + 1;
    std::int64_t q = 0;
    while (n < target && (q + 1) * remaining <= target - n) ++q;
    std::int64_t added = 0;
    for (std::int64_t parent = 0; parent < n && added < q; ++parent) {
      for (int child = 0; child < 2 && added < q; ++child) {
        items.push_back(1);
        ++added;
      }
    }
    trace.push_back(static_cast<std::int64_t>(items.size()));
  }
  return trace;
}

Outcome quota_algebra() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::int64_t K : {1, 10, 146}) {
    const DensificationSchedule sched{0, K == 1 ? 5 : (K - 1) * 10, 10};
    Scene s = counted_scene(unit_square_partition(1200, 800), 400, 300);
    BudgetLedger ledger;
    const auto counts = simulate(
        s, sched, [K](std::int64_t k) { return k < K ? 0.5 : 0.0; }, 7 + static_cast<std::uint64_t>(K), &ledger);
    const bool supply = final_supply_sufficed(ledger, 1) && final_supply_sufficed(ledger, 0);
    o.expect(supply && counts.at(1) == 1200 && counts.at(0) == 800,
             "K=" + std::to_string(K) + " with 50% pruning per event: ROI " + std::to_string(counts.at(1)) +
                 "/1200, background " + std::to_string(counts.at(0)) + "/800");
  }
  std::mt19937_64 rng(2024);
  int random_runs = 0, random_bad = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::int64_t K = 1 + static_cast<std::int64_t>(rng() % 20);
    const DensificationSchedule sched{0, K == 1 ? 1 : (K - 1) * 3, 3};
    std::uniform_real_distribution<double> frac(0.0, 0.5);
    std::vector<double> f;
    for (std::int64_t k = 0; k < K; ++k) f.push_back(frac(rng));
    Scene s = counted_scene(unit_square_partition(150 + trial, 60), 30 + trial, 25);
    BudgetLedger ledger;
    const auto counts = simulate(
        s, sched, [&](std::int64_t k) { return f[static_cast<std::size_t>(k - 1)]; }, 100 + trial, &ledger);
    for (int region : {0, 1}) {
      if (!final_supply_sufficed(ledger, region)) continue;
      ++random_runs;
      random_bad += counts.at(region) != (region == 1 ? 150 + trial : 60);
    }
  }
  o.expect(random_bad == 0, "random pruning up to 50%: " + std::to_string(random_runs - random_bad) + "/" +
                                std::to_string(random_runs) + " regions with candidates hit their target");

  std::int64_t cases = 0, mismatches = 0, converged = 0, sufficient = 0;
  for (std::int64_t K = 1; K <= 5; ++K) {
    const DensificationSchedule sched{0, K == 1 ? 1 : (K - 1) * 2, 2};
    for (std::int64_t target = 0; target <= 20; ++target) {
      for (std::int64_t initial = 1; initial <= 6; ++initial) {
        for (int pattern = 0; pattern < (1 << K); ++pattern) {
          std::vector<bool> halve;
          for (std::int64_t k = 0; k < K; ++k) halve.push_back((pattern >> k) & 1);
          const auto expected = brute_force_counts(target, initial, K, halve);
          Scene s = counted_scene(unit_square_partition(target, 0), initial, 0);
          BudgetController c(sched);
          CopyDensifier d;
          Rng r(static_cast<std::uint64_t>(pattern));
          std::mt19937_64 prune_rng(static_cast<std::uint64_t>(target));
          bool same = true;
          for (std::int64_t k = 1; k <= K; ++k) {
            mark_all_observed(s);
            const auto mask = adversarial_mask(s, halve[static_cast<std::size_t>(k - 1)] ? 0.5 : 0.0, prune_rng);
            c.run_event(s, k, mask, std::vector<double>(s.size(), 1.0), d, r);
            const auto counts = region_counts(s);
            const std::int64_t got = counts.count(1) ? counts.at(1) : 0;
            same = same && got == expected[static_cast<std::size_t>(k - 1)];
          }
          ++cases;
          mismatches += !same;
          // growth-only: a region already above target stays there
          const auto& last = c.ledger().events.back().regions;
          const bool below = std::all_of(last.begin(), last.end(),
                                         [](const RegionEvent& e) { return e.count_after_prune <= e.target; });
          if (below && final_supply_sufficed(c.ledger(), 1)) {
            ++sufficient;
            converged += expected.back() == target;
          }
        }
      }
    }
  }
  o.expect(mismatches == 0, "exhaustive small cases (targets 0..20, K 1..5, initial 1..6, all halving patterns): " +
                                std::to_string(cases - mismatches) + "/" + std::to_string(cases) +
                                " event traces match the brute-force model");
  o.expect(converged == sufficient, "brute-force model reaches the target in " + std::to_string(converged) + "/" +
                                        std::to_string(sufficient) + " cases at or below target with final-event candidates");
  const double secs = seconds_since(t0);
  o.expect(secs < 10.0, fmt("runtime %.2f s (< 10 s)", secs));
  return o;
}

// ---- 3 ----
Outcome gradient_correctness() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(31337);
  const CameraView view = origin_camera(32, 32);
  double worst[5] = {0, 0, 0, 0, 0};
  int entries[5] = {0, 0, 0, 0, 0}, skipped[5] = {0, 0, 0, 0, 0};
  for (int trial = 0; trial < 20; ++trial) {
    const Scene s = random_scene(rng, 5);
    const Image target = random_image(rng, 32, 32);
    const Vec3 bg(0.1, 0.2, 0.3);
    RenderOutput fwd = render(s, view, bg);
    Image grad;
    l2_loss(fwd.image, target, &grad);
    const GradientBuffer g = backward(s, view, fwd, grad);
    for (int c = 0; c < 5; ++c) {
      const FdComparison cmp = compare_with_finite_differences(s, view, target, bg, g, kAllParamClasses[c], 1e-4);
      worst[c] = std::max(worst[c], cmp.relative_error());
      entries[c] += cmp.entries;
      skipped[c] += cmp.skipped;
    }
  }
  for (int c = 0; c < 5; ++c) {
    o.expect(worst[c] <= 1e-3 && entries[c] > 0,
             std::string(param_name(kAllParamClasses[c])) + fmt(": worst relative error %.3g over ", worst[c]) +
                 std::to_string(entries[c]) + " coordinates (" + std::to_string(skipped[c]) +
                 " straddling a footprint change skipped)");
  }
  const double secs = seconds_since(t0);
  o.expect(secs < 120.0, fmt("runtime %.1f s (< 120 s)", secs));
  return o;
}

// ---- 4 ----
Outcome compositing_conservation() {
  Outcome o;
  std::mt19937_64 rng(4);
  double worst = 0.0;
  std::int64_t pixels = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Scene s = random_scene(rng, 5 + trial % 30);
    for (auto& g : s.primitives) g.set_rgb(Vec3::Ones());
    const RenderOutput out = render(s, origin_camera(32, 32), Vec3::Zero());
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        worst = std::max(worst, std::abs(out.image.at(x, y, 0) + out.transmittance[y * 32 + x] - 1.0));
        ++pixels;
      }
    }
  }
  o.expect(worst <= 1e-6, fmt("max |sum alpha_i T_i + T_final - 1| = %.3g over ", worst) + std::to_string(pixels) +
                              " pixels of 50 random scenes");
  return o;
}

// ---- 5 ----
CameraView injected_view(const Scene& anchor, const std::string& id, const RadiometricTransform& t) {
  CameraView v = fixtures::quad_camera(id, Vec3(0.1, -0.2, 2.4));
  v.source = 1;
  v.image = t.apply(render(anchor, v, Vec3::Zero()).image);
  return v;
}

Outcome availability_scoring() {
  Outcome o;
  const Scene truth = fixtures::quad_ground_truth();
  struct Case {
    const char* name;
    Mat3 gain;
    Vec3 bias;
    double score;
  };
  Mat3 xt = Mat3::Constant(0.06);
  xt.diagonal().setOnes();
  const Case cases[] = {{"gain 1.2", Vec3(1.2, 1, 1).asDiagonal(), Vec3::Zero(), 0.2},
                        {"bias 0.1", Mat3::Identity(), Vec3::Constant(0.1), 0.1},
                        {"crosstalk 0.06", xt, Vec3::Zero(), 0.06},
                        {"identity", Mat3::Identity(), Vec3::Zero(), 0.0}};
  for (const auto& c : cases) {
    RadiometricTransform t;
    t.gain = c.gain;
    t.bias = c.bias;
    const auto fit = fit_radiometric(truth, injected_view(truth, c.name, t));
    const double s = fit.ok ? availability_score(fit.transform) : INFINITY;
    const double tol = c.score == 0.0 ? 1e-6 : 1e-3;
    o.expect(std::abs(s - c.score) <= tol, std::string(c.name) + fmt(": recovered S = %.9f (expected %g)", s, c.score));
  }

  const fixtures::PollutedDataset polluted = fixtures::polluted_dataset();
  TrainConfig config = fixtures::quad_config();
  const Scene anchor = train(initial_scene(polluted.data, config), polluted.data.primary, {}, config).scene;
  const AvailabilityReport report =
      register_views(anchor, polluted.data.aux, 0.15, fusion_options(config, 0.15).registration);
  std::set<std::string> injected, rejected;
  for (const auto& v : polluted.injected) injected.insert(v.id);
  for (const auto& id : report.rejected_ids()) rejected.insert(id);
  std::string scores;
  for (const auto& e : report.entries) scores += e.view_id + fmt("=%.4f ", e.score);
  o.expect(rejected == injected, "tau = 0.15 on the polluted fixture rejects exactly the injected views");
  o.note(scores);

  const auto rows = run_fusion_ablation(polluted.data, config);
  double b = 0, e = 0;
  for (const auto& r : rows) {
    o.note(r.row + " " + r.label + fmt(": held-out PSNR %.3f dB", r.psnr) + ", " + std::to_string(r.aux_views) +
           " aux views");
    if (r.row == "(b)") b = r.psnr;
    if (r.row == "(e)") e = r.psnr;
  }
  o.expect(b < e, fmt("Direct Fusion (%.3f dB) is worse than A.R. tau=0.15 (%.3f dB)", b, e));
  return o;
}

// ---- 6 ----
Outcome effective_opacity_pruning() {
  Outcome o;
  fixtures::OcclusionScene oc = fixtures::occlusion_scene();
  std::vector<Image> before;
  for (auto& g : oc.scene.primitives) g.stats.reset();
  for (const auto& v : oc.views) {
    const RenderOutput out = render(oc.scene, v, Vec3::Zero());
    before.push_back(out.image);
    for (std::size_t i = 0; i < oc.scene.size(); ++i) {
      const auto& t = out.touches[i];
      if (t.footprint_pixels == 0) continue;
      oc.scene.primitives[i].stats.observed = true;
      max_effective_opacity_update(oc.scene.primitives[i].stats, t.sum_alpha_hat, t.footprint_pixels);
    }
  }
  // prune exactly the primitives whose max effective opacity is 0
  const auto mask = opacity_prune_mask(oc.scene, std::numeric_limits<double>::denorm_min());
  Scene kept;
  std::vector<std::size_t> pruned;
  for (std::size_t i = 0; i < oc.scene.size(); ++i) {
    if (mask[i]) {
      pruned.push_back(i);
      continue;
    }
    kept.primitives.push_back(oc.scene.primitives[i]);
    kept.assignment.push_back(0);
  }
  const double fraction = static_cast<double>(pruned.size()) / static_cast<double>(oc.scene.size());
  o.expect(pruned == oc.hidden, std::to_string(pruned.size()) + " of " + std::to_string(oc.scene.size()) +
                                    " pruned, exactly the planted occluded set");
  o.expect(std::abs(fraction - 0.3) < 1e-12, fmt("primitive count reduced by %.0f%%", 100.0 * fraction));
  bool same = true;
  for (std::size_t v = 0; v < oc.views.size(); ++v) same = same && render(kept, oc.views[v], Vec3::Zero()).image.data == before[v].data;
  o.expect(same, std::to_string(oc.views.size()) + " training renders bitwise unchanged after pruning");
  return o;
}

// ---- 7 ----
Outcome pad_geometry() {
  Outcome o;
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Rng rng(7);
  const SuiteConfig cfg;
  double mid_err = 0, align_err = 0, scale_err = 0, alpha_err = 0;
  for (int i = 0; i < 1000; ++i) {
    GaussianPrimitive p;
    p.mean = Vec3(u(gen), u(gen), u(gen)) * 3.0;
    p.log_scale = Vec3(u(gen), u(gen), u(gen)) * 1.5;
    p.rotation = random_quaternion(gen);
    p.set_opacity(0.02 + 0.96 * (u(gen) + 1) / 2);
    const auto t = principal_axis_densify(p, cfg, rng);
    mid_err = std::max(mid_err, (0.5 * (t[0].mean + t[2].mean) - p.mean).norm());
    mid_err = std::max(mid_err, (t[1].mean - p.mean).norm());
    const Vec3 axis = p.rotation_matrix().col(p.principal_axis());
    const Vec3 off = t[0].mean - p.mean;
    if (off.norm() > 0) align_err = std::max(align_err, off.normalized().cross(axis).norm());
    for (const auto& c : t) {
      scale_err = std::max(scale_err, ((c.scale() * 1.6).array() / p.scale().array() - 1.0).abs().maxCoeff());
      alpha_err = std::max(alpha_err, std::abs(c.opacity() - 0.3 * p.opacity()));
    }
  }
  o.expect(mid_err <= 1e-12, fmt("triplet midpoint vs parent mean: max error %.3g", mid_err));
  o.expect(align_err <= 1e-9, fmt("offset vs R e_q: max sin(angle) %.3g", align_err));
  o.expect(scale_err <= 1e-12, fmt("child scale = parent / 1.6: max relative error %.3g", scale_err));
  o.expect(alpha_err <= 1e-12, fmt("child alpha = 0.3 parent alpha: max error %.3g", alpha_err));
  return o;
}

// ---- 8 ----
Outcome ablation_ordering() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset data = fixtures::quad_dataset();
  const TrainConfig config = fixtures::quad_config();
  // baseline, each toggle alone, all on
  std::vector<SuiteVariant> variants(6);
  variants[0].toggles = {false, false, false};
  variants[1].toggles = {true, false, false};
  variants[2].toggles = {false, true, false};
  variants[3].toggles = {false, false, true};
  variants[4].toggles = {false, false, false};
  variants[4].opacity_mode = OpacityAttenuation::Absolute;
  variants[5].toggles = {true, true, true};
  variants[5].opacity_mode = OpacityAttenuation::Absolute;
  const auto rows = run_suite_ablation(data, config, variants);
  const double base = rows[0].psnr;
  for (const auto& r : rows) o.note(r.label + fmt(": held-out PSNR %.3f dB, SSIM %.4f", r.psnr, r.ssim));
  o.expect(rows[5].psnr >= base, fmt("all-on %.3f dB >= baseline %.3f dB", rows[5].psnr, base));
  for (int i = 1; i <= 4; ++i) {
    const double d = rows[static_cast<std::size_t>(i)].psnr - base;
    o.expect(d >= -0.1, rows[static_cast<std::size_t>(i)].label + fmt(" alone: %+.3f dB vs baseline (>= -0.1)", d));
  }
  const double secs = seconds_since(t0);
  o.expect(secs < 1800.0, fmt("runtime %.1f s (< 1800 s)", secs));
  return o;
}

// ---- 9 ----
Outcome coverage_metric() {
  Outcome o;
  const fixtures::PoseGrid g = fixtures::pose_grid();
  const double c = coverage(g.positions, Envelope::rectangle(g.envelope_min, g.envelope_max));
  o.expect(c == 0.25, fmt("25-of-100-cell fixture: coverage %.17g", c));
  const Envelope one = Envelope::rectangle(Vec2(0, 0), Vec2(0.2, 0.2));
  std::vector<Vec3> p;
  for (int i = 0; i < 6; ++i) p.emplace_back(0.03 * (i + 1), 0.1, 1.5);
  const double c6 = coverage(p, one);
  p.emplace_back(0.1, 0.05, 1.5);
  const double c7 = coverage(p, one);
  o.expect(c6 == 0.0 && c7 == 1.0, fmt("single cell: 6 poses -> %g, 7 poses -> %g", c6, c7));
  return o;
}

// ---- 10 ----
Outcome determinism() {
  Outcome o;
  const Dataset data = fixtures::quad_dataset();
  std::string ply[3], csv[3];
  const int workers[3] = {1, 1, 4};
  for (int i = 0; i < 3; ++i) {
    TrainConfig c = fixtures::quad_config();
    c.workers = workers[i];
    const TrainResult r = train(initial_scene(data, c), data.primary, {}, c);
    ply[i] = file_bytes(r.scene);
    csv[i] = metrics_csv(r.metrics);
  }
  o.expect(ply[0] == ply[1] && csv[0] == csv[1], "two seeded runs: byte-identical final PLY and metric CSV");
  o.expect(ply[0] == ply[2] && csv[0] == csv[2], "workers 1 vs 4: byte-identical final PLY and metric CSV");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bsplat acceptance criteria"};
  std::vector<int> only;
  app.add_option("--criteria", only, "criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  if (only.empty()) only = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  using Fn = Outcome (*)();
  const std::pair<const char*, Fn> criteria[] = {
      {"budget determinism", budget_determinism},
      {"quota algebra", quota_algebra},
      {"gradient correctness", gradient_correctness},
      {"compositing conservation", compositing_conservation},
      {"availability scoring", availability_scoring},
      {"effective-opacity pruning", effective_opacity_pruning},
      {"PAD geometry", pad_geometry},
      {"ablation ordering", ablation_ordering},
      {"coverage metric", coverage_metric},
      {"determinism", determinism},
  };
  bool all = true;
  for (int id : only) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[id - 1].second();
    } catch (const std::exception& e) {
      o.expect(false, std::string("exception: ") + e.what());
    }
    std::printf("%s %2d %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[id - 1].first, seconds_since(t0));
    for (const auto& d : o.details) std::printf("        %s\n", d.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
