#include "workflows.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

namespace bsplat {

Scene initial_scene(const Dataset& data, const TrainConfig& config) {
  Rng rng(config.seed);
  Partition partition;
  if (data.partition) partition = *data.partition;
  if (!config.budget.empty()) apply_budget_override(partition, config.budget);
  const PointCloud* cloud = data.points ? &*data.points : nullptr;
  Scene s = initialize_scene(cloud, config.init, partition, rng);
  if (!data.partition && config.budget.empty()) s.partition.background_budget = static_cast<std::int64_t>(s.size());
  return s;
}

TrainFn make_train_fn(const TrainConfig& config, std::vector<TrainResult>* runs) {
  return [config, runs](const Scene& init, const std::vector<CameraView>& views,
                        const std::vector<RadiometricTransform>& corrections) {
    TrainResult r = train(init, views, corrections, config);
    Scene s = r.scene;
    if (runs) runs->push_back(std::move(r));
    return s;
  };
}

FusionOptions fusion_options(const TrainConfig& config, double tau) {
  FusionOptions o;
  o.tau = tau;
  o.registration.downsample = config.fusion.downsample;
  o.registration.min_valid_pixels = config.fusion.min_valid_pixels;
  o.registration.valid_transmittance = config.fusion.valid_transmittance;
  o.registration.background = config.background;
  o.registration.render = RenderSettings{config.workers};
  return o;
}

std::string SuiteVariant::label() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += "+";
    out += name;
  };
  add(toggles.area_normalized_gradient, "G");
  add(toggles.effective_opacity_prune, "alpha_max");
  add(toggles.principal_axis_densify, "PAD");
  add(opacity_mode == OpacityAttenuation::Absolute, "abs_opacity");
  return out.empty() ? "baseline" : out;
}

std::vector<SuiteVariant> all_suite_variants() {
  std::vector<SuiteVariant> out;
  for (int bits = 0; bits < 16; ++bits) {
    SuiteVariant v;
    v.toggles.area_normalized_gradient = bits & 1;
    v.toggles.effective_opacity_prune = bits & 2;
    v.toggles.principal_axis_densify = bits & 4;
    v.opacity_mode = (bits & 8) ? OpacityAttenuation::Absolute : OpacityAttenuation::Multiplicative;
    out.push_back(v);
  }
  return out;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void require_heldout(const Dataset& data) {
  if (data.heldout.empty()) throw DataError("ablation needs held-out views");
}

}  // namespace

std::vector<AblationRow> run_suite_ablation(const Dataset& data, const TrainConfig& config,
                                            const std::vector<SuiteVariant>& variants,
                                            const AblationProgress& progress) {
  require_heldout(data);
  std::vector<AblationRow> rows;
  const Scene init = initial_scene(data, config);
  const RenderSettings rs{config.workers};
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainConfig c = config;
    c.toggles = variants[i].toggles;
    c.suite.opacity_mode = variants[i].opacity_mode;
    const TrainResult r = train(init, data.primary, {}, c);
    const Evaluation e = evaluate(r.scene, data.heldout, c.background, rs);
    AblationRow row;
    row.row = std::to_string(i + 1);
    row.label = variants[i].label();
    row.variant = variants[i];
    row.primitives = static_cast<std::int64_t>(r.scene.size());
    row.psnr = e.mean_psnr;
    row.ssim = e.mean_ssim;
    row.seconds = seconds_since(t0);
    rows.push_back(row);
    if (progress) progress(row);
  }
  return rows;
}

std::vector<AblationRow> run_fusion_ablation(const Dataset& data, const TrainConfig& config,
                                             const AblationProgress& progress) {
  require_heldout(data);
  if (data.aux.empty()) throw DataError("fusion ablation needs auxiliary views");
  const RenderSettings rs{config.workers};
  const TrainFn train_fn = make_train_fn(config);
  const Scene anchor = train_fn(initial_scene(data, config), data.primary, {});

  std::vector<AblationRow> rows;
  auto finish = [&](const char* id, const std::string& label, const FusionResult& fr, std::int64_t aux_used,
                    std::chrono::steady_clock::time_point t0) {
    const Evaluation e = evaluate(fr.scene, data.heldout, config.background, rs);
    AblationRow row;
    row.row = id;
    row.label = label;
    row.variant.toggles = config.toggles;
    row.variant.opacity_mode = config.suite.opacity_mode;
    row.aux_views = aux_used;
    row.primitives = static_cast<std::int64_t>(fr.scene.size());
    row.psnr = e.mean_psnr;
    row.ssim = e.mean_ssim;
    row.seconds = seconds_since(t0);
    rows.push_back(row);
    if (progress) progress(row);
  };
  auto accept_all = [&](const std::vector<std::string>& ids) {
    AvailabilityReport r;
    r.tau = std::numeric_limits<double>::infinity();
    for (const auto& id : ids) {
      AvailabilityEntry e;
      e.view_id = id;
      e.score = 0.0;
      e.tau = r.tau;
      e.accepted = true;
      e.transform.view_id = id;
      r.entries.push_back(e);
    }
    return r;
  };

  auto t0 = std::chrono::steady_clock::now();
  finish("(a)", "Single Sensor", hybrid_from_anchor(anchor, data.primary, {}, {}, fusion_options(config, 0.15), train_fn),
         0, t0);

  std::vector<std::string> all_ids;
  for (const auto& v : data.aux) all_ids.push_back(v.id);
  FusionOptions raw = fusion_options(config, 0.15);
  raw.apply_correction = false;
  t0 = std::chrono::steady_clock::now();
  finish("(b)", "Direct Fusion", hybrid_from_anchor(anchor, data.primary, data.aux, accept_all(all_ids), raw, train_fn),
         static_cast<std::int64_t>(all_ids.size()), t0);

  // registration once; the tau rows only re-threshold
  const AvailabilityReport base = register_views(anchor, data.aux, 0.15, fusion_options(config, 0.15).registration);
  const std::size_t n_e = rethreshold(base, 0.15).accepted_ids().size();
  Rng rng(config.seed ^ 0x5A17ULL);
  std::vector<std::string> shuffled = all_ids;
  for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
  shuffled.resize(n_e);
  t0 = std::chrono::steady_clock::now();
  finish("(c)", "Random Sampling", hybrid_from_anchor(anchor, data.primary, data.aux, accept_all(shuffled), raw, train_fn),
         static_cast<std::int64_t>(n_e), t0);

  const std::pair<const char*, double> ar[] = {{"(d)", 0.1}, {"(e)", 0.15}, {"(f)", 0.3}};
  for (const auto& [id, tau] : ar) {
    t0 = std::chrono::steady_clock::now();
    const AvailabilityReport rep = rethreshold(base, tau);
    char label[48];
    std::snprintf(label, sizeof label, "A.R. with tau=%g", tau);
    finish(id, label, hybrid_from_anchor(anchor, data.primary, data.aux, rep, fusion_options(config, tau), train_fn),
           static_cast<std::int64_t>(rep.accepted_ids().size()), t0);
  }
  return rows;
}

namespace {
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace

std::string suite_ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "row,label,area_normalized_gradient,effective_opacity_prune,principal_axis_densify,absolute_opacity,"
         "primitives,psnr,ssim\n";
  for (const auto& r : rows) {
    const auto& t = r.variant.toggles;
    out << r.row << ',' << r.label << ',' << t.area_normalized_gradient << ',' << t.effective_opacity_prune << ','
        << t.principal_axis_densify << ',' << (r.variant.opacity_mode == OpacityAttenuation::Absolute) << ','
        << r.primitives << ',' << num(r.psnr) << ',' << num(r.ssim) << '\n';
  }
  return out.str();
}

std::string fusion_ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "row,strategy,aux_views,primitives,psnr,ssim\n";
  for (const auto& r : rows) {
    out << r.row << ',' << r.label << ',' << r.aux_views << ',' << r.primitives << ',' << num(r.psnr) << ','
        << num(r.ssim) << '\n';
  }
  return out.str();
}

}  // namespace bsplat
