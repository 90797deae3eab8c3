#include "config.hpp"

#include <fstream>
#include <set>

namespace bsplat {

using nlohmann::json;

void TrainConfig::validate() const {
  if (total_iters < 0) throw ConfigError("total_iters must be >= 0");
  if (total_iters > 0) {
    schedule.validate();
    if (schedule.start_iter < 1) throw ConfigError("schedule.start_iter must be >= 1");
    if (schedule.end_iter > total_iters) {
      throw ConfigError("schedule.end_iter (" + std::to_string(schedule.end_iter) + ") exceeds total_iters (" +
                        std::to_string(total_iters) + ")");
    }
  }
  lr.validate();
  suite.validate();
  if (!(lambda_ssim >= 0.0 && lambda_ssim <= 1.0)) throw ConfigError("lambda_ssim must be in [0, 1]");
  if (!(baseline.min_opacity >= 0.0 && baseline.min_opacity < 1.0)) throw ConfigError("baseline.min_opacity must be in [0, 1)");
  if (!(baseline.split_scale > 0.0)) throw ConfigError("baseline.split_scale must be > 0");
  if (!(fusion.tau > 0.0)) throw ConfigError("fusion.tau must be > 0");
  if (fusion.downsample < 1) throw ConfigError("fusion.downsample must be >= 1");
  if (fusion.min_valid_pixels < 1) throw ConfigError("fusion.min_valid_pixels must be >= 1");
  if (!(fusion.valid_transmittance > 0.0 && fusion.valid_transmittance <= 1.0)) {
    throw ConfigError("fusion.valid_transmittance must be in (0, 1]");
  }
  if (init.count < 0) throw ConfigError("init.count must be >= 0");
  if (!(init.opacity > 0.0 && init.opacity < 1.0)) throw ConfigError("init.opacity must be in (0, 1)");
  if ((init.bounds_max - init.bounds_min).minCoeff() <= 0.0) throw ConfigError("init bounds must have positive extent");
  if (!background.allFinite()) throw ConfigError("background must be finite");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (sh_degree != 0) throw ConfigError("only sh_degree 0 is supported");
  if (log_interval < 1) throw ConfigError("log_interval must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

namespace {

// Reads known keys from an object and rejects anything else.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("'" + path_ + "' must be an object");
  }
  // Throws on keys that were never read.
  void done() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + qualified(key) + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + qualified(key) + "' has the wrong type");
    }
  }

  void get(const char* key, Vec3& out) {
    std::vector<double> v{out[0], out[1], out[2]};
    get(key, v);
    if (v.size() != 3) throw ConfigError("config key '" + qualified(key) + "' needs 3 numbers");
    out = Vec3(v[0], v[1], v[2]);
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

TrainConfig config_from_json(const json& doc) {
  TrainConfig c;
  Reader r(doc, "");
  r.get("total_iters", c.total_iters);
  r.get("lambda_ssim", c.lambda_ssim);
  r.get("seed", c.seed);
  r.get("background", c.background);
  r.get("workers", c.workers);
  r.get("sh_degree", c.sh_degree);
  r.get("log_interval", c.log_interval);
  r.get("checkpoint_every", c.checkpoint_every);
  r.get("lock_regions_after_last_event", c.lock_regions_after_last_event);
  r.get("budget", c.budget);
  if (const json* s = r.child("schedule")) {
    Reader sr(*s, "schedule");
    sr.get("start_iter", c.schedule.start_iter);
    sr.get("end_iter", c.schedule.end_iter);
    sr.get("interval", c.schedule.interval);
    sr.done();
  }
  if (const json* s = r.child("lr")) {
    Reader lr(*s, "lr");
    lr.get("mean_init", c.lr.mean_init);
    lr.get("mean_final", c.lr.mean_final);
    lr.get("log_scale", c.lr.log_scale);
    lr.get("rotation", c.lr.rotation);
    lr.get("opacity", c.lr.opacity);
    lr.get("color", c.lr.color);
    lr.done();
  }
  if (const json* s = r.child("suite")) {
    Reader sr(*s, "suite");
    sr.get("opacity_prune_threshold", c.suite.opacity_prune_threshold);
    sr.get("pad_perturb_factor", c.suite.pad_perturb_factor);
    sr.get("pad_scale_attenuation", c.suite.pad_scale_attenuation);
    sr.get("pad_opacity_attenuation", c.suite.pad_opacity_attenuation);
    sr.get("rng_seed", c.suite.rng_seed);
    std::string mode = c.suite.opacity_mode == OpacityAttenuation::Absolute ? "absolute" : "multiplicative";
    sr.get("opacity_mode", mode);
    if (mode == "multiplicative") {
      c.suite.opacity_mode = OpacityAttenuation::Multiplicative;
    } else if (mode == "absolute") {
      c.suite.opacity_mode = OpacityAttenuation::Absolute;
    } else {
      throw ConfigError("suite.opacity_mode must be 'multiplicative' or 'absolute'");
    }
    sr.done();
  }
  if (const json* s = r.child("toggles")) {
    Reader tr(*s, "toggles");
    tr.get("area_normalized_gradient", c.toggles.area_normalized_gradient);
    tr.get("effective_opacity_prune", c.toggles.effective_opacity_prune);
    tr.get("principal_axis_densify", c.toggles.principal_axis_densify);
    tr.done();
  }
  if (const json* s = r.child("baseline")) {
    Reader br(*s, "baseline");
    br.get("min_opacity", c.baseline.min_opacity);
    br.get("split_scale", c.baseline.split_scale);
    br.done();
  }
  if (const json* s = r.child("fusion")) {
    Reader fr(*s, "fusion");
    fr.get("tau", c.fusion.tau);
    fr.get("downsample", c.fusion.downsample);
    fr.get("min_valid_pixels", c.fusion.min_valid_pixels);
    fr.get("valid_transmittance", c.fusion.valid_transmittance);
    fr.done();
  }
  if (const json* s = r.child("init")) {
    Reader ir(*s, "init");
    ir.get("count", c.init.count);
    ir.get("opacity", c.init.opacity);
    ir.get("bounds_min", c.init.bounds_min);
    ir.get("bounds_max", c.init.bounds_max);
    ir.done();
  }
  r.done();
  c.validate();
  return c;
}

json config_to_json(const TrainConfig& c) {
  auto vec = [](const Vec3& v) { return json::array({v[0], v[1], v[2]}); };
  return json{
      {"total_iters", c.total_iters},
      {"lambda_ssim", c.lambda_ssim},
      {"seed", c.seed},
      {"background", vec(c.background)},
      {"workers", c.workers},
      {"sh_degree", c.sh_degree},
      {"log_interval", c.log_interval},
      {"checkpoint_every", c.checkpoint_every},
      {"lock_regions_after_last_event", c.lock_regions_after_last_event},
      {"budget", c.budget},
      {"schedule",
       {{"start_iter", c.schedule.start_iter}, {"end_iter", c.schedule.end_iter}, {"interval", c.schedule.interval}}},
      {"lr",
       {{"mean_init", c.lr.mean_init},
        {"mean_final", c.lr.mean_final},
        {"log_scale", c.lr.log_scale},
        {"rotation", c.lr.rotation},
        {"opacity", c.lr.opacity},
        {"color", c.lr.color}}},
      {"suite",
       {{"opacity_prune_threshold", c.suite.opacity_prune_threshold},
        {"pad_perturb_factor", c.suite.pad_perturb_factor},
        {"pad_scale_attenuation", c.suite.pad_scale_attenuation},
        {"pad_opacity_attenuation", c.suite.pad_opacity_attenuation},
        {"rng_seed", c.suite.rng_seed},
        {"opacity_mode", c.suite.opacity_mode == OpacityAttenuation::Absolute ? "absolute" : "multiplicative"}}},
      {"toggles",
       {{"area_normalized_gradient", c.toggles.area_normalized_gradient},
        {"effective_opacity_prune", c.toggles.effective_opacity_prune},
        {"principal_axis_densify", c.toggles.principal_axis_densify}}},
      {"baseline", {{"min_opacity", c.baseline.min_opacity}, {"split_scale", c.baseline.split_scale}}},
      {"fusion",
       {{"tau", c.fusion.tau},
        {"downsample", c.fusion.downsample},
        {"min_valid_pixels", c.fusion.min_valid_pixels},
        {"valid_transmittance", c.fusion.valid_transmittance}}},
      {"init",
       {{"count", c.init.count},
        {"opacity", c.init.opacity},
        {"bounds_min", vec(c.init.bounds_min)},
        {"bounds_max", vec(c.init.bounds_max)}}},
  };
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

}  // namespace bsplat
