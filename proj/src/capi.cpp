#include "bsplat/bsplat.h"

#include "dataset_metrics.hpp"
#include "fixtures.hpp"
#include "image_io.hpp"
#include "workflows.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>

struct bsplat_config {
  bsplat::TrainConfig config;
};

struct bsplat_dataset {
  bsplat::Dataset data;
};

struct bsplat_scene {
  bsplat::Scene scene;
};

namespace {

namespace fs = std::filesystem;
using namespace bsplat;

thread_local std::string g_last_error;

bsplat_status fail(bsplat_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `fn`, mapping the exception hierarchy onto status codes.
template <typename Fn>
bsplat_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return BSPLAT_OK;
  } catch (const IoError& e) {
    return fail(BSPLAT_ERR_IO, e.what());
  } catch (const DataError& e) {
    return fail(BSPLAT_ERR_DATA, e.what());
  } catch (const ConfigError& e) {
    return fail(BSPLAT_ERR_CONFIG, e.what());
  } catch (const DivergenceError& e) {
    return fail(BSPLAT_ERR_DIVERGENCE, e.what());
  } catch (const InvalidArgument& e) {
    return fail(BSPLAT_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(BSPLAT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(BSPLAT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(BSPLAT_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw InvalidArgument(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'", 0);
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'", 0);
}

std::string evaluation_json(const Evaluation& e) {
  nlohmann::json views = nlohmann::json::array();
  for (const auto& v : e.views) views.push_back({{"view", v.view_id}, {"psnr", v.psnr}, {"ssim", v.ssim}});
  return nlohmann::json{{"views", views}, {"mean_psnr", e.mean_psnr}, {"mean_ssim", e.mean_ssim}}.dump(2) + "\n";
}

fs::path out_dir_of(const char* dir) {
  require(dir, "out_dir");
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw IoError("cannot create output directory '" + p.string() + "'", 0);
  return p;
}

}  // namespace

extern "C" {

const char* bsplat_version(void) { return "0.1.0"; }

const char* bsplat_last_error(void) { return g_last_error.c_str(); }

const char* bsplat_status_name(bsplat_status status) {
  switch (status) {
    case BSPLAT_OK: return "ok";
    case BSPLAT_ERR_CONFIG: return "config error";
    case BSPLAT_ERR_DATA: return "data error";
    case BSPLAT_ERR_DIVERGENCE: return "divergence";
    case BSPLAT_ERR_IO: return "i/o error";
    case BSPLAT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case BSPLAT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void bsplat_string_free(char* s) { std::free(s); }

bsplat_status bsplat_config_default(bsplat_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new bsplat_config{};
  });
}

bsplat_status bsplat_config_load(const char* path, bsplat_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto c = std::make_unique<bsplat_config>();
    c->config = load_config(path);
    *out = c.release();
  });
}

bsplat_status bsplat_config_parse(const char* json, bsplat_config** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    *out = nullptr;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    auto c = std::make_unique<bsplat_config>();
    c->config = config_from_json(doc);
    *out = c.release();
  });
}

bsplat_status bsplat_config_to_json(const bsplat_config* config, char** out_json) {
  return guarded([&] {
    require(config, "config");
    require(out_json, "out_json");
    *out_json = dup_string(config_to_json(config->config).dump(2));
  });
}

bsplat_status bsplat_config_set_seed(bsplat_config* config, uint64_t seed) {
  return guarded([&] {
    require(config, "config");
    config->config.seed = seed;
  });
}

bsplat_status bsplat_config_set_workers(bsplat_config* config, int workers) {
  return guarded([&] {
    require(config, "config");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    config->config.workers = workers;
  });
}

bsplat_status bsplat_config_set_tau(bsplat_config* config, double tau) {
  return guarded([&] {
    require(config, "config");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be a finite value > 0");
    config->config.fusion.tau = tau;
  });
}

bsplat_status bsplat_config_get_tau(const bsplat_config* config, double* out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = config->config.fusion.tau;
  });
}

bsplat_status bsplat_config_set_budget(bsplat_config* config, const char* spec) {
  return guarded([&] {
    require(config, "config");
    require(spec, "spec");
    parse_budget_spec(spec);  // ids are checked against the partition at training
    config->config.budget = spec;
  });
}

void bsplat_config_free(bsplat_config* config) { delete config; }

bsplat_status bsplat_dataset_load(const char* dir, bsplat_dataset** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = nullptr;
    auto d = std::make_unique<bsplat_dataset>();
    d->data = load_dataset(dir);
    *out = d.release();
  });
}

bsplat_status bsplat_dataset_view_counts(const bsplat_dataset* data, size_t* primary, size_t* aux, size_t* heldout) {
  return guarded([&] {
    require(data, "data");
    if (primary) *primary = data->data.primary.size();
    if (aux) *aux = data->data.aux.size();
    if (heldout) *heldout = data->data.heldout.size();
  });
}

void bsplat_dataset_free(bsplat_dataset* data) { delete data; }

bsplat_status bsplat_scene_load(const char* ply_path, bsplat_scene** out) {
  return guarded([&] {
    require(ply_path, "ply_path");
    require(out, "out");
    *out = nullptr;
    if (!fs::exists(ply_path)) throw DataError(std::string("scene '") + ply_path + "' does not exist");
    auto s = std::make_unique<bsplat_scene>();
    s->scene = load_scene(ply_path);
    *out = s.release();
  });
}

bsplat_status bsplat_scene_save(const bsplat_scene* scene, const char* ply_path) {
  return guarded([&] {
    require(scene, "scene");
    require(ply_path, "ply_path");
    save_scene(scene->scene, ply_path);
  });
}

bsplat_status bsplat_scene_count(const bsplat_scene* scene, size_t* out) {
  return guarded([&] {
    require(scene, "scene");
    require(out, "out");
    *out = scene->scene.size();
  });
}

bsplat_status bsplat_scene_region_count(const bsplat_scene* scene, const char* partition_path, int region,
                                        size_t* out) {
  return guarded([&] {
    require(scene, "scene");
    require(partition_path, "partition_path");
    require(out, "out");
    Scene s = scene->scene;
    s.partition = load_partition(partition_path);
    assign_to_polygons(s);
    const auto counts = region_counts(s);
    const auto it = counts.find(region);
    if (it == counts.end()) throw InvalidArgument("unknown region " + std::to_string(region));
    *out = static_cast<size_t>(it->second);
  });
}

void bsplat_scene_free(bsplat_scene* scene) { delete scene; }

bsplat_status bsplat_plan(const bsplat_config* config, const bsplat_dataset* data, char** out_text) {
  return guarded([&] {
    require(config, "config");
    require(data, "data");
    require(out_text, "out_text");
    const TrainConfig& c = config->config;
    c.validate();
    const Scene s = initial_scene(data->data, c);
    const std::int64_t K = event_count(c.schedule);
    std::ostringstream out;
    out << "events K=" << K << " (S=" << c.schedule.start_iter << " E=" << c.schedule.end_iter
        << " D=" << c.schedule.interval << ")\n";
    out << "event,iteration,region,target,count_before,quota,count_after\n";
    std::map<int, std::int64_t> counts = region_counts(s);
    for (std::int64_t k = 1; k <= K; ++k) {
      for (auto& [region, count] : counts) {
        const std::int64_t target = s.partition.target(region);
        const std::int64_t q = quota(target, count, K, k);
        out << k << ',' << c.schedule.iteration_of(k) << ',' << region << ',' << target << ',' << count << ',' << q
            << ',' << count + q << '\n';
        count += q;
      }
    }
    *out_text = dup_string(out.str());
  });
}

bsplat_status bsplat_train(const bsplat_config* config, const bsplat_dataset* data, const char* out_dir) {
  return guarded([&] {
    require(config, "config");
    require(data, "data");
    const TrainConfig& c = config->config;
    c.validate();
    const fs::path out = out_dir_of(out_dir);
    const Scene init = initial_scene(data->data, c);
    TrainHooks hooks;
    std::int64_t events = 0;
    if (c.checkpoint_every > 0) {
      fs::create_directories(out / "checkpoints");
      hooks.on_event = [&](const EventRecord& rec, const Scene& s) {
        if (++events % c.checkpoint_every == 0) {
          char name[48];
          std::snprintf(name, sizeof name, "event_%03lld.ply", static_cast<long long>(rec.k));
          save_scene(s, out / "checkpoints" / name);
        }
      };
    }
    const TrainResult r = train(init, data->data.primary, {}, c, hooks);
    save_scene(r.scene, out / "final.ply");
    write_text(out / "metrics.csv", metrics_csv(r.metrics));
    write_text(out / "ledger.csv", r.ledger.to_csv());
    if (!data->data.heldout.empty()) {
      write_text(out / "evaluation.json",
                 evaluation_json(evaluate(r.scene, data->data.heldout, c.background, RenderSettings{c.workers})));
    }
  });
}

bsplat_status bsplat_fuse(const bsplat_config* config, const bsplat_dataset* data, const char* anchor_ply,
                          const char* out_dir) {
  return guarded([&] {
    require(config, "config");
    require(data, "data");
    require(anchor_ply, "anchor_ply");
    const TrainConfig& c = config->config;
    c.validate();
    if (!fs::exists(anchor_ply)) throw DataError(std::string("anchor '") + anchor_ply + "' does not exist");
    if (data->data.aux.empty()) throw DataError("dataset has no auxiliary views (aux_poses.txt)");
    Scene anchor = load_scene(anchor_ply);
    {
      Partition p;
      if (data->data.partition) p = *data->data.partition;
      if (!c.budget.empty()) apply_budget_override(p, c.budget);
      if (!data->data.partition && c.budget.empty()) p.background_budget = static_cast<std::int64_t>(anchor.size());
      anchor.partition = p;
      assign_to_polygons(anchor);
    }
    const fs::path out = out_dir_of(out_dir);
    const FusionOptions opts = fusion_options(c, c.fusion.tau);
    const AvailabilityReport report = register_views(anchor, data->data.aux, opts.tau, opts.registration);
    write_text(out / "availability.json", report.to_json());
    std::vector<TrainResult> runs;
    const FusionResult fr =
        hybrid_from_anchor(anchor, data->data.primary, data->data.aux, report, opts, make_train_fn(c, &runs));
    save_scene(fr.scene, out / "hybrid.ply");
    if (!runs.empty()) {
      write_text(out / "metrics.csv", metrics_csv(runs.back().metrics));
      write_text(out / "ledger.csv", runs.back().ledger.to_csv());
    }
    if (!data->data.heldout.empty()) {
      write_text(out / "evaluation.json",
                 evaluation_json(evaluate(fr.scene, data->data.heldout, c.background, RenderSettings{c.workers})));
    }
  });
}

bsplat_status bsplat_render(const char* scene_ply, const char* poses_path, const char* out_dir,
                            const double background[3], int workers) {
  return guarded([&] {
    require(scene_ply, "scene_ply");
    require(poses_path, "poses_path");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (!fs::exists(scene_ply)) throw DataError(std::string("scene '") + scene_ply + "' does not exist");
    const Scene s = load_scene(scene_ply);
    const std::vector<CameraView> views = load_poses(poses_path);
    const Vec3 bg = background ? Vec3(background[0], background[1], background[2]) : Vec3::Zero();
    if (!bg.allFinite()) throw ConfigError("background must be finite");
    const fs::path out = out_dir_of(out_dir);
    for (const auto& v : views) save_png(render(s, v, bg, RenderSettings{workers}).image, out / (v.id + ".png"));
  });
}

bsplat_status bsplat_metrics(const char* trajectory_path, const double* envelope, double cell, int64_t min_poses,
                             int64_t image_count, const char* out_dir, double* out_coverage, double* out_idsm) {
  return guarded([&] {
    require(trajectory_path, "trajectory_path");
    if (!fs::exists(trajectory_path)) {
      throw DataError(std::string("trajectory '") + trajectory_path + "' does not exist");
    }
    const std::vector<Vec3> poses = load_trajectory(trajectory_path);
    const Envelope env = envelope ? Envelope::rectangle(Vec2(envelope[0], envelope[1]), Vec2(envelope[2], envelope[3]))
                                  : Envelope::bounding_box();
    const CoverageGrid grid = coverage_grid(poses, env, cell, min_poses);
    const std::int64_t images = image_count < 0 ? static_cast<std::int64_t>(poses.size()) : image_count;
    const double area = envelope_area(grid);
    const double density = area > 0.0 ? idsm(images, area) : 0.0;
    if (out_dir) {
      const fs::path out = out_dir_of(out_dir);
      char buf[256];
      std::snprintf(buf, sizeof buf, "poses,cells,occupied_cells,coverage,area_m2,images,idsm\n%zu,%lld,%lld,%.17g,%.17g,%lld,%.17g\n",
                    poses.size(), static_cast<long long>(grid.total_cells),
                    static_cast<long long>(grid.occupied_cells), grid.coverage, area,
                    static_cast<long long>(images), density);
      write_text(out / "metrics.csv", buf);
      write_text(out / "histogram.csv", histogram_csv(grid));
    }
    if (!grid.warning.empty()) g_last_error = grid.warning;
    if (out_coverage) *out_coverage = grid.coverage;
    if (out_idsm) *out_idsm = density;
  });
}

bsplat_status bsplat_ablate(const bsplat_config* config, const bsplat_dataset* data, const char* kind,
                            const char* out_csv) {
  return guarded([&] {
    require(config, "config");
    require(data, "data");
    require(kind, "kind");
    require(out_csv, "out_csv");
    const TrainConfig& c = config->config;
    c.validate();
    std::string csv;
    if (std::strcmp(kind, "suite") == 0) {
      csv = suite_ablation_csv(run_suite_ablation(data->data, c, all_suite_variants()));
    } else if (std::strcmp(kind, "fusion") == 0) {
      csv = fusion_ablation_csv(run_fusion_ablation(data->data, c));
    } else {
      throw ConfigError(std::string("unknown ablation '") + kind + "' (expected suite or fusion)");
    }
    const fs::path p(out_csv);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_text(p, csv);
  });
}

bsplat_status bsplat_synth(const char* out_dir) {
  return guarded([&] { fixtures::write_all(out_dir_of(out_dir)); });
}

}  // extern "C"
