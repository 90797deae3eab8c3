// bsplat command-line front end. Talks to the library only through the C API.

#include <bsplat/bsplat.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes: 1 config, 2 data, 3 divergence, 4 internal.
int exit_code(bsplat_status s) {
  switch (s) {
    case BSPLAT_OK: return 0;
    case BSPLAT_ERR_CONFIG:
    case BSPLAT_ERR_INVALID_ARGUMENT: return 1;
    case BSPLAT_ERR_DATA:
    case BSPLAT_ERR_IO: return 2;
    case BSPLAT_ERR_DIVERGENCE: return 3;
    case BSPLAT_ERR_INTERNAL: return 4;
  }
  return 4;
}

struct Failure {
  bsplat_status status;
  std::string message;
};

void check(bsplat_status s) {
  if (s != BSPLAT_OK) throw Failure{s, bsplat_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};
using Config = Handle<bsplat_config, bsplat_config_free>;
using Data = Handle<bsplat_dataset, bsplat_dataset_free>;

std::string take(char* s) {
  std::string out = s ? s : "";
  bsplat_string_free(s);
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{BSPLAT_ERR_IO, "cannot write '" + path.string() + "'"};
  out << text;
}

json read_json(const std::string& path, bsplat_status on_error) {
  std::ifstream in(path);
  if (!in) throw Failure{on_error, "cannot open '" + path + "'"};
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Failure{on_error, "'" + path + "' is not valid JSON: " + e.what()};
  }
}

struct RunArgs {
  std::string config_path;
  std::string data;
  std::string out;
  std::string manifest;
  std::string budget;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  int workers = 0;
};

// Config from a manifest's resolved snapshot, a config file or defaults,
// then CLI overrides.
void load_run_config(RunArgs& a, Config& cfg) {
  if (!a.manifest.empty()) {
    const json m = read_json(a.manifest, BSPLAT_ERR_CONFIG);
    if (!m.contains("resolved_config") || !m.contains("data")) {
      throw Failure{BSPLAT_ERR_CONFIG, "manifest '" + a.manifest + "' lacks resolved_config or data"};
    }
    check(bsplat_config_parse(m["resolved_config"].dump().c_str(), &cfg.p));
    if (a.data.empty()) a.data = m["data"].get<std::string>();
    if (a.config_path.empty()) a.config_path = m.value("config", "");
  } else if (!a.config_path.empty()) {
    if (!fs::exists(a.config_path)) throw Failure{BSPLAT_ERR_CONFIG, "config '" + a.config_path + "' does not exist"};
    check(bsplat_config_load(a.config_path.c_str(), &cfg.p));
  } else {
    check(bsplat_config_default(&cfg.p));
  }
  if (a.seed) check(bsplat_config_set_seed(cfg.p, *a.seed));
  if (a.tau) check(bsplat_config_set_tau(cfg.p, *a.tau));
  if (a.workers > 0) check(bsplat_config_set_workers(cfg.p, a.workers));
  if (!a.budget.empty()) check(bsplat_config_set_budget(cfg.p, a.budget.c_str()));
  if (a.data.empty()) throw Failure{BSPLAT_ERR_CONFIG, "--data is required"};
}

void write_manifest(const std::string& subcommand, const RunArgs& a, const Config& cfg, const json& extra = {}) {
  char* text = nullptr;
  check(bsplat_config_to_json(cfg.p, &text));
  const json resolved = json::parse(take(text));
  json m = {{"subcommand", subcommand},
            {"config", a.config_path},
            {"data", fs::absolute(a.data).lexically_normal().string()},
            {"out", a.out},
            {"seed", resolved["seed"]},
            {"tau", resolved["fusion"]["tau"]},
            {"version", bsplat_version()},
            {"resolved_config", resolved}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_file(fs::path(a.out) / "resolved_config.json", resolved.dump(2) + "\n");
  write_file(fs::path(a.out) / "manifest.json", m.dump(2) + "\n");
}

void add_run_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("--config", a.config_path, "training config (JSON)");
  cmd->add_option("--data", a.data, "dataset directory");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--manifest", a.manifest, "rerun from a previous run's manifest.json");
  cmd->add_option("--seed", a.seed, "override the config seed");
  cmd->add_option("--workers", a.workers, "render worker threads");
  cmd->add_option("--budget", a.budget, "region budgets, region=id:count,... (id 0 = background)");
}

void require_out(const RunArgs& a) {
  if (a.out.empty()) throw Failure{BSPLAT_ERR_CONFIG, "--out is required"};
}

int cmd_train(RunArgs& a, bool dry_run) {
  Config cfg;
  load_run_config(a, cfg);
  Data data;
  check(bsplat_dataset_load(a.data.c_str(), &data.p));
  if (dry_run) {
    char* plan = nullptr;
    check(bsplat_plan(cfg.p, data.p, &plan));
    std::cout << take(plan);
    return 0;
  }
  require_out(a);
  fs::create_directories(a.out);
  write_manifest("train", a, cfg);
  check(bsplat_train(cfg.p, data.p, a.out.c_str()));
  std::cout << "wrote " << (fs::path(a.out) / "final.ply").string() << "\n";
  return 0;
}

int cmd_fuse(RunArgs& a, const std::string& anchor) {
  Config cfg;
  if (!a.manifest.empty() && anchor.empty()) {
    const json m = read_json(a.manifest, BSPLAT_ERR_CONFIG);
    if (m.contains("anchor")) return cmd_fuse(a, m["anchor"].get<std::string>());
  }
  load_run_config(a, cfg);
  require_out(a);
  if (anchor.empty()) throw Failure{BSPLAT_ERR_CONFIG, "--anchor is required"};
  if (!fs::exists(anchor)) throw Failure{BSPLAT_ERR_DATA, "anchor '" + anchor + "' does not exist"};
  Data data;
  check(bsplat_dataset_load(a.data.c_str(), &data.p));
  fs::create_directories(a.out);
  write_manifest("fuse", a, cfg, {{"anchor", fs::absolute(anchor).lexically_normal().string()}});
  check(bsplat_fuse(cfg.p, data.p, anchor.c_str(), a.out.c_str()));
  const json report = read_json((fs::path(a.out) / "availability.json").string(), BSPLAT_ERR_IO);
  for (const auto& e : report["views"]) {
    const std::string score = e["score"].is_number() ? std::to_string(e["score"].get<double>()) : "inf";
    std::printf("%-16s score=%-12s %s\n", e["view_id"].get<std::string>().c_str(), score.c_str(),
                e["decision"].get<std::string>().c_str());
  }
  return 0;
}

std::optional<std::vector<double>> parse_numbers(const std::string& text, std::size_t n, const char* what) {
  if (text.empty()) return std::nullopt;
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Failure{BSPLAT_ERR_CONFIG, std::string(what) + " must be " + std::to_string(n) + " comma-separated numbers"};
    }
  }
  if (v.size() != n) {
    throw Failure{BSPLAT_ERR_CONFIG, std::string(what) + " must be " + std::to_string(n) + " comma-separated numbers"};
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bsplat: budget-constrained Gaussian splatting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bsplat_version()));

  RunArgs train_args;
  bool dry_run = false;
  auto* train = app.add_subcommand("train", "train a scene to its region budgets");
  add_run_options(train, train_args);
  train->add_flag("--dry-run", dry_run, "print K and the per-event quota plan, then exit");
  train->add_option("--tau", train_args.tau, "availability threshold recorded in the manifest");

  RunArgs fuse_args;
  std::string anchor;
  auto* fuse = app.add_subcommand("fuse", "register auxiliary views against an anchor and train the hybrid scene");
  add_run_options(fuse, fuse_args);
  fuse->add_option("--anchor", anchor, "anchor scene (PLY)");
  fuse->add_option("--tau", fuse_args.tau, "availability threshold (default 0.15)");

  std::string scene, poses, render_out, background;
  int render_workers = 1;
  auto* render = app.add_subcommand("render", "render a PLY at every pose of a pose file");
  render->add_option("--scene", scene, "scene PLY")->required();
  render->add_option("--poses", poses, "pose file")->required();
  render->add_option("--out", render_out, "output directory")->required();
  render->add_option("--background", background, "r,g,b in [0,1] (default black)");
  render->add_option("--workers", render_workers, "render worker threads");

  std::string trajectory, envelope, metrics_out;
  double cell = 0.2;
  std::int64_t min_poses = 6, images = -1;
  auto* metrics = app.add_subcommand("metrics", "viewpoint coverage and image density of a trajectory");
  metrics->add_option("--trajectory", trajectory, "trajectory or pose file")->required();
  metrics->add_option("--envelope", envelope, "x0,y0,x1,y1 floor rectangle (default: pose bounding box)");
  metrics->add_option("--cell", cell, "grid cell size in meters");
  metrics->add_option("--min-poses", min_poses, "a cell is occupied with more than this many poses");
  metrics->add_option("--images", images, "image count for IDSM (default: number of poses)");
  metrics->add_option("--out", metrics_out, "write metrics.csv and histogram.csv here");

  RunArgs ablate_args;
  std::string kind = "suite";
  auto* ablate = app.add_subcommand("ablate", "ablation table: suite (16 rows) or fusion (6 rows)");
  add_run_options(ablate, ablate_args);
  ablate->add_option("--kind", kind, "suite or fusion")->check(CLI::IsMember({"suite", "fusion"}));

  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "regenerate the bundled synthetic fixtures");
  synth->add_option("--out", synth_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(train_args, dry_run);
    if (*fuse) return cmd_fuse(fuse_args, anchor);
    if (*render) {
      const auto bg = parse_numbers(background, 3, "--background");
      check(bsplat_render(scene.c_str(), poses.c_str(), render_out.c_str(), bg ? bg->data() : nullptr, render_workers));
      return 0;
    }
    if (*metrics) {
      const auto env = parse_numbers(envelope, 4, "--envelope");
      double cov = 0.0, density = 0.0;
      check(bsplat_metrics(trajectory.c_str(), env ? env->data() : nullptr, cell, min_poses, images,
                           metrics_out.empty() ? nullptr : metrics_out.c_str(), &cov, &density));
      std::printf("coverage %.17g\nidsm %.17g\n", cov, density);
      return 0;
    }
    if (*ablate) {
      Config cfg;
      load_run_config(ablate_args, cfg);
      require_out(ablate_args);
      Data data;
      check(bsplat_dataset_load(ablate_args.data.c_str(), &data.p));
      fs::create_directories(ablate_args.out);
      write_manifest("ablate", ablate_args, cfg, {{"kind", kind}});
      const std::string csv = (fs::path(ablate_args.out) / ("ablation_" + kind + ".csv")).string();
      check(bsplat_ablate(cfg.p, data.p, kind.c_str(), csv.c_str()));
      std::ifstream in(csv);
      std::cout << in.rdbuf();
      return 0;
    }
    if (*synth) {
      check(bsplat_synth(synth_out.c_str()));
      return 0;
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "bsplat: %s: %s\n", bsplat_status_name(f.status), f.message.c_str());
    return exit_code(f.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bsplat: %s\n", e.what());
    return 2;
  }
  return 0;
}
