#pragma once

// Glue shared by the C API, the CLI and the acceptance binary: scene
// initialization from a dataset, the fusion train function, and the ablation
// harness.

#include "dataset.hpp"
#include "trainer.hpp"

namespace bsplat {

// Seeded initial scene for `data`. Without a partition file every primitive
// is background and the background target is the initial count.
Scene initial_scene(const Dataset& data, const TrainConfig& config);

// TrainFn running trainer.train with `config`; the result's ledger and
// metrics are appended to the optional sinks.
TrainFn make_train_fn(const TrainConfig& config, std::vector<TrainResult>* runs = nullptr);

FusionOptions fusion_options(const TrainConfig& config, double tau);

struct SuiteVariant {
  ToggleSet toggles;
  OpacityAttenuation opacity_mode = OpacityAttenuation::Multiplicative;
  std::string label() const;
};

// All 2^4 combinations of the three suite toggles and the opacity mode,
// all-off first.
std::vector<SuiteVariant> all_suite_variants();

struct AblationRow {
  std::string row;    // "1".."16" or "(a)".."(f)"
  std::string label;
  SuiteVariant variant;
  std::int64_t aux_views = 0;  // fusion rows only
  std::int64_t primitives = 0;
  double psnr = 0.0;  // held-out means
  double ssim = 0.0;
  double seconds = 0.0;
};

using AblationProgress = std::function<void(const AblationRow&)>;

// Trains each variant from the same seeded initial scene on data.primary and
// evaluates on data.heldout.
std::vector<AblationRow> run_suite_ablation(const Dataset& data, const TrainConfig& config,
                                            const std::vector<SuiteVariant>& variants,
                                            const AblationProgress& progress = {});

// The six fusion strategies: (a) single sensor, (b) direct fusion,
// (c) random sampling of as many aux views as (e) accepts, (d-f) A.R. with
// tau = 0.1, 0.15, 0.3. All rows continue from one shared anchor.
std::vector<AblationRow> run_fusion_ablation(const Dataset& data, const TrainConfig& config,
                                             const AblationProgress& progress = {});

std::string suite_ablation_csv(const std::vector<AblationRow>& rows);
std::string fusion_ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace bsplat
