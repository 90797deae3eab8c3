#pragma once

#include "render.hpp"
#include "scene.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace bsplat {

// Affine color map C' = G C + b applied to renders of one view.
struct RadiometricTransform {
  std::string view_id;
  Mat3 gain = Mat3::Identity();
  Vec3 bias = Vec3::Zero();

  bool identity() const { return gain == Mat3::Identity() && bias == Vec3::Zero(); }
  Image apply(const Image& rendered) const;
  // Gradient w.r.t. the render given the gradient w.r.t. the mapped image (G^T).
  Image pull_back(const Image& grad) const;
};

// ||diag(G) - 1||_inf + mean|offdiag(G)| + mean|b|.
double availability_score(const RadiometricTransform& t);

struct RegistrationOptions {
  int downsample = 2;
  double valid_transmittance = 0.5;  // pixels with final T below this are fitted
  std::int64_t min_valid_pixels = 100;
  Vec3 background = Vec3::Zero();
  RenderSettings render;
};

struct RegistrationResult {
  RadiometricTransform transform;
  std::int64_t valid_pixels = 0;
  bool ok = false;
  std::string message;  // reason when !ok
};

// Least-squares fit of G, b mapping the frozen anchor's render onto the aux
// image, both box-downsampled by options.downsample.
RegistrationResult fit_radiometric(const Scene& anchor, const CameraView& aux_view,
                                   const RegistrationOptions& options = {});

struct AvailabilityEntry {
  std::string view_id;
  double score = std::numeric_limits<double>::infinity();
  double tau = 0.15;
  bool accepted = false;
  bool registration_failed = false;
  std::int64_t valid_pixels = 0;
  RadiometricTransform transform;
  std::string message;
};

struct AvailabilityReport {
  double tau = 0.15;
  std::vector<AvailabilityEntry> entries;  // sorted by view id

  std::vector<std::string> accepted_ids() const;
  std::vector<std::string> rejected_ids() const;
  std::string to_json() const;
};

// Fits and scores every aux view against the frozen anchor; reject iff S > tau.
AvailabilityReport register_views(const Scene& anchor, const std::vector<CameraView>& aux_views, double tau,
                                  const RegistrationOptions& options = {});

// Same decisions at a different threshold, without refitting.
AvailabilityReport rethreshold(const AvailabilityReport& report, double tau);

// Trains `init` on `views`; corrections[i] maps renders of views[i] before
// the loss.
using TrainFn = std::function<Scene(const Scene& init, const std::vector<CameraView>& views,
                                    const std::vector<RadiometricTransform>& corrections)>;

struct FusionOptions {
  double tau = 0.15;
  bool apply_correction = true;  // false trains accepted views uncorrected
  RegistrationOptions registration;
};

struct FusionResult {
  Scene anchor;
  Scene scene;
  AvailabilityReport report;
  std::vector<CameraView> hybrid_views;
  std::vector<RadiometricTransform> hybrid_corrections;
};

// Foundation training on primary views, frozen-anchor registration of aux
// views, then continued training on primary + accepted aux views.
FusionResult run_protocol(const Scene& init, const std::vector<CameraView>& primary_views,
                          const std::vector<CameraView>& aux_views, const FusionOptions& options,
                          const TrainFn& train_fn);

// Continued training of an existing anchor on primary + the given aux views.
// Aux views are downsampled like registration inputs.
FusionResult hybrid_from_anchor(const Scene& anchor, const std::vector<CameraView>& primary_views,
                                const std::vector<CameraView>& aux_views, const AvailabilityReport& report,
                                const FusionOptions& options, const TrainFn& train_fn);

}  // namespace bsplat
