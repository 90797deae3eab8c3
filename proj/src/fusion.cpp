#include "fusion.hpp"

#include "image_io.hpp"

#include <json.hpp>

#include <Eigen/QR>

#include <algorithm>
#include <map>

namespace bsplat {

Image RadiometricTransform::apply(const Image& rendered) const {
  if (rendered.channels != 3) throw InvalidArgument("color transform needs a 3-channel image");
  Image out = rendered;
  for (std::size_t p = 0; p < rendered.pixel_count(); ++p) {
    const Eigen::Map<const Vec3> c(&rendered.data[3 * p]);
    Eigen::Map<Vec3>(&out.data[3 * p]) = gain * c + bias;
  }
  return out;
}

Image RadiometricTransform::pull_back(const Image& grad) const {
  if (grad.channels != 3) throw InvalidArgument("color transform needs a 3-channel image");
  Image out = grad;
  const Mat3 gt = gain.transpose();
  for (std::size_t p = 0; p < grad.pixel_count(); ++p) {
    const Eigen::Map<const Vec3> g(&grad.data[3 * p]);
    Eigen::Map<Vec3>(&out.data[3 * p]) = gt * g;
  }
  return out;
}

double availability_score(const RadiometricTransform& t) {
  double diag = 0.0, off = 0.0;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (r == c) {
        diag = std::max(diag, std::abs(t.gain(r, c) - 1.0));
      } else {
        off += std::abs(t.gain(r, c));
      }
    }
  }
  const double bias = t.bias.cwiseAbs().sum() / 3.0;
  return diag + off / 6.0 + bias;
}

RegistrationResult fit_radiometric(const Scene& anchor, const CameraView& aux_view,
                                   const RegistrationOptions& options) {
  RegistrationResult result;
  result.transform.view_id = aux_view.id;
  aux_view.validate();
  if (aux_view.image.channels != 3) throw DataError("aux view '" + aux_view.id + "' is not RGB");

  const RenderOutput full = render(anchor, aux_view, options.background, options.render);
  const int w = aux_view.intrinsics.width, h = aux_view.intrinsics.height;
  const Image rendered = box_downsample(full.image, options.downsample);
  const Image transmittance = box_downsample(gray_image(full.transmittance, w, h), options.downsample);
  const Image observed = box_downsample(aux_view.image, options.downsample);

  std::vector<std::size_t> valid;
  for (std::size_t p = 0; p < transmittance.pixel_count(); ++p) {
    if (transmittance.data[p] < options.valid_transmittance) valid.push_back(p);
  }
  result.valid_pixels = static_cast<std::int64_t>(valid.size());
  if (result.valid_pixels < options.min_valid_pixels) {
    result.message = "registration failed: " + std::to_string(valid.size()) + " valid pixels, need " +
                     std::to_string(options.min_valid_pixels);
    return result;
  }

  Eigen::MatrixXd a(valid.size(), 4);
  Eigen::MatrixXd y(valid.size(), 3);
  for (std::size_t i = 0; i < valid.size(); ++i) {
    const std::size_t p = valid[i];
    for (int c = 0; c < 3; ++c) {
      a(static_cast<Eigen::Index>(i), c) = rendered.data[3 * p + c];
      y(static_cast<Eigen::Index>(i), c) = observed.data[3 * p + c];
    }
    a(static_cast<Eigen::Index>(i), 3) = 1.0;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 4) {
    result.message = "registration failed: anchor render is rank deficient on the valid pixels";
    return result;
  }
  const Eigen::MatrixXd x = qr.solve(y);  // 4 x 3, column c predicts channel c
  result.transform.gain = x.topRows<3>().transpose();
  result.transform.bias = x.row(3).transpose();
  if (!result.transform.gain.allFinite() || !result.transform.bias.allFinite()) {
    result.message = "registration failed: non-finite fit";
    return result;
  }
  result.ok = true;
  return result;
}

std::vector<std::string> AvailabilityReport::accepted_ids() const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (e.accepted) out.push_back(e.view_id);
  return out;
}

std::vector<std::string> AvailabilityReport::rejected_ids() const {
  std::vector<std::string> out;
  for (const auto& e : entries)
    if (!e.accepted) out.push_back(e.view_id);
  return out;
}

std::string AvailabilityReport::to_json() const {
  using nlohmann::json;
  auto number = [](double v) -> json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  json views = json::array();
  for (const auto& e : entries) {
    json gain = json::array();
    for (int r = 0; r < 3; ++r) gain.push_back({e.transform.gain(r, 0), e.transform.gain(r, 1), e.transform.gain(r, 2)});
    views.push_back({{"view_id", e.view_id},
                     {"score", number(e.score)},
                     {"decision", e.accepted ? "accept" : "reject"},
                     {"registration_failed", e.registration_failed},
                     {"valid_pixels", e.valid_pixels},
                     {"gain", gain},
                     {"bias", {e.transform.bias[0], e.transform.bias[1], e.transform.bias[2]}},
                     {"message", e.message}});
  }
  json doc = {{"tau", number(tau)}, {"views", views}};
  return doc.dump(2) + "\n";
}

AvailabilityReport register_views(const Scene& anchor, const std::vector<CameraView>& aux_views, double tau,
                                  const RegistrationOptions& options) {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  AvailabilityReport report;
  report.tau = tau;
  for (const auto& view : aux_views) {
    AvailabilityEntry e;
    e.view_id = view.id;
    e.tau = tau;
    const RegistrationResult fit = fit_radiometric(anchor, view, options);
    e.transform = fit.transform;
    e.valid_pixels = fit.valid_pixels;
    if (fit.ok) {
      e.score = availability_score(fit.transform);
      e.accepted = !(e.score > tau);
    } else {
      e.registration_failed = true;
      e.message = fit.message;
    }
    report.entries.push_back(std::move(e));
  }
  std::stable_sort(report.entries.begin(), report.entries.end(),
                   [](const AvailabilityEntry& a, const AvailabilityEntry& b) { return a.view_id < b.view_id; });
  return report;
}

AvailabilityReport rethreshold(const AvailabilityReport& report, double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  AvailabilityReport out = report;
  out.tau = tau;
  for (auto& e : out.entries) {
    e.tau = tau;
    e.accepted = !e.registration_failed && !(e.score > tau);
  }
  return out;
}

FusionResult hybrid_from_anchor(const Scene& anchor, const std::vector<CameraView>& primary_views,
                                const std::vector<CameraView>& aux_views, const AvailabilityReport& report,
                                const FusionOptions& options, const TrainFn& train_fn) {
  FusionResult out;
  out.anchor = anchor;
  out.report = report;
  for (const auto& v : primary_views) {
    out.hybrid_views.push_back(v);
    RadiometricTransform identity;
    identity.view_id = v.id;
    out.hybrid_corrections.push_back(identity);
  }
  std::map<std::string, const CameraView*> by_id;
  for (const auto& v : aux_views) by_id[v.id] = &v;
  for (const auto& e : report.entries) {
    if (!e.accepted) continue;
    const auto it = by_id.find(e.view_id);
    if (it == by_id.end()) throw DataError("report names unknown aux view '" + e.view_id + "'");
    out.hybrid_views.push_back(it->second->downsampled(options.registration.downsample));
    RadiometricTransform t = options.apply_correction ? e.transform : RadiometricTransform{};
    t.view_id = e.view_id;
    out.hybrid_corrections.push_back(t);
  }
  out.scene = train_fn(anchor, out.hybrid_views, out.hybrid_corrections);
  return out;
}

FusionResult run_protocol(const Scene& init, const std::vector<CameraView>& primary_views,
                          const std::vector<CameraView>& aux_views, const FusionOptions& options,
                          const TrainFn& train_fn) {
  if (primary_views.size() < 2) throw DataError("fusion needs at least 2 primary views");
  std::vector<RadiometricTransform> identity(primary_views.size());
  for (std::size_t i = 0; i < primary_views.size(); ++i) identity[i].view_id = primary_views[i].id;
  const Scene anchor = train_fn(init, primary_views, identity);
  const AvailabilityReport report = register_views(anchor, aux_views, options.tau, options.registration);
  return hybrid_from_anchor(anchor, primary_views, aux_views, report, options, train_fn);
}

}  // namespace bsplat
