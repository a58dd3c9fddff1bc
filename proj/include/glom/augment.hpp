#ifndef GLOM_AUGMENT_HPP
#define GLOM_AUGMENT_HPP

#include <cmath>
#include <numbers>
#include <string>

#include "glom/dataset.hpp"
#include "glom/error.hpp"
#include "glom/random.hpp"

namespace glom {

// Random-transform ranges: rotation +-degrees, horizontal flip probability,
// zoom as a scale interval, shift as a fraction of width/height.
struct AugmentSpec {
  double rotation_deg = 20.0;
  double flip_prob = 0.5;
  double zoom_lo = 0.9;
  double zoom_hi = 1.1;
  double shift_frac = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (rotation_deg < 0) throw ParameterError("augment: negative rotation range");
    if (flip_prob < 0 || flip_prob > 1)
      throw ParameterError("augment: flip probability outside [0,1]");
    if (zoom_lo <= 0 || zoom_hi < zoom_lo)
      throw ParameterError("augment: zoom range must satisfy 0 < lo <= hi");
    if (shift_frac < 0 || shift_frac >= 1)
      throw ParameterError("augment: shift fraction outside [0,1)");
  }
};

namespace detail {

// One composed rotation/flip/zoom/shift draw. The transform seed depends on
// the sample's position in the set, not its id, so equal subsets augment
// equally regardless of naming.
inline Tensor random_transform(const Tensor& image, const AugmentSpec& spec,
                               std::uint64_t position) {
  Rng rng(derive_seed(spec.seed, position));
  const double theta =
      rng.uniform(-spec.rotation_deg, spec.rotation_deg) * std::numbers::pi / 180.0;
  const bool flip = rng.bernoulli(spec.flip_prob);
  const double zoom = rng.uniform(spec.zoom_lo, spec.zoom_hi);
  const int H = image.dim(1), W = image.dim(2);
  const double shift_x = rng.uniform(-spec.shift_frac, spec.shift_frac) * W;
  const double shift_y = rng.uniform(-spec.shift_frac, spec.shift_frac) * H;

  // dst -> src about the image center: undo shift, then rotation and zoom,
  // then the horizontal flip.
  const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double inv_z = 1.0 / zoom;
  const double fx = flip ? -1.0 : 1.0;
  // src = F * (R(-theta)/z * (dst - c - t)) + c
  double m[6];
  m[0] = fx * inv_z * cos_t;
  m[1] = fx * inv_z * sin_t;
  m[3] = -inv_z * sin_t;
  m[4] = inv_z * cos_t;
  m[2] = cx - m[0] * (cx + shift_x) - m[1] * (cy + shift_y);
  m[5] = cy - m[3] * (cx + shift_x) - m[4] * (cy + shift_y);
  return affine_sample(image, m);
}

}  // namespace detail

// Exactly doubles the set: every original plus one transformed copy, labels
// preserved, copies marked with provenance.
inline LabeledImageSet augment(const LabeledImageSet& set, const AugmentSpec& spec) {
  spec.validate();
  LabeledImageSet out;
  out.class_names = set.class_names;
  out.samples.reserve(set.samples.size() * 2);
  for (const auto& s : set.samples) out.samples.push_back(s);
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    const Sample& src = set.samples[i];
    Sample copy;
    copy.id = src.id + "~1";
    copy.image = detail::random_transform(src.image, spec, i);
    copy.label = src.label;
    copy.source_index = src.source_index;
    copy.augmented = true;
    out.samples.push_back(std::move(copy));
  }
  return out;
}

}  // namespace glom

#endif  // GLOM_AUGMENT_HPP
