#ifndef GLOM_SYNTH_HPP
#define GLOM_SYNTH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "glom/dataset.hpp"
#include "glom/error.hpp"
#include "glom/image.hpp"
#include "glom/random.hpp"

namespace glom {

// Synthetic nuclei-density images: dark elliptical "nuclei" on a tissue-toned
// background. Classes differ by nucleus count and spatial arrangement, giving
// a desk-scale stand-in with the same learnable structure as the real task
// (lesions mean more, and more clustered, nuclei).
enum class NucleusPattern {
  scattered,  // uniform positions, low count (normal tissue)
  central,    // one dense central mass (endocapillary-like)
  clustered,  // several small tight clusters (mesangial-like)
  mixed       // central mass plus clusters (combined lesion)
};

struct SynthClass {
  std::string name;
  double count_mean = 10;
  double count_sd = 1.5;
  NucleusPattern pattern = NucleusPattern::scattered;
};

struct SynthSpec {
  int image_size = 64;
  int per_class = 100;
  std::vector<SynthClass> classes;
  std::array<double, 3> background = {0.91, 0.79, 0.85};
  double background_noise = 0.03;
  std::array<double, 3> nucleus = {0.36, 0.22, 0.50};
  double nucleus_noise = 0.05;
  // Counts above this are "lesion-dense"; normal draws must stay below it.
  double lesion_threshold = 22.0;
  std::uint64_t seed = 0;

  static std::vector<SynthClass> binary_classes() {
    return {{"lesion", 42.0, 4.0, NucleusPattern::mixed},
            {"normal", 11.0, 1.5, NucleusPattern::scattered}};
  }

  static std::vector<SynthClass> four_classes() {
    return {{"endo", 38.0, 4.0, NucleusPattern::central},
            {"endoMes", 58.0, 5.0, NucleusPattern::mixed},
            {"mesangial", 40.0, 4.0, NucleusPattern::clustered},
            {"normal", 11.0, 1.5, NucleusPattern::scattered}};
  }

  void validate() const {
    if (image_size < 16) throw ParameterError("synth: image size too small");
    if (per_class < 1) throw ParameterError("synth: count per class must be positive");
    if (classes.size() < 2) throw ParameterError("synth: need at least two classes");
    for (const auto& c : classes)
      if (c.count_mean <= 0 || c.count_sd < 0)
        throw ParameterError("synth: bad count distribution for '" + c.name + "'");
  }

  // Documented learnability margin: draws are clamped to mean +- 3 sd, so two
  // classes with distinct patterns stay separable while count intervals may
  // overlap; classes sharing a pattern need disjoint clamped intervals.
  bool learnable(std::string* why = nullptr) const {
    for (std::size_t a = 0; a < classes.size(); ++a)
      for (std::size_t b = a + 1; b < classes.size(); ++b) {
        if (classes[a].pattern != classes[b].pattern) continue;
        const double lo_a = classes[a].count_mean - 3 * classes[a].count_sd;
        const double hi_a = classes[a].count_mean + 3 * classes[a].count_sd;
        const double lo_b = classes[b].count_mean - 3 * classes[b].count_sd;
        const double hi_b = classes[b].count_mean + 3 * classes[b].count_sd;
        if (std::max(lo_a, lo_b) <= std::min(hi_a, hi_b)) {
          if (why)
            *why = "count distributions of '" + classes[a].name + "' and '" +
                   classes[b].name + "' overlap with identical patterns";
          return false;
        }
      }
    return true;
  }
};

struct SynthRecord {
  std::string id;
  std::string class_name;
  int nucleus_count = 0;
  std::uint64_t seed = 0;
};

struct SynthResult {
  LabeledImageSet set;
  std::vector<SynthRecord> manifest;
};

namespace synth_detail {

inline void paint_nucleus(Tensor& img, double cx, double cy, double r1,
                          double r2, double angle,
                          const std::array<double, 3>& color) {
  const int S = img.dim(1);
  const double cos_a = std::cos(angle), sin_a = std::sin(angle);
  const double rmax = std::max(r1, r2) + 1.0;
  const int x0 = std::max(0, static_cast<int>(cx - rmax));
  const int x1 = std::min(S - 1, static_cast<int>(cx + rmax) + 1);
  const int y0 = std::max(0, static_cast<int>(cy - rmax));
  const int y1 = std::min(S - 1, static_cast<int>(cy + rmax) + 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = (dx * cos_a + dy * sin_a) / r1;
      const double v = (-dx * sin_a + dy * cos_a) / r2;
      const double d = u * u + v * v;
      if (d >= 1.3) continue;
      // soft rim between d=1 and d=1.3
      const double cover = d <= 1.0 ? 1.0 : (1.3 - d) / 0.3;
      for (int c = 0; c < 3; ++c) {
        double& px = img.at(c, y, x);
        px = px * (1.0 - cover) + color[static_cast<std::size_t>(c)] * cover;
      }
    }
  }
}

struct Placement {
  double x, y;
};

inline Placement draw_position(NucleusPattern pattern, int which, int total,
                               int S, Rng& rng,
                               const std::vector<Placement>& clusters) {
  const double cx = S / 2.0, cy = S / 2.0;
  switch (pattern) {
    case NucleusPattern::scattered:
      return {rng.uniform(2.0, S - 2.0), rng.uniform(2.0, S - 2.0)};
    case NucleusPattern::central:
      return {cx + rng.normal(0.0, S / 9.0), cy + rng.normal(0.0, S / 9.0)};
    case NucleusPattern::clustered: {
      const auto& base = clusters[rng.below(clusters.size())];
      return {base.x + rng.normal(0.0, S / 22.0), base.y + rng.normal(0.0, S / 22.0)};
    }
    case NucleusPattern::mixed:
      if (which < total / 2)
        return {cx + rng.normal(0.0, S / 9.0), cy + rng.normal(0.0, S / 9.0)};
      return draw_position(NucleusPattern::clustered, which, total, S, rng, clusters);
  }
  return {cx, cy};
}

inline Tensor render(const SynthSpec& spec, const SynthClass& cls, int count,
                     Rng& rng) {
  const int S = spec.image_size;
  Tensor img({3, S, S});
  // background: base tone, mild speckle, faint radial falloff
  const double cx = (S - 1) / 2.0, cy = (S - 1) / 2.0;
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (cx * cx + cy * cy);
      const double shade = 1.0 - 0.06 * r2;
      const double noise = rng.uniform(-spec.background_noise, spec.background_noise);
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = std::clamp(
            spec.background[static_cast<std::size_t>(c)] * shade + noise, 0.0, 1.0);
    }
  }
  std::vector<Placement> clusters;
  const int num_clusters = 4 + static_cast<int>(rng.below(3));
  for (int k = 0; k < num_clusters; ++k)
    clusters.push_back({rng.uniform(S * 0.2, S * 0.8), rng.uniform(S * 0.2, S * 0.8)});

  const double base_r = S / 28.0;
  for (int i = 0; i < count; ++i) {
    const Placement p = draw_position(cls.pattern, i, count, S, rng, clusters);
    const double r1 = base_r * rng.uniform(0.8, 1.4);
    const double r2 = base_r * rng.uniform(0.6, 1.1);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    std::array<double, 3> color;
    for (int c = 0; c < 3; ++c)
      color[static_cast<std::size_t>(c)] =
          std::clamp(spec.nucleus[static_cast<std::size_t>(c)] +
                         rng.uniform(-spec.nucleus_noise, spec.nucleus_noise),
                     0.0, 1.0);
    paint_nucleus(img, p.x, p.y, r1, r2, angle, color);
  }
  return img;
}

}  // namespace synth_detail

// Deterministic per (spec.seed, class, index). The in-memory tensors are
// quantized through 8-bit so a persisted-and-reloaded dataset is identical.
inline SynthResult synth_generate(const SynthSpec& spec) {
  spec.validate();
  SynthResult result;
  result.set.class_names.reserve(spec.classes.size());
  for (const auto& c : spec.classes) result.set.class_names.push_back(c.name);

  for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
    const SynthClass& cls = spec.classes[ci];
    for (int i = 0; i < spec.per_class; ++i) {
      const std::uint64_t image_seed =
          derive_seed(spec.seed, (ci + 1) * 1000003ULL + static_cast<std::uint64_t>(i));
      Rng rng(image_seed);
      double raw = rng.normal(cls.count_mean, cls.count_sd);
      raw = std::clamp(raw, cls.count_mean - 3 * cls.count_sd,
                       cls.count_mean + 3 * cls.count_sd);
      const int count = std::max(1, static_cast<int>(std::lround(raw)));

      Tensor img = synth_detail::render(spec, cls, count, rng);
      img = image_to_tensor(tensor_to_image(img));  // pin to 8-bit levels

      char name[32];
      std::snprintf(name, sizeof name, "%s_%04d", cls.name.c_str(), i);
      Sample s;
      s.id = cls.name + "/" + name + ".png";
      s.image = std::move(img);
      s.label = static_cast<int>(ci);
      s.source_index = static_cast<int>(result.set.samples.size());
      result.set.samples.push_back(std::move(s));
      result.manifest.push_back(
          {name + std::string(".png"), cls.name, count, image_seed});
    }
  }
  result.set.validate();
  return result;
}

// Writes root/<class>/<id>.png plus root/manifest.csv
// (columns id,class,nucleus_count,seed).
inline void persist_synth(const SynthResult& result, const std::string& root) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("synth: cannot create '" + root + "': " + ec.message());
  for (const auto& name : result.set.class_names)
    fs::create_directories(fs::path(root) / name);

  for (const auto& s : result.set.samples)
    imgio::write_png((fs::path(root) / s.id).string(), tensor_to_image(s.image));

  std::ofstream manifest(fs::path(root) / "manifest.csv");
  if (!manifest) throw IoError("synth: cannot write manifest under '" + root + "'");
  manifest << "id,class,nucleus_count,seed\n";
  for (const auto& r : result.manifest)
    manifest << r.id << ',' << r.class_name << ',' << r.nucleus_count << ','
             << r.seed << '\n';
}

}  // namespace glom

#endif  // GLOM_SYNTH_HPP
