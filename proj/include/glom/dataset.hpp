#ifndef GLOM_DATASET_HPP
#define GLOM_DATASET_HPP

#include <algorithm>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include "glom/error.hpp"
#include "glom/image.hpp"
#include "glom/tensor.hpp"

namespace glom {

struct Sample {
  std::string id;
  Tensor image;  // [3,S,S] in [0,1]
  int label = 0;
  // Provenance: index of the originating sample and whether this is an
  // augmented copy. Validation folds must only ever see originals.
  int source_index = -1;
  bool augmented = false;
};

struct LabeledImageSet {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;

  std::size_t size() const { return samples.size(); }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
  }

  void validate() const {
    if (samples.empty()) throw DataError("dataset: empty");
    std::vector<int> per_class(class_names.size(), 0);
    std::unordered_set<std::string> ids;
    for (const auto& s : samples) {
      if (s.label < 0 || s.label >= static_cast<int>(class_names.size()))
        throw DataError("dataset: label " + std::to_string(s.label) +
                        " outside class vocabulary");
      ++per_class[static_cast<std::size_t>(s.label)];
      if (!ids.insert(s.id).second)
        throw DataError("dataset: duplicate sample id '" + s.id + "'");
    }
    for (std::size_t c = 0; c < per_class.size(); ++c)
      if (per_class[c] == 0)
        throw DataError("dataset: class '" + class_names[c] + "' has no samples");
  }
};

// Decoded RGB pixels -> [3,size,size] in [0,1]. Identity when the input
// already conforms.
inline Tensor preprocess(const ImageU8& img, int size = 224) {
  if (img.width < 1 || img.height < 1)
    throw DataError("preprocess: empty image");
  Tensor t = image_to_tensor(img);
  if (img.width == size && img.height == size) return t;
  return resize_bilinear(t, size, size);
}

inline Tensor preprocess(const Tensor& image, int size) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw DimensionError("preprocess: need [3,H,W], got " + image.shape_str());
  if (image.dim(1) == size && image.dim(2) == size) return image;
  return resize_bilinear(image, size, size);
}

// Directory layout: root/<class_name>/*.png|*.jpg|*.jpeg. Classes are sorted
// by name, files sorted within a class, so ordering is deterministic.
inline LabeledImageSet load_dataset(const std::string& root, int image_size = 224) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root))
    throw DataError("load_dataset: '" + root + "' is not a directory");

  LabeledImageSet set;
  std::vector<std::string> class_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory())
      class_dirs.push_back(entry.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty())
    throw DataError("load_dataset: no class directories under '" + root + "'");
  set.class_names = class_dirs;

  for (std::size_t label = 0; label < class_dirs.size(); ++label) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(fs::path(root) / class_dirs[label])) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
        files.push_back(entry.path().filename().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw DataError("load_dataset: class directory '" + class_dirs[label] +
                      "' holds no images");
    for (const auto& file : files) {
      const std::string path = (fs::path(root) / class_dirs[label] / file).string();
      Sample s;
      s.id = class_dirs[label] + "/" + file;
      s.image = preprocess(read_image(path), image_size);
      s.label = static_cast<int>(label);
      s.source_index = static_cast<int>(set.samples.size());
      set.samples.push_back(std::move(s));
    }
  }
  set.validate();
  return set;
}

}  // namespace glom

#endif  // GLOM_DATASET_HPP
