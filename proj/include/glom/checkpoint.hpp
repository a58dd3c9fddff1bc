#ifndef GLOM_CHECKPOINT_HPP
#define GLOM_CHECKPOINT_HPP

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "glom/arch.hpp"
#include "glom/error.hpp"

namespace glom {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian; big-endian hosts unsupported");

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'G', 'L', 'O', 'M'};

// Parameters and batch-norm state are stored in single precision; training
// math stays double and widens on load.
struct NamedTensorF32 {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;

  bool operator==(const NamedTensorF32&) const = default;
};

struct TrainMeta {
  int epoch = 0;
  std::uint64_t seed = 0;
  double val_accuracy = 0.0;
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const TrainMeta&) const = default;
};

struct ModelCheckpoint {
  std::uint32_t version = kCheckpointVersion;
  ArchitectureSpec spec;
  std::vector<NamedTensorF32> tensors;  // directory order == payload order
  TrainMeta meta;

  bool operator==(const ModelCheckpoint&) const = default;

  const NamedTensorF32* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

namespace ckpt_detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

inline void put_u64(std::string& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

}  // namespace ckpt_detail

// Layout: "GLOM" | u32 version | u64 header length | JSON header |
// f32 payload in directory order | u32 CRC-32 of the payload.
inline void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path) {
  nlohmann::json dir = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    dir.push_back({{"name", t.name},
                   {"shape", t.shape},
                   {"offset", offset},
                   {"count", t.data.size()}});
    offset += t.data.size() * sizeof(float);
  }
  nlohmann::json header{{"arch", ckpt.spec.to_json()},
                        {"tensors", std::move(dir)},
                        {"meta",
                         {{"epoch", ckpt.meta.epoch},
                          {"seed", ckpt.meta.seed},
                          {"val_accuracy", ckpt.meta.val_accuracy},
                          {"extra", ckpt.meta.extra}}}};
  const std::string header_bytes = header.dump();

  std::string payload;
  payload.reserve(offset);
  for (const auto& t : ckpt.tensors)
    payload.append(reinterpret_cast<const char*>(t.data.data()),
                   t.data.size() * sizeof(float));
  const auto crc = static_cast<std::uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(payload.data()),
            static_cast<uInt>(payload.size())));

  std::string blob;
  blob.append(kCheckpointMagic, 4);
  ckpt_detail::put_u32(blob, ckpt.version);
  ckpt_detail::put_u64(blob, header_bytes.size());
  blob += header_bytes;
  blob += payload;
  ckpt_detail::put_u32(blob, crc);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write '" + path + "'");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("checkpoint: short write to '" + path + "'");
}

inline ModelCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot read '" + path + "'");
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());

  if (blob.size() < 16 || std::memcmp(blob.data(), kCheckpointMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic in '" + path + "'");
  std::uint32_t version;
  std::memcpy(&version, blob.data() + 4, 4);
  if (version > kCheckpointVersion)
    throw VersionError("checkpoint: version " + std::to_string(version) +
                       " newer than supported " +
                       std::to_string(kCheckpointVersion));
  std::uint64_t header_len;
  std::memcpy(&header_len, blob.data() + 8, 8);
  if (blob.size() < 16 + header_len)
    throw IntegrityError("checkpoint: truncated header in '" + path + "'");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint: bad header JSON: " + std::string(e.what()));
  }

  ModelCheckpoint ckpt;
  ckpt.version = version;
  try {
    ckpt.spec = ArchitectureSpec::from_json(header.at("arch"));
    ckpt.meta.epoch = header.at("meta").at("epoch").get<int>();
    ckpt.meta.seed = header.at("meta").at("seed").get<std::uint64_t>();
    ckpt.meta.val_accuracy = header.at("meta").at("val_accuracy").get<double>();
    ckpt.meta.extra = header.at("meta").at("extra");

    std::uint64_t payload_len = 0;
    for (const auto& tj : header.at("tensors")) {
      NamedTensorF32 t;
      t.name = tj.at("name").get<std::string>();
      t.shape = tj.at("shape").get<std::vector<int>>();
      const auto count = tj.at("count").get<std::uint64_t>();
      const auto offset = tj.at("offset").get<std::uint64_t>();
      if (offset != payload_len)
        throw FormatError("checkpoint: non-contiguous tensor directory");
      t.data.resize(count);
      payload_len += count * sizeof(float);
      ckpt.tensors.push_back(std::move(t));
    }

    const std::size_t payload_start = 16 + header_len;
    if (blob.size() != payload_start + payload_len + 4)
      throw IntegrityError("checkpoint: truncated payload in '" + path + "'");

    const auto crc_want = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(blob.data() + payload_start),
              static_cast<uInt>(payload_len)));
    std::uint32_t crc_got;
    std::memcpy(&crc_got, blob.data() + payload_start + payload_len, 4);
    if (crc_want != crc_got)
      throw IntegrityError("checkpoint: payload CRC mismatch in '" + path + "'");

    std::size_t at = payload_start;
    for (auto& t : ckpt.tensors) {
      std::memcpy(t.data.data(), blob.data() + at, t.data.size() * sizeof(float));
      at += t.data.size() * sizeof(float);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint: bad header field: " + std::string(e.what()));
  }
  return ckpt;
}

}  // namespace glom

#endif  // GLOM_CHECKPOINT_HPP
