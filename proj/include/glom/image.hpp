#ifndef GLOM_IMAGE_HPP
#define GLOM_IMAGE_HPP

#include <cstddef>
#include <cstdio>

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "glom/error.hpp"
#include "glom/tensor.hpp"

namespace glom {

// Interleaved 8-bit RGB.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  bool operator==(const ImageU8&) const = default;
};

namespace imgio {

inline ImageU8 read_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw FormatError("png: cannot read '" + path + "': " + image.message);
  image.format = PNG_FORMAT_RGB;  // palette/gray/alpha all normalized to RGB
  ImageU8 out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.rgb.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError("png: decode failed for '" + path + "': " + image.message);
  }
  return out;
}

inline void write_png(const std::string& path, const ImageU8& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.rgb.data(), 0,
                               nullptr))
    throw IoError("png: cannot write '" + path + "': " + image.message);
}

namespace detail {
struct JpegErrorTrap {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX] = {0};
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* trap = reinterpret_cast<JpegErrorTrap*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, trap->message);
  std::longjmp(trap->jump, 1);
}
}  // namespace detail

inline ImageU8 read_jpeg(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("jpeg: cannot open '" + path + "'");

  jpeg_decompress_struct cinfo;
  detail::JpegErrorTrap trap;
  cinfo.err = jpeg_std_error(&trap.mgr);
  trap.mgr.error_exit = detail::jpeg_error_exit;
  if (setjmp(trap.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    throw FormatError("jpeg: decode failed for '" + path + "': " + trap.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  ImageU8 out;
  out.width = static_cast<int>(cinfo.output_width);
  out.height = static_cast<int>(cinfo.output_height);
  out.rgb.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    std::uint8_t* row =
        out.rgb.data() +
        static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(f);
  return out;
}

}  // namespace imgio

inline ImageU8 read_image(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return imgio::read_png(path);
  if (ext == ".jpg" || ext == ".jpeg") return imgio::read_jpeg(path);
  throw FormatError("image: unsupported extension '" + ext + "' for '" + path + "'");
}

// [3,H,W] tensor in [0,1] <-> 8-bit image. Quantization is round-to-nearest.
inline Tensor image_to_tensor(const ImageU8& img) {
  Tensor t({3, img.height, img.width});
  const std::size_t hw = static_cast<std::size_t>(img.height) * img.width;
  for (std::size_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c)
      t[static_cast<std::size_t>(c) * hw + p] = img.rgb[p * 3 + c] / 255.0;
  return t;
}

inline ImageU8 tensor_to_image(const Tensor& t) {
  if (t.rank() != 3 || t.dim(0) != 3)
    throw DimensionError("tensor_to_image: need [3,H,W], got " + t.shape_str());
  ImageU8 img;
  img.height = t.dim(1);
  img.width = t.dim(2);
  const std::size_t hw = static_cast<std::size_t>(img.height) * img.width;
  img.rgb.resize(hw * 3);
  for (std::size_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(t[static_cast<std::size_t>(c) * hw + p], 0.0, 1.0);
      img.rgb[p * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  return img;
}

// Bilinear resize with the half-pixel convention: a same-size resize is the
// identity on the pixel grid.
inline Tensor resize_bilinear(const Tensor& src, int out_h, int out_w) {
  if (src.rank() != 3)
    throw DimensionError("resize: need [C,H,W], got " + src.shape_str());
  const int C = src.dim(0), H = src.dim(1), W = src.dim(2);
  if (out_h < 1 || out_w < 1) throw ParameterError("resize: empty target");
  Tensor dst({C, out_h, out_w});
  const double sy = static_cast<double>(H) / out_h;
  const double sx = static_cast<double>(W) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(H - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, H - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(W - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, W - 1);
      const double wx = fx - x0;
      for (int c = 0; c < C; ++c) {
        const double a = src.at(c, y0, x0) * (1 - wx) + src.at(c, y0, x1) * wx;
        const double b = src.at(c, y1, x0) * (1 - wx) + src.at(c, y1, x1) * wx;
        dst.at(c, oy, ox) = a * (1 - wy) + b * wy;
      }
    }
  }
  return dst;
}

// dst -> src affine map (2x3, row-major: [a b tx; c d ty]), bilinear sampling,
// edge-clamped out-of-bounds reads.
inline Tensor affine_sample(const Tensor& src, const double m[6]) {
  if (src.rank() != 3)
    throw DimensionError("affine_sample: need [C,H,W], got " + src.shape_str());
  const int C = src.dim(0), H = src.dim(1), W = src.dim(2);
  Tensor dst(src.shape());
  for (int oy = 0; oy < H; ++oy) {
    for (int ox = 0; ox < W; ++ox) {
      const double fx = std::clamp(m[0] * ox + m[1] * oy + m[2], 0.0,
                                   static_cast<double>(W - 1));
      const double fy = std::clamp(m[3] * ox + m[4] * oy + m[5], 0.0,
                                   static_cast<double>(H - 1));
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
      const double wx = fx - x0, wy = fy - y0;
      for (int c = 0; c < C; ++c) {
        const double a = src.at(c, y0, x0) * (1 - wx) + src.at(c, y0, x1) * wx;
        const double b = src.at(c, y1, x0) * (1 - wx) + src.at(c, y1, x1) * wx;
        dst.at(c, oy, ox) = a * (1 - wy) + b * wy;
      }
    }
  }
  return dst;
}

}  // namespace glom

#endif  // GLOM_IMAGE_HPP
