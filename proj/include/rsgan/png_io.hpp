#pragma once

// 8-bit PNG encode/decode through libpng. Encoder settings are pinned
// (8-bit, no interlace, fixed compression and filter, no timestamp chunks)
// so identical images always encode to identical bytes.

#include <png.h>

#include <csetjmp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsgan/image.hpp"

namespace rsgan {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace png_detail {

struct WriteBuffer {
  std::vector<std::uint8_t>* out;
};

inline void write_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* buf = static_cast<WriteBuffer*>(png_get_io_ptr(png));
  buf->out->insert(buf->out->end(), data, data + len);
}
inline void flush_fn(png_structp) {}

struct ReadBuffer {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

inline void read_fn(png_structp png, png_bytep out, png_size_t len) {
  auto* buf = static_cast<ReadBuffer*>(png_get_io_ptr(png));
  if (buf->pos + len > buf->size) png_error(png, "truncated PNG");
  std::memcpy(out, buf->data + buf->pos, len);
  buf->pos += len;
}

inline void error_fn(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}
inline void warning_fn(png_structp, png_const_charp) {}

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp((v + 1.0f) * 127.5f, 0.f, 255.f)));
}

struct EncodeState {
  const Image* im;
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> row;
  std::string err;
};

// All C++ state lives in the caller's frame; only the libpng handles are
// local here, so a longjmp out of libpng leaves nothing indeterminate.
inline bool encode_into(EncodeState* st) {
  const Image& im = *st->im;
  const int c = channels(im), h = height(im), w = width(im);
  st->row.resize(static_cast<std::size_t>(w) * c);
  WriteBuffer buf{&st->out};
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &st->err, error_fn, warning_fn);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &buf, write_fn, flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k)
        st->row[static_cast<std::size_t>(x * c + k)] = to_byte(px(im, k, y, x));
    png_write_row(png, st->row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

struct DecodeState {
  ReadBuffer buf;
  bool gray;
  Image out;
  std::vector<std::uint8_t> row;
  std::string err;
};

inline bool decode_into(DecodeState* st) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &st->err, error_fn, warning_fn);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &st->buf, read_fn);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_expand(png);
  png_set_palette_to_rgb(png);
  const auto color = png_get_color_type(png, info);
  if (st->gray) {
    if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  } else if (!(color & PNG_COLOR_MASK_COLOR)) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int c = png_get_channels(png, info);
  st->row.resize(png_get_rowbytes(png, info));
  st->out = make_image(c, h, w);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, st->row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k)
        px(st->out, k, y, x) = st->row[static_cast<std::size_t>(x * c + k)] / 127.5f - 1.f;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

}  // namespace png_detail

/// Encodes a 1- or 3-channel [-1,1] image as 8-bit gray or RGB PNG.
inline std::vector<std::uint8_t> encode_png(const Image& im) {
  if (channels(im) != 1 && channels(im) != 3) throw ImageIoError("encode_png: need 1 or 3 channels");
  png_detail::EncodeState st{&im, {}, {}, {}};
  if (!png_detail::encode_into(&st)) throw ImageIoError("png encode: " + st.err);
  return std::move(st.out);
}

/// Decodes any 8/16-bit PNG into a 3-channel [-1,1] image (gray is replicated,
/// alpha dropped). With `gray` set, returns a single channel instead.
inline Image decode_png(const std::uint8_t* data, std::size_t size, bool gray = false) {
  if (size < 8 || png_sig_cmp(data, 0, 8) != 0) throw ImageIoError("not a PNG stream");
  png_detail::DecodeState st{{data, size, 0}, gray, {}, {}, {}};
  if (!png_detail::decode_into(&st)) throw ImageIoError("png decode: " + st.err);
  return std::move(st.out);
}

inline Image decode_png(const std::vector<std::uint8_t>& bytes, bool gray = false) {
  return decode_png(bytes.data(), bytes.size(), gray);
}

inline Image decode_png(const std::string& bytes, bool gray = false) {
  return decode_png(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size(), gray);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageIoError("write failed for " + path.string());
}

inline Image read_png(const std::filesystem::path& path, bool gray = false) {
  return decode_png(read_file_bytes(path), gray);
}

inline void write_png(const std::filesystem::path& path, const Image& im) {
  write_file_bytes(path, encode_png(im));
}

inline void write_png(const std::filesystem::path& path, const BinaryMask& m) {
  Image im = make_image(1, m.height, m.width);
  for (std::size_t i = 0; i < m.bits.size(); ++i) im.data[i] = m.bits[i] ? 1.f : -1.f;
  write_png(path, im);
}

inline BinaryMask read_mask_png(const std::filesystem::path& path) {
  Image im = read_png(path, true);
  return BinaryMask::threshold(im, 0.f);
}

}  // namespace rsgan
