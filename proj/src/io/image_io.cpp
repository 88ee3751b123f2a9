#include "ecam/image_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>

#include <jpeglib.h>
#include <png.h>

#include <fmt/format.h>

#include "ecam/container.hpp"
#include "ecam/error.hpp"

namespace ecam {
namespace {

struct PngReadSource {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
  if (src->pos + n > src->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(out, src->bytes.data() + src->pos, n);
  src->pos += n;
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void png_flush_noop(png_structp) {}

void png_error_throw(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  *err = msg;
  png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

bool is_png(std::span<const std::uint8_t> b) { return b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0; }
bool is_jpeg(std::span<const std::uint8_t> b) { return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF; }

// Decodes into 8-bit with the requested channel count (1 = gray, 3 = RGB).
std::vector<std::uint8_t> decode_png(std::span<const std::uint8_t> bytes, int channels, ImageDims& dims,
                                     const std::filesystem::path& path) {
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_throw, png_warning_ignore);
  if (png == nullptr) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  PngReadSource src{bytes, 0};

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(fmt::format("{}: PNG decode failed: {}", path.string(), err), src.pos);
  }
  png_set_read_fn(png, &src, png_read_from_memory);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  const bool source_gray = (color & PNG_COLOR_MASK_COLOR) == 0;
  if (channels == 1 && !source_gray) {
    // Rec. 709 luminance weights (the libpng defaults, pinned).
    png_set_rgb_to_gray_fixed(png, 1, 21268, 71514);
  }
  if (channels == 3 && source_gray) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  dims = {png_get_image_height(png, info), png_get_image_width(png, info)};
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != dims.width * static_cast<std::size_t>(channels)) {
    png_error(png, "unexpected row layout after transforms");
  }
  pixels.resize(rowbytes * dims.height);
  rows.resize(dims.height);
  for (std::size_t r = 0; r < dims.height; ++r) rows[r] = pixels.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, mgr->message);
  std::longjmp(mgr->jump, 1);
}

RgbImage decode_jpeg(std::span<const std::uint8_t> bytes, const std::filesystem::path& path) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  RgbImage img;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw ParseError(fmt::format("{}: JPEG decode failed: {}", path.string(), err.message), std::nullopt);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  img.dims = {cinfo.output_height, cinfo.output_width};
  img.rgb.resize(img.dims.pixels() * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * img.dims.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

std::vector<std::uint8_t> encode_png(const std::uint8_t* pixels, ImageDims dims, int channels) {
  if (dims.pixels() == 0) throw InvalidArgumentError("encode_png: empty image");
  std::vector<std::uint8_t> out;
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_throw, png_warning_ignore);
  if (png == nullptr) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(fmt::format("PNG encode failed: {}", err));
  }
  png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(dims.width), static_cast<png_uint_32>(dims.height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
  png_write_info(png, info);
  const std::size_t rowbytes = dims.width * static_cast<std::size_t>(channels);
  for (std::size_t r = 0; r < dims.height; ++r) {
    png_write_row(png, const_cast<png_bytep>(pixels + r * rowbytes));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

RgbImage read_rgb_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (is_png(bytes)) {
    RgbImage img;
    img.rgb = decode_png(bytes, 3, img.dims, path);
    return img;
  }
  if (is_jpeg(bytes)) return decode_jpeg(bytes, path);
  throw ParseError(fmt::format("{}: not a PNG or JPEG file", path.string()), 0);
}

GrayImage read_gray_png(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (!is_png(bytes)) throw ParseError(fmt::format("{}: not a PNG file", path.string()), 0);
  GrayImage img;
  img.luma = decode_png(bytes, 1, img.dims, path);
  return img;
}

std::vector<std::uint8_t> encode_png_rgb(const RgbImage& image) {
  if (image.rgb.size() != image.dims.pixels() * 3) throw DimensionError("encode_png_rgb: buffer size mismatch");
  return encode_png(image.rgb.data(), image.dims, 3);
}

std::vector<std::uint8_t> encode_png_gray(const GrayImage& image) {
  if (image.luma.size() != image.dims.pixels()) throw DimensionError("encode_png_gray: buffer size mismatch");
  return encode_png(image.luma.data(), image.dims, 1);
}

void write_png(const std::filesystem::path& path, const RgbImage& image) { write_file_atomic(path, encode_png_rgb(image)); }

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  write_file_atomic(path, encode_png_gray(image));
}

}  // namespace ecam
