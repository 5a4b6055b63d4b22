#include "panoworld/raster_io.hpp"

#include "panoworld/common.hpp"

#include <png.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace panoworld {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) {
        throw Error("cannot open '" + path.string() + "'");
    }
    return f;
}

[[noreturn]] void png_error_fn(png_structp, png_const_charp msg) {
    throw Error(std::string("png: ") + msg);
}

void png_warning_fn(png_structp, png_const_charp) {}

void write_png(const std::filesystem::path& path, int width, int height, int bit_depth,
               const std::uint8_t* rows, std::size_t row_bytes) {
    auto f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn,
                                              png_warning_fn);
    if (!png) {
        throw Error("png: cannot create write struct");
    }
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_write_struct(p, i); }
    } guard{&png, &info};

    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
        png_write_row(png, rows + static_cast<std::size_t>(y) * row_bytes);
    }
    png_write_end(png, nullptr);
}

void check_dims(int width, int height, std::size_t n, std::size_t expected_per_px) {
    if (width <= 0 || height <= 0 ||
        n != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * expected_per_px) {
        throw Error("raster size does not match dimensions");
    }
}

}  // namespace

void write_png_rgb8(const std::filesystem::path& path, int width, int height,
                    std::span<const std::uint8_t> rgb) {
    check_dims(width, height, rgb.size(), 3);
    write_png(path, width, height, 8, rgb.data(), static_cast<std::size_t>(width) * 3);
}

void write_png_rgb16(const std::filesystem::path& path, int width, int height,
                     std::span<const std::uint16_t> rgb) {
    check_dims(width, height, rgb.size(), 3);
    // PNG stores 16-bit samples big-endian.
    std::vector<std::uint8_t> bytes(rgb.size() * 2);
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        bytes[2 * i] = static_cast<std::uint8_t>(rgb[i] >> 8);
        bytes[2 * i + 1] = static_cast<std::uint8_t>(rgb[i] & 0xff);
    }
    write_png(path, width, height, 16, bytes.data(), static_cast<std::size_t>(width) * 6);
}

RgbImage8 read_png_rgb8(const std::filesystem::path& path) {
    auto f = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn,
                                             png_warning_fn);
    if (!png) {
        throw Error("png: cannot create read struct");
    }
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* p;
        png_infop* i;
        ~Guard() { png_destroy_read_struct(p, i, nullptr); }
    } guard{&png, &info};

    png_init_io(png, f.get());
    png_read_info(png, info);
    const int color_type = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) {
        png_set_strip_16(png);
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    if (color_type & PNG_COLOR_MASK_ALPHA) {
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);

    RgbImage8 img;
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    for (int y = 0; y < img.height; ++y) {
        png_read_row(png, img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3, nullptr);
    }
    png_read_end(png, nullptr);
    return img;
}

void write_raw_float(const std::filesystem::path& path, int width, int height,
                     std::span<const float> data) {
    static_assert(std::endian::native == std::endian::little,
                  "raw float rasters assume a little-endian host");
    check_dims(width, height, data.size(), 1);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open '" + path.string() + "'");
    }
    const std::uint32_t header[2] = {static_cast<std::uint32_t>(width),
                                     static_cast<std::uint32_t>(height)};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out) {
        throw Error("write failed for '" + path.string() + "'");
    }
}

FloatRaster read_raw_float(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    std::uint32_t header[2] = {0, 0};
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || header[0] == 0 || header[1] == 0) {
        throw Error("bad raw float header in '" + path.string() + "'");
    }
    FloatRaster r;
    r.width = static_cast<int>(header[0]);
    r.height = static_cast<int>(header[1]);
    r.data.resize(static_cast<std::size_t>(r.width) * r.height);
    in.read(reinterpret_cast<char*>(r.data.data()),
            static_cast<std::streamsize>(r.data.size() * sizeof(float)));
    if (!in) {
        throw Error("truncated raw float raster '" + path.string() + "'");
    }
    return r;
}

}  // namespace panoworld
