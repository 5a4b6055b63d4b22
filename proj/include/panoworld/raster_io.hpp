#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace panoworld {

struct RgbImage8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

struct FloatRaster {
    int width = 0;
    int height = 0;
    std::vector<float> data;  // row-major
};

void write_png_rgb8(const std::filesystem::path& path, int width, int height,
                    std::span<const std::uint8_t> rgb);
// 16-bit per channel RGB; values are host-order and byte-swapped to PNG order.
void write_png_rgb16(const std::filesystem::path& path, int width, int height,
                     std::span<const std::uint16_t> rgb);
RgbImage8 read_png_rgb8(const std::filesystem::path& path);

// Raw float raster: uint32 width, uint32 height (little-endian), then
// width*height little-endian float32 values, row-major.
void write_raw_float(const std::filesystem::path& path, int width, int height,
                     std::span<const float> data);
FloatRaster read_raw_float(const std::filesystem::path& path);

}  // namespace panoworld
