#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "goldendie/raster.hpp"

namespace goldendie {

// Raster persistence in the portable anymap family:
//   photos            P6 (binary PPM, 8 bits per channel)
//   layers and masks  P4 (binary PBM, 1 bit; file 1 maps to in-memory +1)
//   quantized indices P5 (binary PGM, 8 bit)
//   score maps        P5 with maxval 65535 plus a text sidecar for the scale

RasterImage load_ppm(const std::filesystem::path& path);
void save_ppm(const std::filesystem::path& path, const RasterImage& img);

BinaryMask load_bitmask(const std::filesystem::path& path);
void save_bitmask(const std::filesystem::path& path, const BinaryMask& mask);

QuantizedImage load_pgm8(const std::filesystem::path& path);
void save_pgm8(const std::filesystem::path& path, const QuantizedImage& img);

std::vector<std::uint16_t> load_pgm16(const std::filesystem::path& path, int& height, int& width);
void save_pgm16(const std::filesystem::path& path, int height, int width,
                const std::vector<std::uint16_t>& data);

} // namespace goldendie
