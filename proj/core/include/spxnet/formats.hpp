#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "spxnet/tensor.hpp"

// Readers and writers for flow, disparity and image interchange formats.
// Every reader throws FormatError on malformed input and never reads past
// the buffer.
namespace spxnet {

inline constexpr float kFloMagic = 202021.25f;

// Middlebury .flo: f32 magic, i32 width, i32 height, then interleaved
// (u, v) f32 pairs row by row, little-endian. Flow tensors are (1,2,h,w).
std::string encode_flo(const Tensor& flow);
Tensor decode_flo(std::string_view bytes);
Tensor read_flo(const std::filesystem::path& path);
void write_flo(const Tensor& flow, const std::filesystem::path& path);

// PFM: "Pf" (1 channel) or "PF" (3 channels, interleaved), width height,
// scale whose sign gives the byte order (negative = little-endian), then
// rows bottom to top. Tensors are (1,c,h,w), rows top to bottom.
std::string encode_pfm(const Tensor& image, bool little_endian = true);
Tensor decode_pfm(std::string_view bytes);
Tensor read_pfm(const std::filesystem::path& path);
void write_pfm(const Tensor& image, const std::filesystem::path& path, bool little_endian = true);

// Binary PPM (P6, 3 channels) and PGM (P5, 1 channel) with maxval 255.
// Reads map bytes to [0,1] as v/255; writes store round(255*x), clamping
// to [0, 255] (NaN writes 0).
std::string encode_pnm(const Tensor& image);  // P5 for 1 channel, P6 for 3
Tensor decode_pnm(std::string_view bytes);
Tensor read_ppm(const std::filesystem::path& path);
void write_ppm(const Tensor& image, const std::filesystem::path& path);
Tensor read_pgm(const std::filesystem::path& path);
void write_pgm(const Tensor& image, const std::filesystem::path& path);

std::uint8_t quantize_unit(float x);

}  // namespace spxnet
