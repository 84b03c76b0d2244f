#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "psf4d/tensor.hpp"

namespace psf4d {

// Binary latent format, little-endian throughout, no padding:
//
//   offset  size       field
//   0       6          magic "PSF4D\0"
//   6       2          version (u16) = 1
//   8       1          dtype tag (u8): 0 = f64, 1 = f32
//   9       1          rank (u8)
//   10      8*rank     axis lengths (u64 each)
//   ...     n*width    row-major payload

enum class DType : std::uint8_t { f64 = 0, f32 = 1 };

inline constexpr std::uint16_t kFormatVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t, DType dtype = DType::f64);

/// Throws FormatError (magic / version / dtype / truncated / trailing / shape).
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void save_tensor(const std::filesystem::path& path, const Tensor& t, DType dtype = DType::f64);
Tensor load_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace psf4d
