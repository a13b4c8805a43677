#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "tiattack/tensor.hpp"

namespace tia {

/// Contents of a little-endian float64 C-order .npy file.
struct NpyArray {
    std::vector<std::size_t> shape;
    std::vector<double> data;
};

/// NPY format 1.0, dtype '<f8', fortran_order False.
void write_npy(const std::filesystem::path& path, std::span<const std::size_t> shape,
               std::span<const double> data);
void write_npy(const std::filesystem::path& path, const Tensor& t);

NpyArray read_npy(const std::filesystem::path& path);
/// Reads a 4-D array (lower-rank arrays get leading unit axes).
Tensor read_npy_tensor(const std::filesystem::path& path);

/// Binary PGM (P5) of channel `channel` of batch item `index`; values are
/// clamped to [0, 1], scaled by 255 and rounded.
void write_pgm(const std::filesystem::path& path, const Tensor& t, int index = 0, int channel = 0);

}  // namespace tia
