#pragma once

#include <string>
#include <string_view>

#include "tiattack/tensor.hpp"

namespace tia {

enum class KernelKind { Uniform, Linear, Gaussian };

std::string to_string(KernelKind kind);
/// Accepts "uniform", "linear", "gaussian" (case-insensitive).
KernelKind parse_kernel_kind(std::string_view name);

/// Normalized (2k+1) x (2k+1) weight matrix over translations. Entry
/// (k + i, k + j) is the weight of the shift by (i, j).
struct Kernel {
    KernelKind kind = KernelKind::Gaussian;
    int half_width = 0;
    Matrix weights;

    int side() const { return 2 * half_width + 1; }
    /// Weight of shift (i, j), with i, j in [-k, k].
    double at(int i, int j) const { return weights.at(i + half_width, j + half_width); }
};

/// Every entry 1 / (2k+1)^2.
Kernel uniform_kernel(int k);

/// (1 - |i|/(k+1)) * (1 - |j|/(k+1)), normalized to sum 1.
Kernel linear_kernel(int k);

/// exp(-(i^2 + j^2) / (2 sigma^2)) with sigma = k / sqrt(3), sampled at integer
/// offsets and normalized. k = 0 yields the identity kernel [[1]].
Kernel gaussian_kernel(int k);

Kernel make_kernel(KernelKind kind, int k);

}  // namespace tia
