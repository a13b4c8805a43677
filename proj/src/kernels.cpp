#include "tiattack/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace tia {

namespace {

void check_half_width(int k) {
    if (k < 0) throw std::invalid_argument("kernel half-width must be non-negative");
}

Kernel normalized(KernelKind kind, int k, Matrix raw) {
    double total = 0.0;
    for (double v : raw.values) total += v;
    for (double& v : raw.values) v /= total;
    return Kernel{kind, k, std::move(raw)};
}

}  // namespace

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::Uniform: return "uniform";
        case KernelKind::Linear: return "linear";
        case KernelKind::Gaussian: return "gaussian";
    }
    return "unknown";
}

KernelKind parse_kernel_kind(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "uniform") return KernelKind::Uniform;
    if (lower == "linear") return KernelKind::Linear;
    if (lower == "gaussian") return KernelKind::Gaussian;
    throw std::invalid_argument("unknown kernel kind '" + std::string(name) + "'");
}

Kernel uniform_kernel(int k) {
    check_half_width(k);
    const int side = 2 * k + 1;
    return Kernel{KernelKind::Uniform, k, Matrix(side, side, 1.0 / (static_cast<double>(side) * side))};
}

Kernel linear_kernel(int k) {
    check_half_width(k);
    const int side = 2 * k + 1;
    Matrix raw(side, side);
    for (int i = -k; i <= k; ++i)
        for (int j = -k; j <= k; ++j) {
            double wi = 1.0 - std::abs(i) / static_cast<double>(k + 1);
            double wj = 1.0 - std::abs(j) / static_cast<double>(k + 1);
            raw.at(i + k, j + k) = wi * wj;
        }
    return normalized(KernelKind::Linear, k, std::move(raw));
}

Kernel gaussian_kernel(int k) {
    check_half_width(k);
    if (k == 0) return Kernel{KernelKind::Gaussian, 0, Matrix(1, 1, 1.0)};
    const int side = 2 * k + 1;
    const double sigma = k / std::sqrt(3.0);
    // The 1/(2 pi sigma^2) prefactor cancels under normalization.
    Matrix raw(side, side);
    for (int i = -k; i <= k; ++i)
        for (int j = -k; j <= k; ++j)
            raw.at(i + k, j + k) = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
    return normalized(KernelKind::Gaussian, k, std::move(raw));
}

Kernel make_kernel(KernelKind kind, int k) {
    switch (kind) {
        case KernelKind::Uniform: return uniform_kernel(k);
        case KernelKind::Linear: return linear_kernel(k);
        case KernelKind::Gaussian: return gaussian_kernel(k);
    }
    throw std::invalid_argument("unknown kernel kind");
}

}  // namespace tia
