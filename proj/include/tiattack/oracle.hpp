#pragma once

#include <span>
#include <string>

#include "tiattack/kernels.hpp"
#include "tiattack/models.hpp"
#include "tiattack/tensor.hpp"

namespace tia {

/// Agreement between the brute-force translated-ensemble gradient and the
/// kernel-smoothed gradient at the untranslated image.
struct ApproximationReport {
    double cosine = 1.0;  ///< 1.0 when both gradients are zero
    double max_abs_error = 0.0;
    /// ||oracle - smoothed||_2 / ||oracle||_2, or the absolute norm when the oracle is zero.
    double relative_l2_error = 0.0;
    KernelKind kind = KernelKind::Gaussian;
    int half_width = 0;
    ShiftMode mode = ShiftMode::ZeroFill;
};

/// Mean loss of a batch under every translation (i, j) in [-k, k]^2.
struct LossSurface {
    int half_width = 0;
    std::string model_id;
    Matrix grid;  ///< grid.at(k + i, k + j) = mean_n J(shift(x_n, i, j), y_n)

    double center() const { return grid.at(half_width, half_width); }
    /// max |grid - center| / |center|.
    double max_relative_deviation() const;
};

/// Gradient of sum_{i,j} w_ij J(T_ij(x), y), evaluated exactly: every
/// translated copy is backpropagated and its gradient shifted back by (-i, -j).
/// Costs (2k+1)^2 gradient evaluations.
Tensor ensemble_gradient(const Classifier& model, const Tensor& x, std::span<const int> labels,
                         const Kernel& kernel, ShiftMode mode);

ApproximationReport compare(const Classifier& model, const Tensor& x, std::span<const int> labels,
                            const Kernel& kernel, ShiftMode mode);

/// Cosine similarity; two zero vectors give 1, one zero vector gives 0.
double cosine_similarity(const Tensor& a, const Tensor& b);

LossSurface loss_surface(const Classifier& model, const Tensor& x, std::span<const int> labels, int k,
                         ShiftMode mode = ShiftMode::ZeroFill, std::string model_id = {});

std::string to_string(ShiftMode mode);
ShiftMode parse_shift_mode(std::string_view name);

}  // namespace tia
