#include "tiattack/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tiattack/attacks.hpp"

namespace tia {

std::string to_string(ShiftMode mode) { return mode == ShiftMode::ZeroFill ? "zero" : "circular"; }

ShiftMode parse_shift_mode(std::string_view name) {
    if (name == "zero" || name == "zerofill") return ShiftMode::ZeroFill;
    if (name == "circular") return ShiftMode::Circular;
    throw std::invalid_argument("unknown shift mode '" + std::string(name) + "'");
}

double LossSurface::max_relative_deviation() const {
    const double c = center();
    double worst = 0.0;
    for (double v : grid.values) worst = std::max(worst, std::abs(v - c));
    return c != 0.0 ? worst / std::abs(c) : worst;
}

Tensor ensemble_gradient(const Classifier& model, const Tensor& x, std::span<const int> labels,
                         const Kernel& kernel, ShiftMode mode) {
    const int k = kernel.half_width;
    if (k >= std::min(x.shape().h, x.shape().w)) {
        throw std::invalid_argument("ensemble_gradient: kernel half-width must be below the spatial extent");
    }
    if (k == 0) return loss_and_input_grad(model, x, labels).grad;

    Tensor total(x.shape());
    for (int i = -k; i <= k; ++i)
        for (int j = -k; j <= k; ++j) {
            Tensor g = loss_and_input_grad(model, shift(x, i, j, mode), labels).grad;
            Tensor back = shift(g, -i, -j, mode);
            const double w = kernel.at(i, j);
            for (std::size_t p = 0; p < total.size(); ++p) total[p] += w * back[p];
        }
    return total;
}

double cosine_similarity(const Tensor& a, const Tensor& b) {
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 && nb == 0.0) return 1.0;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

ApproximationReport compare(const Classifier& model, const Tensor& x, std::span<const int> labels,
                            const Kernel& kernel, ShiftMode mode) {
    const Tensor oracle = ensemble_gradient(model, x, labels, kernel, mode);
    const Tensor smoothed = smooth_gradient(loss_and_input_grad(model, x, labels).grad, kernel, mode);

    ApproximationReport r;
    r.kind = kernel.kind;
    r.half_width = kernel.half_width;
    r.mode = mode;
    r.cosine = cosine_similarity(oracle, smoothed);
    r.max_abs_error = max_abs_diff(oracle, smoothed);
    const double diff = l2_norm(sub(oracle, smoothed));
    const double ref = l2_norm(oracle);
    r.relative_l2_error = ref > 0.0 ? diff / ref : diff;
    return r;
}

LossSurface loss_surface(const Classifier& model, const Tensor& x, std::span<const int> labels, int k,
                         ShiftMode mode, std::string model_id) {
    if (k < 0) throw std::invalid_argument("loss_surface: k must be non-negative");
    LossSurface s{k, std::move(model_id), Matrix(2 * k + 1, 2 * k + 1)};
    const int n = x.shape().n;
    for (int i = -k; i <= k; ++i)
        for (int j = -k; j <= k; ++j) {
            auto losses = loss_only(model, shift(x, i, j, mode), labels);
            double sum = 0.0;
            for (double l : losses) sum += l;
            s.grid.at(i + k, j + k) = n > 0 ? sum / n : 0.0;
        }
    return s;
}

}  // namespace tia
