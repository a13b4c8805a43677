#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tiattack/kernels.hpp"
#include "tiattack/models.hpp"
#include "tiattack/random.hpp"
#include "tiattack/tensor.hpp"

namespace tia {

enum class AttackMethod { FGSM, BIM, MIFGSM, DIM };
enum class Norm { Linf, L2 };

std::string to_string(AttackMethod m);
std::string to_string(Norm n);
/// Accepts "fgsm", "bim", "mifgsm"/"mi-fgsm", "dim" (case-insensitive).
AttackMethod parse_method(std::string_view name);
/// Accepts "linf"/"inf", "l2".
Norm parse_norm(std::string_view name);

/// Attack hyperparameters. Pixel quantities are on the [0, 1] scale.
struct AttackConfig {
    AttackMethod method = AttackMethod::MIFGSM;
    std::optional<Kernel> kernel;  ///< present: translation-invariant variant
    Norm norm = Norm::Linf;
    double epsilon = 16.0 / 255.0;
    int iterations = 10;
    double alpha = 1.6 / 255.0;
    double momentum = 1.0;
    double dim_prob = 0.7;
    double dim_resize_low = 0.9;
    double pixel_min = 0.0;
    double pixel_max = 1.0;
    std::uint64_t seed = 0;

    /// Defaults scaled from the [0, 255] setting: L-inf eps 16/255, alpha 1.6/255;
    /// L2 eps (10/255) * sqrt(c*h*w), alpha eps/T. `ti` adds the 15x15 Gaussian kernel.
    static AttackConfig defaults(AttackMethod method, Norm norm, InputShape input, bool ti = false);

    /// FGSM: T = 1, alpha = epsilon. FGSM and BIM: momentum 0.
    AttackConfig effective() const;
    /// Throws std::invalid_argument on out-of-range fields.
    void validate() const;
    /// E.g. "TI-MI-FGSM".
    std::string name() const;
};

/// Where one image was placed by the diverse-inputs transform.
struct DiPlacement {
    bool applied = false;
    int size = 0;  ///< side after resizing
    int top = 0;
    int left = 0;
};

/// Output of di_transform together with what is needed to apply its adjoint.
struct DiTransform {
    Tensor output;
    std::vector<DiPlacement> placements;
    int height = 0;
    int width = 0;

    /// Transpose of the per-image linear map x -> output.
    Tensor adjoint(const Tensor& grad) const;
};

/// With probability dim_prob per image: nearest-resize to r x r, r uniform in
/// [round(dim_resize_low * S), S], and paste at a uniform offset on an S x S zero
/// canvas. Otherwise identity. Requires square images.
DiTransform di_transform(const Tensor& x, const AttackConfig& cfg, Rng& rng);

/// Depthwise conv2d_same of the gradient with the kernel weights.
Tensor smooth_gradient(const Tensor& grad, const Kernel& kernel, ShiftMode mode = ShiftMode::ZeroFill);

/// Per image: L-inf clips into [x_real - eps, x_real + eps]; L2 rescales the
/// perturbation radially to length eps when longer. Then clamps to pixel bounds.
Tensor project(const Tensor& x, const Tensor& x_real, const AttackConfig& cfg);

/// Per-image norm of a - b in the given norm.
std::vector<double> perturbation_norms(const Tensor& a, const Tensor& b, Norm norm);

/// Iterate state of a running attack.
struct AttackState {
    Tensor x;         ///< current adversarial batch
    Tensor momentum;  ///< accumulated normalized gradient
    int t = 0;
    Rng rng;
};

struct AdversarialResult {
    Tensor x_adv;
    std::vector<double> perturbation_norm;  ///< per image, in the configured norm
    std::vector<bool> success;              ///< source model misclassifies x_adv
    /// loss_trace[t][n]: J of image n at iterate t (t = 0..T; the last row is the final iterate).
    std::vector<std::vector<double>> loss_trace;
    /// zero_gradient[t][n]: the input gradient of image n vanished at iteration t.
    std::vector<std::vector<bool>> zero_gradient;

    double success_rate() const;
    bool operator==(const AdversarialResult&) const = default;
};

AttackState initial_state(const Tensor& x_real, const AttackConfig& cfg);

/// One update: gradient (through the DI adjoint for DIM), optional kernel
/// smoothing, L1-normalized momentum accumulation, sign (L-inf) or L2-unit
/// step, projection. Returns the per-image loss at the pre-step iterate and
/// appends zero-gradient flags.
std::vector<double> attack_step(const Classifier& model, const Tensor& x_real, std::span<const int> labels,
                                const AttackConfig& cfg, AttackState& state, std::vector<bool>& zero_grad);

/// Untargeted attack maximizing cross-entropy. Deterministic given cfg.seed.
AdversarialResult attack(const Classifier& model, const Tensor& x_real, std::span<const int> labels,
                         const AttackConfig& cfg);

}  // namespace tia
