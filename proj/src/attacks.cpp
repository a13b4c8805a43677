#include "tiattack/attacks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace tia {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool uses_momentum(AttackMethod m) { return m == AttackMethod::MIFGSM || m == AttackMethod::DIM; }

}  // namespace

std::string to_string(AttackMethod m) {
    switch (m) {
        case AttackMethod::FGSM: return "FGSM";
        case AttackMethod::BIM: return "BIM";
        case AttackMethod::MIFGSM: return "MI-FGSM";
        case AttackMethod::DIM: return "DIM";
    }
    return "unknown";
}

std::string to_string(Norm n) { return n == Norm::Linf ? "linf" : "l2"; }

AttackMethod parse_method(std::string_view name) {
    const std::string s = lowercase(name);
    if (s == "fgsm") return AttackMethod::FGSM;
    if (s == "bim") return AttackMethod::BIM;
    if (s == "mifgsm" || s == "mi-fgsm") return AttackMethod::MIFGSM;
    if (s == "dim") return AttackMethod::DIM;
    throw std::invalid_argument("unknown attack method '" + std::string(name) + "'");
}

Norm parse_norm(std::string_view name) {
    const std::string s = lowercase(name);
    if (s == "linf" || s == "inf") return Norm::Linf;
    if (s == "l2") return Norm::L2;
    throw std::invalid_argument("unknown norm '" + std::string(name) + "'");
}

AttackConfig AttackConfig::defaults(AttackMethod method, Norm norm, InputShape input, bool ti) {
    AttackConfig cfg;
    cfg.method = method;
    cfg.norm = norm;
    if (norm == Norm::L2) {
        const double d = static_cast<double>(input.c) * input.h * input.w;
        cfg.epsilon = 10.0 / 255.0 * std::sqrt(d);
        cfg.alpha = cfg.epsilon / cfg.iterations;
    }
    if (ti) cfg.kernel = gaussian_kernel(7);
    return cfg.effective();
}

AttackConfig AttackConfig::effective() const {
    AttackConfig out = *this;
    if (method == AttackMethod::FGSM) {
        out.iterations = 1;
        out.alpha = epsilon;
    }
    if (!uses_momentum(method)) out.momentum = 0.0;
    return out;
}

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("attack: epsilon must be >= 0");
    if (iterations < 1) throw std::invalid_argument("attack: iterations must be positive");
    if (!(alpha > 0.0) && epsilon > 0.0) throw std::invalid_argument("attack: alpha must be positive");
    if (!(momentum >= 0.0)) throw std::invalid_argument("attack: momentum must be >= 0");
    if (!(dim_prob >= 0.0 && dim_prob <= 1.0)) throw std::invalid_argument("attack: dim_prob must be in [0, 1]");
    if (!(dim_resize_low > 0.0 && dim_resize_low <= 1.0)) {
        throw std::invalid_argument("attack: dim_resize_low must be in (0, 1]");
    }
    if (!(pixel_min < pixel_max)) throw std::invalid_argument("attack: pixel bounds must satisfy min < max");
}

std::string AttackConfig::name() const {
    return (kernel ? "TI-" : "") + to_string(method);
}

double AdversarialResult::success_rate() const {
    if (success.empty()) return 0.0;
    return static_cast<double>(std::count(success.begin(), success.end(), true)) / static_cast<double>(success.size());
}

// ---------------------------------------------------------------------------

Tensor DiTransform::adjoint(const Tensor& grad) const {
    const Shape& s = grad.shape();
    Tensor out(s);
    for (int n = 0; n < s.n; ++n) {
        const DiPlacement& p = placements[n];
        Tensor g = grad.image(n);
        if (p.applied) {
            g = resize_nearest_adjoint(crop(g, p.size, p.size, p.top, p.left), height, width);
        }
        std::copy(g.values().begin(), g.values().end(), out.image_values(n).begin());
    }
    return out;
}

DiTransform di_transform(const Tensor& x, const AttackConfig& cfg, Rng& rng) {
    const Shape& s = x.shape();
    if (s.h != s.w) throw std::invalid_argument("di_transform: images must be square");
    DiTransform tr{Tensor(s), std::vector<DiPlacement>(s.n), s.h, s.w};
    const int side = s.h;
    const int low = std::clamp(static_cast<int>(std::lround(cfg.dim_resize_low * side)), 1, side);
    for (int n = 0; n < s.n; ++n) {
        DiPlacement& p = tr.placements[n];
        Tensor img = x.image(n);
        if (rng.bernoulli(cfg.dim_prob)) {
            p.applied = true;
            p.size = static_cast<int>(rng.uniform_int(low, side));
            p.top = static_cast<int>(rng.uniform_int(0, side - p.size));
            p.left = static_cast<int>(rng.uniform_int(0, side - p.size));
            img = pad_to(resize_nearest(img, p.size, p.size), side, side, p.top, p.left);
        }
        std::copy(img.values().begin(), img.values().end(), tr.output.image_values(n).begin());
    }
    return tr;
}

Tensor smooth_gradient(const Tensor& grad, const Kernel& kernel, ShiftMode mode) {
    return conv2d_same(grad, kernel.weights, mode);
}

std::vector<double> perturbation_norms(const Tensor& a, const Tensor& b, Norm norm) {
    Tensor d = sub(a, b);
    std::vector<double> out(d.shape().n);
    for (int n = 0; n < d.shape().n; ++n) {
        out[n] = norm == Norm::Linf ? linf_norm(d.image_values(n)) : l2_norm(d.image_values(n));
    }
    return out;
}

Tensor project(const Tensor& x, const Tensor& x_real, const AttackConfig& cfg) {
    if (x.shape() != x_real.shape()) throw std::invalid_argument("project: shape mismatch");
    Tensor out(x.shape());
    const double eps = cfg.epsilon;
    for (int n = 0; n < x.shape().n; ++n) {
        auto xv = x.image_values(n);
        auto rv = x_real.image_values(n);
        auto ov = out.image_values(n);
        if (cfg.norm == Norm::Linf) {
            for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = std::clamp(xv[i], rv[i] - eps, rv[i] + eps);
        } else {
            double sq = 0.0;
            for (std::size_t i = 0; i < xv.size(); ++i) sq += (xv[i] - rv[i]) * (xv[i] - rv[i]);
            const double len = std::sqrt(sq);
            if (len > eps) {
                const double f = eps / len;
                for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = rv[i] + (xv[i] - rv[i]) * f;
            } else {
                std::copy(xv.begin(), xv.end(), ov.begin());
            }
        }
        for (double& v : ov) v = std::clamp(v, cfg.pixel_min, cfg.pixel_max);
    }
    return out;
}

AttackState initial_state(const Tensor& x_real, const AttackConfig& cfg) {
    return AttackState{x_real, Tensor(x_real.shape()), 0, Rng(cfg.seed)};
}

std::vector<double> attack_step(const Classifier& model, const Tensor& x_real, std::span<const int> labels,
                                const AttackConfig& cfg, AttackState& state, std::vector<bool>& zero_grad) {
    std::optional<DiTransform> tr;
    if (cfg.method == AttackMethod::DIM) tr = di_transform(state.x, cfg, state.rng);

    LossAndGrad lg = loss_and_input_grad(model, tr ? tr->output : state.x, labels);
    Tensor grad = tr ? tr->adjoint(lg.grad) : std::move(lg.grad);
    if (cfg.kernel) grad = smooth_gradient(grad, *cfg.kernel);

    Tensor next = state.x;
    zero_grad.assign(x_real.shape().n, false);
    for (int n = 0; n < x_real.shape().n; ++n) {
        auto g = grad.image_values(n);
        auto acc = state.momentum.image_values(n);
        const double l1 = l1_norm(g);
        zero_grad[n] = l1 == 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double normalized = l1 > 0.0 ? g[i] / l1 : 0.0;
            acc[i] = cfg.momentum * acc[i] + normalized;
        }

        auto xv = next.image_values(n);
        if (cfg.norm == Norm::Linf) {
            for (std::size_t i = 0; i < acc.size(); ++i) {
                const double s = acc[i] > 0.0 ? 1.0 : (acc[i] < 0.0 ? -1.0 : 0.0);
                xv[i] += cfg.alpha * s;
            }
        } else {
            const double len = l2_norm(acc);
            if (len > 0.0) {
                for (std::size_t i = 0; i < acc.size(); ++i) xv[i] += cfg.alpha * (acc[i] / len);
            }
        }
    }
    state.x = project(next, x_real, cfg);
    ++state.t;
    return std::move(lg.loss);
}

AdversarialResult attack(const Classifier& model, const Tensor& x_real, std::span<const int> labels,
                         const AttackConfig& config) {
    const AttackConfig cfg = config.effective();
    cfg.validate();
    for (double v : x_real.values()) {
        if (!(v >= cfg.pixel_min && v <= cfg.pixel_max)) {
            throw std::invalid_argument("attack: x_real has pixels outside the pixel bounds");
        }
    }
    if (static_cast<int>(labels.size()) != x_real.shape().n) {
        throw std::invalid_argument("attack: one label per image required");
    }

    AttackState state = initial_state(x_real, cfg);
    AdversarialResult result;
    for (int t = 0; t < cfg.iterations; ++t) {
        std::vector<bool> zero;
        result.loss_trace.push_back(attack_step(model, x_real, labels, cfg, state, zero));
        result.zero_gradient.push_back(std::move(zero));
    }

    const Matrix final_logits = model.logits(state.x);
    result.loss_trace.push_back(softmax_cross_entropy(final_logits, labels).loss);
    const std::vector<int> pred = argmax_rows(final_logits);
    result.success.resize(pred.size());
    for (std::size_t n = 0; n < pred.size(); ++n) result.success[n] = pred[n] != labels[n];
    result.perturbation_norm = perturbation_norms(state.x, x_real, cfg.norm);
    result.x_adv = std::move(state.x);
    return result;
}

}  // namespace tia
