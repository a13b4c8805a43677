#include "tiattack/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tia {

namespace {

// 3x3, stride 1, zero padding 1. in: (cin, H, W) plane stack for one image.
void conv3x3_forward(const double* in, int cin, int H, int W, const double* w, const double* b,
                     int cout, double* out) {
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int co = 0; co < cout; ++co) {
        double* o = out + co * plane;
        std::fill(o, o + plane, b[co]);
        for (int ci = 0; ci < cin; ++ci) {
            const double* src = in + ci * plane;
            for (int kh = 0; kh < 3; ++kh) {
                const int dy = kh - 1;
                const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                for (int kw = 0; kw < 3; ++kw) {
                    const int dx = kw - 1;
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    const double wv = w[((co * cin + ci) * 3 + kh) * 3 + kw];
                    for (int y = y0; y < y1; ++y) {
                        double* orow = o + y * W;
                        const double* irow = src + (y + dy) * W + dx;
                        for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
                    }
                }
            }
        }
    }
}

// Accumulates into din (if non-null), dw and db (if non-null).
void conv3x3_backward(const double* in, int cin, int H, int W, const double* w, int cout,
                      const double* dout, double* din, double* dw, double* db) {
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int co = 0; co < cout; ++co) {
        const double* g = dout + co * plane;
        if (db) {
            double s = 0.0;
            for (std::size_t p = 0; p < plane; ++p) s += g[p];
            db[co] += s;
        }
        for (int ci = 0; ci < cin; ++ci) {
            const double* src = in + ci * plane;
            double* dsrc = din ? din + ci * plane : nullptr;
            for (int kh = 0; kh < 3; ++kh) {
                const int dy = kh - 1;
                const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                for (int kw = 0; kw < 3; ++kw) {
                    const int dx = kw - 1;
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    const std::size_t widx = ((co * cin + ci) * 3 + kh) * 3 + kw;
                    const double wv = w[widx];
                    double acc = 0.0;
                    for (int y = y0; y < y1; ++y) {
                        const double* grow = g + y * W;
                        const std::size_t off = static_cast<std::size_t>(y + dy) * W + dx;
                        if (dw) {
                            const double* irow = src + off;
                            for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x];
                        }
                        if (dsrc) {
                            double* drow = dsrc + off;
                            for (int x = x0; x < x1; ++x) drow[x] += wv * grow[x];
                        }
                    }
                    if (dw) dw[widx] += acc;
                }
            }
        }
    }
}

void avgpool2_forward(const double* in, int ch, int H, int W, double* out) {
    const int oh = H / 2, ow = W / 2;
    for (int c = 0; c < ch; ++c) {
        const double* s = in + static_cast<std::size_t>(c) * H * W;
        double* o = out + static_cast<std::size_t>(c) * oh * ow;
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                const double* p = s + 2 * y * W + 2 * x;
                o[y * ow + x] = 0.25 * (p[0] + p[1] + p[W] + p[W + 1]);
            }
    }
}

void avgpool2_backward(const double* dout, int ch, int H, int W, double* din) {
    const int oh = H / 2, ow = W / 2;
    for (int c = 0; c < ch; ++c) {
        const double* g = dout + static_cast<std::size_t>(c) * oh * ow;
        double* d = din + static_cast<std::size_t>(c) * H * W;
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                const double v = 0.25 * g[y * ow + x];
                double* p = d + 2 * y * W + 2 * x;
                p[0] = v;
                p[1] = v;
                p[W] = v;
                p[W + 1] = v;
            }
    }
}

void check_labels(std::span<const int> labels, int n, int num_classes) {
    if (static_cast<int>(labels.size()) != n) {
        throw std::invalid_argument("label count does not match batch size");
    }
    for (int y : labels) {
        if (y < 0 || y >= num_classes) {
            throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " +
                                        std::to_string(num_classes) + ")");
        }
    }
}

void check_shape(const Tensor& x, InputShape in, const char* who) {
    const Shape& s = x.shape();
    if (s.c != in.c || s.h != in.h || s.w != in.w) {
        throw std::invalid_argument(std::string(who) + ": input " + s.str() + " does not match model input (" +
                                    std::to_string(in.c) + "," + std::to_string(in.h) + "," +
                                    std::to_string(in.w) + ")");
    }
}

}  // namespace

SoftmaxLoss softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
    check_labels(labels, logits.rows, logits.cols);
    SoftmaxLoss out{std::vector<double>(logits.rows), Matrix(logits.rows, logits.cols)};
    for (int n = 0; n < logits.rows; ++n) {
        double mx = logits.at(n, 0);
        for (int k = 1; k < logits.cols; ++k) mx = std::max(mx, logits.at(n, k));
        double z = 0.0;
        for (int k = 0; k < logits.cols; ++k) z += std::exp(logits.at(n, k) - mx);
        const double log_z = mx + std::log(z);
        out.loss[n] = log_z - logits.at(n, labels[n]);
        for (int k = 0; k < logits.cols; ++k) {
            out.dlogits.at(n, k) = std::exp(logits.at(n, k) - log_z) - (k == labels[n] ? 1.0 : 0.0);
        }
    }
    return out;
}

LossAndGrad loss_and_input_grad(const Classifier& model, const Tensor& x, std::span<const int> labels) {
    check_shape(x, model.input_shape(), "loss_and_input_grad");
    Matrix logits = model.logits(x);
    SoftmaxLoss sl = softmax_cross_entropy(logits, labels);
    Tensor grad = model.backward_input(x, sl.dlogits);
    return {std::move(sl.loss), std::move(grad), std::move(logits)};
}

std::vector<double> loss_only(const Classifier& model, const Tensor& x, std::span<const int> labels) {
    check_shape(x, model.input_shape(), "loss_only");
    return softmax_cross_entropy(model.logits(x), labels).loss;
}

std::vector<int> argmax_rows(const Matrix& logits) {
    std::vector<int> out(logits.rows);
    for (int n = 0; n < logits.rows; ++n) {
        int best = 0;
        for (int k = 1; k < logits.cols; ++k)
            if (logits.at(n, k) > logits.at(n, best)) best = k;
        out[n] = best;
    }
    return out;
}

std::vector<int> predict(const Classifier& model, const Tensor& x) {
    check_shape(x, model.input_shape(), "predict");
    return argmax_rows(model.logits(x));
}

// ---------------------------------------------------------------------------
// TinyCnn

struct TinyCnn::Activations {
    Tensor z1, p1, z2, p2;
    Matrix logits;
};

TinyCnn::TinyCnn(int num_classes, InputShape input) : num_classes_(num_classes), input_(input) {
    if (num_classes < 1) throw std::invalid_argument("TinyCnn: num_classes must be positive");
    if (input.c < 1 || input.h < 4 || input.w < 4 || input.h % 4 != 0 || input.w % 4 != 0) {
        throw std::invalid_argument("TinyCnn: spatial size must be a positive multiple of 4");
    }
    const int features = kConv2Filters * (input.h / 4) * (input.w / 4);
    params_.conv1_w = Tensor(Shape{kConv1Filters, input.c, 3, 3});
    params_.conv1_b = Tensor(Shape{1, 1, 1, kConv1Filters});
    params_.conv2_w = Tensor(Shape{kConv2Filters, kConv1Filters, 3, 3});
    params_.conv2_b = Tensor(Shape{1, 1, 1, kConv2Filters});
    params_.dense_w = Tensor(Shape{1, 1, num_classes, features});
    params_.dense_b = Tensor(Shape{1, 1, 1, num_classes});
}

TinyCnn TinyCnn::initialized(int num_classes, InputShape input, Rng& rng) {
    TinyCnn m(num_classes, input);
    auto glorot = [&rng](Tensor& t, double fan_in, double fan_out) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : t.values()) v = rng.uniform(-limit, limit);
    };
    const int features = m.params_.dense_w.shape().w;
    glorot(m.params_.conv1_w, input.c * 9.0, kConv1Filters * 9.0);
    glorot(m.params_.conv2_w, kConv1Filters * 9.0, kConv2Filters * 9.0);
    glorot(m.params_.dense_w, features, num_classes);
    return m;
}

std::size_t TinyCnn::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor* t : params_.all()) n += t->size();
    return n;
}

void TinyCnn::check_input(const Tensor& x) const { check_shape(x, input_, "TinyCnn"); }

TinyCnn::Activations TinyCnn::forward(const Tensor& x) const {
    check_input(x);
    const int n = x.shape().n, H = input_.h, W = input_.w;
    Activations a;
    a.z1 = Tensor(Shape{n, kConv1Filters, H, W});
    a.p1 = Tensor(Shape{n, kConv1Filters, H / 2, W / 2});
    a.z2 = Tensor(Shape{n, kConv2Filters, H / 2, W / 2});
    a.p2 = Tensor(Shape{n, kConv2Filters, H / 4, W / 4});
    a.logits = Matrix(n, num_classes_);

    std::vector<double> relu1(a.z1.shape().image_size());
    std::vector<double> relu2(a.z2.shape().image_size());
    const int features = params_.dense_w.shape().w;
    for (int i = 0; i < n; ++i) {
        conv3x3_forward(x.image_values(i).data(), input_.c, H, W, params_.conv1_w.values().data(),
                        params_.conv1_b.values().data(), kConv1Filters, a.z1.image_values(i).data());
        auto z1 = a.z1.image_values(i);
        for (std::size_t p = 0; p < relu1.size(); ++p) relu1[p] = std::max(0.0, z1[p]);
        avgpool2_forward(relu1.data(), kConv1Filters, H, W, a.p1.image_values(i).data());

        conv3x3_forward(a.p1.image_values(i).data(), kConv1Filters, H / 2, W / 2,
                        params_.conv2_w.values().data(), params_.conv2_b.values().data(), kConv2Filters,
                        a.z2.image_values(i).data());
        auto z2 = a.z2.image_values(i);
        for (std::size_t p = 0; p < relu2.size(); ++p) relu2[p] = std::max(0.0, z2[p]);
        avgpool2_forward(relu2.data(), kConv2Filters, H / 2, W / 2, a.p2.image_values(i).data());

        auto feat = a.p2.image_values(i);
        auto dw = params_.dense_w.values();
        for (int k = 0; k < num_classes_; ++k) {
            double s = params_.dense_b[k];
            const double* row = dw.data() + static_cast<std::size_t>(k) * features;
            for (int j = 0; j < features; ++j) s += row[j] * feat[j];
            a.logits.at(i, k) = s;
        }
    }
    return a;
}

Matrix TinyCnn::logits(const Tensor& x) const { return forward(x).logits; }

namespace {

// Shared backward pass; grads may be null (input gradient only) and dx may be
// null (parameter gradients only).
void tiny_cnn_backward(const TinyCnn& m, const Tensor& x, const Tensor& z1, const Tensor& p1,
                       const Tensor& z2, const Tensor& p2, const Matrix& dlogits,
                       TinyCnn::Params* grads, Tensor* dx) {
    const auto& P = m.params();
    const InputShape in = m.input_shape();
    const int n = x.shape().n, H = in.h, W = in.w, K = m.num_classes();
    const int c1 = TinyCnn::kConv1Filters, c2 = TinyCnn::kConv2Filters;
    const int features = P.dense_w.shape().w;

    std::vector<double> dp2(features), da2(z2.shape().image_size()), dp1(p1.shape().image_size()),
        da1(z1.shape().image_size()), relu1(z1.shape().image_size());
    auto dense_w = P.dense_w.values();

    for (int i = 0; i < n; ++i) {
        auto feat = p2.image_values(i);
        std::fill(dp2.begin(), dp2.end(), 0.0);
        for (int k = 0; k < K; ++k) {
            const double g = dlogits.at(i, k);
            const double* row = dense_w.data() + static_cast<std::size_t>(k) * features;
            for (int j = 0; j < features; ++j) dp2[j] += g * row[j];
            if (grads) {
                double* grow = grads->dense_w.values().data() + static_cast<std::size_t>(k) * features;
                for (int j = 0; j < features; ++j) grow[j] += g * feat[j];
                grads->dense_b[k] += g;
            }
        }

        avgpool2_backward(dp2.data(), c2, H / 2, W / 2, da2.data());
        auto z2i = z2.image_values(i);
        for (std::size_t p = 0; p < da2.size(); ++p)
            if (z2i[p] <= 0.0) da2[p] = 0.0;

        std::fill(dp1.begin(), dp1.end(), 0.0);
        conv3x3_backward(p1.image_values(i).data(), c1, H / 2, W / 2, P.conv2_w.values().data(), c2, da2.data(),
                         dp1.data(), grads ? grads->conv2_w.values().data() : nullptr,
                         grads ? grads->conv2_b.values().data() : nullptr);

        avgpool2_backward(dp1.data(), c1, H, W, da1.data());
        auto z1i = z1.image_values(i);
        for (std::size_t p = 0; p < da1.size(); ++p)
            if (z1i[p] <= 0.0) da1[p] = 0.0;

        conv3x3_backward(x.image_values(i).data(), in.c, H, W, P.conv1_w.values().data(), c1, da1.data(),
                         dx ? dx->image_values(i).data() : nullptr,
                         grads ? grads->conv1_w.values().data() : nullptr,
                         grads ? grads->conv1_b.values().data() : nullptr);
    }
}

}  // namespace

Tensor TinyCnn::backward_input(const Tensor& x, const Matrix& dlogits) const {
    Activations a = forward(x);
    if (dlogits.rows != x.shape().n || dlogits.cols != num_classes_) {
        throw std::invalid_argument("TinyCnn::backward_input: dlogits shape mismatch");
    }
    Tensor dx(x.shape());
    tiny_cnn_backward(*this, x, a.z1, a.p1, a.z2, a.p2, dlogits, nullptr, &dx);
    return dx;
}

TinyCnn::Params TinyCnn::backward_params(const Tensor& x, const Matrix& dlogits) const {
    Activations a = forward(x);
    if (dlogits.rows != x.shape().n || dlogits.cols != num_classes_) {
        throw std::invalid_argument("TinyCnn::backward_params: dlogits shape mismatch");
    }
    Params grads;
    grads.conv1_w = Tensor(params_.conv1_w.shape());
    grads.conv1_b = Tensor(params_.conv1_b.shape());
    grads.conv2_w = Tensor(params_.conv2_w.shape());
    grads.conv2_b = Tensor(params_.conv2_b.shape());
    grads.dense_w = Tensor(params_.dense_w.shape());
    grads.dense_b = Tensor(params_.dense_b.shape());
    tiny_cnn_backward(*this, x, a.z1, a.p1, a.z2, a.p2, dlogits, &grads, nullptr);
    return grads;
}

std::vector<NamedTensor> TinyCnn::named_parameters() const {
    return {{"conv1.weight", params_.conv1_w}, {"conv1.bias", params_.conv1_b},
            {"conv2.weight", params_.conv2_w}, {"conv2.bias", params_.conv2_b},
            {"dense.weight", params_.dense_w}, {"dense.bias", params_.dense_b}};
}

TinyCnn TinyCnn::from_named(int num_classes, InputShape input, const std::map<std::string, Tensor>& named) {
    TinyCnn m(num_classes, input);
    auto take = [&named](const std::string& name, Tensor& dst) {
        auto it = named.find(name);
        if (it == named.end()) throw std::invalid_argument("TinyCnn: missing parameter " + name);
        if (it->second.shape() != dst.shape()) {
            throw std::invalid_argument("TinyCnn: parameter " + name + " has shape " + it->second.shape().str() +
                                        ", expected " + dst.shape().str());
        }
        dst = it->second;
    };
    take("conv1.weight", m.params_.conv1_w);
    take("conv1.bias", m.params_.conv1_b);
    take("conv2.weight", m.params_.conv2_w);
    take("conv2.bias", m.params_.conv2_b);
    take("dense.weight", m.params_.dense_w);
    take("dense.bias", m.params_.dense_b);
    return m;
}

// ---------------------------------------------------------------------------
// LinearSumModel

LinearSumModel::LinearSumModel(std::vector<double> weights, std::vector<double> biases, InputShape input)
    : weights_(std::move(weights)), biases_(std::move(biases)), input_(input) {
    if (weights_.empty() || weights_.size() != biases_.size()) {
        throw std::invalid_argument("LinearSumModel: need one weight and one bias per class");
    }
}

Matrix LinearSumModel::logits(const Tensor& x) const {
    check_shape(x, input_, "LinearSumModel");
    const int n = x.shape().n, K = num_classes();
    Matrix out(n, K);
    for (int i = 0; i < n; ++i) {
        double total = 0.0;
        for (double v : x.image_values(i)) total += v;
        for (int k = 0; k < K; ++k) out.at(i, k) = weights_[k] * total + biases_[k];
    }
    return out;
}

Tensor LinearSumModel::backward_input(const Tensor& x, const Matrix& dlogits) const {
    check_shape(x, input_, "LinearSumModel");
    Tensor dx(x.shape());
    for (int i = 0; i < x.shape().n; ++i) {
        double g = 0.0;
        for (int k = 0; k < num_classes(); ++k) g += dlogits.at(i, k) * weights_[k];
        for (double& v : dx.image_values(i)) v = g;
    }
    return dx;
}

// ---------------------------------------------------------------------------
// FusedClassifier

FusedClassifier::FusedClassifier(std::vector<ClassifierPtr> members, std::vector<double> weights)
    : members_(std::move(members)), weights_(std::move(weights)) {
    if (members_.empty()) throw std::invalid_argument("fuse_logits: no models");
    if (members_.size() != weights_.size()) throw std::invalid_argument("fuse_logits: one weight per model");
    double total = 0.0;
    for (double w : weights_) total += w;
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("fuse_logits: weights must sum to 1");
    for (const auto& m : members_) {
        if (!m) throw std::invalid_argument("fuse_logits: null model");
        if (m->num_classes() != members_.front()->num_classes() ||
            !(m->input_shape() == members_.front()->input_shape())) {
            throw std::invalid_argument("fuse_logits: members disagree on classes or input shape");
        }
    }
}

Matrix FusedClassifier::logits(const Tensor& x) const {
    Matrix out;
    for (std::size_t m = 0; m < members_.size(); ++m) {
        Matrix part = members_[m]->logits(x);
        if (m == 0) {
            out = Matrix(part.rows, part.cols);
        }
        for (std::size_t i = 0; i < part.values.size(); ++i) out.values[i] += weights_[m] * part.values[i];
    }
    return out;
}

Tensor FusedClassifier::backward_input(const Tensor& x, const Matrix& dlogits) const {
    Tensor out(x.shape());
    for (std::size_t m = 0; m < members_.size(); ++m) {
        Matrix scaled = dlogits;
        for (double& v : scaled.values) v *= weights_[m];
        Tensor part = members_[m]->backward_input(x, scaled);
        for (std::size_t i = 0; i < part.size(); ++i) out[i] += part[i];
    }
    return out;
}

ClassifierPtr fuse_logits(std::vector<ClassifierPtr> models, std::vector<double> weights) {
    return std::make_shared<FusedClassifier>(std::move(models), std::move(weights));
}

ClassifierPtr fuse_logits(std::vector<ClassifierPtr> models) {
    std::vector<double> weights(models.size(), models.empty() ? 0.0 : 1.0 / static_cast<double>(models.size()));
    return fuse_logits(std::move(models), std::move(weights));
}

}  // namespace tia
