#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tiattack/random.hpp"
#include "tiattack/tensor.hpp"

namespace tia {

struct InputShape {
    int c = 1;
    int h = 28;
    int w = 28;
    bool operator==(const InputShape&) const = default;
};

/// A differentiable classifier. Logits are returned as an (n x num_classes) Matrix.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual int num_classes() const = 0;
    virtual InputShape input_shape() const = 0;
    virtual std::string arch() const = 0;

    virtual Matrix logits(const Tensor& x) const = 0;
    /// Gradient w.r.t. x of sum_n <dlogits[n, :], logits(x)[n, :]>.
    virtual Tensor backward_input(const Tensor& x, const Matrix& dlogits) const = 0;
};

using ClassifierPtr = std::shared_ptr<const Classifier>;

/// Per-item cross-entropy and its gradient w.r.t. the logits.
struct SoftmaxLoss {
    std::vector<double> loss;
    Matrix dlogits;
};
SoftmaxLoss softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

struct LossAndGrad {
    std::vector<double> loss;  ///< J(x_n, y_n) per item
    Tensor grad;               ///< dJ(x_n, y_n)/dx_n, shaped like x
    Matrix logits;
};

/// Cross-entropy of each item and its exact input gradient. Parameters are untouched.
LossAndGrad loss_and_input_grad(const Classifier& model, const Tensor& x, std::span<const int> labels);
std::vector<double> loss_only(const Classifier& model, const Tensor& x, std::span<const int> labels);

/// Argmax of the logits, ties to the lowest class index.
std::vector<int> predict(const Classifier& model, const Tensor& x);
std::vector<int> argmax_rows(const Matrix& logits);

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// conv3x3(8) -> ReLU -> avgpool2 -> conv3x3(16) -> ReLU -> avgpool2 -> dense.
/// Convolutions are stride 1 with zero padding 1. Spatial size must be divisible by 4.
class TinyCnn final : public Classifier {
public:
    static constexpr int kConv1Filters = 8;
    static constexpr int kConv2Filters = 16;

    /// Weight-gradient (or parameter) bundle with the model's layout.
    struct Params {
        Tensor conv1_w, conv1_b, conv2_w, conv2_b, dense_w, dense_b;

        std::vector<Tensor*> all() { return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense_w, &dense_b}; }
        std::vector<const Tensor*> all() const {
            return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense_w, &dense_b};
        }
        bool operator==(const Params&) const = default;
    };

    /// All parameters zero.
    TinyCnn(int num_classes, InputShape input);

    /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    static TinyCnn initialized(int num_classes, InputShape input, Rng& rng);

    int num_classes() const override { return num_classes_; }
    InputShape input_shape() const override { return input_; }
    std::string arch() const override { return "tiny_cnn"; }

    Matrix logits(const Tensor& x) const override;
    Tensor backward_input(const Tensor& x, const Matrix& dlogits) const override;

    /// Parameter gradients of sum_n <dlogits[n], logits[n]>.
    Params backward_params(const Tensor& x, const Matrix& dlogits) const;

    const Params& params() const { return params_; }
    Params& params() { return params_; }
    std::size_t parameter_count() const;

    std::vector<NamedTensor> named_parameters() const;
    static TinyCnn from_named(int num_classes, InputShape input, const std::map<std::string, Tensor>& named);

private:
    struct Activations;
    Activations forward(const Tensor& x) const;
    void check_input(const Tensor& x) const;

    int num_classes_;
    InputShape input_;
    Params params_;
};

/// logit_c(x) = u_c * sum(x) + b_c. Invariant under circular shifts of x; its
/// input gradient is spatially constant.
class LinearSumModel final : public Classifier {
public:
    LinearSumModel(std::vector<double> weights, std::vector<double> biases, InputShape input);

    int num_classes() const override { return static_cast<int>(weights_.size()); }
    InputShape input_shape() const override { return input_; }
    std::string arch() const override { return "linear_sum"; }

    Matrix logits(const Tensor& x) const override;
    Tensor backward_input(const Tensor& x, const Matrix& dlogits) const override;

    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& biases() const { return biases_; }

private:
    std::vector<double> weights_;
    std::vector<double> biases_;
    InputShape input_;
};

/// Weighted sum of member logits.
class FusedClassifier final : public Classifier {
public:
    FusedClassifier(std::vector<ClassifierPtr> members, std::vector<double> weights);

    int num_classes() const override { return members_.front()->num_classes(); }
    InputShape input_shape() const override { return members_.front()->input_shape(); }
    std::string arch() const override { return "fused"; }

    Matrix logits(const Tensor& x) const override;
    Tensor backward_input(const Tensor& x, const Matrix& dlogits) const override;

    const std::vector<ClassifierPtr>& members() const { return members_; }
    const std::vector<double>& weights() const { return weights_; }

private:
    std::vector<ClassifierPtr> members_;
    std::vector<double> weights_;
};

/// Members must agree on classes and input shape; weights must sum to 1.
ClassifierPtr fuse_logits(std::vector<ClassifierPtr> models, std::vector<double> weights);
/// Equal weights.
ClassifierPtr fuse_logits(std::vector<ClassifierPtr> models);

/// Directory with one NPY file per parameter and a `manifest.txt` listing the
/// architecture, class count, input shape and parameter shapes.
void save_model(const Classifier& model, const std::filesystem::path& dir);
ClassifierPtr load_model(const std::filesystem::path& dir);

}  // namespace tia
