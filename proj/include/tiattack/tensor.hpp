#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tia {

/// NCHW extent of a Tensor.
struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t size() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    std::size_t image_size() const { return static_cast<std::size_t>(c) * h * w; }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

/// Dense float64 array in (batch, channel, row, col) order.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
    double operator()(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    /// Elements of batch item `n` (all channels).
    std::span<double> image_values(int n);
    std::span<const double> image_values(int n) const;

    /// Copy of batch item `n` as a 1-image tensor.
    Tensor image(int n) const;
    /// Copy of batch items [first, first + count).
    Tensor slice(int first, int count) const;

    bool operator==(const Tensor&) const = default;

private:
    std::size_t index(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }

    Shape shape_;
    std::vector<double> data_;
};

/// Stack single images (or batches) along the batch axis.
Tensor concat_batch(std::span<const Tensor> parts);

/// Row-major 2D filter used by conv2d_same.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0);
    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    bool operator==(const Matrix&) const = default;
};

/// Rotate by 180 degrees.
Matrix flip(const Matrix& m);

enum class ShiftMode { ZeroFill, Circular };

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor sign(const Tensor& a);

double l1_norm(std::span<const double> v);
double l2_norm(std::span<const double> v);
double linf_norm(std::span<const double> v);
inline double l1_norm(const Tensor& t) { return l1_norm(t.values()); }
inline double l2_norm(const Tensor& t) { return l2_norm(t.values()); }
inline double linf_norm(const Tensor& t) { return linf_norm(t.values()); }

double dot(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// out[a, b] = t[a - i, b - j]. Vacated pixels are 0 (ZeroFill) or wrap (Circular).
Tensor shift(const Tensor& t, int i, int j, ShiftMode mode = ShiftMode::ZeroFill);

/// Transpose of shift(., i, j, mode), computed by scattering each output element
/// back to its source pixel.
Tensor shift_adjoint(const Tensor& g, int i, int j, ShiftMode mode = ShiftMode::ZeroFill);

/// Depthwise same-size cross-correlation with an odd-sided filter:
///   out[a, b] = sum_{p,q in [-k,k]} f[p, q] * t[a + p, b + q]
/// Out-of-range reads are 0 for ZeroFill and wrap for Circular.
Tensor conv2d_same(const Tensor& t, const Matrix& filter, ShiftMode mode = ShiftMode::ZeroFill);

/// Nearest-neighbour resize, src = floor(dst * orig / new).
Tensor resize_nearest(const Tensor& t, int new_h, int new_w);
/// Exact transpose of resize_nearest (sums colliding gradients).
Tensor resize_nearest_adjoint(const Tensor& g, int orig_h, int orig_w);

/// Place `t` at (top, left) on a zero canvas of size canvas_h x canvas_w.
Tensor pad_to(const Tensor& t, int canvas_h, int canvas_w, int top, int left);
/// Adjoint of pad_to: crop the h x w window at (top, left).
Tensor crop(const Tensor& t, int h, int w, int top, int left);

}  // namespace tia
