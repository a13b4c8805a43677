#include "tiattack/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tia {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() +
                                    " vs " + b.shape().str());
    }
}

template <typename F>
Tensor map(const Tensor& a, F f) {
    Tensor out(a.shape());
    auto src = a.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
    return out;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
    require_same_shape(a, b, op);
    Tensor out(a.shape());
    auto x = a.values();
    auto y = b.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
    return out;
}

int wrap(int v, int n) {
    int r = v % n;
    return r < 0 ? r + n : r;
}

void check_shift(const Tensor& t, int i, int j) {
    if (std::abs(i) >= t.shape().h || std::abs(j) >= t.shape().w) {
        throw std::invalid_argument("shift: |i|, |j| must be smaller than the spatial extent");
    }
}

}  // namespace

std::string Shape::str() const {
    std::ostringstream os;
    os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
        throw std::invalid_argument("Tensor: negative dimension in " + shape.str());
    }
    data_.assign(shape.size(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape.size()) {
        throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape.str());
    }
}

std::span<double> Tensor::image_values(int n) {
    return std::span<double>(data_).subspan(n * shape_.image_size(), shape_.image_size());
}

std::span<const double> Tensor::image_values(int n) const {
    return std::span<const double>(data_).subspan(n * shape_.image_size(), shape_.image_size());
}

Tensor Tensor::image(int n) const { return slice(n, 1); }

Tensor Tensor::slice(int first, int count) const {
    if (first < 0 || count < 0 || first + count > shape_.n) {
        throw std::out_of_range("Tensor::slice: range outside batch");
    }
    Shape s = shape_;
    s.n = count;
    auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * shape_.image_size());
    return Tensor(s, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(s.size())));
}

Tensor concat_batch(std::span<const Tensor> parts) {
    if (parts.empty()) return Tensor();
    Shape s = parts.front().shape();
    s.n = 0;
    std::vector<double> data;
    for (const auto& p : parts) {
        const Shape& ps = p.shape();
        if (ps.c != s.c || ps.h != s.h || ps.w != s.w) {
            throw std::invalid_argument("concat_batch: image shape mismatch");
        }
        s.n += ps.n;
        data.insert(data.end(), p.values().begin(), p.values().end());
    }
    return Tensor(s, std::move(data));
}

Matrix::Matrix(int r, int c, double fill)
    : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}

Matrix flip(const Matrix& m) {
    Matrix out(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) out.at(r, c) = m.at(m.rows - 1 - r, m.cols - 1 - c);
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double s) {
    return map(a, [s](double x) { return s * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
    return map(a, [lo, hi](double x) { return std::clamp(x, lo, hi); });
}

Tensor sign(const Tensor& a) {
    return map(a, [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

double l1_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double linf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Tensor shift(const Tensor& t, int i, int j, ShiftMode mode) {
    check_shift(t, i, j);
    if (i == 0 && j == 0) return t;
    const Shape& s = t.shape();
    Tensor out(s);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int a = 0; a < s.h; ++a)
                for (int b = 0; b < s.w; ++b) {
                    int sa = a - i;
                    int sb = b - j;
                    if (mode == ShiftMode::Circular) {
                        out(n, c, a, b) = t(n, c, wrap(sa, s.h), wrap(sb, s.w));
                    } else if (sa >= 0 && sa < s.h && sb >= 0 && sb < s.w) {
                        out(n, c, a, b) = t(n, c, sa, sb);
                    }
                }
    return out;
}

Tensor shift_adjoint(const Tensor& g, int i, int j, ShiftMode mode) {
    check_shift(g, i, j);
    const Shape& s = g.shape();
    Tensor out(s);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int a = 0; a < s.h; ++a)
                for (int b = 0; b < s.w; ++b) {
                    int sa = a - i;
                    int sb = b - j;
                    if (mode == ShiftMode::Circular) {
                        out(n, c, wrap(sa, s.h), wrap(sb, s.w)) += g(n, c, a, b);
                    } else if (sa >= 0 && sa < s.h && sb >= 0 && sb < s.w) {
                        out(n, c, sa, sb) += g(n, c, a, b);
                    }
                }
    return out;
}

Tensor conv2d_same(const Tensor& t, const Matrix& filter, ShiftMode mode) {
    if (filter.rows != filter.cols || filter.rows % 2 == 0) {
        throw std::invalid_argument("conv2d_same: filter must be square with odd side");
    }
    const Shape& s = t.shape();
    if (filter.rows > std::min(s.h, s.w)) {
        throw std::invalid_argument("conv2d_same: filter side exceeds spatial extent");
    }
    if (filter.rows == 1) return scale(t, filter.values[0]);

    const int k = filter.rows / 2;
    Tensor out(s);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int a = 0; a < s.h; ++a)
                for (int b = 0; b < s.w; ++b) {
                    double acc = 0.0;
                    for (int p = -k; p <= k; ++p) {
                        int ra = a + p;
                        if (mode == ShiftMode::Circular) {
                            ra = wrap(ra, s.h);
                        } else if (ra < 0 || ra >= s.h) {
                            continue;
                        }
                        for (int q = -k; q <= k; ++q) {
                            int rb = b + q;
                            if (mode == ShiftMode::Circular) {
                                rb = wrap(rb, s.w);
                            } else if (rb < 0 || rb >= s.w) {
                                continue;
                            }
                            acc += filter.at(p + k, q + k) * t(n, c, ra, rb);
                        }
                    }
                    out(n, c, a, b) = acc;
                }
    return out;
}

Tensor resize_nearest(const Tensor& t, int new_h, int new_w) {
    if (new_h < 1 || new_w < 1) throw std::invalid_argument("resize_nearest: size must be >= 1");
    const Shape& s = t.shape();
    Tensor out(Shape{s.n, s.c, new_h, new_w});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int a = 0; a < new_h; ++a) {
                int sa = static_cast<int>(static_cast<long long>(a) * s.h / new_h);
                for (int b = 0; b < new_w; ++b) {
                    int sb = static_cast<int>(static_cast<long long>(b) * s.w / new_w);
                    out(n, c, a, b) = t(n, c, sa, sb);
                }
            }
    return out;
}

Tensor resize_nearest_adjoint(const Tensor& g, int orig_h, int orig_w) {
    if (orig_h < 1 || orig_w < 1) {
        throw std::invalid_argument("resize_nearest_adjoint: size must be >= 1");
    }
    const Shape& s = g.shape();
    Tensor out(Shape{s.n, s.c, orig_h, orig_w});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int a = 0; a < s.h; ++a) {
                int sa = static_cast<int>(static_cast<long long>(a) * orig_h / s.h);
                for (int b = 0; b < s.w; ++b) {
                    int sb = static_cast<int>(static_cast<long long>(b) * orig_w / s.w);
                    out(n, c, sa, sb) += g(n, c, a, b);
                }
            }
    return out;
}

Tensor pad_to(const Tensor& t, int canvas_h, int canvas_w, int top, int left) {
    const Shape& s = t.shape();
    if (top < 0 || left < 0 || top + s.h > canvas_h || left + s.w > canvas_w) {
        throw std::invalid_argument("pad_to: image does not fit on canvas");
    }
    Tensor out(Shape{s.n, s.c, canvas_h, canvas_w});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int a = 0; a < s.h; ++a)
                for (int b = 0; b < s.w; ++b) out(n, c, a + top, b + left) = t(n, c, a, b);
    return out;
}

Tensor crop(const Tensor& t, int h, int w, int top, int left) {
    const Shape& s = t.shape();
    if (top < 0 || left < 0 || top + h > s.h || left + w > s.w) {
        throw std::invalid_argument("crop: window outside image");
    }
    Tensor out(Shape{s.n, s.c, h, w});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int a = 0; a < h; ++a)
                for (int b = 0; b < w; ++b) out(n, c, a, b) = t(n, c, a + top, b + left);
    return out;
}

}  // namespace tia
