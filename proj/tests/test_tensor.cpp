#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_support.hpp"
#include "tiattack/errors.hpp"
#include "tiattack/io.hpp"
#include "tiattack/tensor.hpp"

using namespace tia;
using tia::testing::random_matrix;
using tia::testing::random_tensor;
using tia::testing::shift_and_sum;

namespace {

Tensor two_by_two() { return Tensor(Shape{1, 1, 2, 2}, {1, 2, 3, 4}); }

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST_CASE("tensor construction checks data length") {
    CHECK_THROWS_AS(Tensor(Shape{1, 1, 2, 2}, {1, 2, 3}), std::invalid_argument);
    Tensor t(Shape{2, 3, 4, 5});
    CHECK(t.size() == 120);
    CHECK(t.image_values(1).size() == 60);
}

TEST_CASE("shift") {
    SUBCASE("zero fill moves content down") {
        CHECK(vals(shift(two_by_two(), 1, 0, ShiftMode::ZeroFill)) == std::vector<double>{0, 0, 1, 2});
    }
    SUBCASE("circular wraps") {
        CHECK(vals(shift(two_by_two(), 1, 0, ShiftMode::Circular)) == std::vector<double>{3, 4, 1, 2});
    }
    SUBCASE("zero shift is the identity, bit for bit") {
        Rng rng(3);
        Tensor t = random_tensor(Shape{2, 3, 7, 5}, rng, -1, 1);
        t[0] = -0.0;
        Tensor s = shift(t, 0, 0, ShiftMode::ZeroFill);
        CHECK(std::signbit(s[0]));
        CHECK(s == t);
    }
    SUBCASE("shift magnitude must be below the extent") {
        CHECK_THROWS_AS(shift(two_by_two(), 2, 0), std::invalid_argument);
        CHECK_THROWS_AS(shift(two_by_two(), 0, -2), std::invalid_argument);
    }
    SUBCASE("circular shift round-trips exactly") {
        Rng rng(11);
        for (int trial = 0; trial < 50; ++trial) {
            Tensor t = random_tensor(Shape{1, 2, 9, 6}, rng, -1, 1);
            const int i = static_cast<int>(rng.uniform_int(-8, 8));
            const int j = static_cast<int>(rng.uniform_int(-5, 5));
            CHECK(shift(shift(t, i, j, ShiftMode::Circular), -i, -j, ShiftMode::Circular) == t);
        }
    }
    SUBCASE("scatter adjoint is the transpose of shift") {
        Rng rng(5);
        for (ShiftMode mode : {ShiftMode::ZeroFill, ShiftMode::Circular}) {
            for (int trial = 0; trial < 20; ++trial) {
                Tensor a = random_tensor(Shape{1, 1, 8, 8}, rng, -1, 1);
                Tensor b = random_tensor(Shape{1, 1, 8, 8}, rng, -1, 1);
                const int i = static_cast<int>(rng.uniform_int(-7, 7));
                const int j = static_cast<int>(rng.uniform_int(-7, 7));
                CHECK(dot(shift(a, i, j, mode), b) == doctest::Approx(dot(a, shift_adjoint(b, i, j, mode))).epsilon(1e-12));
                // Reverse shift with the same boundary fill is the adjoint.
                CHECK(max_abs_diff(shift_adjoint(b, i, j, mode), shift(b, -i, -j, mode)) == 0.0);
            }
        }
    }
}

TEST_CASE("conv2d_same") {
    SUBCASE("1x1 identity kernel returns the input bit for bit") {
        Rng rng(1);
        Tensor t = random_tensor(Shape{2, 2, 6, 6}, rng, -1, 1);
        t[3] = -0.0;
        Tensor out = conv2d_same(t, Matrix(1, 1, 1.0));
        CHECK(out == t);
        CHECK(std::signbit(out[3]));
    }
    SUBCASE("impulse response embeds the kernel at the impulse") {
        Rng rng(2);
        Matrix f = random_matrix(5, rng);
        Tensor delta(Shape{1, 1, 9, 9});
        delta(0, 0, 4, 4) = 1.0;
        Tensor out = conv2d_same(delta, f);
        for (int a = 0; a < 9; ++a)
            for (int b = 0; b < 9; ++b) {
                const bool inside = a >= 2 && a <= 6 && b >= 2 && b <= 6;
                // Correlation places the flipped kernel; the kernels the attacks use are symmetric.
                const double expected = inside ? flip(f).at(a - 2, b - 2) : 0.0;
                CHECK(out(0, 0, a, b) == expected);
            }
    }
    SUBCASE("symmetric kernel impulse response is the kernel itself") {
        Matrix f(3, 3);
        f.values = {1, 2, 1, 2, 4, 2, 1, 2, 1};
        Tensor delta(Shape{1, 1, 5, 5});
        delta(0, 0, 2, 2) = 1.0;
        Tensor out = conv2d_same(delta, f);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) CHECK(out(0, 0, a + 1, b + 1) == f.at(a, b));
        CHECK(out(0, 0, 0, 0) == 0.0);
    }
    SUBCASE("random 16x16 tensor, random 5x5 kernel matches shift-and-sum") {
        Rng rng(7);
        Tensor t = random_tensor(Shape{1, 1, 16, 16}, rng, -1, 1);
        Matrix f = random_matrix(5, rng);
        CHECK(max_abs_diff(conv2d_same(t, f), shift_and_sum(t, f)) < 1e-9);
        CHECK(max_abs_diff(conv2d_same(t, f, ShiftMode::Circular), shift_and_sum(t, f, ShiftMode::Circular)) < 1e-9);
    }
    SUBCASE("depthwise: channels are filtered independently") {
        Rng rng(8);
        Tensor t = random_tensor(Shape{2, 3, 8, 8}, rng);
        Matrix f = random_matrix(3, rng);
        Tensor out = conv2d_same(t, f);
        for (int n = 0; n < 2; ++n)
            for (int c = 0; c < 3; ++c) {
                Tensor plane(Shape{1, 1, 8, 8});
                for (int a = 0; a < 8; ++a)
                    for (int b = 0; b < 8; ++b) plane(0, 0, a, b) = t(n, c, a, b);
                Tensor po = conv2d_same(plane, f);
                for (int a = 0; a < 8; ++a)
                    for (int b = 0; b < 8; ++b) CHECK(out(n, c, a, b) == po(0, 0, a, b));
            }
    }
    SUBCASE("correlation adjoint is correlation with the flipped kernel") {
        Rng rng(9);
        for (int trial = 0; trial < 20; ++trial) {
            Tensor a = random_tensor(Shape{1, 2, 10, 10}, rng, -1, 1);
            Tensor b = random_tensor(Shape{1, 2, 10, 10}, rng, -1, 1);
            Matrix f = random_matrix(2 * static_cast<int>(rng.uniform_int(0, 3)) + 1, rng);
            CHECK(std::abs(dot(conv2d_same(a, f), b) - dot(a, conv2d_same(b, flip(f)))) < 1e-9);
        }
    }
    SUBCASE("argument errors") {
        Tensor t(Shape{1, 1, 4, 4});
        CHECK_THROWS_AS(conv2d_same(t, Matrix(2, 2, 0.25)), std::invalid_argument);
        CHECK_THROWS_AS(conv2d_same(t, Matrix(5, 5, 0.04)), std::invalid_argument);
    }
}

TEST_CASE("elementwise suite and norms") {
    Tensor v(Shape{1, 1, 1, 3}, {-2, 0, 3});
    CHECK(vals(sign(v)) == std::vector<double>{-1, 0, 1});
    CHECK(linf_norm(Tensor(Shape{1, 1, 1, 3}, {1, -5, 2})) == 5.0);
    CHECK(l1_norm(Tensor(Shape{1, 1, 2, 2}, 1.0)) == 4.0);
    CHECK(l2_norm(Tensor(Shape{1, 1, 1, 2}, {3, 4})) == 5.0);
    CHECK(vals(clamp(v, -1, 1)) == std::vector<double>{-1, 0, 1});
    CHECK(vals(add(v, v)) == std::vector<double>{-4, 0, 6});
    CHECK(vals(sub(v, v)) == std::vector<double>{0, 0, 0});
    CHECK(vals(mul(v, v)) == std::vector<double>{4, 0, 9});
    CHECK(vals(scale(v, 0.5)) == std::vector<double>{-1, 0, 1.5});
    CHECK_THROWS_AS(add(v, Tensor(Shape{1, 1, 1, 2})), std::invalid_argument);

    Rng rng(4);
    Tensor r = random_tensor(Shape{2, 1, 5, 5}, rng, -2, 2);
    CHECK(sign(sign(r)) == sign(r));
    CHECK(clamp(clamp(r, -0.5, 0.7), -0.5, 0.7) == clamp(r, -0.5, 0.7));
}

TEST_CASE("nearest resize and its adjoint") {
    SUBCASE("same size is the identity") {
        CHECK(resize_nearest(two_by_two(), 2, 2) == two_by_two());
    }
    SUBCASE("2x upsampling replicates blocks") {
        Tensor up = resize_nearest(two_by_two(), 4, 4);
        CHECK(vals(up) == std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4});
    }
    SUBCASE("adjoint of all-ones 4x4 is the explicit transpose applied to ones") {
        // Build the 16x4 replication matrix column by column from basis images.
        std::vector<std::vector<double>> m(16, std::vector<double>(4));
        for (int col = 0; col < 4; ++col) {
            Tensor e(Shape{1, 1, 2, 2});
            e[col] = 1.0;
            Tensor img = resize_nearest(e, 4, 4);
            for (int row = 0; row < 16; ++row) m[row][col] = img[row];
        }
        std::vector<double> transpose_ones(4, 0.0);
        for (int col = 0; col < 4; ++col)
            for (int row = 0; row < 16; ++row) transpose_ones[col] += m[row][col];
        CHECK(transpose_ones == std::vector<double>{4, 4, 4, 4});
        CHECK(vals(resize_nearest_adjoint(Tensor(Shape{1, 1, 4, 4}, 1.0), 2, 2)) == transpose_ones);
    }
    SUBCASE("inner-product transpose identity") {
        Rng rng(12);
        for (int trial = 0; trial < 30; ++trial) {
            const int oh = static_cast<int>(rng.uniform_int(1, 12)), ow = static_cast<int>(rng.uniform_int(1, 12));
            const int nh = static_cast<int>(rng.uniform_int(1, 12)), nw = static_cast<int>(rng.uniform_int(1, 12));
            Tensor a = random_tensor(Shape{2, 2, oh, ow}, rng, -1, 1);
            Tensor b = random_tensor(Shape{2, 2, nh, nw}, rng, -1, 1);
            CHECK(std::abs(dot(resize_nearest(a, nh, nw), b) - dot(a, resize_nearest_adjoint(b, oh, ow))) < 1e-12);
        }
    }
    SUBCASE("pad and crop are adjoint") {
        Rng rng(13);
        Tensor a = random_tensor(Shape{1, 1, 5, 5}, rng);
        Tensor b = random_tensor(Shape{1, 1, 8, 8}, rng);
        CHECK(dot(pad_to(a, 8, 8, 2, 1), b) == doctest::Approx(dot(a, crop(b, 5, 5, 2, 1))).epsilon(1e-14));
    }
    CHECK_THROWS_AS(resize_nearest(two_by_two(), 0, 3), std::invalid_argument);
}

TEST_CASE("npy round trip and format errors") {
    const auto dir = std::filesystem::temp_directory_path() / "tiattack_test_tensor";
    std::filesystem::create_directories(dir);
    Rng rng(21);
    Tensor t = random_tensor(Shape{3, 2, 4, 5}, rng, -1, 1);
    write_npy(dir / "t.npy", t);
    CHECK(read_npy_tensor(dir / "t.npy") == t);

    // Header is padded to a multiple of 64 bytes.
    CHECK(std::filesystem::file_size(dir / "t.npy") % 8 == 0);
    CHECK((std::filesystem::file_size(dir / "t.npy") - t.size() * 8) % 64 == 0);

    const std::size_t shape1[1] = {3};
    const double d1[3] = {1, 2, 3};
    write_npy(dir / "v.npy", shape1, d1);
    NpyArray v = read_npy(dir / "v.npy");
    CHECK(v.shape == std::vector<std::size_t>{3});
    CHECK(v.data == std::vector<double>{1, 2, 3});

    std::ofstream(dir / "bad.npy", std::ios::binary) << "NOTNPY....";
    CHECK_THROWS_AS(read_npy(dir / "bad.npy"), FormatError);

    std::filesystem::resize_file(dir / "t.npy", std::filesystem::file_size(dir / "t.npy") - 8);
    CHECK_THROWS_AS(read_npy(dir / "t.npy"), FormatError);
}

TEST_CASE("pgm export scales by 255 and rounds") {
    const auto path = std::filesystem::temp_directory_path() / "tiattack_test.pgm";
    Tensor t(Shape{1, 1, 1, 3}, {0.0, 0.5, 1.0});
    write_pgm(path, t);
    std::ifstream in(path, std::ios::binary);
    std::string magic;
    int w, h, maxv;
    in >> magic >> w >> h >> maxv;
    in.get();
    unsigned char px[3];
    in.read(reinterpret_cast<char*>(px), 3);
    CHECK(magic == "P5");
    CHECK(w == 3);
    CHECK(h == 1);
    CHECK(maxv == 255);
    CHECK(px[0] == 0);
    CHECK(px[1] == 128);
    CHECK(px[2] == 255);
}
