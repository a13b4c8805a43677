#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "test_support.hpp"
#include "tiattack/attacks.hpp"

using namespace tia;
using namespace tia::testing;

namespace {

constexpr InputShape kSmall{1, 12, 12};

struct Fixture {
    TinyCnn model = random_cnn(77, 10, kSmall);
    Tensor x;
    std::vector<int> y;

    explicit Fixture(int n = 4) {
        Rng rng(78);
        x = random_tensor(Shape{n, 1, 12, 12}, rng);
        y = random_labels(n, 10, rng);
    }
    AdversarialResult run(const AttackConfig& cfg) const { return attack(model, x, y, cfg); }
};

AttackConfig base(AttackMethod m, Norm norm) {
    AttackConfig cfg = AttackConfig::defaults(m, norm, kSmall);
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("defaults and effective settings") {
    AttackConfig linf = AttackConfig::defaults(AttackMethod::MIFGSM, Norm::Linf, {1, 28, 28});
    CHECK(linf.epsilon == 16.0 / 255.0);
    CHECK(linf.alpha == 1.6 / 255.0);
    CHECK(linf.iterations == 10);
    CHECK(linf.momentum == 1.0);
    CHECK_FALSE(linf.kernel.has_value());

    AttackConfig l2 = AttackConfig::defaults(AttackMethod::BIM, Norm::L2, {1, 28, 28}, true);
    CHECK(l2.epsilon == doctest::Approx(10.0 / 255.0 * 28.0).epsilon(1e-15));
    CHECK(l2.alpha == doctest::Approx(l2.epsilon / 10.0).epsilon(1e-15));
    CHECK(l2.momentum == 0.0);
    REQUIRE(l2.kernel.has_value());
    CHECK(l2.kernel->side() == 15);
    CHECK(l2.name() == "TI-BIM");

    AttackConfig f;
    f.method = AttackMethod::FGSM;
    f.epsilon = 0.2;
    AttackConfig e = f.effective();
    CHECK(e.iterations == 1);
    CHECK(e.alpha == 0.2);
    CHECK(e.momentum == 0.0);
}

TEST_CASE("config validation") {
    Fixture fx(1);
    AttackConfig cfg = base(AttackMethod::BIM, Norm::Linf);
    cfg.epsilon = -0.1;
    CHECK_THROWS_AS(fx.run(cfg), std::invalid_argument);
    cfg = base(AttackMethod::BIM, Norm::Linf);
    cfg.iterations = 0;
    CHECK_THROWS_AS(fx.run(cfg), std::invalid_argument);
    cfg = base(AttackMethod::DIM, Norm::Linf);
    cfg.dim_prob = 1.5;
    CHECK_THROWS_AS(fx.run(cfg), std::invalid_argument);
    cfg = base(AttackMethod::BIM, Norm::Linf);
    Tensor bad = fx.x;
    bad[0] = 1.5;
    CHECK_THROWS_AS(attack(fx.model, bad, fx.y, cfg), std::invalid_argument);
    CHECK_THROWS_AS(attack(fx.model, fx.x, std::vector<int>{}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(parse_method("pgd"), std::invalid_argument);
    CHECK(parse_method("MI-FGSM") == AttackMethod::MIFGSM);
    CHECK(parse_norm("L2") == Norm::L2);
}

TEST_CASE("degenerate settings reproduce the simpler attacks bit for bit") {
    Fixture fx;
    for (Norm norm : {Norm::Linf, Norm::L2}) {
        CAPTURE(to_string(norm));
        SUBCASE("k = 0 kernel changes nothing") {
            for (AttackMethod m : {AttackMethod::FGSM, AttackMethod::BIM, AttackMethod::MIFGSM, AttackMethod::DIM}) {
                CAPTURE(to_string(m));
                AttackConfig plain = base(m, norm);
                AttackConfig ti = plain;
                ti.kernel = gaussian_kernel(0);
                CHECK(fx.run(ti) == fx.run(plain));
                ti.kernel = uniform_kernel(0);
                CHECK(fx.run(ti) == fx.run(plain));
            }
        }
        SUBCASE("MI-FGSM with zero momentum is BIM") {
            AttackConfig mi = base(AttackMethod::MIFGSM, norm);
            mi.momentum = 0.0;
            CHECK(fx.run(mi) == fx.run(base(AttackMethod::BIM, norm)));
        }
        SUBCASE("DIM with p = 0 and zero momentum is BIM") {
            AttackConfig dim = base(AttackMethod::DIM, norm);
            dim.dim_prob = 0.0;
            dim.momentum = 0.0;
            CHECK(fx.run(dim) == fx.run(base(AttackMethod::BIM, norm)));
        }
        SUBCASE("FGSM is one BIM step of size epsilon") {
            AttackConfig bim = base(AttackMethod::BIM, norm);
            bim.iterations = 1;
            bim.alpha = bim.epsilon;
            CHECK(fx.run(base(AttackMethod::FGSM, norm)) == fx.run(bim));
        }
        SUBCASE("TI with k = 0 on top of the degeneracies") {
            AttackConfig dim = base(AttackMethod::DIM, norm);
            dim.dim_prob = 0.0;
            dim.momentum = 0.0;
            dim.kernel = linear_kernel(0);
            CHECK(fx.run(dim) == fx.run(base(AttackMethod::BIM, norm)));
        }
    }
}

TEST_CASE("iterates stay inside the epsilon ball and the pixel box") {
    Fixture fx(3);
    Rng rng(90);
    const AttackMethod methods[] = {AttackMethod::FGSM, AttackMethod::BIM, AttackMethod::MIFGSM, AttackMethod::DIM};
    int violations = 0;
    for (int run = 0; run < 200; ++run) {
        const Norm norm = rng.bernoulli(0.5) ? Norm::Linf : Norm::L2;
        AttackConfig cfg = base(methods[rng.uniform_int(0, 3)], norm);
        cfg.epsilon = norm == Norm::Linf ? rng.uniform(0.0, 0.5) : rng.uniform(0.0, 6.0);
        cfg.iterations = static_cast<int>(rng.uniform_int(1, 4));
        cfg.alpha = cfg.epsilon * rng.uniform(0.1, 2.0) + 1e-6;
        if (rng.bernoulli(0.5)) cfg.kernel = make_kernel(static_cast<KernelKind>(rng.uniform_int(0, 2)), static_cast<int>(rng.uniform_int(0, 4)));
        cfg.seed = static_cast<std::uint64_t>(run);
        AdversarialResult r = fx.run(cfg);
        for (double n : r.perturbation_norm) violations += n > cfg.epsilon + 1e-9;
        for (double v : r.x_adv.values()) violations += v < 0.0 || v > 1.0;
    }
    CHECK(violations == 0);
}

TEST_CASE("FGSM on a linear-sum model") {
    SUBCASE("zero gradient leaves the input unchanged and is flagged") {
        LinearSumModel m(std::vector<double>(10, 0.0), std::vector<double>(10, 0.0), kSmall);
        Tensor x(Shape{2, 1, 12, 12}, 0.5);
        for (Norm norm : {Norm::Linf, Norm::L2}) {
            AdversarialResult r = attack(m, x, std::vector<int>{0, 1}, base(AttackMethod::FGSM, norm));
            CHECK(r.x_adv == x);
            CHECK(r.zero_gradient == std::vector<std::vector<bool>>{{true, true}});
            CHECK(r.perturbation_norm == std::vector<double>{0.0, 0.0});
        }
    }
    SUBCASE("uniformly positive gradient moves every pixel up by epsilon") {
        // Label 0 carries the most negative slope, so dJ/dx > 0 everywhere.
        std::vector<double> w(10);
        for (int c = 0; c < 10; ++c) w[c] = 0.01 * c;
        LinearSumModel m(w, std::vector<double>(10, 0.0), kSmall);
        Tensor x(Shape{1, 1, 12, 12}, 0.5);
        AttackConfig cfg = base(AttackMethod::FGSM, Norm::Linf);
        cfg.epsilon = 0.1;
        AdversarialResult r = attack(m, x, std::vector<int>{0}, cfg);
        for (double v : r.x_adv.values()) CHECK(v == 0.5 + 0.1);
        cfg.epsilon = 0.7;
        r = attack(m, x, std::vector<int>{0}, cfg);
        for (double v : r.x_adv.values()) CHECK(v == 1.0);
    }
}

TEST_CASE("projection") {
    AttackConfig cfg;
    cfg.epsilon = 0.1;
    Tensor real(Shape{1, 1, 1, 3}, {0.5, 0.5, 0.05});
    Tensor x(Shape{1, 1, 1, 3}, {0.8, 0.45, -0.3});
    CHECK(project(x, real, cfg) == Tensor(Shape{1, 1, 1, 3}, {0.6, 0.45, 0.0}));

    cfg.norm = Norm::L2;
    cfg.epsilon = 0.1;
    Tensor r2(Shape{1, 1, 1, 2}, 0.5);
    Tensor x2(Shape{1, 1, 1, 2}, {0.5 + 0.3, 0.5 + 0.4});
    Tensor p = project(x2, r2, cfg);
    CHECK(p[0] == doctest::Approx(0.56).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.58).epsilon(1e-14));
    Tensor inside(Shape{1, 1, 1, 2}, {0.52, 0.49});
    CHECK(project(inside, r2, cfg) == inside);
}

TEST_CASE("diverse-inputs transform") {
    Rng data(60);
    Tensor x = random_tensor(Shape{4, 2, 10, 10}, data);
    SUBCASE("p = 0 is the identity") {
        AttackConfig cfg;
        cfg.dim_prob = 0.0;
        Rng rng(1);
        DiTransform tr = di_transform(x, cfg, rng);
        CHECK(tr.output == x);
        CHECK(tr.adjoint(x) == x);
    }
    SUBCASE("resize to full size at offset 0 is the identity") {
        AttackConfig cfg;
        cfg.dim_prob = 1.0;
        cfg.dim_resize_low = 1.0;
        Rng rng(2);
        DiTransform tr = di_transform(x, cfg, rng);
        for (const DiPlacement& p : tr.placements) {
            CHECK(p.applied);
            CHECK(p.size == 10);
            CHECK(p.top == 0);
            CHECK(p.left == 0);
        }
        CHECK(tr.output == x);
    }
    SUBCASE("placements stay on the canvas and the adjoint is the transpose") {
        AttackConfig cfg;
        cfg.dim_prob = 0.7;
        cfg.dim_resize_low = 0.5;
        for (std::uint64_t seed = 0; seed < 30; ++seed) {
            Rng rng(seed);
            DiTransform tr = di_transform(x, cfg, rng);
            for (const DiPlacement& p : tr.placements) {
                if (!p.applied) continue;
                CHECK(p.size >= 5);
                CHECK(p.size <= 10);
                CHECK(p.top + p.size <= 10);
                CHECK(p.left + p.size <= 10);
            }
            Tensor g = random_tensor(x.shape(), data, -1, 1);
            CHECK(std::abs(dot(tr.output, g) - dot(x, tr.adjoint(g))) < 1e-12);
        }
    }
    SUBCASE("non-square images are rejected") {
        AttackConfig cfg;
        Rng rng(3);
        CHECK_THROWS_AS(di_transform(Tensor(Shape{1, 1, 4, 6}), cfg, rng), std::invalid_argument);
    }
}

TEST_CASE("smoothing is linear in the gradient") {
    Rng rng(70);
    Tensor a = random_tensor(Shape{2, 1, 12, 12}, rng, -1, 1);
    Tensor b = random_tensor(Shape{2, 1, 12, 12}, rng, -1, 1);
    Kernel w = gaussian_kernel(3);
    Tensor lhs = smooth_gradient(add(scale(a, 2.0), scale(b, -3.0)), w);
    Tensor rhs = add(scale(smooth_gradient(a, w), 2.0), scale(smooth_gradient(b, w), -3.0));
    CHECK(max_abs_diff(lhs, rhs) < 1e-12);
}

TEST_CASE("attacks are deterministic given the seed") {
    Fixture fx;
    AttackConfig cfg = base(AttackMethod::DIM, Norm::Linf);
    cfg.kernel = gaussian_kernel(2);
    AdversarialResult a = fx.run(cfg);
    CHECK(fx.run(cfg) == a);
    cfg.seed = 6;
    CHECK_FALSE(fx.run(cfg).x_adv == a.x_adv);
    CHECK(a.loss_trace.size() == 11);
    CHECK(a.zero_gradient.size() == 10);
}

TEST_CASE("attack_step matches the documented update") {
    Fixture fx(2);
    AttackConfig cfg = base(AttackMethod::MIFGSM, Norm::Linf);
    cfg.alpha = 0.01;
    AttackState st = initial_state(fx.x, cfg);
    std::vector<bool> zero;
    attack_step(fx.model, fx.x, fx.y, cfg, st, zero);
    LossAndGrad lg = loss_and_input_grad(fx.model, fx.x, fx.y);
    for (int n = 0; n < 2; ++n) {
        const double l1 = l1_norm(lg.grad.image_values(n));
        for (std::size_t i = 0; i < lg.grad.image_values(n).size(); ++i) {
            const double g = lg.grad.image_values(n)[i];
            CHECK(st.momentum.image_values(n)[i] == g / l1);
            const double want = std::clamp(fx.x.image_values(n)[i] + 0.01 * (g > 0 ? 1 : g < 0 ? -1 : 0), 0.0, 1.0);
            CHECK(st.x.image_values(n)[i] == want);
        }
    }
    CHECK(st.t == 1);
}

TEST_CASE("epsilon = 0 returns the clean images") {
    Fixture fx;
    AttackConfig cfg = base(AttackMethod::MIFGSM, Norm::Linf);
    cfg.epsilon = 0.0;
    AdversarialResult r = fx.run(cfg);
    CHECK(r.x_adv == fx.x);
    const std::vector<int> pred = predict(fx.model, fx.x);
    for (std::size_t n = 0; n < pred.size(); ++n) CHECK(r.success[n] == (pred[n] != fx.y[n]));
}
