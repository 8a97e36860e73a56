#include <doctest.h>

#include <cmath>

#include "ref/reference.hpp"
#include "tev/gradcheck_suite.hpp"
#include "tev/nn.hpp"

using namespace tev;
using namespace tev::nn;

namespace {

template <typename T>
std::vector<T> random_vec(Rng& rng, size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
    return v;
}

} // namespace

TEST_CASE("dense identity case") {
    Dense<double> layer("d", 3, 3, Activation::Identity);
    layer.weight.value.fill(0.0);
    for (int i = 0; i < 3; ++i) layer.weight.value.values[i * 3 + i] = 1.0;
    layer.bias.value.fill(0.0);
    layer.set_steps(1);
    const double x[3] = {0.5, -2.0, 7.0};
    double y[3];
    layer.forward_step(0, x, y);
    CHECK(y[0] == 0.5);
    CHECK(y[1] == -2.0);
    CHECK(y[2] == 7.0);
}

TEST_CASE("dense 1x1 hand case with gradient") {
    Dense<double> layer("d", 1, 1, Activation::Identity);
    layer.weight.value.values[0] = 2.0;
    layer.bias.value.values[0] = 1.0;
    layer.set_steps(1);
    const double x[1] = {3.0};
    double y[1];
    layer.forward_step(0, x, y);
    CHECK(y[0] == 7.0);
    const double dy[1] = {1.0};
    double dx[1];
    layer.backward_step(0, dy, dx);
    CHECK(layer.weight.grad.values[0] == 3.0); // dL/dW = x
    CHECK(layer.bias.grad.values[0] == 1.0);
    CHECK(dx[0] == 2.0);
}

TEST_CASE("dense batch and step paths agree") {
    Rng rng(4);
    Dense<float> layer("d", 11, 7, Activation::Relu);
    layer.init(rng);
    const int steps = 9;
    layer.set_steps(steps);
    const auto x = random_vec<float>(rng, static_cast<size_t>(steps) * 11);
    std::vector<float> y_batch(static_cast<size_t>(steps) * 7);
    layer.forward_batch(steps, x.data(), y_batch.data());
    for (int t = 0; t < steps; ++t) {
        float y_step[7];
        layer.forward_step(t, &x[static_cast<size_t>(t) * 11], y_step);
        for (int i = 0; i < 7; ++i) CHECK(y_step[i] == doctest::Approx(y_batch[static_cast<size_t>(t) * 7 + i]).epsilon(1e-6));
    }
}

TEST_CASE("conv2d identity kernel") {
    Conv2d<double> conv("c", 1, 1, 1);
    conv.kernels_param.value.values[0] = 1.0;
    conv.bias.value.values[0] = 0.0;
    conv.set_steps(1, 4, 5);
    Rng rng(1);
    const auto x = random_vec<double>(rng, 20);
    std::vector<double> y(20);
    conv.forward_step(0, x.data(), 4, 5, y.data());
    for (size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("conv2d all-ones 3x3 kernel on a constant image") {
    Conv2d<double> conv("c", 3, 1, 1);
    conv.kernels_param.value.fill(1.0);
    conv.bias.value.fill(0.0);
    conv.set_steps(1, 6, 6);
    std::vector<double> x(36, 2.5), y(16);
    conv.forward_step(0, x.data(), 6, 6, y.data());
    for (double v : y) CHECK(v == doctest::Approx(9 * 2.5));
}

TEST_CASE("conv2d matches the naive quadruple-loop oracle") {
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const int H = 4 + static_cast<int>(rng.uniform_int(0, 6));
        const int W = 4 + static_cast<int>(rng.uniform_int(0, 6));
        const int C = 1 + static_cast<int>(rng.uniform_int(0, 2));
        const int F = 1 + static_cast<int>(rng.uniform_int(0, 3));
        const int K = 1 + 2 * static_cast<int>(rng.uniform_int(0, 1));
        const auto in = random_vec<float>(rng, static_cast<size_t>(H) * W * C);
        const auto ker = random_vec<float>(rng, static_cast<size_t>(K) * K * C * F);
        const auto bias = random_vec<float>(rng, F);
        std::vector<float> fast(static_cast<size_t>(H - K + 1) * (W - K + 1) * F);
        kernels::conv2d_forward(in.data(), H, W, C, ker.data(), K, F, bias.data(), fast.data());
        const auto slow = ref::naive_conv2d(in, H, W, C, ker, K, F, bias);
        REQUIRE(fast.size() == slow.size());
        for (size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-5));
    }
}

TEST_CASE("conv2d rejects kernels larger than the input") {
    Conv2d<float> conv("c", 5, 1, 1);
    CHECK_THROWS_AS(conv.set_steps(1, 4, 8), ShapeError);
}

TEST_CASE("maxpool basics and tie-breaking") {
    MaxPool2x2<double> pool;
    pool.set_steps(1, 2, 2, 1);

    SUBCASE("unique maximum routes its gradient") {
        const double x[4] = {1, 2, 3, 4}; // row-major: [[1,2],[3,4]]
        double y[1];
        pool.forward_step(0, x, 2, 2, 1, y);
        CHECK(y[0] == 4.0);
        const double dy[1] = {5.0};
        double dx[4];
        pool.backward_step(0, dy, 1, 1, 1, dx);
        CHECK(dx[0] == 0.0);
        CHECK(dx[1] == 0.0);
        CHECK(dx[2] == 0.0);
        CHECK(dx[3] == 5.0);
    }
    SUBCASE("ties go to the first element in row-major order") {
        const double x[4] = {5, 5, 5, 5};
        double y[1];
        pool.forward_step(0, x, 2, 2, 1, y);
        CHECK(y[0] == 5.0);
        const double dy[1] = {1.0};
        double dx[4];
        pool.backward_step(0, dy, 1, 1, 1, dx);
        CHECK(dx[0] == 1.0);
        CHECK(dx[1] == 0.0);
        CHECK(dx[2] == 0.0);
        CHECK(dx[3] == 0.0);
    }
    SUBCASE("constant input stays constant") {
        MaxPool2x2<double> p2;
        p2.set_steps(1, 4, 4, 2);
        std::vector<double> x(32, 3.3), y(8);
        p2.forward_step(0, x.data(), 4, 4, 2, y.data());
        for (double v : y) CHECK(v == 3.3);
    }
}

TEST_CASE("maxpool rejects odd extents") {
    MaxPool2x2<float> pool;
    CHECK_THROWS_AS(pool.set_steps(1, 5, 4, 1), ShapeError);
    CHECK_THROWS_AS(pool.set_steps(1, 4, 7, 1), ShapeError);
}

TEST_CASE("lstm zero parameters give zero state updates") {
    Lstm<double> lstm("l", 3, 4);
    lstm.wx.value.fill(0.0);
    lstm.wh.value.fill(0.0);
    lstm.b.value.fill(0.0);
    lstm.set_steps(2);
    lstm.reset_state();
    const double x[3] = {0.7, -0.3, 2.0};
    double h[4];
    lstm.forward_step(0, x, h);
    // gates all sigmoid(0)=0.5, g = tanh(0)=0 -> c'=0, h'=0
    for (double v : h) CHECK(v == 0.0);
    for (int i = 0; i < 4; ++i) CHECK(lstm.cell()[i] == 0.0);
}

TEST_CASE("lstm zero input and state with zero biases stays zero") {
    Rng rng(5);
    Lstm<double> lstm("l", 3, 4);
    lstm.init(rng);
    lstm.b.value.fill(0.0); // drop the forget-bias offset for this check
    lstm.set_steps(1);
    lstm.reset_state();
    const double x[3] = {0, 0, 0};
    double h[4];
    lstm.forward_step(0, x, h);
    for (double v : h) CHECK(v == 0.0);
}

TEST_CASE("lstm forget bias initialized to one") {
    Rng rng(5);
    Lstm<double> lstm("l", 3, 4);
    lstm.init(rng);
    for (int i = 0; i < 4; ++i) CHECK(lstm.b.value.values[i] == 0.0);      // input gate
    for (int i = 4; i < 8; ++i) CHECK(lstm.b.value.values[i] == 1.0);      // forget gate
    for (int i = 8; i < 16; ++i) CHECK(lstm.b.value.values[i] == 0.0);     // cell, output
}

TEST_CASE("weighted_bce hand cases") {
    const double w[4] = {10, 40, 30, 100};
    double p[4] = {0.5, 0.5, 0.5, 0.5};
    bool y1[4] = {true, false, false, false};
    double g[4];
    CHECK(weighted_bce(p, y1, w, 4, g) == doctest::Approx(13.0 * std::log(2.0)).epsilon(1e-9));
    CHECK(g[0] == doctest::Approx(-10.0 / 0.5));
    CHECK(g[1] == doctest::Approx(1.0 / 0.5));

    bool y4[4] = {false, false, false, true};
    CHECK(weighted_bce(p, y4, w, 4, g) == doctest::Approx(103.0 * std::log(2.0)).epsilon(1e-9));

    // perfect prediction after clamping
    double perfect[4] = {1.0, 0.0, 0.0, 0.0};
    CHECK(weighted_bce(perfect, y1, w, 4, static_cast<double*>(nullptr)) < 1e-5);
}

TEST_CASE("weighted_bce is nonnegative and matches the p=0.5 closed form") {
    Rng rng(3);
    const double w[4] = {10, 40, 30, 100};
    for (int trial = 0; trial < 200; ++trial) {
        double p[4];
        bool y[4];
        for (int i = 0; i < 4; ++i) {
            p[i] = rng.uniform(0.0, 1.0);
            y[i] = rng.uniform() < 0.5;
        }
        CHECK(weighted_bce(p, y, w, 4, static_cast<double*>(nullptr)) >= 0.0);
    }
    double half[4] = {0.5, 0.5, 0.5, 0.5};
    bool y[4] = {true, false, true, false};
    const double expect = (10.0 + 1.0 + 30.0 + 1.0) * std::log(2.0);
    CHECK(weighted_bce(half, y, w, 4, static_cast<double*>(nullptr)) == doctest::Approx(expect));
}

TEST_CASE("adam first step moves by about the learning rate") {
    Parameter<double> p("p", {1});
    p.value.values[0] = 1.0;
    AdamConfig cfg;
    cfg.learning_rate = 0.001;
    Adam<double> adam({&p}, cfg);
    p.grad.values[0] = 1.0;
    adam.step();
    CHECK(p.value.values[0] == doctest::Approx(1.0 - 0.001).epsilon(1e-6));
}

TEST_CASE("adam with zero gradient or zero rate leaves parameters unchanged") {
    Parameter<float> p("p", {4});
    for (int i = 0; i < 4; ++i) p.value.values[i] = static_cast<float>(i);

    SUBCASE("zero gradient") {
        Adam<float> adam({&p});
        adam.step();
        for (int i = 0; i < 4; ++i) CHECK(p.value.values[i] == static_cast<float>(i));
    }
    SUBCASE("zero learning rate") {
        AdamConfig cfg;
        cfg.learning_rate = 0.0;
        Adam<float> adam({&p}, cfg);
        p.grad.values[2] = 3.5f;
        adam.step();
        for (int i = 0; i < 4; ++i) CHECK(p.value.values[i] == static_cast<float>(i));
    }
}

TEST_CASE("adam trajectories are deterministic") {
    auto run = [] {
        Rng rng(9);
        Parameter<float> p("p", {16});
        for (auto& v : p.value.values) v = static_cast<float>(rng.uniform(-1, 1));
        Adam<float> adam({&p});
        for (int step = 0; step < 20; ++step) {
            for (size_t i = 0; i < p.size(); ++i)
                p.grad.values[i] = static_cast<float>(rng.uniform(-1, 1));
            adam.step();
        }
        return p.value.values;
    };
    CHECK(run() == run());
}

TEST_CASE("gradient suite passes at unit scale") {
    const GradSuiteReport report = run_gradcheck_suite(3, nullptr);
    for (const auto& e : report.entries) {
        INFO(e.fragment);
        CHECK(e.max_rel_error < 1e-4);
    }
}

TEST_CASE("tensor shape bookkeeping") {
    Tensor<float> t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK_THROWS_AS(Tensor<float>({2, 0, 4}), ShapeError);
    Parameter<float> p("x", {3, 5});
    CHECK(p.value.size() == p.grad.size());
}
