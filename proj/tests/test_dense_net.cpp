#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <sstream>

#include "shipems/dense_net.hpp"

using namespace shipems;

namespace {

std::vector<double> random_vec(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_CASE("forward basics", "[dense-net]") {
    SECTION("zero parameters give zero tanh output") {
        Rng rng(1);
        DenseNet net = make_mlp(3, {4}, 2, Activation::relu, Activation::tanh, 1.0, rng);
        for (auto& l : net.layers) {
            std::fill(l.w.a.begin(), l.w.a.end(), 0.0);
            std::fill(l.b.begin(), l.b.end(), 0.0);
        }
        const auto out = forward(net, std::vector<double>{0.3, -0.2, 0.9});
        CHECK(out == std::vector<double>{0.0, 0.0});
    }
    SECTION("single identity layer reproduces the input") {
        DenseNet net;
        Layer l;
        l.w = Matrix(3, 3);
        for (int i = 0; i < 3; ++i) l.w(i, i) = 1.0;
        l.b.assign(3, 0.0);
        l.act = Activation::identity;
        net.layers.push_back(l);
        const std::vector<double> in = {1.5, -2.0, 0.25};
        CHECK(forward(net, in) == in);
    }
    SECTION("actor outputs respect the action limit") {
        Rng rng(7);
        DenseNet actor = make_actor(7, {16, 16}, 4, 0.04, rng);
        for (int i = 0; i < 200; ++i) {
            const auto out = forward(actor, random_vec(rng, 7, -5.0, 5.0));
            for (double v : out) {
                CHECK(v >= -0.04);
                CHECK(v <= 0.04);
            }
        }
    }
    SECTION("dimension mismatch is an error") {
        Rng rng(2);
        DenseNet net = make_mlp(3, {4}, 1, Activation::relu, Activation::identity, 1.0, rng);
        CHECK_THROWS_AS(forward(net, std::vector<double>{1.0, 2.0}), std::invalid_argument);
    }
    SECTION("forward is pure") {
        Rng rng(3);
        DenseNet net = make_mlp(5, {8, 8}, 2, Activation::relu, Activation::tanh, 0.5, rng);
        const auto in = random_vec(rng, 5);
        CHECK(forward(net, in) == forward(net, in));
    }
}

TEST_CASE("gradients match central finite differences", "[dense-net]") {
    Rng rng(20240810);
    int total_checked = 0;
    for (int trial = 0; trial < 12; ++trial) {
        const int in = static_cast<int>(rng.uniform_int(2, 6));
        const int hidden = static_cast<int>(rng.uniform_int(3, 6));
        const int out = static_cast<int>(rng.uniform_int(1, 3));
        const Activation out_act =
            trial % 3 == 0 ? Activation::tanh
                           : (trial % 3 == 1 ? Activation::identity : Activation::relu);
        DenseNet net = make_mlp(in, {hidden, hidden}, out, Activation::relu, out_act,
                                trial % 2 ? 0.04 : 1.0, rng);
        const auto input = random_vec(rng, in);
        const auto upstream = random_vec(rng, out);
        const auto rep = gradient_check(net, input, upstream, 1e-5, 1e-4);
        total_checked += static_cast<int>(rep.n_params);
        CHECK(rep.pass_fraction() == 1.0);
    }
    CHECK(total_checked > 500);
}

TEST_CASE("input gradients are exact too", "[dense-net]") {
    Rng rng(55);
    DenseNet net = make_mlp(4, {6, 5}, 2, Activation::relu, Activation::tanh, 1.0, rng);
    auto input = random_vec(rng, 4);
    const auto upstream = random_vec(rng, 2);

    ForwardCache cache;
    forward(net, input, cache);
    Gradients g = make_gradients(net);
    backward(net, cache, upstream, g);

    ForwardCache scratch;
    const double h = 1e-6;
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double save = input[i];
        input[i] = save + h;
        forward(net, input, scratch);
        double up = 0.0;
        for (std::size_t k = 0; k < upstream.size(); ++k) up += scratch.output[k] * upstream[k];
        input[i] = save - h;
        forward(net, input, scratch);
        double down = 0.0;
        for (std::size_t k = 0; k < upstream.size(); ++k) down += scratch.output[k] * upstream[k];
        input[i] = save;
        const double fd = (up - down) / (2.0 * h);
        CHECK(g.dinput[i] == Catch::Approx(fd).margin(1e-6));
    }
}

TEST_CASE("zero upstream gradient zeroes every parameter gradient", "[dense-net]") {
    Rng rng(9);
    DenseNet net = make_mlp(3, {5}, 2, Activation::relu, Activation::tanh, 1.0, rng);
    ForwardCache cache;
    forward(net, std::vector<double>{0.1, 0.2, 0.3}, cache);
    Gradients g = make_gradients(net);
    backward(net, cache, std::vector<double>{0.0, 0.0}, g);
    for (const auto& m : g.dw)
        for (double v : m.a) CHECK(v == 0.0);
    for (const auto& b : g.db)
        for (double v : b) CHECK(v == 0.0);
}

TEST_CASE("relu network in a fixed positive region behaves linearly", "[dense-net]") {
    // all weights, biases and inputs positive: relu is the identity, so the
    // gradient must equal the linear-network gradient w2_i * x_j
    DenseNet net;
    Layer l1;
    l1.w = Matrix(2, 2);
    l1.w(0, 0) = 0.5; l1.w(0, 1) = 0.25;
    l1.w(1, 0) = 0.75; l1.w(1, 1) = 1.0;
    l1.b = {0.1, 0.2};
    l1.act = Activation::relu;
    Layer l2;
    l2.w = Matrix(1, 2);
    l2.w(0, 0) = 0.3; l2.w(0, 1) = 0.6;
    l2.b = {0.05};
    l2.act = Activation::identity;
    net.layers = {l1, l2};

    const std::vector<double> input = {1.0, 2.0};
    ForwardCache cache;
    forward(net, input, cache);
    Gradients g = make_gradients(net);
    backward(net, cache, std::vector<double>{1.0}, g);

    // dL/dw1[i][j] = w2[i] * x[j]; dL/db1[i] = w2[i]
    CHECK(g.dw[0](0, 0) == Catch::Approx(0.3 * 1.0));
    CHECK(g.dw[0](0, 1) == Catch::Approx(0.3 * 2.0));
    CHECK(g.dw[0](1, 0) == Catch::Approx(0.6 * 1.0));
    CHECK(g.dw[0](1, 1) == Catch::Approx(0.6 * 2.0));
    CHECK(g.db[0][0] == Catch::Approx(0.3));
    CHECK(g.db[0][1] == Catch::Approx(0.6));
    // dL/dw2[0][i] = hidden_i = w1 x + b1
    CHECK(g.dw[1](0, 0) == Catch::Approx(0.5 + 0.5 + 0.1));
    CHECK(g.dw[1](0, 1) == Catch::Approx(0.75 + 2.0 + 0.2));
    CHECK(g.db[1][0] == 1.0);
    // input gradient: w2 * w1
    CHECK(g.dinput[0] == Catch::Approx(0.3 * 0.5 + 0.6 * 0.75));
    CHECK(g.dinput[1] == Catch::Approx(0.3 * 0.25 + 0.6 * 1.0));
}

TEST_CASE("backward requires a cached forward pass", "[dense-net]") {
    Rng rng(4);
    DenseNet net = make_mlp(2, {3}, 1, Activation::relu, Activation::identity, 1.0, rng);
    ForwardCache cache;
    Gradients g = make_gradients(net);
    CHECK_THROWS_AS(backward(net, cache, std::vector<double>{1.0}, g), std::logic_error);
}

TEST_CASE("adam update", "[dense-net]") {
    SECTION("zero gradients leave parameters unchanged") {
        Rng rng(11);
        DenseNet net = make_mlp(2, {3}, 1, Activation::relu, Activation::identity, 1.0, rng);
        const DenseNet before = net;
        AdamState adam = make_adam(net, 1e-3);
        Gradients g = make_gradients(net);
        adam_step(net, g, adam);
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            CHECK(net.layers[l].w.a == before.layers[l].w.a);
            CHECK(net.layers[l].b == before.layers[l].b);
        }
    }
    SECTION("constant unit gradient moves a scalar by about lr per step") {
        DenseNet net;
        Layer l;
        l.w = Matrix(1, 1);
        l.w(0, 0) = 1.0;
        l.b = {0.0};
        l.act = Activation::identity;
        net.layers = {l};
        AdamState adam = make_adam(net, 1e-3);
        Gradients g = make_gradients(net);
        g.dw[0](0, 0) = 1.0;
        double prev = net.layers[0].w(0, 0);
        for (int step = 0; step < 5; ++step) {
            adam_step(net, g, adam);
            const double moved = prev - net.layers[0].w(0, 0);
            CHECK(moved == Catch::Approx(1e-3).epsilon(1e-4));
            prev = net.layers[0].w(0, 0);
        }
    }
    SECTION("identical nets and gradients update identically") {
        Rng rng(12);
        DenseNet a = make_mlp(3, {4}, 2, Activation::relu, Activation::tanh, 1.0, rng);
        DenseNet b = a;
        AdamState sa = make_adam(a, 1e-3), sb = make_adam(b, 1e-3);
        Gradients g = make_gradients(a);
        Rng grng(13);
        for (auto& m : g.dw)
            for (auto& v : m.a) v = grng.uniform(-1.0, 1.0);
        adam_step(a, g, sa);
        adam_step(b, g, sb);
        for (std::size_t l = 0; l < a.layers.size(); ++l)
            CHECK(a.layers[l].w.a == b.layers[l].w.a);
    }
}

TEST_CASE("soft update", "[dense-net]") {
    Rng rng(21);
    DenseNet online = make_mlp(3, {4}, 2, Activation::relu, Activation::tanh, 1.0, rng);
    DenseNet target = make_mlp(3, {4}, 2, Activation::relu, Activation::tanh, 1.0, rng);

    SECTION("tau = 1 copies, tau = 0 freezes") {
        DenseNet t1 = target;
        soft_update(t1, online, 1.0);
        for (std::size_t l = 0; l < t1.layers.size(); ++l)
            CHECK(t1.layers[l].w.a == online.layers[l].w.a);
        DenseNet t0 = target;
        soft_update(t0, online, 0.0);
        for (std::size_t l = 0; l < t0.layers.size(); ++l)
            CHECK(t0.layers[l].w.a == target.layers[l].w.a);
    }
    SECTION("direct formula") {
        DenseNet t;
        Layer lt;
        lt.w = Matrix(1, 1);
        lt.w(0, 0) = 0.0;
        lt.b = {0.0};
        lt.act = Activation::identity;
        t.layers = {lt};
        DenseNet o = t;
        o.layers[0].w(0, 0) = 1.0;
        soft_update(t, o, 0.005);
        CHECK(t.layers[0].w(0, 0) == Catch::Approx(0.005));
    }
    SECTION("contraction toward a fixed online net") {
        auto distance = [&](const DenseNet& a, const DenseNet& b) {
            double d = 0.0;
            for (std::size_t l = 0; l < a.layers.size(); ++l) {
                for (std::size_t i = 0; i < a.layers[l].w.a.size(); ++i)
                    d += std::abs(a.layers[l].w.a[i] - b.layers[l].w.a[i]);
                for (std::size_t i = 0; i < a.layers[l].b.size(); ++i)
                    d += std::abs(a.layers[l].b[i] - b.layers[l].b[i]);
            }
            return d;
        };
        const double tau = 0.1;
        double prev = distance(target, online);
        for (int i = 0; i < 10; ++i) {
            soft_update(target, online, tau);
            const double now = distance(target, online);
            CHECK(now == Catch::Approx(prev * (1.0 - tau)).epsilon(1e-9));
            prev = now;
        }
    }
    SECTION("topology mismatch is an error") {
        Rng r2(5);
        DenseNet other = make_mlp(3, {5}, 2, Activation::relu, Activation::tanh, 1.0, r2);
        CHECK_THROWS_AS(soft_update(other, online, 0.5), std::invalid_argument);
    }
}

TEST_CASE("checkpoints round-trip exactly", "[dense-net]") {
    Rng rng(31);
    DenseNet net = make_mlp(5, {7, 6}, 3, Activation::relu, Activation::tanh, 0.04, rng);
    AdamState adam = make_adam(net, 2.5e-4, 0.9, 0.999, 1e-8);
    // produce a nontrivial optimizer state
    Gradients g = make_gradients(net);
    for (auto& m : g.dw)
        for (auto& v : m.a) v = rng.uniform(-1.0, 1.0);
    adam_step(net, g, adam);

    std::stringstream ss;
    save_net(ss, net, &adam);
    AdamState adam_back;
    DenseNet back = load_net(ss, &adam_back);

    REQUIRE(back.same_topology(net));
    CHECK(back.output_scale == net.output_scale);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        CHECK(back.layers[l].w.a == net.layers[l].w.a);
        CHECK(back.layers[l].b == net.layers[l].b);
    }
    CHECK(adam_back.step_count == adam.step_count);
    CHECK(adam_back.lr == adam.lr);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        CHECK(adam_back.mw[l].a == adam.mw[l].a);
        CHECK(adam_back.vw[l].a == adam.vw[l].a);
    }

    // byte-identical re-serialization
    std::stringstream ss2;
    save_net(ss2, back, &adam_back);
    std::stringstream ss3;
    save_net(ss3, net, &adam);
    CHECK(ss2.str() == ss3.str());

    std::stringstream junk("not a checkpoint at all");
    CHECK_THROWS(load_net(junk));
}
