#include <doctest.h>

#include "test_support.hpp"

#include "wss/model/adam.hpp"
#include "wss/model/checkpoint.hpp"
#include "wss/model/net.hpp"
#include "wss/util/error.hpp"
#include "wss/util/rng.hpp"

#include <cmath>
#include <filesystem>

using namespace wss;

namespace {

NetSpec micro_spec() {
    NetSpec s;
    s.dims = 2;
    s.stages = 2;
    s.filters = {3, 4};
    s.strides = {1, 2};
    s.kernel = 3;
    s.norm = NormKind::kInstance;
    s.dropout = 0.0;
    s.classes = 3;
    s.in_channels = 2;
    return s;
}

Act random_input(int c, int z, int y, int x, Rng& rng) {
    Act a(c, z, y, x);
    for (auto& v : a.v) v = rng.uniform();
    return a;
}

} // namespace

TEST_CASE("forward preserves spatial dims and emits C channels") {
    for (auto [ny, nx] : {std::pair{12, 12}, std::pair{7, 5}, std::pair{9, 16}}) {
        NetSpec spec = micro_spec();
        Rng rng(1);
        const Network net(spec);
        const Parameters params = net.init_params(42);
        const Act in = random_input(2, 1, ny, nx, rng);
        const Act out = net.forward(params, in, false, nullptr, nullptr);
        CHECK(out.c == spec.classes);
        CHECK(out.z == 1);
        CHECK(out.y == ny);
        CHECK(out.x == nx);
    }

    NetSpec spec3d = micro_spec();
    spec3d.dims = 3;
    Rng rng(2);
    const Network net(spec3d);
    const Parameters params = net.init_params(7);
    const Act in = random_input(2, 6, 10, 10, rng);
    const Act out = net.forward(params, in, false, nullptr, nullptr);
    CHECK(out.c == 3);
    CHECK(out.z == 6);
    CHECK(out.y == 10);
    CHECK(out.x == 10);
}

TEST_CASE("zero-initialized head yields a uniform softmax") {
    const NetSpec spec = micro_spec();
    const Network net(spec);
    const Parameters params = net.init_params(3);
    Rng rng(4);
    const Act in = random_input(2, 1, 8, 8, rng);
    const Act scores = net.forward(params, in, false, nullptr, nullptr);
    for (double v : scores.v) CHECK(v == 0.0);
    GridSpec g{8, 8, 1, 1, 1, 1};
    const SoftmaxField f = softmax_from_scores(g, 3, scores.v);
    for (double p : f.probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("single 1x1 stage forward equals the hand matrix product") {
    NetSpec spec;
    spec.dims = 2;
    spec.stages = 1;
    spec.filters = {2};
    spec.strides = {1};
    spec.kernel = 1;
    spec.norm = NormKind::kNone;
    spec.dropout = 0.0;
    spec.classes = 2;
    spec.in_channels = 2;
    const Network net(spec);
    Parameters params = net.init_params(0);
    // enc0 weights positive so the leaky nonlinearity is the identity.
    params[0].data = {0.5, 0.25, 0.125, 1.0}; // w[oc][ic]
    params[1].data = {0.1, 0.2};
    params[2].data = {1.0, -1.0, 2.0, 0.5}; // head w
    params[3].data = {0.0, 0.3};            // head b

    Act in(2, 1, 1, 2);
    in.v = {0.4, 0.8, 0.6, 0.2}; // channel 0: (0.4, 0.8), channel 1: (0.6, 0.2)
    const Act out = net.forward(params, in, false, nullptr, nullptr);

    for (int x = 0; x < 2; ++x) {
        const double i0 = in.v[static_cast<size_t>(x)];
        const double i1 = in.v[static_cast<size_t>(2 + x)];
        const double h0 = 0.5 * i0 + 0.25 * i1 + 0.1;
        const double h1 = 0.125 * i0 + 1.0 * i1 + 0.2;
        const double s0 = 1.0 * h0 - 1.0 * h1 + 0.0;
        const double s1 = 2.0 * h0 + 0.5 * h1 + 0.3;
        CHECK(out.v[static_cast<size_t>(x)] == doctest::Approx(s0).epsilon(1e-12));
        CHECK(out.v[static_cast<size_t>(2 + x)] == doctest::Approx(s1).epsilon(1e-12));
    }
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    const NetSpec spec = micro_spec();
    const Network net(spec);
    const Parameters params = net.init_params(5);
    Rng rng(6);
    const Act in = random_input(2, 1, 6, 6, rng);
    Network::Cache cache;
    const Act scores = net.forward(params, in, false, nullptr, &cache);
    Act zero(scores.c, scores.z, scores.y, scores.x);
    const Parameters grads = net.backward(params, cache, zero);
    for (const Tensor& t : grads)
        for (double v : t.data) CHECK(v == 0.0);
}

TEST_CASE("batch gradients accumulate by summation") {
    const NetSpec spec = micro_spec();
    const Network net(spec);
    const Parameters params = net.init_params(8);
    Rng rng(9);
    const Act in = random_input(2, 1, 6, 6, rng);
    Network::Cache cache;
    const Act scores = net.forward(params, in, false, nullptr, &cache);
    Act g(scores.c, scores.z, scores.y, scores.x);
    for (auto& v : g.v) v = rng.uniform() - 0.5;
    const Parameters once = net.backward(params, cache, g);

    Parameters twice = net.zero_grads();
    for (int rep = 0; rep < 2; ++rep) {
        Network::Cache c2;
        net.forward(params, in, false, nullptr, &c2);
        const Parameters gi = net.backward(params, c2, g);
        for (size_t t = 0; t < twice.size(); ++t)
            for (size_t i = 0; i < twice[t].data.size(); ++i) twice[t].data[i] += gi[t].data[i];
    }
    for (size_t t = 0; t < once.size(); ++t)
        for (size_t i = 0; i < once[t].data.size(); ++i)
            CHECK(twice[t].data[i] == doctest::Approx(2.0 * once[t].data[i]).epsilon(1e-12));
}

TEST_CASE("network gradient matches finite differences") {
    const NetSpec spec = micro_spec();
    const Network net(spec);
    Rng rng(10);
    const GridSpec grid{6, 6, 1, 1, 1, 1};

    AnnotationMask ann(grid);
    for (auto& l : ann.labels)
        if (rng.uniform() < 0.4) l = static_cast<uint8_t>(rng.uniform_int(kNumClasses));
    ConstraintConfig cfg;
    cfg.lambda = 1e-3;
    cfg.class_weights = {1.0, 0.14, 0.22};
    cfg.constraints[kProstate] = {ConstraintMode::kCommonBounds, {5.0, 10.0}};
    cfg.constraints[kLesion] = {ConstraintMode::kImageTag, {}};

    const testing::ScoreLoss loss = [&](const GridSpec& g, const std::vector<double>& scores) {
        return combined_loss(softmax_from_scores(g, 3, scores), ann, cfg, {true, true, true});
    };

    for (uint64_t seed : {11ULL, 12ULL}) {
        const Parameters params = net.init_params(seed);
        const Act in = random_input(2, 1, 6, 6, rng);
        const double err = testing::fd_net_max_rel_error(net, params, in, grid, loss);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("instance norm output is standardized before affine") {
    NetSpec spec = micro_spec();
    spec.stages = 1;
    spec.filters = {4};
    spec.strides = {1};
    const Network net(spec);
    const Parameters params = net.init_params(13);
    Rng rng(14);
    const Act in = random_input(2, 1, 16, 16, rng);
    Network::Cache cache;
    net.forward(params, in, false, nullptr, &cache);
    // With gamma=1, beta=0 at init, pre_act equals the normalized signal.
    const Act& normed = cache.pre_act[0];
    const int64_t spatial = normed.spatial();
    for (int c = 0; c < normed.c; ++c) {
        double mean = 0.0, var = 0.0;
        for (int64_t i = 0; i < spatial; ++i) mean += normed.v[static_cast<size_t>(c * spatial + i)];
        mean /= static_cast<double>(spatial);
        for (int64_t i = 0; i < spatial; ++i) {
            const double d = normed.v[static_cast<size_t>(c * spatial + i)] - mean;
            var += d * d;
        }
        var /= static_cast<double>(spatial);
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) < 1e-2);
    }
}

TEST_CASE("dropout masks activations only in training mode") {
    NetSpec spec = micro_spec();
    spec.dropout = 0.5;
    const Network net(spec);
    Parameters params = net.init_params(15);
    Rng rng(16);
    // The head starts zero-initialized; give it weight so dropout noise
    // reaches the output.
    for (auto& v : params[params.size() - 2].data) v = rng.uniform() - 0.5;
    const Act in = random_input(2, 1, 8, 8, rng);

    const Act eval1 = net.forward(params, in, false, nullptr, nullptr);
    const Act eval2 = net.forward(params, in, false, nullptr, nullptr);
    CHECK(eval1.v == eval2.v);

    Rng d1(99), d2(99), d3(100);
    Network::Cache c1;
    const Act t1 = net.forward(params, in, true, &d1, &c1);
    const Act t2 = net.forward(params, in, true, &d2, nullptr);
    const Act t3 = net.forward(params, in, true, &d3, nullptr);
    CHECK(t1.v == t2.v);
    CHECK(t1.v != t3.v);
    CHECK(!c1.dropout_mask[0].empty());
}

TEST_CASE("init is deterministic per seed") {
    const NetSpec spec = micro_spec();
    const Network net(spec);
    const Parameters a = net.init_params(21);
    const Parameters b = net.init_params(21);
    const Parameters c = net.init_params(22);
    REQUIRE(a.size() == b.size());
    bool any_diff = false;
    for (size_t t = 0; t < a.size(); ++t) {
        CHECK(a[t].data == b[t].data);
        CHECK(a[t].name == b[t].name);
        if (a[t].data != c[t].data) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("adam update examples") {
    Tensor t;
    t.name = "w";
    t.shape = {1};
    t.data = {1.0};
    Parameters params{t};
    Parameters grads{t};
    AdamConfig cfg;
    cfg.weight_decay = 0.0;

    // Zero gradient, zero moments: parameters stay put.
    grads[0].data[0] = 0.0;
    AdamState s0 = AdamState::zeros_like(params);
    Parameters p0 = params;
    adam_step(s0, p0, grads, cfg);
    CHECK(p0[0].data[0] == 1.0);

    // Unit gradient, fresh state: bias-corrected step of about lr.
    grads[0].data[0] = 1.0;
    AdamState s1 = AdamState::zeros_like(params);
    Parameters p1 = params;
    adam_step(s1, p1, grads, cfg);
    CHECK(p1[0].data[0] == doctest::Approx(1.0 - cfg.lr).epsilon(1e-4));

    // Decoupled decay with zero gradients shrinks by (1 - lr*wd).
    cfg.weight_decay = 1e-4;
    grads[0].data[0] = 0.0;
    AdamState s2 = AdamState::zeros_like(params);
    Parameters p2 = params;
    adam_step(s2, p2, grads, cfg);
    CHECK(p2[0].data[0] == doctest::Approx(1.0 * (1.0 - cfg.lr * cfg.weight_decay)).epsilon(1e-12));
    adam_step(s2, p2, grads, cfg);
    CHECK(p2[0].data[0] ==
          doctest::Approx(std::pow(1.0 - cfg.lr * cfg.weight_decay, 2)).epsilon(1e-12));
}

TEST_CASE("checkpoints round-trip through f32") {
    const NetSpec spec = micro_spec();
    const Network net(spec);
    const Parameters params = net.init_params(33);
    const auto dir = std::filesystem::temp_directory_path() / "wss_ckpt_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "model.bin").string();
    save_checkpoint(path, params);
    const Parameters loaded = load_checkpoint(path);
    REQUIRE(loaded.size() == params.size());
    for (size_t t = 0; t < params.size(); ++t) {
        CHECK(loaded[t].name == params[t].name);
        CHECK(loaded[t].shape == params[t].shape);
        for (size_t i = 0; i < params[t].data.size(); ++i)
            CHECK(loaded[t].data[i] == static_cast<double>(static_cast<float>(params[t].data[i])));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("spec validation rejects malformed nets") {
    NetSpec s = micro_spec();
    s.filters = {3};
    CHECK_THROWS_AS(Network{s}, ValidationError);
    s = micro_spec();
    s.strides = {2, 2};
    CHECK_THROWS_AS(Network{s}, ValidationError);
    s = micro_spec();
    s.kernel = 4;
    CHECK_THROWS_AS(Network{s}, ValidationError);
    NetSpec ok = micro_spec();
    const Network net(ok);
    Rng rng(1);
    const Act bad = random_input(3, 1, 6, 6, rng); // wrong channel count
    CHECK_THROWS_AS(net.forward(net.init_params(1), bad, false, nullptr, nullptr),
                    ValidationError);
}
