#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "meshae/conv.hpp"
#include "meshae/layers.hpp"

#include <algorithm>

using namespace meshae;
using namespace meshae::testing;

namespace {

// random features whose pairwise channel gaps stay away from the |.| kink so
// the finite-difference probes remain smooth
MatX safe_features(Eigen::Index rows, Eigen::Index cols, uint64_t seed, double margin = 1e-3) {
    for (uint64_t attempt = 0;; ++attempt) {
        MatX x = random_features(rows, cols, mix_seed(seed, attempt));
        double min_gap = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = i + 1; j < rows; ++j)
                for (Eigen::Index c = 0; c < cols; ++c)
                    min_gap = std::min(min_gap, std::abs(x(i, c) - x(j, c)));
        if (min_gap > margin) return x;
    }
}

} // namespace

TEST_CASE("patch: tetrahedron neighborhoods") {
    Mesh m = tetrahedron();
    Patch p = build_patch(m, 0, 3);
    CHECK(p.members == std::vector<uint32_t>{1, 2, 3});
    // only 3 faces reachable, K=6 truncates by availability
    Patch p6 = build_patch(m, 0, 6);
    CHECK(p6.members == std::vector<uint32_t>{1, 2, 3});
}

TEST_CASE("patch: strip BFS ring order") {
    Mesh m = strip(6); // faces 0..5 in a row, face i adjacent to i-1, i+1
    Patch p = build_patch(m, 3, 5);
    // ring 1 = {2,4}; ring 2 = {1,5}; ring 3 = {0}; truncated at 5 members
    CHECK(p.members == std::vector<uint32_t>{2, 4, 1, 5, 0});
}

TEST_CASE("conv: hand-evaluated scalar example") {
    // center feature 1, neighbors 2 and 4, all weights one:
    // 1 + (2+4) + (|1-2|+|1-4|) + |2-4| = 13
    MatX x(3, 1);
    x << 1, 2, 4;
    std::vector<Patch> patches(3);
    patches[0] = {0, {1, 2}};
    patches[1] = {1, {}};
    patches[2] = {2, {}};
    MatX one = MatX::Ones(1, 1);
    ConvWeights w{one, one, one, one, VecX()};
    MatX out = mesh_conv_forward(x, patches, w);
    CHECK(out(0, 0) == doctest::Approx(13.0).epsilon(1e-15));
}

TEST_CASE("conv: identity configuration passes features through") {
    Mesh m = uv_sphere(8, 5);
    MatX x = random_features(static_cast<Eigen::Index>(m.face_count()), 4, 3);
    std::vector<Patch> patches = build_patches(m, 6);
    MatX id = MatX::Identity(4, 4);
    MatX zero = MatX::Zero(4, 4);
    ConvWeights w{id, zero, zero, zero, VecX()};
    MatX out = mesh_conv_forward(x, patches, w);
    CHECK((out - x).cwiseAbs().maxCoeff() == 0.0);

    ConvWeights wz{zero, zero, zero, zero, VecX()};
    CHECK(mesh_conv_forward(x, patches, wz).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conv: bitwise invariance under patch member permutation") {
    Mesh m = jitter(uv_sphere(10, 7), 5);
    MatX x = random_features(static_cast<Eigen::Index>(m.face_count()), 3, 17);
    std::vector<Patch> patches = build_patches(m, 8);
    MatX w0 = random_features(2, 3, 100), w1 = random_features(2, 3, 101),
         w2 = random_features(2, 3, 102), w3 = random_features(2, 3, 103);
    VecX bias = random_features(2, 1, 104).col(0);
    ConvWeights w{w0, w1, w2, w3, bias};
    MatX base = mesh_conv_forward(x, patches, w);

    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Patch> shuffled = patches;
        for (Patch& p : shuffled) rng.shuffle(p.members);
        MatX out = mesh_conv_forward(x, shuffled, w);
        REQUIRE(out == base); // bitwise
    }
}

TEST_CASE("conv: gradients match finite differences over 20 seeds") {
    Mesh m = uv_sphere(6, 4);
    const Eigen::Index f_count = static_cast<Eigen::Index>(m.face_count());
    std::vector<Patch> patches = build_patches(m, 6);

    for (uint64_t seed = 1; seed <= 20; ++seed) {
        MatX x = safe_features(f_count, 3, seed);
        MatX w0 = random_features(2, 3, mix_seed(seed, 1)), w1 = random_features(2, 3, mix_seed(seed, 2)),
             w2 = random_features(2, 3, mix_seed(seed, 3)), w3 = random_features(2, 3, mix_seed(seed, 4));
        VecX bias = random_features(2, 1, mix_seed(seed, 5)).col(0);
        MatX proj = random_features(f_count, 2, mix_seed(seed, 6)); // random linear functional

        auto loss = [&]() {
            ConvWeights w{w0, w1, w2, w3, bias};
            return (mesh_conv_forward(x, patches, w).array() * proj.array()).sum();
        };

        ConvCache cache;
        ConvWeights w{w0, w1, w2, w3, bias};
        mesh_conv_forward(x, patches, w, &cache);
        MatX gx;
        ConvGrads gw;
        mesh_conv_backward(cache, w, proj, &gx, &gw);

        CHECK(grad_rel_error(gx, fd_gradient(loss, x)) < 1e-4);
        CHECK(grad_rel_error(gw.w0, fd_gradient(loss, w0)) < 1e-4);
        CHECK(grad_rel_error(gw.w1, fd_gradient(loss, w1)) < 1e-4);
        CHECK(grad_rel_error(gw.w2, fd_gradient(loss, w2)) < 1e-4);
        CHECK(grad_rel_error(gw.w3, fd_gradient(loss, w3)) < 1e-4);
    }
}

TEST_CASE("conv: zero upstream gives zero gradients") {
    Mesh m = tetrahedron();
    MatX x = random_features(4, 3, 2);
    std::vector<Patch> patches = build_patches(m, 3);
    MatX w0 = random_features(2, 3, 5), w1 = random_features(2, 3, 6),
         w2 = random_features(2, 3, 7), w3 = random_features(2, 3, 8);
    ConvWeights w{w0, w1, w2, w3, VecX()};
    ConvCache cache;
    mesh_conv_forward(x, patches, w, &cache);
    MatX gx;
    ConvGrads gw;
    mesh_conv_backward(cache, w, MatX::Zero(4, 2), &gx, &gw);
    CHECK(gx.cwiseAbs().maxCoeff() == 0.0);
    CHECK(gw.w0.cwiseAbs().maxCoeff() == 0.0);
    CHECK(gw.w3.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conv: w1 gradient is upstream^T x neighbor-sums when w2=w3=0") {
    Mesh m = tetrahedron();
    MatX x = random_features(4, 3, 11);
    std::vector<Patch> patches = build_patches(m, 3);
    MatX w0 = random_features(2, 3, 12), w1 = random_features(2, 3, 13);
    MatX zero = MatX::Zero(2, 3);
    ConvWeights w{w0, w1, zero, zero, VecX()};
    ConvCache cache;
    mesh_conv_forward(x, patches, w, &cache);
    MatX upstream = random_features(4, 2, 14);
    ConvGrads gw;
    mesh_conv_backward(cache, w, upstream, nullptr, &gw);
    // hand differentiation of the linear term: dL/dW1 = sum_f g_f s_f^T
    MatX expected = MatX::Zero(2, 3);
    for (int f = 0; f < 4; ++f) {
        Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(3);
        for (uint32_t n : patches[static_cast<size_t>(f)].members) s += x.row(n);
        expected += upstream.row(f).transpose() * s;
    }
    CHECK(grad_rel_error(gw.w1, expected) < 1e-12);
}

TEST_CASE("w0 conv: identity, locality, gradient") {
    MatX x = random_features(5, 4, 21);
    MatX id = MatX::Identity(4, 4);
    CHECK((w0_conv_forward(x, id, VecX()) - x).cwiseAbs().maxCoeff() == 0.0);

    // locality: row f depends only on input row f
    MatX w = random_features(3, 4, 22);
    VecX bias = random_features(3, 1, 23).col(0);
    MatX base = w0_conv_forward(x, w, bias);
    MatX x2 = x;
    x2.row(2).array() += 1.5;
    MatX out2 = w0_conv_forward(x2, w, bias);
    for (int f = 0; f < 5; ++f) {
        if (f == 2) continue;
        CHECK(out2.row(f) == base.row(f));
    }

    for (uint64_t seed = 1; seed <= 20; ++seed) {
        MatX xs = random_features(5, 4, mix_seed(seed, 31));
        MatX ws = random_features(3, 4, mix_seed(seed, 32));
        VecX bs = random_features(3, 1, mix_seed(seed, 33)).col(0);
        MatX proj = random_features(5, 3, mix_seed(seed, 34));
        auto loss = [&]() { return (w0_conv_forward(xs, ws, bs).array() * proj.array()).sum(); };
        MatX gx, gw;
        VecX gb;
        w0_conv_backward(xs, ws, proj, &gx, &gw, &gb);
        CHECK(grad_rel_error(gx, fd_gradient(loss, xs)) < 1e-4);
        CHECK(grad_rel_error(gw, fd_gradient(loss, ws)) < 1e-4);
    }
}

TEST_CASE("batch norm: train-mode statistics") {
    MatX x = random_features(40, 3, 9).array() * 2.5 + 1.0;
    BatchNormState st = BatchNormState::init(3, /*epsilon=*/1e-12);
    MatX out = batch_norm_forward(x, st, true);
    for (int c = 0; c < 3; ++c) {
        double mean = out.col(c).mean();
        double var = (out.col(c).array() - mean).square().sum() / 40.0;
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("batch norm: eval mode with unit running stats is near-identity") {
    MatX x = random_features(10, 3, 19);
    BatchNormState st = BatchNormState::init(3);
    MatX out = batch_norm_forward(x, st, false);
    // only the epsilon in 1/sqrt(1+eps) perturbs the values
    CHECK((out - x).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("batch norm: train mode rejects tiny batches") {
    MatX x = random_features(1, 3, 1);
    BatchNormState st = BatchNormState::init(3);
    CHECK_THROWS_AS(batch_norm_forward(x, st, true), std::runtime_error);
}

TEST_CASE("batch norm: gradient matches finite differences") {
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        MatX x = random_features(12, 3, mix_seed(seed, 41));
        BatchNormState st = BatchNormState::init(3);
        st.gamma = random_features(3, 1, mix_seed(seed, 42)).col(0).array() + 2.0;
        st.beta = random_features(3, 1, mix_seed(seed, 43)).col(0);
        MatX proj = random_features(12, 3, mix_seed(seed, 44));
        auto loss = [&]() {
            return (batch_norm_forward(x, st, true).array() * proj.array()).sum();
        };
        BatchNormCache cache;
        batch_norm_forward(x, st, true, &cache);
        MatX gx;
        VecX ggamma, gbeta;
        batch_norm_backward(cache, proj, &gx, &ggamma, &gbeta);
        CHECK(grad_rel_error(gx, fd_gradient(loss, x)) < 1e-4);

        MatX gamma_param(3, 1);
        gamma_param.col(0) = st.gamma;
        MatX beta_param(3, 1);
        beta_param.col(0) = st.beta;
        auto loss_g = [&]() {
            st.gamma = gamma_param.col(0);
            st.beta = beta_param.col(0);
            return (batch_norm_forward(x, st, true).array() * proj.array()).sum();
        };
        MatX ggamma_mat(3, 1);
        ggamma_mat.col(0) = ggamma;
        MatX gbeta_mat(3, 1);
        gbeta_mat.col(0) = gbeta;
        CHECK(grad_rel_error(ggamma_mat, fd_gradient(loss_g, gamma_param)) < 1e-4);
        CHECK(grad_rel_error(gbeta_mat, fd_gradient(loss_g, beta_param)) < 1e-4);
    }
}

TEST_CASE("batch norm: running stats update and quantization") {
    BatchNormState st = BatchNormState::init(2);
    BatchNormObs obs;
    obs.mean = VecX::Constant(2, 1.0);
    obs.var = VecX::Constant(2, 4.0);
    update_running_stats(st, obs);
    CHECK(st.running_mean(0) == doctest::Approx(0.1));
    CHECK(st.running_var(0) == doctest::Approx(0.9 + 0.4));
    CHECK(st.running_mean(0) == to_f32(st.running_mean(0)));
}

TEST_CASE("relu: values, idempotence, gradient") {
    MatX x(2, 2);
    x << -1, 2, 0, -3;
    MatX y = relu_forward(x);
    CHECK(y(0, 0) == 0.0);
    CHECK(y(0, 1) == 2.0);
    CHECK(relu_forward(y) == y);

    for (uint64_t seed = 1; seed <= 20; ++seed) {
        MatX xs = safe_features(6, 3, mix_seed(seed, 51)); // keeps entries away from 0
        MatX proj = random_features(6, 3, mix_seed(seed, 52));
        auto loss = [&]() { return (relu_forward(xs).array() * proj.array()).sum(); };
        MatX g = relu_backward(xs, proj);
        CHECK(grad_rel_error(g, fd_gradient(loss, xs)) < 1e-4);
    }
}

TEST_CASE("mse: values and gradient") {
    MatX a = random_features(7, 3, 61);
    CHECK(mse_loss(a, a) == 0.0);

    MatX b = a.array() + 1.0; // constant offset of one -> loss 1
    CHECK(mse_loss(b, a) == doctest::Approx(1.0).epsilon(1e-15));

    for (uint64_t seed = 1; seed <= 20; ++seed) {
        MatX p = random_features(5, 3, mix_seed(seed, 62));
        MatX t = random_features(5, 3, mix_seed(seed, 63));
        MatX g;
        mse_loss(p, t, &g);
        auto loss = [&]() { return mse_loss(p, t); };
        CHECK(grad_rel_error(g, fd_gradient(loss, p)) < 1e-6);
    }
    CHECK_THROWS_AS(mse_loss(random_features(2, 3, 1), random_features(3, 2, 1)),
                    std::runtime_error);
}

TEST_CASE("mse: nonnegative, zero only for identical inputs") {
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        MatX p = random_features(4, 3, mix_seed(seed, 71));
        MatX t = random_features(4, 3, mix_seed(seed, 72));
        double l = mse_loss(p, t);
        CHECK(l >= 0.0);
        if (l == 0.0) CHECK(p == t);
    }
}

TEST_CASE("adam: zero gradient keeps parameters fixed") {
    MatX p = random_features(3, 3, 81);
    MatX saved = p;
    AdamState st = AdamState::like(p);
    adam_step(p, MatX::Zero(3, 3), st, AdamConfig{}, 1);
    CHECK(p == saved);
}

TEST_CASE("adam: first step moves by -sign(g) * lr") {
    MatX p = MatX::Zero(2, 2);
    MatX g(2, 2);
    g << 0.5, -2.0, 1e3, -1e-3;
    AdamState st = AdamState::like(p);
    AdamConfig cfg;
    adam_step(p, g, st, cfg, 1);
    // step-1 algebra: mhat = g, vhat = g^2, update = -lr * g/(|g| + eps)
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        double expected = -cfg.learning_rate * (g.data()[i] > 0 ? 1.0 : -1.0);
        CHECK(p.data()[i] == doctest::Approx(expected).epsilon(1e-4));
    }
}

TEST_CASE("adam: drives w^2 toward zero") {
    MatX w = MatX::Constant(1, 1, 1.0);
    AdamState st = AdamState::like(w);
    AdamConfig cfg;
    double prev = 1.0;
    bool decreasing = true;
    for (int step = 1; step <= 400; ++step) {
        MatX g = 2.0 * w; // d/dw w^2
        adam_step(w, g, st, cfg, step);
        if (step > 50) {
            decreasing = decreasing && std::abs(w(0, 0)) <= prev + 1e-12;
            prev = std::abs(w(0, 0));
        }
    }
    CHECK(decreasing);
    CHECK(std::abs(w(0, 0)) < 0.7);
}
