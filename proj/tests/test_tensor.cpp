#include <doctest.h>

#include <cmath>
#include <functional>

#include "locl/model.hpp"
#include "locl/tensor.hpp"
#include "test_support.hpp"

using namespace locl;
using namespace locl::testsupport;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
    Tensor t(std::move(shape));
    Rng rng(seed);
    for (auto& v : t.values) v = rng.next_double() * 2.0 - 1.0;
    return t;
}

// Check d(sum of weighted outputs)/d(every coordinate) by central differences.
// `coords` limits the number of checked coordinates per array.
void gradient_check(Layer& layer, Tensor x, std::uint64_t seed, std::size_t coords = 20,
                    double tol = 1e-6) {
    Rng rng(seed);
    Tensor probe;  // fixed random upstream weighting makes the output scalar
    {
        Tensor y = layer.forward(x);
        probe = Tensor(y.shape);
        for (auto& v : probe.values) v = rng.next_double() * 2.0 - 1.0;
    }
    auto scalar_loss = [&]() {
        Tensor y = layer.forward(x);
        double s = 0.0;
        for (std::size_t i = 0; i < y.values.size(); ++i) s += y.values[i] * probe.values[i];
        return s;
    };

    layer.zero_grad();
    layer.forward(x);
    Tensor gx = layer.backward(probe);

    // input gradient
    for (std::size_t t = 0; t < coords; ++t) {
        const std::size_t i = rng.next_below(x.values.size());
        const double num = central_diff(scalar_loss, &x.values[i]);
        CHECK(rel_err(num, gx.values[i]) < tol);
    }
    // parameter gradients
    for (auto& p : layer.params()) {
        for (std::size_t t = 0; t < coords; ++t) {
            const std::size_t i = rng.next_below(p.w->size());
            const double num = central_diff(scalar_loss, &(*p.w)[i]);
            CHECK(rel_err(num, (*p.g)[i]) < tol);
        }
    }
}

}  // namespace

TEST_CASE("conv1d: width-1 identity kernel is the identity map") {
    Conv1d conv(1, 1, 1);
    conv.weight = {1.0};
    conv.bias = {0.0};
    Tensor x = random_tensor({2, 1, 5}, 3);
    Tensor y = conv.forward(x);
    CHECK(y.values == x.values);
}

TEST_CASE("conv1d: hand-computed same-padding example") {
    Conv1d conv(1, 1, 3);
    conv.weight = {1.0, 1.0, 1.0};
    conv.bias = {0.0};
    Tensor x({1, 1, 3});
    x.values = {1, 2, 3};
    Tensor y = conv.forward(x);
    CHECK(y.values[0] == doctest::Approx(3.0));
    CHECK(y.values[1] == doctest::Approx(6.0));
    CHECK(y.values[2] == doctest::Approx(5.0));
}

TEST_CASE("conv1d forward matches a naive 4-loop oracle") {
    const std::size_t n = 2, cin = 3, cout = 4, L = 9, k = 5;
    Conv1d conv(cin, cout, k);
    Rng rng(11);
    for (auto& v : conv.weight) v = rng.next_double() - 0.5;
    for (auto& v : conv.bias) v = rng.next_double() - 0.5;
    Tensor x = random_tensor({n, cin, L}, 12);
    Tensor y = conv.forward(x);

    const std::ptrdiff_t pad = (k - 1) / 2;
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t oc = 0; oc < cout; ++oc)
            for (std::size_t t = 0; t < L; ++t) {
                double acc = conv.bias[oc];
                for (std::size_t ic = 0; ic < cin; ++ic)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + kk) - pad;
                        if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
                        acc += conv.weight[(oc * cin + ic) * k + kk] *
                               x.values[(b * cin + ic) * L + static_cast<std::size_t>(src)];
                    }
                CHECK(std::fabs(y.values[(b * cout + oc) * L + t] - acc) < 1e-12);
            }
}

TEST_CASE("conv1d rejects even kernels and channel mismatch") {
    CHECK_THROWS_AS(Conv1d(1, 1, 4), LoclError);
    Conv1d conv(2, 1, 3);
    Tensor x = random_tensor({1, 3, 4}, 1);
    CHECK_THROWS_AS(conv.forward(x), LoclError);
}

TEST_CASE("conv1d backward: zero upstream gradient gives zero gradients") {
    Conv1d conv(2, 3, 3);
    randomize_params(conv, 63);
    Tensor x = random_tensor({2, 2, 8}, 5);
    conv.zero_grad();
    conv.forward(x);
    Tensor gx = conv.backward(Tensor({2, 3, 8}));
    for (double v : gx.values) CHECK(v == 0.0);
    for (double v : conv.weight_grad) CHECK(v == 0.0);
    for (double v : conv.bias_grad) CHECK(v == 0.0);
}

TEST_CASE("conv1d backward of the identity layer passes gradients through") {
    Conv1d conv(1, 1, 1);
    conv.weight = {1.0};
    conv.bias = {0.0};
    Tensor x = random_tensor({1, 1, 6}, 2);
    conv.forward(x);
    Tensor g = random_tensor({1, 1, 6}, 3);
    Tensor gx = conv.backward(g);
    CHECK(gx.values == g.values);
}

TEST_CASE("gradient checks for every layer") {
    SUBCASE("conv1d") {
        Conv1d conv(3, 2, 3);
        randomize_params(conv, 64);
        gradient_check(conv, random_tensor({4, 3, 16}, 21), 100);
    }
    SUBCASE("dense") {
        Dense dense(10, 7);
        randomize_params(dense, 62);
        gradient_check(dense, random_tensor({4, 10}, 22), 101);
    }
    SUBCASE("leakyrelu") {
        LeakyRelu lr(0.01);
        gradient_check(lr, random_tensor({4, 3, 16}, 23), 102);
    }
    SUBCASE("upsample1d") {
        Upsample1d up(2);
        gradient_check(up, random_tensor({4, 3, 8}, 24), 103);
    }
    SUBCASE("maxpool1d") {
        // distinct values leave the argmax stable under the FD perturbation
        MaxPool1d pool(2);
        Tensor x({2, 2, 8});
        for (std::size_t i = 0; i < x.values.size(); ++i)
            x.values[i] = static_cast<double>((i * 37) % 97) / 10.0;
        gradient_check(pool, x, 104);
    }
}

TEST_CASE("maxpool fixture: ties broken to the lowest index") {
    MaxPool1d pool(2);
    Tensor x({1, 1, 4});
    x.values = {1, 3, 2, 2};
    Tensor y = pool.forward(x);
    CHECK(y.values == std::vector<double>{3, 2});
    Tensor g({1, 1, 2});
    g.values = {1.0, 1.0};
    Tensor gx = pool.backward(g);
    CHECK(gx.values == std::vector<double>{0, 1, 1, 0});  // tie at (2,2) -> index 2
}

TEST_CASE("maxpool rejects indivisible lengths") {
    MaxPool1d pool(2);
    CHECK_THROWS_AS(pool.forward(Tensor({1, 1, 5})), LoclError);
}

TEST_CASE("upsample fixture: nearest-neighbor repeat") {
    Upsample1d up(2);
    Tensor x({1, 1, 2});
    x.values = {1, 2};
    CHECK(up.forward(x).values == std::vector<double>{1, 1, 2, 2});
}

TEST_CASE("batchnorm fixture: column (2,4) maps to (-1,1)") {
    Matrix z(2, 1);
    z.at(0, 0) = 2;
    z.at(1, 0) = 4;
    BatchNormCache cache;
    Matrix out = batchnorm_batch(z, cache);
    CHECK(out.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(out.at(1, 0) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("batchnorm rejects singleton batches") {
    Matrix z(1, 3, 1.0);
    BatchNormCache cache;
    CHECK_THROWS_AS(batchnorm_batch(z, cache), LoclError);
}

TEST_CASE("batchnorm backward matches finite differences") {
    Rng rng(31);
    Matrix z(5, 3);
    for (auto& v : z.data) v = rng.next_double() * 2.0 - 1.0;
    Matrix probe(5, 3);
    for (auto& v : probe.data) v = rng.next_double() * 2.0 - 1.0;

    auto loss = [&]() {
        BatchNormCache c;
        Matrix out = batchnorm_batch(z, c);
        double s = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * probe.data[i];
        return s;
    };
    BatchNormCache cache;
    batchnorm_batch(z, cache);
    Matrix gx = batchnorm_backward(cache, probe);
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        const double num = central_diff(loss, &z.data[i]);
        CHECK(rel_err(num, gx.data[i]) < 1e-6);
    }
}

TEST_CASE("rmsprop: zero gradient leaves weights unchanged") {
    std::vector<double> w{1.0, -2.0}, g{0.0, 0.0};
    RmsProp opt;
    opt.step({{&w, &g, "w"}});
    CHECK(w == std::vector<double>{1.0, -2.0});
}

TEST_CASE("rmsprop scalar fixture") {
    std::vector<double> w{1.0}, g{1.0};
    RmsProp opt;
    opt.learning_rate = 0.1;
    opt.step({{&w, &g, "w"}});
    CHECK(opt.acc[0][0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(w[0] == doctest::Approx(1.0 - 0.1 / (std::sqrt(0.1) + 1e-8)).epsilon(1e-9));
    CHECK(w[0] == doctest::Approx(0.68377).epsilon(1e-4));
}

TEST_CASE("rmsprop rejects non-finite gradients") {
    std::vector<double> w{1.0}, g{std::nan("")};
    RmsProp opt;
    CHECK_THROWS_WITH_AS(opt.step({{&w, &g, "theta"}}), doctest::Contains("theta"), LoclError);
}

TEST_CASE("rmsprop steps are deterministic") {
    auto run = []() {
        std::vector<double> w{0.5, -0.5}, g{0.2, -0.1};
        RmsProp opt;
        opt.step({{&w, &g, "w"}});
        opt.step({{&w, &g, "w"}});
        return w;
    };
    CHECK(run() == run());
}

TEST_CASE("forward determinism of a composed branch") {
    TrainConfig cfg;
    cfg.latent_dim = 4;
    cfg.channel_plan = {4, 4, 8};
    Branch b1 = make_branch(10, cfg);
    Branch b2 = make_branch(10, cfg);
    init_weights(b1.encoder, 5);
    init_weights(b2.encoder, 5);
    Matrix x(3, 10);
    Rng rng(8);
    for (auto& v : x.data) v = rng.next_double();
    CHECK(b1.embed(x).data == b2.embed(x).data);
}

TEST_CASE("branch shapes round-trip for every subset width") {
    TrainConfig cfg;
    cfg.latent_dim = 4;
    cfg.channel_plan = {2, 3, 4};
    for (std::size_t w : {2u, 3u, 7u, 8u, 9u, 15u, 16u, 17u, 31u}) {
        Branch b = make_branch(w, cfg);
        init_weights(b.encoder, w);
        init_weights(b.decoder, w + 1);
        Matrix x(2, w, 0.5);
        Matrix z, xh;
        b.forward(x, z, xh);
        CHECK(z.cols == 4);
        CHECK(xh.cols == b.padded_width);
        CHECK(xh.cols >= w);
    }
}
