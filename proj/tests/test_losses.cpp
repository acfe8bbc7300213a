#include <doctest.h>

#include <cmath>
#include <numeric>

#include "locl/losses.hpp"
#include "locl/model.hpp"
#include "test_support.hpp"

using namespace locl;
using namespace locl::testsupport;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Matrix m(r, c);
    Rng rng(seed);
    for (auto& v : m.data) v = rng.next_double() * 2.0 - 1.0;
    return m;
}

}  // namespace

TEST_CASE("reconstruction loss: perfect reconstruction is zero") {
    Matrix x = random_matrix(3, 4, 1);
    CHECK(reconstruction_loss(x, x, x, x, 4, 4) == 0.0);
}

TEST_CASE("reconstruction loss: all-ones residual on one branch") {
    Matrix x1(1, 4, 0.0), xh1(1, 4, 1.0);
    Matrix x2(1, 4, 0.5);
    CHECK(reconstruction_loss(xh1, x1, x2, x2, 4, 4) == doctest::Approx(2.0));
}

TEST_CASE("reconstruction loss is quadratically homogeneous in the residual") {
    Matrix x1(2, 3, 0.0), x2(2, 3, 0.0);
    Matrix r1 = random_matrix(2, 3, 2), r2 = random_matrix(2, 3, 3);
    const double base = reconstruction_loss(r1, x1, r2, x2, 3, 3);
    Matrix r1d = r1, r2d = r2;
    for (auto& v : r1d.data) v *= 2.0;
    for (auto& v : r2d.data) v *= 2.0;
    CHECK(reconstruction_loss(r1d, x1, r2d, x2, 3, 3) == doctest::Approx(4.0 * base).epsilon(1e-12));
}

TEST_CASE("reconstruction loss ignores padded positions") {
    Matrix x(2, 4, 0.0);
    Matrix xh(2, 4, 0.0);
    xh.at(0, 3) = 100.0;  // padding column
    CHECK(reconstruction_loss(xh, x, x, x, 3, 4) == 0.0);
}

TEST_CASE("reconstruction loss is symmetric in branch labeling") {
    Matrix x1 = random_matrix(3, 4, 4), xh1 = random_matrix(3, 4, 5);
    Matrix x2 = random_matrix(3, 5, 6), xh2 = random_matrix(3, 5, 7);
    CHECK(reconstruction_loss(xh1, x1, xh2, x2, 4, 5) ==
          doctest::Approx(reconstruction_loss(xh2, x2, xh1, x1, 5, 4)).epsilon(1e-15));
}

TEST_CASE("cross_correlation: equal orthogonal embeddings give the identity") {
    // columns a=(1,1,-1,-1), b=(1,-1,1,-1): zero mean, unit variance, orthogonal
    Matrix z(4, 2);
    const double a[4] = {1, 1, -1, -1};
    const double b[4] = {1, -1, 1, -1};
    for (std::size_t r = 0; r < 4; ++r) {
        z.at(r, 0) = a[r];
        z.at(r, 1) = b[r];
    }
    CrossCorrelation cc = cross_correlation(z, z);
    CHECK(cc.C.at(0, 0) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(cc.C.at(1, 1) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(cc.C.at(0, 1) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(cc.C.at(1, 0) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("cross_correlation entries obey Cauchy-Schwarz") {
    Matrix z1 = random_matrix(16, 5, 8), z2 = random_matrix(16, 5, 9);
    CrossCorrelation cc = cross_correlation(z1, z2);
    for (double v : cc.C.data) CHECK(std::fabs(v) <= 1.0 + 1e-9);
}

TEST_CASE("cross_correlation requires n >= 2") {
    Matrix z(1, 3, 1.0);
    CHECK_THROWS_AS(cross_correlation(z, z), LoclError);
}

TEST_CASE("cross_correlation is invariant to per-dimension affine rescaling") {
    Matrix z1 = random_matrix(12, 4, 10), z2 = random_matrix(12, 4, 11);
    CrossCorrelation base = cross_correlation(z1, z2);
    Matrix z1s = z1;
    for (std::size_t r = 0; r < z1s.rows; ++r)
        for (std::size_t c = 0; c < z1s.cols; ++c) z1s.at(r, c) = z1s.at(r, c) * (3.0 + c) - 2.0 * c;
    CrossCorrelation scaled = cross_correlation(z1s, z2);
    // exact invariance is broken only by the 1e-5 normalization epsilon
    for (std::size_t i = 0; i < base.C.data.size(); ++i)
        CHECK(std::fabs(base.C.data[i] - scaled.C.data[i]) < 1e-4);
}

TEST_CASE("barlow_twins_loss fixtures") {
    Matrix I(3, 3);
    for (std::size_t i = 0; i < 3; ++i) I.at(i, i) = 1.0;
    CHECK(barlow_twins_loss(I, 0.005) == 0.0);

    Matrix Z(3, 3, 0.0);
    CHECK(barlow_twins_loss(Z, 123.0) == doctest::Approx(3.0));

    Matrix C(2, 2);
    C.at(0, 0) = 1.0;
    C.at(1, 1) = 1.0;
    C.at(0, 1) = 0.5;
    C.at(1, 0) = 0.5;
    CHECK(barlow_twins_loss(C, 0.005) == doctest::Approx(0.0025).epsilon(1e-12));
}

TEST_CASE("barlow_twins_loss rejects non-square input") {
    CHECK_THROWS_AS(barlow_twins_loss(Matrix(2, 3), 0.005), LoclError);
}

TEST_CASE("barlow twins loss is invariant to simultaneous column permutation") {
    Matrix z1 = random_matrix(10, 4, 20), z2 = random_matrix(10, 4, 21);
    const double base = barlow_twins_loss(cross_correlation(z1, z2).C, 0.005);
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    Matrix p1(10, 4), p2(10, 4);
    for (std::size_t r = 0; r < 10; ++r)
        for (std::size_t c = 0; c < 4; ++c) {
            p1.at(r, c) = z1.at(r, perm[c]);
            p2.at(r, c) = z2.at(r, perm[c]);
        }
    CHECK(barlow_twins_loss(cross_correlation(p1, p2).C, 0.005) ==
          doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("combined loss arithmetic and report invariants") {
    Matrix z1 = random_matrix(8, 3, 30), z2 = random_matrix(8, 3, 31);
    Matrix x1 = random_matrix(8, 5, 32), x2 = random_matrix(8, 4, 33);
    Matrix xh1 = random_matrix(8, 5, 34), xh2 = random_matrix(8, 4, 35);

    CombinedLoss l = combined_loss(z1, z2, xh1, x1, xh2, x2, 5, 4, 0.5, 0.005);
    CHECK(l.report.l_total ==
          doctest::Approx(l.report.l_contrastive + 0.5 * l.report.l_reconstruction).epsilon(1e-12));
    CHECK(l.report.l_reconstruction >= 0.0);

    // alpha = 0 reduces to the pure contrastive objective, recon still reported
    CombinedLoss l0 = combined_loss(z1, z2, xh1, x1, xh2, x2, 5, 4, 0.0, 0.005);
    CHECK(l0.report.l_total == doctest::Approx(l0.report.l_contrastive));
    CHECK(l0.report.l_reconstruction > 0.0);
    for (double v : l0.grad_xhat1.data) CHECK(v == 0.0);

    // perfect reconstruction and identity C -> 0 handled in fixtures above
    CombinedLoss lz = combined_loss(z1, z2, x1, x1, x2, x2, 5, 4, 1.0, 0.005);
    CHECK(lz.report.l_reconstruction == 0.0);
}

TEST_CASE("barlow twins gradients match finite differences") {
    Matrix z1 = random_matrix(6, 3, 40), z2 = random_matrix(6, 3, 41);
    auto loss = [&]() { return barlow_twins_loss(cross_correlation(z1, z2).C, 0.005); };
    Matrix g1, g2;
    barlow_twins_backward(cross_correlation(z1, z2), 0.005, g1, g2);
    for (std::size_t i = 0; i < z1.data.size(); ++i) {
        CHECK(rel_err(central_diff(loss, &z1.data[i]), g1.data[i]) < 1e-6);
        CHECK(rel_err(central_diff(loss, &z2.data[i]), g2.data[i]) < 1e-6);
    }
}

TEST_CASE("full combined loss gradient through both branches vs finite differences") {
    // tiny twin model: widths 5 and 4, conv encoders, latent 3
    TrainConfig cfg;
    cfg.latent_dim = 3;
    cfg.channel_plan = {2, 3, 4};
    cfg.kernel_size = 3;
    Branch b1 = make_branch(5, cfg);
    Branch b2 = make_branch(4, cfg);
    // random nonzero biases keep the padded tail off the LeakyReLU kink,
    // where central differences are invalid
    randomize_params(b1.encoder, 1);
    randomize_params(b1.decoder, 2);
    randomize_params(b2.encoder, 3);
    randomize_params(b2.decoder, 4);

    Matrix x1 = random_matrix(4, 5, 50), x2 = random_matrix(4, 4, 51);
    Matrix t1(4, b1.padded_width), t2(4, b2.padded_width);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 5; ++c) t1.at(r, c) = x1.at(r, c);
        for (std::size_t c = 0; c < 4; ++c) t2.at(r, c) = x2.at(r, c);
    }

    const double alpha = 0.7, lambda = 0.005;
    auto loss = [&]() {
        Matrix z1, z2, xh1, xh2;
        b1.forward(x1, z1, xh1);
        b2.forward(x2, z2, xh2);
        CombinedLoss l = combined_loss(z1, z2, xh1, t1, xh2, t2, 5, 4, alpha, lambda);
        return l.report.l_total;
    };

    Matrix z1, z2, xh1, xh2;
    b1.forward(x1, z1, xh1);
    b2.forward(x2, z2, xh2);
    CombinedLoss l = combined_loss(z1, z2, xh1, t1, xh2, t2, 5, 4, alpha, lambda);
    b1.encoder.zero_grad();
    b1.decoder.zero_grad();
    b2.encoder.zero_grad();
    b2.decoder.zero_grad();
    b1.backward(l.grad_z1, l.grad_xhat1);
    b2.backward(l.grad_z2, l.grad_xhat2);

    Rng rng(60);
    auto check_params = [&](Branch& b) {
        for (auto& p : b.params()) {
            for (std::size_t t = 0; t < 6; ++t) {
                const std::size_t i = rng.next_below(p.w->size());
                const double num = central_diff(loss, &(*p.w)[i]);
                // absolute guard: near-zero gradients are FD-roundoff limited
                const bool ok = rel_err(num, (*p.g)[i]) < 1e-5 ||
                                std::fabs(num - (*p.g)[i]) < 1e-8;
                CHECK(ok);
            }
        }
    };
    check_params(b1);
    check_params(b2);
}
