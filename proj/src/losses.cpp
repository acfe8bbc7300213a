#include "locl/losses.hpp"

namespace locl {

namespace {

double branch_loss(const Matrix& x_hat, const Matrix& x, std::size_t valid_width) {
    if (x_hat.rows != x.rows || x_hat.cols != x.cols)
        throw LoclError("reconstruction_loss: shape mismatch");
    if (valid_width > x.cols) throw LoclError("reconstruction_loss: valid width exceeds matrix width");
    double s = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t c = 0; c < valid_width; ++c) {
            const double d = x_hat.at(r, c) - x.at(r, c);
            s += d * d;
        }
    return s / static_cast<double>(x.rows);
}

}  // namespace

double reconstruction_loss(const Matrix& x_hat1, const Matrix& x1,
                           const Matrix& x_hat2, const Matrix& x2,
                           std::size_t valid_width1, std::size_t valid_width2) {
    return 0.5 * (branch_loss(x_hat1, x1, valid_width1) + branch_loss(x_hat2, x2, valid_width2));
}

Matrix reconstruction_grad(const Matrix& x_hat, const Matrix& x, std::size_t valid_width) {
    // d/dxhat of 0.5 * (1/n) * sum ||xhat - x||^2  =  (xhat - x) / n on valid cells
    Matrix g(x_hat.rows, x_hat.cols);
    const double inv_n = 1.0 / static_cast<double>(x_hat.rows);
    for (std::size_t r = 0; r < x_hat.rows; ++r)
        for (std::size_t c = 0; c < valid_width; ++c)
            g.at(r, c) = (x_hat.at(r, c) - x.at(r, c)) * inv_n;
    return g;
}

CrossCorrelation cross_correlation(const Matrix& z1, const Matrix& z2) {
    if (z1.rows != z2.rows || z1.cols != z2.cols)
        throw LoclError("cross_correlation: embedding shape mismatch");
    if (z1.rows < 2) throw LoclError("cross_correlation requires batch size >= 2");

    CrossCorrelation cc;
    cc.z1_norm = batchnorm_batch(z1, cc.cache1);
    cc.z2_norm = batchnorm_batch(z2, cc.cache2);
    const std::size_t n = z1.rows, d = z1.cols;
    cc.C = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t b = 0; b < n; ++b) s += cc.z1_norm.at(b, i) * cc.z2_norm.at(b, j);
            cc.C.at(i, j) = s / static_cast<double>(n);
        }
    return cc;
}

double barlow_twins_loss(const Matrix& C, double lambda) {
    if (C.rows != C.cols) throw LoclError("barlow_twins_loss: C must be square");
    double on = 0.0, off = 0.0;
    for (std::size_t i = 0; i < C.rows; ++i)
        for (std::size_t j = 0; j < C.cols; ++j) {
            if (i == j) {
                const double d = 1.0 - C.at(i, i);
                on += d * d;
            } else {
                off += C.at(i, j) * C.at(i, j);
            }
        }
    return on + lambda * off;
}

void barlow_twins_backward(const CrossCorrelation& cc, double lambda,
                           Matrix& grad_z1, Matrix& grad_z2) {
    const std::size_t n = cc.z1_norm.rows, d = cc.z1_norm.cols;

    Matrix gC(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            gC.at(i, j) = (i == j) ? -2.0 * (1.0 - cc.C.at(i, i)) : 2.0 * lambda * cc.C.at(i, j);

    // C = z1n^T z2n / n
    Matrix g1n(n, d), g2n(n, d);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < d; ++i) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                s1 += gC.at(i, j) * cc.z2_norm.at(b, j);
                s2 += gC.at(j, i) * cc.z1_norm.at(b, j);
            }
            g1n.at(b, i) = s1 / static_cast<double>(n);
            g2n.at(b, i) = s2 / static_cast<double>(n);
        }

    grad_z1 = batchnorm_backward(cc.cache1, g1n);
    grad_z2 = batchnorm_backward(cc.cache2, g2n);
}

CombinedLoss combined_loss(const Matrix& z1, const Matrix& z2,
                           const Matrix& x_hat1, const Matrix& x1,
                           const Matrix& x_hat2, const Matrix& x2,
                           std::size_t valid_width1, std::size_t valid_width2,
                           double alpha, double lambda) {
    CombinedLoss out;
    CrossCorrelation cc = cross_correlation(z1, z2);

    out.report.l_contrastive = barlow_twins_loss(cc.C, lambda);
    out.report.l_reconstruction =
        reconstruction_loss(x_hat1, x1, x_hat2, x2, valid_width1, valid_width2);
    out.report.l_total = out.report.l_contrastive + alpha * out.report.l_reconstruction;

    const std::size_t d = cc.C.rows;
    double diag = 0.0, offsq = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            if (i == j) diag += cc.C.at(i, i);
            else offsq += cc.C.at(i, j) * cc.C.at(i, j);
    out.report.c_diag_mean = diag / static_cast<double>(d);
    out.report.c_offdiag_mean_sq = d > 1 ? offsq / static_cast<double>(d * d - d) : 0.0;

    barlow_twins_backward(cc, lambda, out.grad_z1, out.grad_z2);

    out.grad_xhat1 = reconstruction_grad(x_hat1, x1, valid_width1);
    out.grad_xhat2 = reconstruction_grad(x_hat2, x2, valid_width2);
    for (auto& v : out.grad_xhat1.data) v *= alpha;
    for (auto& v : out.grad_xhat2.data) v *= alpha;
    return out;
}

}  // namespace locl
