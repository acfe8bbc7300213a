#pragma once

#include "locl/common.hpp"
#include "locl/tensor.hpp"

namespace locl {

struct LossReport {
    double l_total = 0.0;
    double l_contrastive = 0.0;
    double l_reconstruction = 0.0;
    double c_diag_mean = 0.0;
    double c_offdiag_mean_sq = 0.0;
};

// Mean over the batch of squared Euclidean reconstruction error, averaged over
// the two branches. valid_width limits the loss to unpadded positions.
double reconstruction_loss(const Matrix& x_hat1, const Matrix& x1,
                           const Matrix& x_hat2, const Matrix& x2,
                           std::size_t valid_width1, std::size_t valid_width2);

// d(loss)/d(x_hat) for one branch of the reconstruction term.
Matrix reconstruction_grad(const Matrix& x_hat, const Matrix& x, std::size_t valid_width);

struct CrossCorrelation {
    Matrix C;  // d x d
    BatchNormCache cache1, cache2;
    Matrix z1_norm, z2_norm;
};

CrossCorrelation cross_correlation(const Matrix& z1, const Matrix& z2);

double barlow_twins_loss(const Matrix& C, double lambda);

// Gradients of barlow_twins_loss(cross_correlation(z1, z2)) w.r.t. the raw
// embeddings, back through the batch normalization.
void barlow_twins_backward(const CrossCorrelation& cc, double lambda,
                           Matrix& grad_z1, Matrix& grad_z2);

struct CombinedLoss {
    LossReport report;
    Matrix grad_z1, grad_z2;        // contrastive gradient into raw embeddings
    Matrix grad_xhat1, grad_xhat2;  // reconstruction gradient into decoder outputs
};

CombinedLoss combined_loss(const Matrix& z1, const Matrix& z2,
                           const Matrix& x_hat1, const Matrix& x1,
                           const Matrix& x_hat2, const Matrix& x2,
                           std::size_t valid_width1, std::size_t valid_width2,
                           double alpha, double lambda);

}  // namespace locl
