#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "locl/augment.hpp"
#include "locl/ordering.hpp"
#include "locl/tensor.hpp"

namespace locl {

enum class EncoderKind { Conv, Dense };

std::string to_string(EncoderKind k);
EncoderKind encoder_kind_from_string(const std::string& s);

struct TrainConfig {
    std::size_t batch_size = 128;
    std::size_t latent_dim = 64;
    double alpha = 1.0;
    double lambda = 0.005;
    double mask_p = 0.3;
    double learning_rate = 0.001;
    std::size_t max_epochs = 200;
    std::size_t patience = 10;
    std::size_t kernel_size = 3;
    std::vector<std::size_t> channel_plan = {16, 32, 64};
    double overlap_fraction = 0.0;
    OrderingVariant ordering_variant = OrderingVariant::Mst;
    EncoderKind encoder_kind = EncoderKind::Conv;
    CorruptMode corrupt_mode = CorruptMode::MarginalShuffle;
    std::uint64_t seed = 0;

    void validate() const;
};

// One autoencoder branch over a feature subset. Conv branches operate on the
// zero-padded width (next multiple of 8); the reconstruction loss only covers
// the first `width` positions.
struct Branch {
    std::size_t width = 0;
    std::size_t padded_width = 0;
    EncoderKind kind = EncoderKind::Conv;
    Sequential encoder;
    Sequential decoder;

    Tensor to_input(const Matrix& batch) const;  // n x width -> network input
    Matrix embed(const Matrix& batch);           // n x width -> n x d
    // Full forward; z and x_hat both as matrices (x_hat over padded width).
    void forward(const Matrix& batch, Matrix& z, Matrix& x_hat);
    // Backward given gradients from combined_loss; accumulates param grads.
    void backward(const Matrix& grad_z, const Matrix& grad_xhat);

    std::vector<ParamRef> params();
};

std::size_t padded_width_for(std::size_t width, EncoderKind kind);
Branch make_branch(std::size_t width, const TrainConfig& cfg);

struct TwinModel {
    Branch branch1;
    Branch branch2;
    FeatureOrdering ordering;
    SplitPlan split;
    TrainConfig config;
    std::uint64_t dataset_fingerprint = 0;

    std::vector<ParamRef> params();
};

// Checkpoint container: "LOCL" magic, u32 version, u64 manifest length,
// manifest JSON, then float64 little-endian weight arrays in manifest order.
void save_checkpoint(const TwinModel& model, const std::string& path);
TwinModel load_checkpoint(const std::string& path);

// Same container, for embedding matrices.
void save_embeddings(const Matrix& Z, const std::vector<std::size_t>& row_ids,
                     std::uint64_t dataset_fingerprint, const std::string& path);
Matrix load_embeddings(const std::string& path, std::vector<std::size_t>* row_ids = nullptr,
                       std::uint64_t* dataset_fingerprint = nullptr);

}  // namespace locl
