#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "locl/data.hpp"
#include "locl/losses.hpp"
#include "locl/model.hpp"

namespace locl {

struct EpochLog {
    std::size_t epoch = 0;
    double train_total = 0.0;
    double train_contrastive = 0.0;
    double train_reconstruction = 0.0;
    double validation_total = 0.0;
    double wall_seconds = 0.0;
    bool improved = false;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    std::size_t best_epoch = 0;
    double best_validation = 0.0;
    bool early_stopped = false;
};

struct EmbeddingMatrix {
    Matrix Z;                         // N x 2d
    std::vector<std::size_t> row_ids;
};

// Gather a row subset / feature subset of the dataset matrix.
Matrix gather(const Matrix& X, const std::vector<std::size_t>& rows,
              const std::vector<std::size_t>& features);

TwinModel pretrain(const TabularDataset& d, const std::vector<std::size_t>& unlabeled_rows,
                   const TrainConfig& cfg, TrainLog* log = nullptr);

EmbeddingMatrix embed(TwinModel& model, const TabularDataset& d);
EmbeddingMatrix embed_rows(TwinModel& model, const TabularDataset& d,
                           const std::vector<std::size_t>& rows);

// Human-editable key = value config format; field names match TrainConfig.
TrainConfig read_config_file(const std::string& path);
void write_config_file(const TrainConfig& cfg, const std::string& path);

void write_train_log(const TrainLog& log, const std::string& path);  // JSON lines

}  // namespace locl
