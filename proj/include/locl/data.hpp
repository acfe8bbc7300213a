#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "locl/common.hpp"

namespace locl {

enum class ColumnType { Numeric, Categorical };

struct RawColumn {
    std::string name;
    ColumnType type = ColumnType::Numeric;
    std::vector<double> numeric;        // valid when type == Numeric
    std::vector<std::string> text;      // valid when type == Categorical
};

struct RawTable {
    std::vector<RawColumn> columns;
    std::size_t row_count = 0;
};

enum class NormMode { ZScore, MinMax };

struct NormStat {
    // zscore: a = mean, b = population std; minmax: a = min, b = max - min.
    // one-hot columns carry identity stats (a = 0, b = 1).
    double a = 0.0;
    double b = 1.0;
};

struct TabularDataset {
    Matrix X;                               // N x m, normalized
    std::vector<std::string> feature_names; // one-hot expanded
    std::vector<int> labels;                // empty when unlabeled
    std::vector<std::string> class_names;   // dense id -> original value
    std::vector<NormStat> norm_stats;
    NormMode mode = NormMode::ZScore;

    std::size_t n_rows() const { return X.rows; }
    std::size_t n_features() const { return X.cols; }
    std::size_t n_classes() const { return class_names.size(); }
};

struct PreprocessReport {
    std::vector<std::string> dropped_columns;
    std::vector<std::pair<std::string, std::vector<std::string>>> one_hot_expansions;
};

struct FoldPlan {
    std::vector<int> fold_assignments;              // per row, in [0, k)
    std::vector<std::vector<std::uint8_t>> unlabeled_mask;  // [fold][row]; valid for training rows of that fold
    int k = 0;
    std::uint64_t seed = 0;

    std::vector<std::size_t> test_rows(int fold) const;
    std::vector<std::size_t> train_rows(int fold) const;
    std::vector<std::size_t> unlabeled_rows(int fold) const;
    std::vector<std::size_t> labeled_rows(int fold) const;  // training rows not marked unlabeled
};

struct SchemaHint {
    std::map<std::string, ColumnType> overrides;
};

RawTable load_csv(const std::string& path, const SchemaHint& hint = {});
RawTable parse_csv_text(const std::string& text, const SchemaHint& hint = {});

TabularDataset preprocess(const RawTable& table, const std::string& label_column,
                          NormMode mode, PreprocessReport* report = nullptr);

// Preprocess without a label column (pure feature table).
TabularDataset preprocess_unlabeled(const RawTable& table, NormMode mode,
                                    PreprocessReport* report = nullptr);

FoldPlan make_folds(const TabularDataset& d, int k, double unlabeled_fraction,
                    std::uint64_t seed);

// Inverse of the stored normalization, for round-trip checks and reporting.
double denormalize(const NormStat& s, NormMode mode, double value);

}  // namespace locl
