#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "locl/data.hpp"
#include "locl/pipeline.hpp"

namespace locl {

struct ProbeModel {
    Matrix W;                // K x D
    std::vector<double> b;   // K
    std::vector<int> classes;
};

struct EvalReport {
    std::vector<double> fold_accuracies;
    double mean = 0.0;
    double stddev = 0.0;
    std::string config_fingerprint;
    std::string variant_name;

    void finalize();
};

// Multinomial logistic regression: cross-entropy + reg * ||W||^2 / 2,
// full-batch gradient descent (backtracking line search) to gradient norm
// < 1e-6 or 5000 iterations.
ProbeModel train_probe(const Matrix& Z, const std::vector<int>& labels, double reg,
                       std::uint64_t init_seed = 0);

double probe_objective(const ProbeModel& probe, const Matrix& Z,
                       const std::vector<int>& labels, double reg);

std::vector<int> predict(const ProbeModel& probe, const Matrix& Z);
double evaluate(const ProbeModel& probe, const Matrix& Z, const std::vector<int>& labels);

std::string config_fingerprint(const TrainConfig& cfg);

// Full protocol: per fold, pretrain on the unlabeled 90% of the training
// partition, embed, probe on the labeled 10%, test on the held-out fold.
EvalReport run_protocol(const TabularDataset& d, const FoldPlan& plan, const TrainConfig& cfg,
                        double probe_reg = 1e-3, std::vector<TrainLog>* logs = nullptr,
                        int workers = 1);

struct AblationCell {
    std::string name;
    TrainConfig cfg;
    EvalReport report;
};

// Table-3-shaped grid: conv+MST, dense+MST, conv+random, conv+original,
// conv+interleaved; every cell shares the same FoldPlan.
std::vector<AblationCell> run_ablations(const TabularDataset& d, const FoldPlan& plan,
                                        const TrainConfig& base, double probe_reg = 1e-3,
                                        int workers = 1);

}  // namespace locl
