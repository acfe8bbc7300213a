#include "locl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <set>

namespace locl {

void EvalReport::finalize() {
    const double n = static_cast<double>(fold_accuracies.size());
    double s = 0.0;
    for (double a : fold_accuracies) s += a;
    mean = s / n;
    double ss = 0.0;
    for (double a : fold_accuracies) ss += (a - mean) * (a - mean);
    stddev = std::sqrt(ss / n);
}

namespace {

struct ProbeGrad {
    Matrix gW;
    std::vector<double> gb;
    double objective = 0.0;
    double grad_norm = 0.0;
};

ProbeGrad probe_gradient(const ProbeModel& p, const Matrix& Z, const std::vector<int>& labels,
                         double reg) {
    const std::size_t n = Z.rows, D = Z.cols, K = p.W.rows;
    ProbeGrad out;
    out.gW = Matrix(K, D);
    out.gb.assign(K, 0.0);

    double ce = 0.0;
    std::vector<double> logits(K);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < K; ++k) {
            double s = p.b[k];
            for (std::size_t j = 0; j < D; ++j) s += p.W.at(k, j) * Z.at(i, j);
            logits[k] = s;
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) sum += std::exp(logits[k] - mx);
        const double lse = mx + std::log(sum);
        const int y = labels[i];
        ce += lse - logits[static_cast<std::size_t>(y)];
        for (std::size_t k = 0; k < K; ++k) {
            const double prob = std::exp(logits[k] - lse);
            const double delta = (prob - (static_cast<int>(k) == y ? 1.0 : 0.0)) / static_cast<double>(n);
            out.gb[k] += delta;
            for (std::size_t j = 0; j < D; ++j) out.gW.at(k, j) += delta * Z.at(i, j);
        }
    }

    double wss = 0.0;
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < D; ++j) {
            out.gW.at(k, j) += reg * p.W.at(k, j);
            wss += p.W.at(k, j) * p.W.at(k, j);
        }
    out.objective = ce / static_cast<double>(n) + reg * wss / 2.0;

    double gss = 0.0;
    for (double v : out.gW.data) gss += v * v;
    for (double v : out.gb) gss += v * v;
    out.grad_norm = std::sqrt(gss);
    return out;
}

}  // namespace

double probe_objective(const ProbeModel& probe, const Matrix& Z,
                       const std::vector<int>& labels, double reg) {
    return probe_gradient(probe, Z, labels, reg).objective;
}

ProbeModel train_probe(const Matrix& Z, const std::vector<int>& labels, double reg,
                       std::uint64_t init_seed) {
    if (Z.rows == 0 || Z.rows != labels.size())
        throw LoclError("train_probe: labels do not match embedding rows");
    std::set<int> present(labels.begin(), labels.end());
    if (present.size() < 2) throw LoclError("train_probe requires at least 2 classes");
    const int K = *present.rbegin() + 1;

    ProbeModel p;
    p.W = Matrix(static_cast<std::size_t>(K), Z.cols);
    p.b.assign(static_cast<std::size_t>(K), 0.0);
    p.classes.resize(static_cast<std::size_t>(K));
    std::iota(p.classes.begin(), p.classes.end(), 0);
    if (init_seed != 0) {
        Rng rng(Rng::derive(init_seed, 0x9806));
        for (auto& v : p.W.data) v = (rng.next_double() * 2.0 - 1.0) * 0.01;
    }

    // gradient descent with Armijo backtracking
    double step = 1.0;
    for (int iter = 0; iter < 5000; ++iter) {
        ProbeGrad g = probe_gradient(p, Z, labels, reg);
        if (g.grad_norm < 1e-6) break;

        ProbeModel trial = p;
        double f_trial = 0.0;
        const double g2 = g.grad_norm * g.grad_norm;
        step = std::min(step * 2.0, 1e6);
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            trial = p;
            for (std::size_t i = 0; i < trial.W.data.size(); ++i)
                trial.W.data[i] -= step * g.gW.data[i];
            for (std::size_t k = 0; k < trial.b.size(); ++k) trial.b[k] -= step * g.gb[k];
            f_trial = probe_objective(trial, Z, labels, reg);
            if (f_trial <= g.objective - 1e-4 * step * g2) { accepted = true; break; }
            step *= 0.5;
        }
        if (!accepted) break;
        p = trial;
    }
    return p;
}

std::vector<int> predict(const ProbeModel& probe, const Matrix& Z) {
    const std::size_t K = probe.W.rows, D = probe.W.cols;
    if (Z.cols != D) throw LoclError("predict: embedding width mismatch");
    std::vector<int> out(Z.rows);
    for (std::size_t i = 0; i < Z.rows; ++i) {
        int best = 0;
        double best_s = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
            double s = probe.b[k];
            for (std::size_t j = 0; j < D; ++j) s += probe.W.at(k, j) * Z.at(i, j);
            if (s > best_s) {  // ties keep the lowest class id
                best_s = s;
                best = static_cast<int>(k);
            }
        }
        out[i] = probe.classes[static_cast<std::size_t>(best)];
    }
    return out;
}

double evaluate(const ProbeModel& probe, const Matrix& Z, const std::vector<int>& labels) {
    if (Z.rows == 0) throw LoclError("evaluate: empty test set");
    if (Z.rows != labels.size()) throw LoclError("evaluate: label count mismatch");
    const std::vector<int> pred = predict(probe, Z);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

std::string config_fingerprint(const TrainConfig& cfg) {
    std::string repr = std::to_string(cfg.batch_size) + "|" + std::to_string(cfg.latent_dim) + "|" +
                       std::to_string(cfg.alpha) + "|" + std::to_string(cfg.lambda) + "|" +
                       std::to_string(cfg.mask_p) + "|" + std::to_string(cfg.learning_rate) + "|" +
                       std::to_string(cfg.max_epochs) + "|" + std::to_string(cfg.patience) + "|" +
                       std::to_string(cfg.kernel_size) + "|" + std::to_string(cfg.overlap_fraction) +
                       "|" + to_string(cfg.ordering_variant) + "|" + to_string(cfg.encoder_kind) +
                       "|" + std::to_string(cfg.seed);
    for (auto c : cfg.channel_plan) repr += "|" + std::to_string(c);
    return hex64(fnv1a(repr.data(), repr.size()));
}

EvalReport run_protocol(const TabularDataset& d, const FoldPlan& plan, const TrainConfig& cfg,
                        double probe_reg, std::vector<TrainLog>* logs, int workers) {
    if (d.labels.empty()) throw LoclError("run_protocol requires a labeled dataset");
    EvalReport report;
    report.config_fingerprint = config_fingerprint(cfg);
    report.variant_name = to_string(cfg.encoder_kind) + "+" + to_string(cfg.ordering_variant);
    report.fold_accuracies.assign(static_cast<std::size_t>(plan.k), 0.0);
    std::vector<TrainLog> fold_logs(static_cast<std::size_t>(plan.k));

    auto run_fold = [&](int f) {
        // per-fold seed derived from the master seed; folds are fully isolated
        TrainConfig fold_cfg = cfg;
        fold_cfg.seed = Rng::derive(cfg.seed, 0xf07d, static_cast<std::uint64_t>(f));

        const auto unlabeled = plan.unlabeled_rows(f);
        const auto labeled = plan.labeled_rows(f);
        const auto test = plan.test_rows(f);

        TwinModel model = pretrain(d, unlabeled, fold_cfg, &fold_logs[static_cast<std::size_t>(f)]);

        EmbeddingMatrix Z_labeled = embed_rows(model, d, labeled);
        EmbeddingMatrix Z_test = embed_rows(model, d, test);

        std::vector<int> y_labeled, y_test;
        for (auto r : labeled) y_labeled.push_back(d.labels[r]);
        for (auto r : test) y_test.push_back(d.labels[r]);

        ProbeModel probe = train_probe(Z_labeled.Z, y_labeled, probe_reg);
        report.fold_accuracies[static_cast<std::size_t>(f)] = evaluate(probe, Z_test.Z, y_test);
    };

    if (workers <= 1) {
        for (int f = 0; f < plan.k; ++f) run_fold(f);
    } else {
        std::vector<std::future<void>> pending;
        for (int f = 0; f < plan.k; ++f)
            pending.push_back(std::async(std::launch::async, run_fold, f));
        for (auto& p : pending) p.get();
    }

    if (logs) *logs = std::move(fold_logs);
    report.finalize();
    return report;
}

std::vector<AblationCell> run_ablations(const TabularDataset& d, const FoldPlan& plan,
                                        const TrainConfig& base, double probe_reg, int workers) {
    struct Spec {
        const char* name;
        EncoderKind kind;
        OrderingVariant variant;
    };
    const Spec specs[] = {
        {"LoCL", EncoderKind::Conv, OrderingVariant::Mst},
        {"LoCL - Dense layer", EncoderKind::Dense, OrderingVariant::Mst},
        {"LoCL - Random ordering", EncoderKind::Conv, OrderingVariant::Random},
        {"LoCL - Original order", EncoderKind::Conv, OrderingVariant::Original},
        {"LoCL - Interleaved order", EncoderKind::Conv, OrderingVariant::Interleaved},
    };

    std::vector<AblationCell> out;
    for (const auto& s : specs) {
        AblationCell cell;
        cell.name = s.name;
        cell.cfg = base;
        cell.cfg.encoder_kind = s.kind;
        cell.cfg.ordering_variant = s.variant;
        cell.report = run_protocol(d, plan, cell.cfg, probe_reg, nullptr, workers);
        cell.report.variant_name = s.name;
        out.push_back(std::move(cell));
    }
    return out;
}

}  // namespace locl
