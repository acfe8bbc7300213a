#include "locl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace locl {

using nlohmann::json;

Matrix gather(const Matrix& X, const std::vector<std::size_t>& rows,
              const std::vector<std::size_t>& features) {
    Matrix out(rows.size(), features.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < features.size(); ++c)
            out.at(r, c) = X.at(rows[r], features[c]);
    return out;
}

namespace {

// Pad a n x w batch to the branch's padded width with zeros.
Matrix pad_to(const Matrix& x, std::size_t padded) {
    if (x.cols == padded) return x;
    Matrix out(x.rows, padded);
    for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t c = 0; c < x.cols; ++c) out.at(r, c) = x.at(r, c);
    return out;
}

struct BatchLoss {
    LossReport report;
};

// One forward/backward pass over a batch; when update is false only the loss
// is computed.
LossReport run_batch(TwinModel& model, const Matrix& x1, const Matrix& x2,
                     std::uint64_t mask_seed1, std::uint64_t mask_seed2,
                     std::uint64_t shuf_seed1, std::uint64_t shuf_seed2,
                     bool update, RmsProp* opt) {
    const TrainConfig& cfg = model.config;
    MaskBatch m1 = sample_mask(x1.rows, x1.cols, cfg.mask_p, mask_seed1);
    MaskBatch m2 = sample_mask(x2.rows, x2.cols, cfg.mask_p, mask_seed2);
    Matrix x1c = corrupt(x1, m1, cfg.corrupt_mode, shuf_seed1);
    Matrix x2c = corrupt(x2, m2, cfg.corrupt_mode, shuf_seed2);

    Matrix z1, z2, xh1, xh2;
    model.branch1.forward(x1c, z1, xh1);
    model.branch2.forward(x2c, z2, xh2);

    const Matrix t1 = pad_to(x1, model.branch1.padded_width);
    const Matrix t2 = pad_to(x2, model.branch2.padded_width);
    CombinedLoss loss = combined_loss(z1, z2, xh1, t1, xh2, t2,
                                      model.branch1.width, model.branch2.width,
                                      cfg.alpha, cfg.lambda);
    if (update) {
        model.branch1.encoder.zero_grad();
        model.branch1.decoder.zero_grad();
        model.branch2.encoder.zero_grad();
        model.branch2.decoder.zero_grad();
        model.branch1.backward(loss.grad_z1, loss.grad_xhat1);
        model.branch2.backward(loss.grad_z2, loss.grad_xhat2);
        opt->step(model.params());
    }
    return loss.report;
}

std::vector<std::vector<double>> snapshot_params(TwinModel& model) {
    std::vector<std::vector<double>> out;
    for (auto& p : model.params()) out.push_back(*p.w);
    return out;
}

void restore_params(TwinModel& model, const std::vector<std::vector<double>>& snap) {
    auto ps = model.params();
    for (std::size_t i = 0; i < ps.size(); ++i) *ps[i].w = snap[i];
}

double validation_loss(TwinModel& model, const Matrix& Xv1, const Matrix& Xv2,
                       std::uint64_t seed) {
    const std::size_t bs = model.config.batch_size;
    const std::size_t n = Xv1.rows;
    double total = 0.0;
    std::size_t batches = 0;
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t start = 0; start < n; start += bs) {
        const std::size_t end = std::min(start + bs, n);
        if (end - start < 2) break;  // contrastive term needs >= 2 rows
        std::vector<std::size_t> rows(all.begin() + static_cast<std::ptrdiff_t>(start),
                                      all.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<std::size_t> cols1(Xv1.cols), cols2(Xv2.cols);
        std::iota(cols1.begin(), cols1.end(), 0);
        std::iota(cols2.begin(), cols2.end(), 0);
        Matrix x1 = gather(Xv1, rows, cols1);
        Matrix x2 = gather(Xv2, rows, cols2);
        const std::size_t b = start / bs;
        LossReport r = run_batch(model, x1, x2,
                                 Rng::derive(seed, 0xe5a1, b, 1), Rng::derive(seed, 0xe5a1, b, 2),
                                 Rng::derive(seed, 0xe5a2, b, 1), Rng::derive(seed, 0xe5a2, b, 2),
                                 false, nullptr);
        total += r.l_total;
        ++batches;
    }
    if (batches == 0) throw LoclError("validation set too small");
    return total / static_cast<double>(batches);
}

}  // namespace

TwinModel pretrain(const TabularDataset& d, const std::vector<std::size_t>& unlabeled_rows,
                   const TrainConfig& cfg, TrainLog* log_out) {
    cfg.validate();
    if (unlabeled_rows.size() < 2 * cfg.batch_size)
        throw LoclError("pretrain requires at least 2 * batch_size unlabeled rows (" +
                        std::to_string(unlabeled_rows.size()) + " given)");

    TwinModel model;
    model.config = cfg;

    // ordering and split are computed on the pretraining rows only
    std::vector<std::size_t> all_features(d.n_features());
    std::iota(all_features.begin(), all_features.end(), 0);
    Matrix X_unlab = gather(d.X, unlabeled_rows, all_features);
    model.ordering = compute_ordering(X_unlab, cfg.ordering_variant, cfg.seed);
    model.split = split_features(model.ordering, cfg.overlap_fraction);

    model.branch1 = make_branch(model.split.subset1.size(), cfg);
    model.branch2 = make_branch(model.split.subset2.size(), cfg);
    init_weights(model.branch1.encoder, Rng::derive(cfg.seed, 0x11));
    init_weights(model.branch1.decoder, Rng::derive(cfg.seed, 0x12));
    init_weights(model.branch2.encoder, Rng::derive(cfg.seed, 0x21));
    init_weights(model.branch2.decoder, Rng::derive(cfg.seed, 0x22));

    // 10% of unlabeled rows held out as the early-stopping validation set
    std::vector<std::size_t> local(unlabeled_rows.size());
    std::iota(local.begin(), local.end(), 0);
    Rng vrng(Rng::derive(cfg.seed, 0x7a1d));
    vrng.shuffle(local);
    const std::size_t n_val = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(local.size()))));
    std::vector<std::size_t> val_local(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_local(local.begin() + static_cast<std::ptrdiff_t>(n_val), local.end());

    Matrix Xt1 = gather(X_unlab, train_local, model.split.subset1);
    Matrix Xt2 = gather(X_unlab, train_local, model.split.subset2);
    Matrix Xv1 = gather(X_unlab, val_local, model.split.subset1);
    Matrix Xv2 = gather(X_unlab, val_local, model.split.subset2);

    RmsProp opt;
    opt.learning_rate = cfg.learning_rate;

    TrainLog log;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_snapshot = snapshot_params(model);
    std::size_t epochs_without_improvement = 0;
    constexpr double kMinDelta = 1e-4;

    const std::size_t n_train = Xt1.rows;
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> cols1(Xt1.cols), cols2(Xt2.cols);
    std::iota(cols1.begin(), cols1.end(), 0);
    std::iota(cols2.begin(), cols2.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng erng(Rng::derive(cfg.seed, 0xe90c, epoch));
        erng.shuffle(order);

        double sum_total = 0.0, sum_c = 0.0, sum_r = 0.0;
        std::size_t batches = 0;
        // final partial batch is dropped during pretraining
        for (std::size_t start = 0; start + cfg.batch_size <= n_train; start += cfg.batch_size) {
            std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(start + cfg.batch_size));
            Matrix x1 = gather(Xt1, rows, cols1);
            Matrix x2 = gather(Xt2, rows, cols2);
            const std::size_t b = batches;
            LossReport r = run_batch(model, x1, x2,
                                     Rng::derive(cfg.seed, epoch, b, 1),
                                     Rng::derive(cfg.seed, epoch, b, 2),
                                     Rng::derive(cfg.seed ^ 0x5u, epoch, b, 1),
                                     Rng::derive(cfg.seed ^ 0x5u, epoch, b, 2),
                                     true, &opt);
            if (!std::isfinite(r.l_total))
                throw LoclError("non-finite loss at epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(b));
            sum_total += r.l_total;
            sum_c += r.l_contrastive;
            sum_r += r.l_reconstruction;
            ++batches;
        }
        if (batches == 0) throw LoclError("no full batch fits the pretraining set");

        const double val = validation_loss(model, Xv1, Xv2, cfg.seed);
        const auto t1 = std::chrono::steady_clock::now();

        EpochLog el;
        el.epoch = epoch;
        el.train_total = sum_total / static_cast<double>(batches);
        el.train_contrastive = sum_c / static_cast<double>(batches);
        el.train_reconstruction = sum_r / static_cast<double>(batches);
        el.validation_total = val;
        el.wall_seconds = std::chrono::duration<double>(t1 - t0).count();

        if (val < best_val - kMinDelta) {
            best_val = val;
            best_snapshot = snapshot_params(model);
            log.best_epoch = epoch;
            epochs_without_improvement = 0;
            el.improved = true;
        } else {
            ++epochs_without_improvement;
        }
        log.epochs.push_back(el);

        if (epochs_without_improvement >= cfg.patience) {
            log.early_stopped = true;
            break;
        }
    }

    restore_params(model, best_snapshot);
    log.best_validation = best_val;
    if (log_out) *log_out = log;
    return model;
}

EmbeddingMatrix embed_rows(TwinModel& model, const TabularDataset& d,
                           const std::vector<std::size_t>& rows) {
    if (model.split.subset1.empty()) throw LoclError("embed: model has no split");
    for (std::size_t f : model.ordering.permutation)
        if (f >= d.n_features())
            throw LoclError("embed: dataset feature count does not match the model's ordering");
    if (model.ordering.permutation.size() != d.n_features())
        throw LoclError("embed: dataset feature count does not match the model's ordering");

    Matrix x1 = gather(d.X, rows, model.split.subset1);
    Matrix x2 = gather(d.X, rows, model.split.subset2);
    Matrix z1 = model.branch1.embed(x1);
    Matrix z2 = model.branch2.embed(x2);

    EmbeddingMatrix out;
    out.row_ids = rows;
    out.Z = Matrix(rows.size(), z1.cols + z2.cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < z1.cols; ++c) out.Z.at(r, c) = z1.at(r, c);
        for (std::size_t c = 0; c < z2.cols; ++c) out.Z.at(r, z1.cols + c) = z2.at(r, c);
    }
    return out;
}

EmbeddingMatrix embed(TwinModel& model, const TabularDataset& d) {
    std::vector<std::size_t> rows(d.n_rows());
    std::iota(rows.begin(), rows.end(), 0);
    return embed_rows(model, d, rows);
}

namespace {

std::vector<std::size_t> parse_size_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoull(tok));
    return out;
}

}  // namespace

TrainConfig read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoclError("cannot read config file: " + path);
    TrainConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char c : line) if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
            if (blank) continue;
            throw LoclError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        auto strip = [](std::string s) {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
            return s;
        };
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (key == "batch_size") cfg.batch_size = std::stoull(value);
        else if (key == "latent_dim") cfg.latent_dim = std::stoull(value);
        else if (key == "alpha") cfg.alpha = std::stod(value);
        else if (key == "lambda") cfg.lambda = std::stod(value);
        else if (key == "mask_p") cfg.mask_p = std::stod(value);
        else if (key == "learning_rate") cfg.learning_rate = std::stod(value);
        else if (key == "max_epochs") cfg.max_epochs = std::stoull(value);
        else if (key == "patience") cfg.patience = std::stoull(value);
        else if (key == "kernel_size") cfg.kernel_size = std::stoull(value);
        else if (key == "channel_plan") cfg.channel_plan = parse_size_list(value);
        else if (key == "overlap_fraction") cfg.overlap_fraction = std::stod(value);
        else if (key == "ordering_variant") cfg.ordering_variant = ordering_variant_from_string(value);
        else if (key == "encoder_kind") cfg.encoder_kind = encoder_kind_from_string(value);
        else if (key == "corrupt_mode")
            cfg.corrupt_mode = value == "zero" ? CorruptMode::ZeroFill : CorruptMode::MarginalShuffle;
        else if (key == "seed") cfg.seed = std::stoull(value);
        else throw LoclError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

void write_config_file(const TrainConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw LoclError("cannot write config file: " + path);
    out << "batch_size = " << cfg.batch_size << "\n"
        << "latent_dim = " << cfg.latent_dim << "\n"
        << "alpha = " << cfg.alpha << "\n"
        << "lambda = " << cfg.lambda << "\n"
        << "mask_p = " << cfg.mask_p << "\n"
        << "learning_rate = " << cfg.learning_rate << "\n"
        << "max_epochs = " << cfg.max_epochs << "\n"
        << "patience = " << cfg.patience << "\n"
        << "kernel_size = " << cfg.kernel_size << "\n"
        << "channel_plan = ";
    for (std::size_t i = 0; i < cfg.channel_plan.size(); ++i)
        out << (i ? "," : "") << cfg.channel_plan[i];
    out << "\n"
        << "overlap_fraction = " << cfg.overlap_fraction << "\n"
        << "ordering_variant = " << to_string(cfg.ordering_variant) << "\n"
        << "encoder_kind = " << to_string(cfg.encoder_kind) << "\n"
        << "corrupt_mode = " << (cfg.corrupt_mode == CorruptMode::ZeroFill ? "zero" : "marginal") << "\n"
        << "seed = " << cfg.seed << "\n";
}

void write_train_log(const TrainLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw LoclError("cannot write training log: " + path);
    for (const auto& e : log.epochs) {
        json j{{"epoch", e.epoch},
               {"l_total", e.train_total},
               {"l_contrastive", e.train_contrastive},
               {"l_reconstruction", e.train_reconstruction},
               {"validation_total", e.validation_total},
               {"wall_seconds", e.wall_seconds},
               {"improved", e.improved}};
        out << j.dump() << "\n";
    }
    json tail{{"best_epoch", log.best_epoch},
              {"best_validation", log.best_validation},
              {"early_stopped", log.early_stopped}};
    out << tail.dump() << "\n";
}

}  // namespace locl
