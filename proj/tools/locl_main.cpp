#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "locl/artifacts.hpp"
#include "locl/evaluation.hpp"
#include "locl/pipeline.hpp"

using nlohmann::json;
using namespace locl;

namespace {

constexpr const char* kToolVersion = "locl 1.0.0";

int worker_count() {
    const char* env = std::getenv("LOCL_WORKERS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n > 0 ? n : 1;
}

void write_manifest(const std::string& command, const json& extra,
                    const std::vector<std::string>& artifacts, std::uint64_t seed,
                    const std::string& path) {
    json arts = json::array();
    for (const auto& a : artifacts)
        arts.push_back({{"path", a}, {"fingerprint", hex64(fingerprint_file(a))}});
    json doc{{"type", "run_manifest"},
             {"tool_version", kToolVersion},
             {"command", command},
             {"master_seed", seed},
             {"artifacts", arts}};
    doc.update(extra);
    std::ofstream out(path);
    if (!out) throw LoclError("cannot write run manifest: " + path);
    out << doc.dump(2) << "\n";
}

json config_json(const TrainConfig& c) {
    return json{{"batch_size", c.batch_size},    {"latent_dim", c.latent_dim},
                {"alpha", c.alpha},              {"lambda", c.lambda},
                {"mask_p", c.mask_p},            {"learning_rate", c.learning_rate},
                {"max_epochs", c.max_epochs},    {"patience", c.patience},
                {"kernel_size", c.kernel_size},  {"channel_plan", c.channel_plan},
                {"overlap_fraction", c.overlap_fraction},
                {"ordering_variant", to_string(c.ordering_variant)},
                {"encoder_kind", to_string(c.encoder_kind)},
                {"seed", c.seed}};
}

// Shared config flags; names mirror the TrainConfig fields.
struct ConfigArgs {
    std::string config_path;
    TrainConfig cfg;
    std::string ordering_variant = "mst";
    std::string encoder_kind = "conv";
    std::string corrupt_mode = "marginal";

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "config file (key = value lines)");
        app->add_option("--batch-size", cfg.batch_size);
        app->add_option("--latent-dim", cfg.latent_dim);
        app->add_option("--alpha", cfg.alpha);
        app->add_option("--lambda", cfg.lambda);
        app->add_option("--mask-p", cfg.mask_p);
        app->add_option("--learning-rate", cfg.learning_rate);
        app->add_option("--max-epochs", cfg.max_epochs);
        app->add_option("--patience", cfg.patience);
        app->add_option("--kernel-size", cfg.kernel_size);
        app->add_option("--channel-plan", cfg.channel_plan)->expected(3);
        app->add_option("--overlap-fraction", cfg.overlap_fraction);
        app->add_option("--ordering-variant", ordering_variant)
            ->check(CLI::IsMember({"mst", "random", "original", "interleaved"}));
        app->add_option("--encoder-kind", encoder_kind)->check(CLI::IsMember({"conv", "dense"}));
        app->add_option("--corrupt-mode", corrupt_mode)->check(CLI::IsMember({"marginal", "zero"}));
        app->add_option("--seed", cfg.seed);
    }

    TrainConfig resolve(CLI::App* app) {
        TrainConfig out = cfg;
        if (!config_path.empty()) {
            out = read_config_file(config_path);
            // explicit flags override file values
            auto take = [&](const char* flag, auto member) {
                if (app->count(flag)) member(out);
            };
            take("--batch-size", [&](TrainConfig& c) { c.batch_size = cfg.batch_size; });
            take("--latent-dim", [&](TrainConfig& c) { c.latent_dim = cfg.latent_dim; });
            take("--alpha", [&](TrainConfig& c) { c.alpha = cfg.alpha; });
            take("--lambda", [&](TrainConfig& c) { c.lambda = cfg.lambda; });
            take("--mask-p", [&](TrainConfig& c) { c.mask_p = cfg.mask_p; });
            take("--learning-rate", [&](TrainConfig& c) { c.learning_rate = cfg.learning_rate; });
            take("--max-epochs", [&](TrainConfig& c) { c.max_epochs = cfg.max_epochs; });
            take("--patience", [&](TrainConfig& c) { c.patience = cfg.patience; });
            take("--kernel-size", [&](TrainConfig& c) { c.kernel_size = cfg.kernel_size; });
            take("--channel-plan", [&](TrainConfig& c) { c.channel_plan = cfg.channel_plan; });
            take("--overlap-fraction",
                 [&](TrainConfig& c) { c.overlap_fraction = cfg.overlap_fraction; });
            take("--seed", [&](TrainConfig& c) { c.seed = cfg.seed; });
            if (app->count("--ordering-variant"))
                out.ordering_variant = ordering_variant_from_string(ordering_variant);
            if (app->count("--encoder-kind"))
                out.encoder_kind = encoder_kind_from_string(encoder_kind);
            if (app->count("--corrupt-mode"))
                out.corrupt_mode =
                    corrupt_mode == "zero" ? CorruptMode::ZeroFill : CorruptMode::MarginalShuffle;
        } else {
            out.ordering_variant = ordering_variant_from_string(ordering_variant);
            out.encoder_kind = encoder_kind_from_string(encoder_kind);
            out.corrupt_mode =
                corrupt_mode == "zero" ? CorruptMode::ZeroFill : CorruptMode::MarginalShuffle;
        }
        out.validate();
        return out;
    }
};

json ordering_json(const FeatureOrdering& o, const SplitPlan& split) {
    json edges = json::array();
    for (const auto& e : o.mst_edges)
        edges.push_back({{"i", e.i}, {"j", e.j}, {"weight", e.weight}});
    return json{{"type", "ordering"},
                {"variant", to_string(o.variant)},
                {"permutation", o.permutation},
                {"mst_edges", edges},
                {"split",
                 {{"subset1", split.subset1},
                  {"subset2", split.subset2},
                  {"overlap_fraction", split.overlap_fraction}}}};
}

void require_fingerprint_match(std::uint64_t expected, const std::string& dataset_path,
                               const std::string& consumer) {
    const std::uint64_t actual = fingerprint_file(dataset_path);
    if (actual != expected)
        throw LoclError(consumer + ": dataset fingerprint mismatch (artifact was built from " +
                        hex64(expected) + ", got " + hex64(actual) +
                        "); refusing to mix artifacts from different datasets");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LoCL: correlation-ordered twin convolutional autoencoders for tabular data"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    // ---- preprocess ----
    auto* p_pre = app.add_subcommand("preprocess", "CSV -> dataset artifact + JSON report");
    std::string pre_input, pre_label, pre_mode = "zscore", pre_out = "dataset.json";
    p_pre->add_option("--input", pre_input, "input CSV")->required();
    p_pre->add_option("--label", pre_label, "label column name")->required();
    p_pre->add_option("--mode", pre_mode)->check(CLI::IsMember({"zscore", "minmax"}));
    p_pre->add_option("--out", pre_out, "output dataset artifact path");

    // ---- order ----
    auto* p_ord = app.add_subcommand("order", "emit feature ordering and split as JSON");
    std::string ord_dataset, ord_out = "ordering.json";
    ConfigArgs ord_cfg;
    p_ord->add_option("--dataset", ord_dataset)->required();
    p_ord->add_option("--out", ord_out);
    ord_cfg.attach(p_ord);

    // ---- pretrain ----
    auto* p_pt = app.add_subcommand("pretrain", "pretrain twin autoencoders on one fold");
    std::string pt_dataset, pt_out = "model.locl", pt_log = "train_log.jsonl";
    int pt_fold = 0, pt_folds = 5;
    ConfigArgs pt_cfg;
    p_pt->add_option("--dataset", pt_dataset)->required();
    p_pt->add_option("--out", pt_out);
    p_pt->add_option("--log", pt_log);
    p_pt->add_option("--fold", pt_fold, "fold whose unlabeled rows to train on");
    p_pt->add_option("--folds", pt_folds, "total number of folds");
    pt_cfg.attach(p_pt);

    // ---- embed ----
    auto* p_em = app.add_subcommand("embed", "frozen-model embeddings for every row");
    std::string em_checkpoint, em_dataset, em_out = "embeddings.locl";
    p_em->add_option("--checkpoint", em_checkpoint)->required();
    p_em->add_option("--dataset", em_dataset)->required();
    p_em->add_option("--out", em_out);

    // ---- probe ----
    auto* p_pr = app.add_subcommand("probe", "linear probe with cross-validated accuracy");
    std::string pr_embeddings, pr_dataset, pr_out = "eval_report.json";
    int pr_folds = 5;
    double pr_reg = 1e-3;
    std::uint64_t pr_seed = 0;
    p_pr->add_option("--embeddings", pr_embeddings)->required();
    p_pr->add_option("--dataset", pr_dataset)->required();
    p_pr->add_option("--folds", pr_folds);
    p_pr->add_option("--reg", pr_reg);
    p_pr->add_option("--seed", pr_seed);
    p_pr->add_option("--out", pr_out);

    // ---- protocol ----
    auto* p_proto = app.add_subcommand(
        "protocol", "full per-fold pretrain + probe protocol, mean/std accuracy");
    std::string proto_dataset, proto_out = "eval_report.json";
    int proto_folds = 5;
    double proto_reg = 1e-3;
    ConfigArgs proto_cfg;
    p_proto->add_option("--dataset", proto_dataset)->required();
    p_proto->add_option("--folds", proto_folds);
    p_proto->add_option("--reg", proto_reg);
    p_proto->add_option("--out", proto_out);
    proto_cfg.attach(p_proto);

    // ---- ablate ----
    auto* p_ab = app.add_subcommand("ablate", "encoder-kind and ordering ablation grid");
    std::string ab_dataset, ab_out = "ablation.json";
    int ab_folds = 5;
    double ab_reg = 1e-3;
    ConfigArgs ab_cfg;
    p_ab->add_option("--dataset", ab_dataset)->required();
    p_ab->add_option("--folds", ab_folds);
    p_ab->add_option("--reg", ab_reg);
    p_ab->add_option("--out", ab_out);
    ab_cfg.attach(p_ab);

    // ---- report ----
    auto* p_rep = app.add_subcommand("report", "print text tables for reports in a run directory");
    std::vector<std::string> rep_files;
    p_rep->add_option("files", rep_files, "eval report / ablation JSON files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*p_pre) {
            RawTable table = load_csv(pre_input);
            PreprocessReport report;
            TabularDataset d = preprocess(
                table, pre_label, pre_mode == "zscore" ? NormMode::ZScore : NormMode::MinMax,
                &report);
            save_dataset(d, pre_out);
            save_preprocess_report(report, d, pre_out + ".report.json");
            write_manifest("preprocess",
                           {{"input", pre_input}, {"input_fingerprint", hex64(fingerprint_file(pre_input))}},
                           {pre_out, pre_out + ".report.json"}, 0, pre_out + ".manifest.json");
            std::cout << "dataset: " << d.n_rows() << " rows, " << d.n_features() << " features, "
                      << d.n_classes() << " classes -> " << pre_out << "\n";
            if (!report.dropped_columns.empty()) {
                std::cout << "dropped zero-variance columns:";
                for (const auto& c : report.dropped_columns) std::cout << " " << c;
                std::cout << "\n";
            }
        } else if (*p_ord) {
            TrainConfig cfg = ord_cfg.resolve(p_ord);
            TabularDataset d = load_dataset(ord_dataset);
            FeatureOrdering o = compute_ordering(d.X, cfg.ordering_variant, cfg.seed);
            SplitPlan split = split_features(o, cfg.overlap_fraction);
            std::ofstream out(ord_out);
            if (!out) throw LoclError("cannot write: " + ord_out);
            json doc = ordering_json(o, split);
            doc["dataset_fingerprint"] = hex64(fingerprint_file(ord_dataset));
            out << doc.dump(2) << "\n";
            out.close();
            write_manifest("order", {{"config", config_json(cfg)}}, {ord_out}, cfg.seed,
                           ord_out + ".manifest.json");
            std::cout << "ordering (" << to_string(cfg.ordering_variant) << ") -> " << ord_out << "\n";
        } else if (*p_pt) {
            TrainConfig cfg = pt_cfg.resolve(p_pt);
            TabularDataset d = load_dataset(pt_dataset);
            FoldPlan plan = make_folds(d, pt_folds, 0.9, cfg.seed);
            TrainConfig fold_cfg = cfg;
            fold_cfg.seed = Rng::derive(cfg.seed, 0xf07d, static_cast<std::uint64_t>(pt_fold));
            TrainLog log;
            TwinModel model = pretrain(d, plan.unlabeled_rows(pt_fold), fold_cfg, &log);
            model.dataset_fingerprint = fingerprint_file(pt_dataset);
            save_checkpoint(model, pt_out);
            write_train_log(log, pt_log);
            write_manifest("pretrain",
                           {{"config", config_json(cfg)}, {"fold", pt_fold}, {"folds", pt_folds}},
                           {pt_out, pt_log}, cfg.seed, pt_out + ".manifest.json");
            std::cout << "pretrained fold " << pt_fold << ": best epoch " << log.best_epoch
                      << ", validation loss " << log.best_validation << " -> " << pt_out << "\n";
        } else if (*p_em) {
            TwinModel model = load_checkpoint(em_checkpoint);
            require_fingerprint_match(model.dataset_fingerprint, em_dataset, "embed");
            TabularDataset d = load_dataset(em_dataset);
            EmbeddingMatrix Z = embed(model, d);
            save_embeddings(Z.Z, Z.row_ids, model.dataset_fingerprint, em_out);
            write_manifest("embed", {{"checkpoint", em_checkpoint}},
                           {em_out, em_out + ".rows.json"}, model.config.seed,
                           em_out + ".manifest.json");
            std::cout << "embeddings: " << Z.Z.rows << " x " << Z.Z.cols << " -> " << em_out << "\n";
        } else if (*p_pr) {
            std::uint64_t fp = 0;
            std::vector<std::size_t> row_ids;
            Matrix Z = load_embeddings(pr_embeddings, &row_ids, &fp);
            require_fingerprint_match(fp, pr_dataset, "probe");
            TabularDataset d = load_dataset(pr_dataset);
            if (d.labels.empty()) throw LoclError("probe requires a labeled dataset");
            FoldPlan plan = make_folds(d, pr_folds, 0.9, pr_seed);

            EvalReport report;
            report.variant_name = "probe";
            report.config_fingerprint = hex64(fp);
            for (int f = 0; f < plan.k; ++f) {
                auto gather_emb = [&](const std::vector<std::size_t>& rows, Matrix& M,
                                      std::vector<int>& y) {
                    M = Matrix(rows.size(), Z.cols);
                    for (std::size_t i = 0; i < rows.size(); ++i) {
                        for (std::size_t c = 0; c < Z.cols; ++c) M.at(i, c) = Z.at(rows[i], c);
                        y.push_back(d.labels[rows[i]]);
                    }
                };
                Matrix Ztr, Zte;
                std::vector<int> ytr, yte;
                gather_emb(plan.labeled_rows(f), Ztr, ytr);
                gather_emb(plan.test_rows(f), Zte, yte);
                ProbeModel probe = train_probe(Ztr, ytr, pr_reg);
                report.fold_accuracies.push_back(evaluate(probe, Zte, yte));
            }
            report.finalize();
            save_eval_report(report, pr_out);
            write_manifest("probe", {{"folds", pr_folds}, {"reg", pr_reg}}, {pr_out}, pr_seed,
                           pr_out + ".manifest.json");
            std::cout << eval_report_text({report});
        } else if (*p_proto) {
            TrainConfig cfg = proto_cfg.resolve(p_proto);
            TabularDataset d = load_dataset(proto_dataset);
            FoldPlan plan = make_folds(d, proto_folds, 0.9, cfg.seed);
            EvalReport report = run_protocol(d, plan, cfg, proto_reg, nullptr, worker_count());
            save_eval_report(report, proto_out);
            write_manifest("protocol", {{"config", config_json(cfg)}, {"folds", proto_folds}},
                           {proto_out}, cfg.seed, proto_out + ".manifest.json");
            std::cout << eval_report_text({report});
        } else if (*p_ab) {
            TrainConfig cfg = ab_cfg.resolve(p_ab);
            TabularDataset d = load_dataset(ab_dataset);
            FoldPlan plan = make_folds(d, ab_folds, 0.9, cfg.seed);
            auto cells = run_ablations(d, plan, cfg, ab_reg, worker_count());
            json doc{{"type", "ablation"}, {"cells", json::array()}};
            std::vector<EvalReport> reports;
            for (const auto& c : cells) {
                doc["cells"].push_back({{"name", c.name},
                                        {"mean", c.report.mean},
                                        {"std", c.report.stddev},
                                        {"fold_accuracies", c.report.fold_accuracies},
                                        {"config_fingerprint", c.report.config_fingerprint}});
                reports.push_back(c.report);
            }
            std::ofstream out(ab_out);
            if (!out) throw LoclError("cannot write: " + ab_out);
            out << doc.dump(2) << "\n";
            out.close();
            write_manifest("ablate", {{"config", config_json(cfg)}, {"folds", ab_folds}}, {ab_out},
                           cfg.seed, ab_out + ".manifest.json");
            std::cout << eval_report_text(reports);
        } else if (*p_rep) {
            std::vector<EvalReport> reports;
            for (const auto& f : rep_files) {
                std::ifstream in(f);
                if (!in) throw LoclError("cannot read: " + f);
                json doc = json::parse(in);
                if (doc.at("type") == "eval_report") {
                    reports.push_back(load_eval_report(f));
                } else if (doc.at("type") == "ablation") {
                    for (const auto& c : doc.at("cells")) {
                        EvalReport r;
                        r.variant_name = c.at("name");
                        r.fold_accuracies = c.at("fold_accuracies").get<std::vector<double>>();
                        r.mean = c.at("mean");
                        r.stddev = c.at("std");
                        reports.push_back(std::move(r));
                    }
                } else {
                    throw LoclError("unsupported report type in " + f);
                }
            }
            std::cout << eval_report_text(reports);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
