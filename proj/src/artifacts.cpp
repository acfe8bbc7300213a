#include "locl/artifacts.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace locl {

using nlohmann::json;

void save_dataset(const TabularDataset& d, const std::string& path) {
    json cols = json::array();
    json stats = json::array();
    for (const auto& s : d.norm_stats) stats.push_back({s.a, s.b});
    json rows = json::array();
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < d.n_features(); ++c) row.push_back(d.X.at(r, c));
        rows.push_back(std::move(row));
    }
    json doc{{"type", "dataset"},
             {"mode", d.mode == NormMode::ZScore ? "zscore" : "minmax"},
             {"feature_names", d.feature_names},
             {"class_names", d.class_names},
             {"labels", d.labels},
             {"norm_stats", stats},
             {"X", rows}};
    std::ofstream out(path);
    if (!out) throw LoclError("cannot write dataset artifact: " + path);
    out << doc.dump() << "\n";
}

TabularDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoclError("cannot read dataset artifact: " + path);
    json doc = json::parse(in);
    if (doc.at("type") != "dataset") throw LoclError("not a dataset artifact: " + path);

    TabularDataset d;
    d.mode = doc.at("mode") == "zscore" ? NormMode::ZScore : NormMode::MinMax;
    d.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    d.class_names = doc.at("class_names").get<std::vector<std::string>>();
    d.labels = doc.at("labels").get<std::vector<int>>();
    for (const auto& s : doc.at("norm_stats"))
        d.norm_stats.push_back({s[0].get<double>(), s[1].get<double>()});

    const auto& rows = doc.at("X");
    d.X = Matrix(rows.size(), d.feature_names.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != d.feature_names.size())
            throw LoclError("dataset artifact row width mismatch at row " + std::to_string(r));
        for (std::size_t c = 0; c < d.feature_names.size(); ++c)
            d.X.at(r, c) = rows[r][c].get<double>();
    }
    return d;
}

void save_preprocess_report(const PreprocessReport& r, const TabularDataset& d,
                            const std::string& path) {
    json expansions = json::array();
    for (const auto& [name, cats] : r.one_hot_expansions)
        expansions.push_back({{"column", name}, {"categories", cats}});
    json stats = json::array();
    for (std::size_t i = 0; i < d.norm_stats.size(); ++i)
        stats.push_back({{"feature", d.feature_names[i]},
                         {"a", d.norm_stats[i].a},
                         {"b", d.norm_stats[i].b}});
    json doc{{"type", "preprocess_report"},
             {"mode", d.mode == NormMode::ZScore ? "zscore" : "minmax"},
             {"dropped_columns", r.dropped_columns},
             {"one_hot_expansions", expansions},
             {"norm_stats", stats},
             {"n_rows", d.n_rows()},
             {"n_features", d.n_features()},
             {"n_classes", d.n_classes()}};
    std::ofstream out(path);
    if (!out) throw LoclError("cannot write preprocess report: " + path);
    out << doc.dump(2) << "\n";
}

void save_eval_report(const EvalReport& r, const std::string& path) {
    json doc{{"type", "eval_report"},
             {"variant", r.variant_name},
             {"fold_accuracies", r.fold_accuracies},
             {"mean", r.mean},
             {"std", r.stddev},
             {"config_fingerprint", r.config_fingerprint}};
    std::ofstream out(path);
    if (!out) throw LoclError("cannot write eval report: " + path);
    out << doc.dump(2) << "\n";
}

EvalReport load_eval_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoclError("cannot read eval report: " + path);
    json doc = json::parse(in);
    if (doc.at("type") != "eval_report") throw LoclError("not an eval report: " + path);
    EvalReport r;
    r.variant_name = doc.at("variant");
    r.fold_accuracies = doc.at("fold_accuracies").get<std::vector<double>>();
    r.mean = doc.at("mean");
    r.stddev = doc.at("std");
    r.config_fingerprint = doc.at("config_fingerprint");
    return r;
}

std::string eval_report_text(const std::vector<EvalReport>& reports) {
    std::size_t width = 14;  // at least the header width
    for (const auto& r : reports) width = std::max(width, r.variant_name.size());
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(width) + 2) << "Model Variants"
       << "Accuracy   Std\n";
    for (const auto& r : reports) {
        os << std::left << std::setw(static_cast<int>(width) + 2) << r.variant_name << std::fixed
           << std::setprecision(4) << r.mean << "     " << r.stddev << "\n";
    }
    return os.str();
}

}  // namespace locl
