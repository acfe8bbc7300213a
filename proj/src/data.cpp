#include "locl/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace locl {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t fingerprint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoclError("cannot open file for fingerprint: " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
        if (!in) break;
    }
    return h;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool parse_number(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const char* b = t.data();
    const char* e = b + t.size();
    auto res = std::from_chars(b, e, out);
    return res.ec == std::errc() && res.ptr == e;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

}  // namespace

RawTable parse_csv_text(const std::string& text, const SchemaHint& hint) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw LoclError("empty table: no header row");
    std::vector<std::string> names = split_line(line);
    for (auto& n : names) n = trim(n);
    for (std::size_t i = 0; i < names.size(); ++i)
        for (std::size_t j = i + 1; j < names.size(); ++j)
            if (names[i] == names[j]) throw LoclError("duplicate column name: " + names[i]);

    std::vector<std::vector<std::string>> cells(names.size());
    std::size_t rows = 0;
    std::size_t raw_index = 0;
    while (std::getline(in, line)) {
        ++raw_index;
        if (trim(line).empty()) continue;
        std::vector<std::string> row = split_line(line);
        if (row.size() != names.size())
            throw LoclError("ragged row at index " + std::to_string(raw_index - 1));
        for (std::size_t c = 0; c < row.size(); ++c) cells[c].push_back(trim(row[c]));
        ++rows;
    }
    if (rows == 0) throw LoclError("empty table: no data rows");

    RawTable table;
    table.row_count = rows;
    for (std::size_t c = 0; c < names.size(); ++c) {
        RawColumn col;
        col.name = names[c];
        bool numeric = true;
        auto it = hint.overrides.find(col.name);
        if (it != hint.overrides.end()) {
            numeric = it->second == ColumnType::Numeric;
        } else {
            for (const auto& cell : cells[c]) {
                double v;
                if (!cell.empty() && !parse_number(cell, v)) { numeric = false; break; }
            }
        }
        if (numeric) {
            col.type = ColumnType::Numeric;
            col.numeric.reserve(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                double v;
                if (!parse_number(cells[c][r], v))
                    throw LoclError("missing or non-numeric value in numeric column '" + col.name +
                                    "' at row " + std::to_string(r));
                col.numeric.push_back(v);
            }
        } else {
            col.type = ColumnType::Categorical;
            col.text = std::move(cells[c]);
        }
        table.columns.push_back(std::move(col));
    }
    return table;
}

RawTable load_csv(const std::string& path, const SchemaHint& hint) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoclError("cannot read file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv_text(buf.str(), hint);
}

namespace {

struct ExpandedColumn {
    std::string name;
    std::vector<double> values;
    bool one_hot = false;
};

// One-hot expansion in category first-appearance order.
std::vector<ExpandedColumn> expand_column(const RawColumn& col, std::size_t rows,
                                          PreprocessReport* report) {
    std::vector<ExpandedColumn> out;
    if (col.type == ColumnType::Numeric) {
        out.push_back({col.name, col.numeric, false});
        return out;
    }
    std::vector<std::string> categories;
    for (const auto& v : col.text)
        if (std::find(categories.begin(), categories.end(), v) == categories.end())
            categories.push_back(v);
    if (report) report->one_hot_expansions.emplace_back(col.name, categories);
    for (const auto& cat : categories) {
        ExpandedColumn ec;
        ec.name = col.name + "=" + cat;
        ec.one_hot = true;
        ec.values.resize(rows);
        for (std::size_t r = 0; r < rows; ++r) ec.values[r] = (col.text[r] == cat) ? 1.0 : 0.0;
        out.push_back(std::move(ec));
    }
    return out;
}

TabularDataset build_dataset(const RawTable& table, const RawColumn* label_col,
                             NormMode mode, PreprocessReport* report) {
    const std::size_t rows = table.row_count;
    std::vector<ExpandedColumn> expanded;
    for (const auto& col : table.columns) {
        if (label_col && col.name == label_col->name) continue;
        auto ex = expand_column(col, rows, report);
        for (auto& e : ex) expanded.push_back(std::move(e));
    }

    TabularDataset d;
    d.mode = mode;
    std::vector<const ExpandedColumn*> kept;
    for (const auto& e : expanded) {
        double mn = e.values[0], mx = e.values[0], sum = 0.0;
        for (double v : e.values) { mn = std::min(mn, v); mx = std::max(mx, v); sum += v; }
        const double mean = sum / static_cast<double>(rows);
        double ss = 0.0;
        for (double v : e.values) ss += (v - mean) * (v - mean);
        const double var = ss / static_cast<double>(rows);
        if (var == 0.0) {
            if (report) report->dropped_columns.push_back(e.name);
            continue;
        }
        kept.push_back(&e);
        NormStat s;
        if (e.one_hot) {
            s.a = 0.0; s.b = 1.0;
        } else if (mode == NormMode::ZScore) {
            s.a = mean; s.b = std::sqrt(var);
        } else {
            s.a = mn; s.b = mx - mn;
        }
        d.norm_stats.push_back(s);
    }
    if (kept.empty()) throw LoclError("all feature columns dropped (zero variance)");

    d.X = Matrix(rows, kept.size());
    for (std::size_t c = 0; c < kept.size(); ++c) {
        d.feature_names.push_back(kept[c]->name);
        const NormStat& s = d.norm_stats[c];
        for (std::size_t r = 0; r < rows; ++r) {
            double v = kept[c]->values[r];
            d.X.at(r, c) = kept[c]->one_hot ? v : (v - s.a) / s.b;
        }
    }

    if (label_col) {
        std::vector<std::string> values;
        if (label_col->type == ColumnType::Categorical) {
            values = label_col->text;
        } else {
            for (double v : label_col->numeric) {
                if (v != std::floor(v))
                    throw LoclError("label column '" + label_col->name + "' has non-integer value");
                std::ostringstream os;
                os << static_cast<long long>(v);
                values.push_back(os.str());
            }
        }
        for (const auto& v : values) {
            auto it = std::find(d.class_names.begin(), d.class_names.end(), v);
            int id;
            if (it == d.class_names.end()) {
                id = static_cast<int>(d.class_names.size());
                d.class_names.push_back(v);
            } else {
                id = static_cast<int>(it - d.class_names.begin());
            }
            d.labels.push_back(id);
        }
        if (d.class_names.size() < 2)
            throw LoclError("label column '" + label_col->name + "' has a single distinct value");
    }
    return d;
}

}  // namespace

TabularDataset preprocess(const RawTable& table, const std::string& label_column,
                          NormMode mode, PreprocessReport* report) {
    const RawColumn* label_col = nullptr;
    for (const auto& c : table.columns)
        if (c.name == label_column) label_col = &c;
    if (!label_col) throw LoclError("label column not found: " + label_column);
    return build_dataset(table, label_col, mode, report);
}

TabularDataset preprocess_unlabeled(const RawTable& table, NormMode mode,
                                    PreprocessReport* report) {
    return build_dataset(table, nullptr, mode, report);
}

double denormalize(const NormStat& s, NormMode mode, double value) {
    if (mode == NormMode::ZScore) return value * s.b + s.a;
    return value * s.b + s.a;  // minmax stores a=min, b=range
}

std::vector<std::size_t> FoldPlan::test_rows(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < fold_assignments.size(); ++r)
        if (fold_assignments[r] == fold) out.push_back(r);
    return out;
}

std::vector<std::size_t> FoldPlan::train_rows(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < fold_assignments.size(); ++r)
        if (fold_assignments[r] != fold) out.push_back(r);
    return out;
}

std::vector<std::size_t> FoldPlan::unlabeled_rows(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < fold_assignments.size(); ++r)
        if (fold_assignments[r] != fold && unlabeled_mask[fold][r]) out.push_back(r);
    return out;
}

std::vector<std::size_t> FoldPlan::labeled_rows(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < fold_assignments.size(); ++r)
        if (fold_assignments[r] != fold && !unlabeled_mask[fold][r]) out.push_back(r);
    return out;
}

FoldPlan make_folds(const TabularDataset& d, int k, double unlabeled_fraction,
                    std::uint64_t seed) {
    if (k < 2) throw LoclError("make_folds requires k >= 2");
    if (d.labels.size() != d.n_rows()) throw LoclError("make_folds requires a labeled dataset");
    const std::size_t n = d.n_rows();

    std::vector<std::vector<std::size_t>> by_class(d.n_classes());
    for (std::size_t r = 0; r < n; ++r) by_class[d.labels[r]].push_back(r);
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (by_class[c].size() < static_cast<std::size_t>(k))
            throw LoclError("class '" + d.class_names[c] + "' has fewer than k instances");

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.fold_assignments.assign(n, 0);

    // stratified round-robin deal with rotating start per class
    int offset = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto rows = by_class[c];
        Rng rng(Rng::derive(seed, 0xf01d, c));
        rng.shuffle(rows);
        for (std::size_t i = 0; i < rows.size(); ++i)
            plan.fold_assignments[rows[i]] = static_cast<int>((i + offset) % k);
        offset = static_cast<int>((offset + rows.size()) % k);
    }

    plan.unlabeled_mask.assign(k, std::vector<std::uint8_t>(n, 0));
    for (int f = 0; f < k; ++f) {
        auto train = plan.train_rows(f);
        Rng rng(Rng::derive(seed, 0x01ab, static_cast<std::uint64_t>(f)));
        rng.shuffle(train);
        const std::size_t n_unlabeled = static_cast<std::size_t>(
            std::ceil(unlabeled_fraction * static_cast<double>(train.size())));
        for (std::size_t i = 0; i < n_unlabeled && i < train.size(); ++i)
            plan.unlabeled_mask[f][train[i]] = 1;
    }
    return plan;
}

}  // namespace locl
