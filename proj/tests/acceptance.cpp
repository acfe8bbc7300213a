// Acceptance gate: one pass/fail line per criterion, nonzero exit if any
// gated criterion fails. Criteria 5-7 need the real datasets under data/
// (see scripts/fetch_datasets.sh) and fail with an explicit message when the
// files are absent.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "locl/artifacts.hpp"
#include "locl/evaluation.hpp"
#include "locl/losses.hpp"
#include "locl/model.hpp"
#include "locl/ordering.hpp"
#include "locl/pipeline.hpp"
#include "test_support.hpp"

using namespace locl;
using namespace locl::testsupport;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    std::cout << "criterion " << criterion << ": " << (ok ? "PASS" : "FAIL");
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << "\n" << std::flush;
    if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int worker_count() {
    if (const char* w = std::getenv("LOCL_WORKERS")) {
        const int n = std::atoi(w);
        if (n > 0) return n;
    }
    return 1;
}

std::string data_path(const char* name) {
    const char* root = std::getenv("LOCL_DATA_DIR");
    return (std::filesystem::path(root ? root : "data") / name).string();
}

// ---- criterion 1: MST against Prufer brute force --------------------------

void criterion_1() {
    const auto t0 = Clock::now();
    bool ok = true;
    std::string detail;
    for (int t = 0; t < 100 && ok; ++t) {
        const std::size_t m = 3 + static_cast<std::size_t>(t % 5);
        Matrix M = random_symmetric_corr(m, 1000 + static_cast<std::uint64_t>(t));
        Matrix absM(m, m);
        for (std::size_t i = 0; i < M.data.size(); ++i) absM.data[i] = std::fabs(M.data[i]);
        CorrelationMatrix c{M};
        double got = 0.0;
        for (const auto& e : build_mst(c)) got += e.weight;
        const double want = prufer_max_tree_weight(absM);
        if (std::fabs(got - want) > 1e-12) {
            ok = false;
            detail = "case " + std::to_string(t) + ": mst weight " + std::to_string(got) +
                     " vs brute force " + std::to_string(want);
        }
    }
    const double secs = seconds_since(t0);
    if (ok && secs >= 10.0) {
        ok = false;
        detail = "too slow: " + std::to_string(secs) + "s";
    }
    if (ok) detail = "100 matrices, " + std::to_string(secs) + "s";
    report(1, ok, detail);
}

// ---- criterion 2: finite-difference gradient suite ------------------------

bool layer_gradient_check(Layer& layer, const std::vector<std::size_t>& in_shape,
                          std::uint64_t seed, double tol, std::string& detail,
                          const std::string& name) {
    randomize_params(layer, seed);
    Tensor in;
    in.shape = in_shape;
    std::size_t total = 1;
    for (auto s : in_shape) total *= s;
    Rng rng(seed ^ 0xabcd);
    in.values.resize(total);
    for (auto& v : in.values) v = rng.next_double() * 2.0 - 1.0;
    if (name == "maxpool1d")  // distinct values so argmax is FD-stable
        for (std::size_t i = 0; i < total; ++i) in.values[i] = static_cast<double>((i * 37) % 97) / 10.0;
    in.grad.assign(total, 0.0);

    // random linear probe of the output makes the check scalar-valued
    std::vector<double> probe;
    auto loss = [&]() {
        Tensor out = layer.forward(in);
        if (probe.empty()) {
            probe.resize(out.values.size());
            Rng prng(seed ^ 0x99);
            for (auto& v : probe) v = prng.next_double() - 0.5;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < out.values.size(); ++i) s += probe[i] * out.values[i];
        return s;
    };

    loss();  // fix the probe
    layer.zero_grad();
    Tensor out = layer.forward(in);
    Tensor upstream;
    upstream.shape = out.shape;
    upstream.values = probe;
    Tensor gx = layer.backward(upstream);

    for (std::size_t i = 0; i < total; ++i) {
        const double num = central_diff(loss, &in.values[i]);
        if (rel_err(num, gx.values[i]) >= tol && std::fabs(num - gx.values[i]) >= 1e-9) {
            detail = name + " input grad " + std::to_string(i);
            return false;
        }
    }
    for (auto& p : layer.params()) {
        for (std::size_t i = 0; i < p.w->size(); ++i) {
            const double num = central_diff(loss, &(*p.w)[i]);
            if (rel_err(num, (*p.g)[i]) >= tol && std::fabs(num - (*p.g)[i]) >= 1e-9) {
                detail = name + " param " + p.name + "[" + std::to_string(i) + "]";
                return false;
            }
        }
    }
    return true;
}

bool end_to_end_gradient_check(std::string& detail) {
    TrainConfig cfg;
    cfg.latent_dim = 3;
    cfg.channel_plan = {2, 3, 4};
    Branch b1 = make_branch(5, cfg);
    Branch b2 = make_branch(4, cfg);
    // random nonzero biases keep the padded tail off the LeakyReLU kink,
    // where central differences are invalid
    randomize_params(b1.encoder, 11);
    randomize_params(b1.decoder, 12);
    randomize_params(b2.encoder, 13);
    randomize_params(b2.decoder, 14);

    Rng rng(15);
    Matrix x1(4, 5), x2(4, 4);
    for (auto& v : x1.data) v = rng.next_double() * 2.0 - 1.0;
    for (auto& v : x2.data) v = rng.next_double() * 2.0 - 1.0;
    Matrix t1(4, b1.padded_width), t2(4, b2.padded_width);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 5; ++c) t1.at(r, c) = x1.at(r, c);
        for (std::size_t c = 0; c < 4; ++c) t2.at(r, c) = x2.at(r, c);
    }

    auto loss = [&]() {
        Matrix z1, z2, xh1, xh2;
        b1.forward(x1, z1, xh1);
        b2.forward(x2, z2, xh2);
        return combined_loss(z1, z2, xh1, t1, xh2, t2, 5, 4, 1.0, 0.005).report.l_total;
    };

    Matrix z1, z2, xh1, xh2;
    b1.forward(x1, z1, xh1);
    b2.forward(x2, z2, xh2);
    CombinedLoss l = combined_loss(z1, z2, xh1, t1, xh2, t2, 5, 4, 1.0, 0.005);
    b1.encoder.zero_grad();
    b1.decoder.zero_grad();
    b2.encoder.zero_grad();
    b2.decoder.zero_grad();
    b1.backward(l.grad_z1, l.grad_xhat1);
    b2.backward(l.grad_z2, l.grad_xhat2);

    Rng pick(16);
    for (Branch* b : {&b1, &b2}) {
        for (auto& p : b->params()) {
            for (int t = 0; t < 8; ++t) {
                const std::size_t i = pick.next_below(p.w->size());
                const double num = central_diff(loss, &(*p.w)[i]);
                // absolute guard: near-zero gradients are FD-roundoff limited
                if (rel_err(num, (*p.g)[i]) >= 1e-5 && std::fabs(num - (*p.g)[i]) >= 1e-8) {
                    detail = "end-to-end " + p.name + "[" + std::to_string(i) + "]";
                    return false;
                }
            }
        }
    }
    return true;
}

void criterion_2() {
    const auto t0 = Clock::now();
    bool ok = true;
    std::string detail;

    {
        Conv1d conv(2, 3, 3);
        ok = ok && layer_gradient_check(conv, {2, 2, 7}, 21, 1e-6, detail, "conv1d");
    }
    if (ok) {
        Dense dense(6, 4);
        ok = layer_gradient_check(dense, {2, 6}, 22, 1e-6, detail, "dense");
    }
    if (ok) {
        MaxPool1d pool(2);
        ok = layer_gradient_check(pool, {2, 2, 6}, 23, 1e-6, detail, "maxpool1d");
    }
    if (ok) {
        Upsample1d up(2);
        ok = layer_gradient_check(up, {2, 2, 4}, 24, 1e-6, detail, "upsample1d");
    }
    if (ok) {
        LeakyRelu act(0.01);
        ok = layer_gradient_check(act, {3, 5}, 25, 1e-6, detail, "leakyrelu");
    }
    if (ok) {
        // batchnorm is a free function, checked directly through a probe
        Rng rng(26);
        Matrix z(5, 3);
        for (auto& v : z.data) v = rng.next_double() * 2.0 - 1.0;
        std::vector<double> probe(z.data.size());
        for (auto& v : probe) v = rng.next_double() - 0.5;
        auto loss = [&]() {
            BatchNormCache cache;
            Matrix out = batchnorm_batch(z, cache);
            double s = 0.0;
            for (std::size_t i = 0; i < out.data.size(); ++i) s += probe[i] * out.data[i];
            return s;
        };
        BatchNormCache cache;
        batchnorm_batch(z, cache);
        Matrix up(5, 3);
        up.data = probe;
        Matrix g = batchnorm_backward(cache, up);
        for (std::size_t i = 0; i < z.data.size() && ok; ++i)
            if (rel_err(central_diff(loss, &z.data[i]), g.data[i]) >= 1e-6) {
                ok = false;
                detail = "batchnorm input grad " + std::to_string(i);
            }
    }
    if (ok) ok = end_to_end_gradient_check(detail);

    const double secs = seconds_since(t0);
    if (ok && secs >= 60.0) {
        ok = false;
        detail = "too slow: " + std::to_string(secs) + "s";
    }
    if (ok) detail = std::to_string(secs) + "s";
    report(2, ok, detail);
}

// ---- criterion 3: loss fixtures -------------------------------------------

void criterion_3() {
    bool ok = true;
    std::string detail;

    Matrix I(4, 4);
    for (std::size_t i = 0; i < 4; ++i) I.at(i, i) = 1.0;
    if (barlow_twins_loss(I, 0.005) != 0.0) {
        ok = false;
        detail = "contrastive loss nonzero at identity";
    }

    if (ok) {
        Rng rng(31);
        Matrix x(3, 5);
        for (auto& v : x.data) v = rng.next_double();
        if (reconstruction_loss(x, x, x, x, 5, 5) != 0.0) {
            ok = false;
            detail = "reconstruction loss nonzero at perfect reconstruction";
        }
    }

    if (ok) {
        // d=2 hand fixture: columns (1,1,-1,-1) and (1,-1,1,-1) are zero-mean,
        // unit-variance, orthogonal; both branches identical. With the 1e-5
        // normalization epsilon the diagonal is exactly 1/(1+1e-5).
        Matrix z(4, 2);
        const double a[4] = {1, 1, -1, -1};
        const double b[4] = {1, -1, 1, -1};
        for (std::size_t r = 0; r < 4; ++r) {
            z.at(r, 0) = a[r];
            z.at(r, 1) = b[r];
        }
        const Matrix C = cross_correlation(z, z).C;
        const double want_diag = 1.0 / (1.0 + 1e-5);
        if (std::fabs(C.at(0, 0) - want_diag) > 1e-15 ||
            std::fabs(C.at(1, 1) - want_diag) > 1e-15 ||
            C.at(0, 1) != 0.0 || C.at(1, 0) != 0.0) {
            ok = false;
            detail = "d=2 cross-correlation fixture mismatch";
        }
    }
    report(3, ok, detail);
}

// ---- criterion 4: corruption statistics -----------------------------------

void criterion_4() {
    bool ok = true;
    std::string detail;

    MaskBatch mask = sample_mask(1000, 1000, 0.3, 42);
    std::size_t ones = 0;
    for (std::size_t r = 0; r < 1000; ++r)
        for (std::size_t c = 0; c < 1000; ++c) ones += mask.at(r, c);
    const double rate = static_cast<double>(ones) / 1e6;
    if (rate < 0.295 || rate > 0.305) {
        ok = false;
        detail = "empirical rate " + std::to_string(rate);
    }

    if (ok) {
        Rng rng(43);
        Matrix x(20, 7);
        for (auto& v : x.data) v = rng.next_double();
        MaskBatch zero = sample_mask(20, 7, 0.0, 44);
        Matrix out = corrupt(x, zero, CorruptMode::MarginalShuffle, 45);
        if (out.data != x.data) {
            ok = false;
            detail = "p=0 corruption altered the input";
        }
    }
    if (ok) detail = "rate " + std::to_string(rate);
    report(4, ok, detail);
}

// ---- criteria 5-7: real-dataset runs --------------------------------------

struct LoadedDataset {
    TabularDataset d;
    bool ok = false;
    std::string error;
};

LoadedDataset load_named(const char* file, const std::string& label) {
    LoadedDataset out;
    const std::string path = data_path(file);
    if (!std::filesystem::exists(path)) {
        out.error = path + " missing; run scripts/fetch_datasets.sh on a networked machine";
        return out;
    }
    try {
        RawTable t = load_csv(path);
        out.d = preprocess(t, label, NormMode::ZScore);
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = path + ": " + e.what();
    }
    return out;
}

void criterion_5() {
    struct Case {
        const char* file;
        const char* label;
        double floor;
    };
    const Case cases[] = {
        {"diabetic_retinopathy.csv", "Class", 0.60},
        {"wall_following.csv", "Class", 0.70},
    };
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
        LoadedDataset ld = load_named(c.file, c.label);
        if (!ld.ok) {
            ok = false;
            detail = ld.error;
            break;
        }
        const auto t0 = Clock::now();
        TrainConfig cfg;  // defaults
        FoldPlan plan = make_folds(ld.d, 5, 0.9, cfg.seed);
        EvalReport r = run_protocol(ld.d, plan, cfg, 1e-3, nullptr, worker_count());
        const double secs = seconds_since(t0);
        std::cout << "  [5] " << c.file << ": mean " << r.mean << " +/- " << r.stddev
                  << " in " << secs << "s\n";
        if (r.mean < c.floor) {
            ok = false;
            detail = std::string(c.file) + " mean " + std::to_string(r.mean) + " < " +
                     std::to_string(c.floor);
            break;
        }
        if (secs >= 900.0) {
            ok = false;
            detail = std::string(c.file) + " too slow: " + std::to_string(secs) + "s";
            break;
        }
    }
    report(5, ok, detail);
}

void criterion_6() {
    const char* files[] = {"diabetic_retinopathy.csv", "wall_following.csv"};
    bool ok = true;
    std::string detail;
    const std::uint64_t seeds[] = {0, 1, 2};
    int mst_wins = 0;
    double mst_sum = 0.0, rnd_sum = 0.0;
    for (std::uint64_t seed : seeds) {
        double mst_mean = 0.0, rnd_mean = 0.0;
        for (const char* file : files) {
            LoadedDataset ld = load_named(file, "Class");
            if (!ld.ok) {
                report(6, false, ld.error);
                return;
            }
            TrainConfig cfg;
            cfg.seed = seed;
            FoldPlan plan = make_folds(ld.d, 5, 0.9, seed);
            EvalReport mst = run_protocol(ld.d, plan, cfg, 1e-3, nullptr, worker_count());
            TrainConfig rcfg = cfg;
            rcfg.ordering_variant = OrderingVariant::Random;
            EvalReport rnd = run_protocol(ld.d, plan, rcfg, 1e-3, nullptr, worker_count());
            mst_mean += mst.mean / 2.0;
            rnd_mean += rnd.mean / 2.0;
            std::cout << "  [6] seed " << seed << " " << file << ": mst " << mst.mean
                      << " random " << rnd.mean << "\n";
        }
        if (mst_mean > rnd_mean) ++mst_wins;
        mst_sum += mst_mean / 3.0;
        rnd_sum += rnd_mean / 3.0;
    }
    if (mst_sum < rnd_sum - 0.01) {
        ok = false;
        detail = "mst mean " + std::to_string(mst_sum) + " vs random " + std::to_string(rnd_sum);
    } else if (mst_wins < 2) {
        ok = false;
        detail = "mst favored in only " + std::to_string(mst_wins) + "/3 seeds";
    } else {
        detail = "mst " + std::to_string(mst_sum) + " vs random " + std::to_string(rnd_sum) +
                 ", favored " + std::to_string(mst_wins) + "/3";
    }
    report(6, ok, detail);
}

void criterion_7() {
    LoadedDataset ld = load_named("diabetic_retinopathy.csv", "Class");
    if (!ld.ok) {
        report(7, false, ld.error);
        return;
    }
    TrainConfig cfg;
    FoldPlan plan = make_folds(ld.d, 5, 0.9, cfg.seed);
    EvalReport a = run_protocol(ld.d, plan, cfg, 1e-3, nullptr, worker_count());
    EvalReport b = run_protocol(ld.d, plan, cfg, 1e-3, nullptr, worker_count());
    const bool ok = a.fold_accuracies == b.fold_accuracies;
    report(7, ok, ok ? "per-fold accuracies bit-identical across reruns"
                     : "reruns diverged");
}

}  // namespace

int main() {
    std::cout << std::boolalpha;
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    std::cout << "criterion 8: INFO (large benchmarks are not gated; "
                 "see scripts/run_large_benchmarks.sh)\n";
    if (g_failures > 0) {
        std::cout << g_failures << " gated criterion(s) failed\n";
        return 1;
    }
    std::cout << "all gated criteria passed\n";
    return 0;
}
