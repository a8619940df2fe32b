// Acceptance suite: runs each end-to-end criterion and prints one
// PASS/FAIL line per criterion. Exit status is non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "amdmil/error.hpp"
#include "amdmil/harness.hpp"
#include "oracles.hpp"

using namespace amdmil;
using namespace amdmil::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os.precision(digits);
    os << std::fixed << v;
    return os.str();
}

std::string sci(double v) {
    std::ostringstream os;
    os.precision(2);
    os << std::scientific << v;
    return os.str();
}

double row_sum_error(const Matrix& s) {
    double worst = 0.0;
    for (std::size_t i = 0; i < s.rows(); ++i) {
        double total = 0.0;
        for (double v : s.row(i)) {
            if (v < 0.0) return std::numeric_limits<double>::infinity();
            total += v;
        }
        worst = std::max(worst, std::abs(total - 1.0));
    }
    return worst;
}

Outcome gradient_suite() {
    const auto start = std::chrono::steady_clock::now();
    AttentionConfig cfg;
    cfg.feature_dim = 8;
    cfg.agent_count = 4;
    cfg.landmark_count = 4;
    std::mt19937_64 rng(2024);
    Matrix features = random_matrix(7, 8, rng);
    double worst = 0.0;
    std::string worst_name;
    for (auto a : {Aggregator::Dense, Aggregator::Nystrom, Aggregator::PoolingAgent, Aggregator::TrainableAgent,
                   Aggregator::Amd}) {
        const Model model = Model::create(a, cfg, 2, 99);
        for (const auto& row : gradient_report(model, features, 1)) {
            if (row.max_rel_error > worst) worst = row.max_rel_error, worst_name = std::string(to_string(a)) + "/" + row.name;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst <= 1e-4 && secs < 60.0,
            "max rel error " + sci(worst) + " (" + worst_name + "), " + fixed(secs, 1) + " s"};
}

Outcome oracle_equivalence() {
    double worst_nys = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        const std::size_t tokens = 2 + seed % 15;  // 2..16
        Matrix q = equal_norm_rows(tokens, 4, 6.0, rng);
        Matrix v = random_matrix(tokens, 4, rng);
        AttentionConfig cfg;
        cfg.feature_dim = 4;
        cfg.landmark_count = tokens;
        worst_nys = std::max(worst_nys, max_abs_diff(nystrom_attention(q, q, v, cfg), self_attention_dense(q, q, v)));
    }

    bool amd_exact = true;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        AttentionConfig cfg;
        cfg.feature_dim = 4;
        cfg.agent_count = 3;
        std::mt19937_64 rng(100 + seed);
        auto p = AggregatorParams::init(cfg, 2, rng);
        // Positive values and W_M = I with W_tau = 0 keep every entry of M
        // above the threshold.
        p.w_v.value = Matrix::identity(4);
        p.w_mask.value = Matrix::identity(4);
        p.w_tau.value.fill(0.0);
        p.w_denoise.value.fill(0.0);
        std::uniform_real_distribution<double> pos(0.05, 2.0);
        Matrix h(9, 4);
        for (double& x : h.data()) x = pos(rng);
        const auto qkv = qkv_project(h, p);
        amd_exact = amd_exact && amd_forward(h, p, cfg).o == agent_attention(qkv.q, qkv.k, qkv.v, p.agents.value);
    }
    return {worst_nys <= 1e-3 && amd_exact, "nystrom max |diff| " + sci(worst_nys) + ", amd exact " +
                                                (amd_exact ? "yes" : "no")};
}

Outcome stochasticity_containment() {
    double worst_row = 0.0;
    std::size_t hull_fail = 0;
    std::mt19937_64 rng(7);
    for (int c = 0; c < 100; ++c) {
        const std::size_t d = 1 + c % 3;
        const std::size_t tokens = 4 + c % 6;
        AttentionConfig cfg;
        cfg.feature_dim = d;
        cfg.agent_count = 1 + c % 3;
        cfg.landmark_count = 1 + c % 3;
        cfg.cnn_groups = 1;
        auto p = AggregatorParams::init(cfg, 2, rng);
        Matrix h = random_matrix(tokens, d, rng);
        const auto qkv = qkv_project(h, p);

        worst_row = std::max(worst_row, row_sum_error(dense_forward(qkv.q, qkv.k, qkv.v).scores));
        const auto nys = nystrom_forward(qkv.q, qkv.k, qkv.v, cfg.landmark_count, cfg.nystrom_iters);
        for (const Matrix* m : {&nys.f1, &nys.f2, &nys.f3}) worst_row = std::max(worst_row, row_sum_error(*m));

        // Pure agent attention and the full mask-denoise path.
        const auto plain = agent_forward(qkv.q, qkv.k, qkv.v, p.agents.value, p, AgentOptions{});
        const auto amd = agent_forward(qkv.q, qkv.k, qkv.v, p.agents.value, p,
                                       AgentOptions{true, true, ThresholdMode::Linear, 1});
        for (const Matrix* m : {&plain.s1, &plain.s2, &amd.s1, &amd.s2}) worst_row = std::max(worst_row, row_sum_error(*m));
        const auto abmil = abmil_forward(h, p);
        worst_row = std::max(worst_row, row_sum_error(abmil.weights));

        for (std::size_t r = 0; r < tokens; ++r) {
            if (!inside_convex_hull(qkv.v, plain.o.row(r))) ++hull_fail;
            if (!inside_convex_hull(amd.v_md, amd.o.row(r))) ++hull_fail;
        }
    }
    return {worst_row <= 1e-6 && hull_fail == 0,
            "max |row sum - 1| " + sci(worst_row) + ", hull violations " + std::to_string(hull_fail) + " over 100 cases"};
}

Outcome complexity() {
    const auto start = std::chrono::steady_clock::now();
    const auto small = measure_scaling(2048, 64, 8, 5, 11);
    const auto large = measure_scaling(4096, 64, 8, 5, 11);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double amd_ratio = large.amd_ms / small.amd_ms;
    const double dense_ratio = large.dense_ms / small.dense_ms;
    return {amd_ratio <= 2.6 && dense_ratio >= 3.4 && secs < 120.0,
            "amd ratio " + fixed(amd_ratio, 2) + ", dense ratio " + fixed(dense_ratio, 2) + ", " + fixed(secs, 1) + " s"};
}

struct LearningRun {
    RunRecord amd;
    RunRecord mean;
    double cpu_seconds = 0.0;
};

LearningRun learning_run() {
    const auto bags = generate_dataset(DatasetConfig{});
    const auto plan = split_folds(bags, 6, 7, true);
    TrainConfig cfg;  // defaults: 30 epochs, seed 7, AMD
    const std::clock_t c0 = std::clock();
    LearningRun run;
    run.amd = train(bags, plan, cfg);
    cfg.aggregator = Aggregator::Mean;
    run.mean = train(bags, plan, cfg);
    run.cpu_seconds = static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC;
    return run;
}

Outcome end_to_end(const LearningRun& run) {
    const double gap = run.amd.auc.mean - run.mean.auc.mean;
    return {run.amd.auc.mean >= 0.90 && gap >= 0.05 && run.cpu_seconds < 900.0,
            "AMD AUC " + fixed(run.amd.auc.mean) + " +/- " + fixed(run.amd.auc.std) + ", mean-pool AUC " +
                fixed(run.mean.auc.mean) + " +/- " + fixed(run.mean.auc.std) + ", gap " + fixed(gap) + ", " +
                fixed(run.cpu_seconds, 0) + " CPU-s"};
}

Outcome interpretability(const LearningRun& run) {
    std::size_t positive = 0, hits = 0;
    for (const auto& a : run.amd.attention) {
        if (a.label != 1 || !a.instance_labels) continue;
        double w = 0.0, b = 0.0;
        std::size_t nw = 0, nb = 0;
        for (std::size_t i = 0; i < a.scores.size(); ++i) {
            if ((*a.instance_labels)[i]) w += a.scores[i], ++nw;
            else b += a.scores[i], ++nb;
        }
        ++positive;
        if (nw > 0 && nb > 0 && w / static_cast<double>(nw) > b / static_cast<double>(nb)) ++hits;
    }
    const double frac = positive == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(positive);
    return {frac >= 0.80, std::to_string(hits) + "/" + std::to_string(positive) + " positive test bags (" +
                              fixed(100.0 * frac, 1) + "%)"};
}

Outcome ablation_machinery() {
    const auto bags = generate_dataset(DatasetConfig{});
    const auto plan = split_folds(bags, 6, 7, true);
    const auto rows = ablation_suite(bags, plan, TrainConfig{});
    const std::string csv = ablation_csv(rows);
    bool ok = rows.size() == 5;
    for (std::size_t i = 0; ok && i < rows.size(); ++i) {
        ok = rows[i].config.seed == rows[0].config.seed && rows[i].folds.size() == 6 &&
             rows[i].config.ablation_flags == ablation_rows()[i];
        for (std::size_t f = 0; ok && f < rows[i].folds.size(); ++f)
            ok = rows[i].folds[f].test_ids == rows[0].folds[f].test_ids;
    }
    const auto lines = std::count(csv.begin(), csv.end(), '\n');
    ok = ok && lines == 6 && csv.find("delta_auc") != std::string::npos;
    std::string aucs;
    for (const auto& r : rows) aucs += (aucs.empty() ? "" : " ") + fixed(r.auc.mean, 3);
    return {ok, "5 rows paired on seed and folds, AUC by row: " + aucs};
}

Outcome metrics_oracle() {
    std::mt19937_64 rng(31);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial) % 199;
        std::vector<std::size_t> y(n);
        std::vector<bool> pos(n);
        std::vector<double> s(n);
        std::bernoulli_distribution coin(0.5);
        std::uniform_int_distribution<int> grid(0, 12);
        for (std::size_t i = 0; i < n; ++i) y[i] = coin(rng), s[i] = grid(rng) / 12.0;
        y[0] = 1;
        y[1] = 0;
        for (std::size_t i = 0; i < n; ++i) pos[i] = y[i] == 1;
        if (metric_auc_ovr(y, s) != brute_force_auc(pos, s)) ++mismatches;
    }
    const double worked = metric_auc_ovr(std::vector<std::size_t>{1, 0, 1, 0}, std::vector<double>{0.9, 0.8, 0.7, 0.1});
    return {mismatches == 0 && worked == 0.75,
            std::to_string(mismatches) + " mismatches in 500 trials, worked example " + fixed(worked, 2)};
}

Outcome variable_length() {
    std::vector<Bag> bags;
    std::mt19937_64 rng(5);
    for (std::size_t n : {1u, 63u, 64u, 65u, 999u})
        for (std::uint32_t label : {0u, 1u}) {
            Bag b;
            b.id = "n" + std::to_string(n) + "_" + std::to_string(label);
            b.label = label;
            b.features = random_matrix(n, 64, rng);
            bags.push_back(std::move(b));
        }
    std::string detail;
    bool ok = true;
    for (auto a : {Aggregator::Amd, Aggregator::Nystrom}) {
        TrainConfig cfg;
        cfg.aggregator = a;
        cfg.epochs = 2;
        try {
            const auto out = train_transfer(bags, bags, cfg);
            for (const auto& att : out.record.attention) {
                const auto& bag = *std::find_if(bags.begin(), bags.end(), [&](const Bag& b) { return b.id == att.id; });
                ok = ok && att.scores.size() == bag.size();
            }
            detail += std::string(detail.empty() ? "" : ", ") + std::string(to_string(a)) + " ok";
        } catch (const Error& e) {
            ok = false;
            detail += std::string(detail.empty() ? "" : ", ") + std::string(to_string(a)) + " failed: " + e.what();
        }
    }
    return {ok, detail + " for N in {1,63,64,65,999}"};
}

std::vector<unsigned char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
    const DatasetConfig data;
    const fs::path a = fs::temp_directory_path() / "amdmil_accept_det_a";
    const fs::path b = fs::temp_directory_path() / "amdmil_accept_det_b";
    fs::remove_all(a);
    fs::remove_all(b);
    save_bags(generate_dataset(data), a, &data);
    save_bags(generate_dataset(data), b, &data);
    bool bytes_equal = true;
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        bytes_equal = bytes_equal && slurp(e.path()) == slurp(b / e.path().filename());
        ++files;
    }
    const auto bags = load_bags(a);
    fs::remove_all(a);
    fs::remove_all(b);

    TrainConfig cfg;
    cfg.epochs = 2;
    const auto plan = split_folds(bags, cfg.folds, cfg.seed, cfg.stratified);
    const auto r1 = train(bags, plan, cfg);
    const auto r2 = train(bags, plan, cfg);
    bool metrics_equal = r1.acc.mean == r2.acc.mean && r1.acc.std == r2.acc.std && r1.auc.mean == r2.auc.mean &&
                         r1.auc.std == r2.auc.std && r1.macro_f1.mean == r2.macro_f1.mean;
    for (std::size_t f = 0; f < r1.folds.size(); ++f)
        metrics_equal = metrics_equal && r1.folds[f].epoch_loss == r2.folds[f].epoch_loss && r1.folds[f].auc == r2.folds[f].auc;
    return {bytes_equal && files == data.num_bags + 1 && metrics_equal,
            std::to_string(files) + " files byte-identical: " + (bytes_equal ? "yes" : "no") +
                ", RunRecord metrics bit-identical: " + (metrics_equal ? "yes" : "no")};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("[%s] criterion %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
        std::fflush(stdout);
    };

    report(1, "gradient suite", gradient_suite);
    report(2, "oracle equivalence", oracle_equivalence);
    report(3, "stochasticity and containment", stochasticity_containment);
    report(4, "complexity", complexity);
    LearningRun run;
    bool trained = false;
    std::string train_error;
    try {
        run = learning_run();
        trained = true;
    } catch (const std::exception& e) {
        train_error = e.what();
    }
    auto needs_run = [&](auto fn) {
        return [&, fn]() -> Outcome {
            if (!trained) return {false, "training failed: " + train_error};
            return fn(run);
        };
    };
    report(5, "end-to-end learning", needs_run(end_to_end));
    report(6, "interpretability proxy", needs_run(interpretability));
    report(7, "ablation machinery", ablation_machinery);
    report(8, "metrics", metrics_oracle);
    report(9, "variable-length robustness", variable_length);
    report(10, "determinism", determinism);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
