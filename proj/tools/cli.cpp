#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "amdmil/error.hpp"
#include "amdmil/harness.hpp"

namespace amdmil::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Holds every TrainConfig flag; values are applied only when the flag was
/// given, so they win over a config file.
struct TrainFlags {
    std::string config_path;
    TrainConfig v;
    std::string aggregator;
    std::string threshold_mode;
    bool agent = true, trainable = true, mask = true, denoise = true;
    std::vector<CLI::Option*> flag_opts;
    CLI::Option *lr, *weight_decay, *beta1, *beta2, *eps, *epochs, *seed, *agg, *n_agents, *landmarks, *nystrom_iters,
        *tmode, *cnn_groups, *raw_product, *patience, *folds, *stratified, *jobs;
    CLI::Option *o_agent, *o_trainable, *o_mask, *o_denoise;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "JSON config file; flags override its values");
        lr = app->add_option("--lr", v.lr, "Adam learning rate");
        weight_decay = app->add_option("--weight_decay", v.weight_decay, "L2 weight decay");
        beta1 = app->add_option("--beta1", v.beta1);
        beta2 = app->add_option("--beta2", v.beta2);
        eps = app->add_option("--eps", v.eps);
        epochs = app->add_option("--epochs", v.epochs);
        seed = app->add_option("--seed", v.seed);
        agg = app->add_option("--aggregator", aggregator,
                              "mean|max|abmil|dense|nystrom|pooling-agent|trainable-agent|agent-mask|amd");
        o_agent = app->add_option("--agent", agent, "ablation flag (0/1)");
        o_trainable = app->add_option("--trainable", trainable, "ablation flag (0/1)");
        o_mask = app->add_option("--mask", mask, "ablation flag (0/1)");
        o_denoise = app->add_option("--denoise", denoise, "ablation flag (0/1)");
        n_agents = app->add_option("--n_agents", v.n_agents);
        landmarks = app->add_option("--landmarks", v.landmarks);
        nystrom_iters = app->add_option("--nystrom_iters", v.nystrom_iters);
        tmode = app->add_option("--threshold_mode", threshold_mode, "linear|mean|cnn");
        cnn_groups = app->add_option("--cnn_groups", v.cnn_groups);
        raw_product = app->add_option("--raw_product", v.raw_product, "score with the un-normalised product (0/1)");
        patience = app->add_option("--early_stop_patience", v.early_stop_patience, "0 disables early stopping");
        folds = app->add_option("--folds", v.folds);
        stratified = app->add_option("--stratified", v.stratified);
        jobs = app->add_option("--jobs", v.jobs, "folds trained in parallel");
    }

    TrainConfig resolve() const {
        TrainConfig c;
        if (!config_path.empty()) c = config_from_json(read_text(config_path), c);
        auto given = [](const CLI::Option* o) { return o->count() > 0; };
        if (given(lr)) c.lr = v.lr;
        if (given(weight_decay)) c.weight_decay = v.weight_decay;
        if (given(beta1)) c.beta1 = v.beta1;
        if (given(beta2)) c.beta2 = v.beta2;
        if (given(eps)) c.eps = v.eps;
        if (given(epochs)) c.epochs = v.epochs;
        if (given(seed)) c.seed = v.seed;
        if (given(agg)) {
            c.aggregator = parse_aggregator(aggregator);
            c.ablation_flags.reset();
        }
        if (given(o_agent) || given(o_trainable) || given(o_mask) || given(o_denoise)) {
            AblationFlags f = c.ablation_flags.value_or(flags_for(c.aggregator).value_or(AblationFlags{}));
            if (given(o_agent)) f.agent = agent;
            if (given(o_trainable)) f.trainable = trainable;
            if (given(o_mask)) f.mask = mask;
            if (given(o_denoise)) f.denoise = denoise;
            c.ablation_flags = f;
        }
        if (given(n_agents)) c.n_agents = v.n_agents;
        if (given(landmarks)) c.landmarks = v.landmarks;
        if (given(nystrom_iters)) c.nystrom_iters = v.nystrom_iters;
        if (given(tmode)) c.threshold_mode = parse_threshold_mode(threshold_mode);
        if (given(cnn_groups)) c.cnn_groups = v.cnn_groups;
        if (given(raw_product)) c.raw_product = v.raw_product;
        if (given(patience)) c.early_stop_patience = v.early_stop_patience;
        if (given(folds)) c.folds = v.folds;
        if (given(stratified)) c.stratified = v.stratified;
        if (given(jobs)) c.jobs = v.jobs;
        c.validate();
        return c;
    }
};

Model load_model(const fs::path& checkpoint, const TrainConfig& cfg, std::size_t dim, std::size_t classes) {
    Model m = Model::create(cfg.resolved_aggregator(), cfg.attention_config(dim), classes, cfg.seed);
    m.load_tensors(load_checkpoint(checkpoint));
    return m;
}

std::size_t classes_of(const std::vector<Bag>& bags) {
    std::uint32_t mx = 1;
    for (const Bag& b : bags) mx = std::max(mx, b.label);
    return mx + 1;
}


}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"amdmil: agent-attention MIL aggregators with mask-denoise refinement"};
    app.require_subcommand(1);

    // generate
    DatasetConfig gen;
    std::string gen_out;
    auto* generate = app.add_subcommand("generate", "Write a synthetic planted-instance dataset");
    generate->add_option("--out", gen_out, "output directory")->required();
    generate->add_option("--seed", gen.seed);
    generate->add_option("--num_bags", gen.num_bags);
    generate->add_option("--dim", gen.dim);
    generate->add_option("--min_instances", gen.min_instances);
    generate->add_option("--max_instances", gen.max_instances);
    generate->add_option("--witness_rate", gen.witness_rate);
    generate->add_option("--classes", gen.classes);
    generate->add_option("--separation", gen.separation);
    generate->add_option("--noise_std", gen.noise_std);

    // train / ablate / sweep share the TrainConfig flags
    std::string data_dir, out_dir, test_data, checkpoint, bag_id, counts_text = "4,8,16,32";
    TrainFlags train_flags, ablate_flags, sweep_flags, eval_flags, attn_flags;

    auto* train_cmd = app.add_subcommand("train", "Cross-validated training");
    train_cmd->add_option("--data", data_dir, "dataset directory")->required();
    train_cmd->add_option("--out", out_dir, "output directory")->required();
    train_cmd->add_option("--test_data", test_data, "train on --data, test on this dataset (no folds)");
    train_flags.attach(train_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    eval_cmd->add_option("--data", data_dir)->required();
    eval_cmd->add_option("--checkpoint", checkpoint)->required();
    eval_cmd->add_option("--out", out_dir)->required();
    eval_flags.attach(eval_cmd);

    auto* ablate_cmd = app.add_subcommand("ablate", "Five-row component ablation with paired seeds");
    ablate_cmd->add_option("--data", data_dir)->required();
    ablate_cmd->add_option("--out", out_dir)->required();
    ablate_flags.attach(ablate_cmd);

    auto* sweep_cmd = app.add_subcommand("sweep", "Agent-count sweep");
    sweep_cmd->add_option("--data", data_dir)->required();
    sweep_cmd->add_option("--out", out_dir)->required();
    sweep_cmd->add_option("--counts", counts_text, "comma-separated agent counts");
    sweep_flags.attach(sweep_cmd);

    auto* attn_cmd = app.add_subcommand("attention", "Export per-instance attention CSV");
    attn_cmd->add_option("--data", data_dir)->required();
    attn_cmd->add_option("--checkpoint", checkpoint)->required();
    attn_cmd->add_option("--out", out_dir)->required();
    attn_cmd->add_option("--bag", bag_id, "bag id (default: every bag)");
    attn_flags.attach(attn_cmd);

    std::string gc_variant = "amd";
    std::size_t gc_n = 7, gc_d = 8, gc_agents = 4, gc_m = 4;
    std::uint64_t gc_seed = 1;
    double gc_h = 1e-5, gc_tol = 1e-4;
    std::string gc_threshold = "linear";
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of analytic gradients");
    gc_cmd->set_help_flag("--help", "Print this help message and exit");  // frees -h for the step size
    gc_cmd->add_option("--variant", gc_variant, "aggregator name or 'all'");
    gc_cmd->add_option("--N", gc_n, "instances");
    gc_cmd->add_option("--D", gc_d, "feature dimension");
    gc_cmd->add_option("--n", gc_agents, "agents");
    gc_cmd->add_option("--m", gc_m, "Nystrom landmarks");
    gc_cmd->add_option("--seed", gc_seed);
    gc_cmd->add_option("--h", gc_h, "central-difference step");
    gc_cmd->add_option("--tol", gc_tol, "max relative error allowed");
    gc_cmd->add_option("--threshold_mode", gc_threshold);
    gc_cmd->add_option("--out", out_dir, "optional output directory");

    std::string sizes_text = "512,1024,2048,4096";
    std::size_t bench_d = 64, bench_agents = 8, bench_repeats = 5;
    auto* bench_cmd = app.add_subcommand("bench", "Dense vs AMD forward time as N grows");
    bench_cmd->add_option("--sizes", sizes_text, "comma-separated instance counts");
    bench_cmd->add_option("--D", bench_d);
    bench_cmd->add_option("--n", bench_agents);
    bench_cmd->add_option("--repeats", bench_repeats);
    bench_cmd->add_option("--out", out_dir, "optional output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << app.help();
        return kExitConfig;
    }

    auto parse_counts = [](const std::string& text) {
        std::vector<std::size_t> values;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                values.push_back(std::stoul(item));
            } catch (const std::exception&) {
                throw ConfigError("bad count '" + item + "'");
            }
        }
        if (values.empty()) throw ConfigError("empty count list");
        return values;
    };

    try {
        if (generate->parsed()) {
            const auto bags = generate_dataset(gen);
            save_bags(bags, gen_out, &gen);
            out << "wrote " << bags.size() << " bags to " << gen_out << "\n";
        } else if (train_cmd->parsed()) {
            const TrainConfig cfg = train_flags.resolve();
            const auto bags = load_bags(data_dir);
            fs::create_directories(out_dir);
            write_text(fs::path(out_dir) / "config.json", config_to_json(cfg) + "\n");
            TrainOutcome result;
            if (!test_data.empty()) {
                result = train_transfer(bags, load_bags(test_data), cfg);
            } else {
                result = train_with_models(bags, split_folds(bags, cfg.folds, cfg.seed, cfg.stratified), cfg);
            }
            write_text(fs::path(out_dir) / "run_record.json", run_record_to_json(result.record) + "\n");
            write_text(fs::path(out_dir) / "loss_curve.csv", loss_curve_csv(result.record));
            for (std::size_t f = 0; f < result.models.size(); ++f)
                save_checkpoint(result.models[f].to_tensors(), fs::path(out_dir) / ("fold_" + std::to_string(f) + ".amdc"));
            const auto& r = result.record;
            out << to_string(cfg.resolved_aggregator()) << ": ACC " << r.acc.mean << " +/- " << r.acc.std << ", F1 "
                << r.macro_f1.mean << " +/- " << r.macro_f1.std << ", AUC " << r.auc.mean << " +/- " << r.auc.std
                << "\n";
        } else if (eval_cmd->parsed()) {
            const TrainConfig cfg = eval_flags.resolve();
            const auto bags = load_bags(data_dir);
            const Model model = load_model(checkpoint, cfg, bags.front().dim(), classes_of(bags));
            std::vector<std::size_t> all(bags.size());
            std::iota(all.begin(), all.end(), 0);
            const EvalResult ev = evaluate(model, bags, all);
            fs::create_directories(out_dir);
            write_text(fs::path(out_dir) / "config.json", config_to_json(cfg) + "\n");
            json j{{"acc", ev.acc}, {"macro_f1", ev.macro_f1}, {"auc", std::isnan(ev.auc) ? json(nullptr) : json(ev.auc)}};
            json per_bag = json::array();
            for (std::size_t i = 0; i < bags.size(); ++i)
                per_bag.push_back({{"id", bags[i].id}, {"label", bags[i].label}, {"probabilities", ev.probabilities[i]}});
            j["bags"] = per_bag;
            write_text(fs::path(out_dir) / "eval.json", j.dump(2) + "\n");
            out << "ACC " << ev.acc << ", F1 " << ev.macro_f1 << ", AUC " << ev.auc << "\n";
        } else if (ablate_cmd->parsed()) {
            const TrainConfig cfg = ablate_flags.resolve();
            const auto bags = load_bags(data_dir);
            const auto plan = split_folds(bags, cfg.folds, cfg.seed, cfg.stratified);
            fs::create_directories(out_dir);
            write_text(fs::path(out_dir) / "config.json", config_to_json(cfg) + "\n");
            const auto rows = ablation_suite(bags, plan, cfg);
            const std::string csv = ablation_csv(rows);
            write_text(fs::path(out_dir) / "ablation.csv", csv);
            json records = json::array();
            for (const auto& r : rows) records.push_back(json::parse(run_record_to_json(r)));
            write_text(fs::path(out_dir) / "ablation_records.json", records.dump(2) + "\n");
            out << csv;
        } else if (sweep_cmd->parsed()) {
            const TrainConfig cfg = sweep_flags.resolve();
            const auto counts = parse_counts(counts_text);
            const auto bags = load_bags(data_dir);
            const auto plan = split_folds(bags, cfg.folds, cfg.seed, cfg.stratified);
            fs::create_directories(out_dir);
            write_text(fs::path(out_dir) / "config.json", config_to_json(cfg) + "\n");
            const auto points = agent_count_sweep(bags, plan, cfg, counts);
            const std::string csv = sweep_csv(points);
            write_text(fs::path(out_dir) / "sweep.csv", csv);
            out << csv;
        } else if (attn_cmd->parsed()) {
            const TrainConfig cfg = attn_flags.resolve();
            const auto bags = load_bags(data_dir);
            const Model model = load_model(checkpoint, cfg, bags.front().dim(), classes_of(bags));
            fs::create_directories(out_dir);
            write_text(fs::path(out_dir) / "config.json", config_to_json(cfg) + "\n");
            std::size_t written = 0;
            for (const Bag& bag : bags) {
                if (!bag_id.empty() && bag.id != bag_id) continue;
                export_attention(model, bag, fs::path(out_dir) / ("attention_" + bag.id + ".csv"));
                ++written;
            }
            if (written == 0) throw ConfigError("no bag with id '" + bag_id + "'");
            out << "wrote " << written << " attention file(s) to " << out_dir << "\n";
        } else if (gc_cmd->parsed()) {
            std::vector<Aggregator> variants;
            if (gc_variant == "all") {
                variants = all_aggregators();
            } else {
                variants.push_back(parse_aggregator(gc_variant));
            }
            AttentionConfig ac;
            ac.feature_dim = gc_d;
            ac.agent_count = gc_agents;
            ac.landmark_count = gc_m;
            ac.threshold_mode = parse_threshold_mode(gc_threshold);
            ac.cnn_groups = gc_d % 4 == 0 ? 4 : 1;
            ac.validate();
            if (gc_n == 0) throw ConfigError("--N must be >= 1");
            std::mt19937_64 rng(gc_seed);
            std::normal_distribution<double> noise(0.0, 1.0);
            Matrix features(gc_n, gc_d);
            for (double& x : features.data()) x = noise(rng);

            bool ok = true;
            json report = json::array();
            out << "variant,param,max_rel_error,max_abs_grad\n";
            for (Aggregator a : variants) {
                const Model model = Model::create(a, ac, 2, gc_seed + 1);
                for (const auto& row : gradient_report(model, features, 1, gc_h)) {
                    out << to_string(a) << ',' << row.name << ',' << row.max_rel_error << ',' << row.max_abs_grad << "\n";
                    ok = ok && row.max_rel_error <= gc_tol;
                    report.push_back({{"variant", std::string(to_string(a))},
                                      {"param", row.name},
                                      {"max_rel_error", row.max_rel_error},
                                      {"max_abs_grad", row.max_abs_grad}});
                }
            }
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                json cfg{{"variant", gc_variant}, {"N", gc_n}, {"D", gc_d}, {"n", gc_agents}, {"m", gc_m},
                         {"seed", gc_seed}, {"h", gc_h}, {"tol", gc_tol}, {"threshold_mode", gc_threshold}};
                write_text(fs::path(out_dir) / "config.json", cfg.dump(2) + "\n");
                write_text(fs::path(out_dir) / "gradcheck.json", report.dump(2) + "\n");
            }
            out << (ok ? "PASS" : "FAIL") << ": tolerance " << gc_tol << "\n";
            return ok ? kExitOk : kExitNumeric;
        } else if (bench_cmd->parsed()) {
            std::vector<ScalingRow> rows;
            for (std::size_t n : parse_counts(sizes_text)) rows.push_back(measure_scaling(n, bench_d, bench_agents, bench_repeats));
            const std::string csv = scaling_csv(rows);
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                json cfg{{"sizes", sizes_text}, {"D", bench_d}, {"n", bench_agents}, {"repeats", bench_repeats}};
                write_text(fs::path(out_dir) / "config.json", cfg.dump(2) + "\n");
                write_text(fs::path(out_dir) / "bench.csv", csv);
            }
            out << csv;
        }
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.push_back("amdmil");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace amdmil::cli
