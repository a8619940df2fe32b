#include "amdmil/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "amdmil/error.hpp"
#include "amdmil/gradcheck.hpp"

namespace amdmil {

using nlohmann::json;

void AblationFlags::validate() const {
    if (trainable && !agent) throw ConfigError("illegal ablation flags: trainable requires agent");
    if (mask && !trainable) throw ConfigError("illegal ablation flags: mask requires trainable");
    if (denoise && !mask) throw ConfigError("illegal ablation flags: denoise requires mask");
}

Aggregator aggregator_for(const AblationFlags& flags) {
    flags.validate();
    if (!flags.agent) return Aggregator::Nystrom;
    if (!flags.trainable) return Aggregator::PoolingAgent;
    if (!flags.mask) return Aggregator::TrainableAgent;
    if (!flags.denoise) return Aggregator::AgentMask;
    return Aggregator::Amd;
}

std::optional<AblationFlags> flags_for(Aggregator a) {
    switch (a) {
        case Aggregator::Nystrom: return AblationFlags{false, false, false, false};
        case Aggregator::PoolingAgent: return AblationFlags{true, false, false, false};
        case Aggregator::TrainableAgent: return AblationFlags{true, true, false, false};
        case Aggregator::AgentMask: return AblationFlags{true, true, true, false};
        case Aggregator::Amd: return AblationFlags{true, true, true, true};
        default: return std::nullopt;
    }
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    if (ablation_flags) ablation_flags->validate();
    if (n_agents == 0) throw ConfigError("n_agents must be >= 1");
    if (landmarks == 0) throw ConfigError("landmarks must be >= 1");
    if (nystrom_iters == 0) throw ConfigError("nystrom_iters must be >= 1");
    if (folds == 0) throw ConfigError("folds must be >= 1");
    if (jobs == 0) throw ConfigError("jobs must be >= 1");
}

Aggregator TrainConfig::resolved_aggregator() const {
    return ablation_flags ? aggregator_for(*ablation_flags) : aggregator;
}

AttentionConfig TrainConfig::attention_config(std::size_t feature_dim) const {
    AttentionConfig a;
    a.feature_dim = feature_dim;
    a.agent_count = n_agents;
    a.landmark_count = landmarks;
    a.nystrom_iters = nystrom_iters;
    a.threshold_mode = threshold_mode;
    a.cnn_groups = cnn_groups;
    a.raw_product = raw_product;
    a.validate();
    return a;
}

AdamConfig TrainConfig::adam() const { return {lr, beta1, beta2, eps, weight_decay}; }

EvalResult evaluate(const Model& model, const std::vector<Bag>& bags, const std::vector<std::size_t>& indices) {
    EvalResult r;
    for (std::size_t i : indices) {
        const auto out = pipeline_forward(bags[i], model);
        r.y_true.push_back(bags[i].label);
        const auto best = std::max_element(out.probabilities.begin(), out.probabilities.end());
        r.y_pred.push_back(static_cast<std::size_t>(best - out.probabilities.begin()));
        r.probabilities.push_back(out.probabilities);
    }
    if (indices.empty()) return r;
    r.acc = metric_acc(r.y_true, r.y_pred);
    r.macro_f1 = metric_macro_f1(r.y_true, r.y_pred, model.classes);
    try {
        r.auc = metric_auc_ovr(r.y_true, r.probabilities);
    } catch (const ConfigError&) {
        r.auc = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

namespace {

std::size_t class_count(const std::vector<Bag>& bags) {
    std::uint32_t mx = 1;
    for (const Bag& b : bags) mx = std::max(mx, b.label);
    return static_cast<std::size_t>(mx) + 1;
}

std::size_t feature_dim(const std::vector<Bag>& bags) {
    if (bags.empty()) throw ConfigError("dataset is empty");
    const std::size_t d = bags.front().dim();
    for (const Bag& b : bags)
        if (b.dim() != d) throw ShapeError("bag " + b.id + " has width " + std::to_string(b.dim()) + ", expected " + std::to_string(d));
    return d;
}

std::mt19937_64 stream(std::uint64_t seed, std::size_t fold, std::uint32_t purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(fold), purpose};
    return std::mt19937_64(seq);
}

struct FoldOutput {
    FoldResult result;
    Model model;
    std::vector<BagAttention> attention;
};

FoldOutput run_fold(const std::vector<Bag>& train_bags, const std::vector<std::size_t>& train_idx,
                    const std::vector<Bag>& test_bags, const std::vector<std::size_t>& test_idx,
                    const TrainConfig& cfg, std::size_t fold, std::size_t classes, std::size_t dim) {
    const auto start = std::chrono::steady_clock::now();
    FoldOutput out;
    out.result.fold = fold;
    for (std::size_t i : train_idx) out.result.train_ids.push_back(train_bags[i].id);
    for (std::size_t i : test_idx) out.result.test_ids.push_back(test_bags[i].id);

    auto init_rng = stream(cfg.seed, fold, 1);
    out.model = Model::create(cfg.resolved_aggregator(), cfg.attention_config(dim), classes, init_rng());
    Model& model = out.model;
    const AdamConfig adam = cfg.adam();

    std::vector<std::size_t> fit_idx;
    std::vector<std::size_t> val_idx;
    for (std::size_t p = 0; p < train_idx.size(); ++p) {
        if (cfg.early_stop_patience > 0 && p % 5 == 4) {
            val_idx.push_back(train_idx[p]);
        } else {
            fit_idx.push_back(train_idx[p]);
        }
    }

    auto order_rng = stream(cfg.seed, fold, 2);
    double best_val = -1.0;
    NamedTensors best_params;
    std::size_t stale = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(fit_idx.begin(), fit_idx.end(), order_rng);
        double total = 0.0;
        for (std::size_t i : fit_idx) {
            const Bag& bag = train_bags[i];
            const auto fwd = pipeline_forward(bag, model);
            const double loss = pipeline_backward(fwd, bag.features, model, bag.label);
            if (!std::isfinite(loss)) {
                throw NumericError("non-finite loss in fold " + std::to_string(fold) + ", epoch " +
                                   std::to_string(epoch) + ", bag " + bag.id);
            }
            for (auto& [name, p] : model.trainable()) {
                if (!p->grad.all_finite()) {
                    throw NumericError("non-finite gradient for " + name + " in fold " + std::to_string(fold) +
                                       ", epoch " + std::to_string(epoch) + ", bag " + bag.id);
                }
                adam_step(*p, adam);
            }
            total += loss;
        }
        out.result.epoch_loss.push_back(fit_idx.empty() ? 0.0 : total / static_cast<double>(fit_idx.size()));
        out.result.epochs_run = epoch + 1;

        if (cfg.early_stop_patience > 0 && !val_idx.empty()) {
            const double val_auc = evaluate(model, train_bags, val_idx).auc;
            if (std::isnan(val_auc) || val_auc > best_val) {
                best_val = std::isnan(val_auc) ? best_val : val_auc;
                best_params = model.to_tensors();
                stale = 0;
            } else if (++stale >= cfg.early_stop_patience) {
                break;
            }
        }
    }
    if (!best_params.empty()) {
        for (auto& [name, p] : model.trainable()) {
            auto it = std::find_if(best_params.begin(), best_params.end(), [&](const auto& t) { return t.first == name; });
            p->value = it->second;
        }
    }

    const EvalResult eval = evaluate(model, test_bags, test_idx);
    out.result.acc = eval.acc;
    out.result.macro_f1 = eval.macro_f1;
    out.result.auc = eval.auc;
    for (std::size_t i : test_idx) {
        const Bag& bag = test_bags[i];
        out.attention.push_back({bag.id, fold, bag.label, pipeline_forward(bag, model).attention, bag.instance_labels});
    }
    out.result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

void summarise(RunRecord& rec) {
    std::vector<double> acc, f1, auc;
    for (const auto& f : rec.folds) {
        acc.push_back(f.acc);
        f1.push_back(f.macro_f1);
        auc.push_back(f.auc);
    }
    rec.acc = mean_std(acc);
    rec.macro_f1 = mean_std(f1);
    rec.auc = mean_std(auc);
}

}  // namespace

TrainOutcome train_with_models(const std::vector<Bag>& bags, const FoldPlan& plan, const TrainConfig& cfg) {
    cfg.validate();
    if (plan.fold_of.size() != bags.size()) throw ConfigError("fold plan does not match the dataset");
    const auto start = std::chrono::steady_clock::now();
    const std::size_t dim = feature_dim(bags);
    const std::size_t classes = class_count(bags);

    std::vector<FoldOutput> outputs(plan.k);
    auto work = [&](std::size_t f) {
        return run_fold(bags, plan.train_indices(f), bags, plan.test_indices(f), cfg, f, classes, dim);
    };
    if (cfg.jobs <= 1) {
        for (std::size_t f = 0; f < plan.k; ++f) outputs[f] = work(f);
    } else {
        for (std::size_t base = 0; base < plan.k; base += cfg.jobs) {
            std::vector<std::future<FoldOutput>> pending;
            for (std::size_t f = base; f < std::min(plan.k, base + cfg.jobs); ++f)
                pending.push_back(std::async(std::launch::async, work, f));
            for (std::size_t i = 0; i < pending.size(); ++i) outputs[base + i] = pending[i].get();
        }
    }

    TrainOutcome outcome;
    RunRecord& rec = outcome.record;
    rec.config = cfg;
    rec.feature_dim = dim;
    rec.classes = classes;
    for (auto& o : outputs) {
        rec.folds.push_back(std::move(o.result));
        for (auto& a : o.attention) rec.attention.push_back(std::move(a));
        outcome.models.push_back(std::move(o.model));
    }
    summarise(rec);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return outcome;
}

RunRecord train(const std::vector<Bag>& bags, const FoldPlan& plan, const TrainConfig& cfg) {
    return train_with_models(bags, plan, cfg).record;
}

TrainOutcome train_transfer(const std::vector<Bag>& train_bags, const std::vector<Bag>& test_bags,
                            const TrainConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const std::size_t dim = feature_dim(train_bags);
    if (feature_dim(test_bags) != dim) throw ShapeError("train and test bags differ in feature width");
    const std::size_t classes = std::max(class_count(train_bags), class_count(test_bags));
    std::vector<std::size_t> train_idx(train_bags.size()), test_idx(test_bags.size());
    std::iota(train_idx.begin(), train_idx.end(), 0);
    std::iota(test_idx.begin(), test_idx.end(), 0);

    auto o = run_fold(train_bags, train_idx, test_bags, test_idx, cfg, 0, classes, dim);
    TrainOutcome outcome;
    outcome.record.config = cfg;
    outcome.record.feature_dim = dim;
    outcome.record.classes = classes;
    outcome.record.folds.push_back(std::move(o.result));
    outcome.record.attention = std::move(o.attention);
    outcome.models.push_back(std::move(o.model));
    summarise(outcome.record);
    outcome.record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return outcome;
}

std::vector<AblationFlags> ablation_rows() {
    return {{false, false, false, false},
            {true, false, false, false},
            {true, true, false, false},
            {true, true, true, false},
            {true, true, true, true}};
}

std::vector<RunRecord> ablation_suite(const std::vector<Bag>& bags, const FoldPlan& plan, const TrainConfig& base) {
    std::vector<RunRecord> rows;
    for (const auto& flags : ablation_rows()) {
        TrainConfig cfg = base;
        cfg.ablation_flags = flags;
        rows.push_back(train(bags, plan, cfg));
    }
    return rows;
}

std::vector<SweepPoint> agent_count_sweep(const std::vector<Bag>& bags, const FoldPlan& plan, const TrainConfig& cfg,
                                          const std::vector<std::size_t>& counts) {
    std::vector<SweepPoint> points;
    for (std::size_t n : counts) {
        if (n == 0) throw ConfigError("agent counts must be positive");
        TrainConfig c = cfg;
        c.n_agents = n;
        points.push_back({n, train(bags, plan, c)});
    }
    return points;
}

std::vector<ParamGradError> gradient_report(const Model& model, const Matrix& features, std::size_t label,
                                            double h) {
    Model analytic = model;
    analytic.zero_grad();
    pipeline_backward(pipeline_forward(features, analytic), features, analytic, label);

    std::vector<ParamGradError> report;
    for (const auto& [name, p] : analytic.trainable()) {
        const std::string key = name;
        auto loss_fn = [&](const Matrix& value) {
            Model probe = model;
            probe.param(key).value = value;
            return cross_entropy(pipeline_forward(features, probe).logits, label);
        };
        const Matrix numeric = finite_diff_grad(loss_fn, *p, h);
        report.push_back({name, max_relative_error(p->grad, numeric), max_abs(p->grad)});
    }
    return report;
}

ScalingRow measure_scaling(std::size_t instances, std::size_t dim, std::size_t agents, std::size_t repeats,
                           std::uint64_t seed) {
    if (repeats == 0) throw ConfigError("measure_scaling: repeats must be >= 1");
    AttentionConfig cfg;
    cfg.feature_dim = dim;
    cfg.agent_count = agents;
    cfg.cnn_groups = 1;
    std::mt19937_64 rng(seed);
    const auto params = AggregatorParams::init(cfg, 2, rng);
    std::normal_distribution<double> noise(0.0, 1.0);
    Matrix features(instances, dim);
    for (double& x : features.data()) x = noise(rng);
    const Matrix h = prepend_class_token(features, params.class_token);

    auto time_ms = [&](auto&& fn) {
        std::vector<double> samples;
        double sink = 0.0;
        for (std::size_t r = 0; r < repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            sink += fn();
            samples.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        }
        if (!std::isfinite(sink)) throw NumericError("measure_scaling: non-finite output");
        std::sort(samples.begin(), samples.end());
        return samples[samples.size() / 2];
    };

    ScalingRow row;
    row.instances = instances;
    row.dense_ms = time_ms([&] {
        const auto qkv = qkv_project(h, params);
        return self_attention_dense(qkv.q, qkv.k, qkv.v)(0, 0);
    });
    row.amd_ms = time_ms([&] { return amd_forward(h, params, cfg).o(0, 0); });
    return row;
}

std::string scaling_csv(const std::vector<ScalingRow>& rows) {
    std::ostringstream os;
    os << "instances,dense_ms,amd_ms\n";
    os.precision(6);
    os << std::fixed;
    for (const auto& r : rows) os << r.instances << ',' << r.dense_ms << ',' << r.amd_ms << '\n';
    return os.str();
}

// --- serialisation ---------------------------------------------------------

namespace {

json flags_json(const std::optional<AblationFlags>& f) {
    if (!f) return nullptr;
    return json{{"agent", f->agent}, {"trainable", f->trainable}, {"mask", f->mask}, {"denoise", f->denoise}};
}

json config_json(const TrainConfig& c) {
    return json{{"schema_version", kConfigSchemaVersion},
                {"lr", c.lr},
                {"weight_decay", c.weight_decay},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"eps", c.eps},
                {"epochs", c.epochs},
                {"seed", c.seed},
                {"aggregator", std::string(to_string(c.aggregator))},
                {"ablation_flags", flags_json(c.ablation_flags)},
                {"n_agents", c.n_agents},
                {"landmarks", c.landmarks},
                {"nystrom_iters", c.nystrom_iters},
                {"threshold_mode", std::string(to_string(c.threshold_mode))},
                {"cnn_groups", c.cnn_groups},
                {"raw_product", c.raw_product},
                {"early_stop_patience", c.early_stop_patience},
                {"folds", c.folds},
                {"stratified", c.stratified},
                {"jobs", c.jobs}};
}

template <typename T>
T get_as(const json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

}  // namespace

std::string config_to_json(const TrainConfig& cfg) { return config_json(cfg).dump(2); }

TrainConfig config_from_json(const std::string& text, TrainConfig c) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config JSON must be an object");
    for (const auto& [key, val] : j.items()) {
        if (key == "schema_version") {
            if (get_as<int>(val, key) != kConfigSchemaVersion) throw ConfigError("unsupported config schema_version");
        } else if (key == "lr") c.lr = get_as<double>(val, key);
        else if (key == "weight_decay") c.weight_decay = get_as<double>(val, key);
        else if (key == "beta1") c.beta1 = get_as<double>(val, key);
        else if (key == "beta2") c.beta2 = get_as<double>(val, key);
        else if (key == "eps") c.eps = get_as<double>(val, key);
        else if (key == "epochs") c.epochs = get_as<std::size_t>(val, key);
        else if (key == "seed") c.seed = get_as<std::uint64_t>(val, key);
        else if (key == "aggregator") c.aggregator = parse_aggregator(get_as<std::string>(val, key));
        else if (key == "ablation_flags") {
            if (val.is_null()) {
                c.ablation_flags.reset();
            } else {
                AblationFlags f = c.ablation_flags.value_or(AblationFlags{});
                for (const auto& [fk, fv] : val.items()) {
                    if (fk == "agent") f.agent = get_as<bool>(fv, fk);
                    else if (fk == "trainable") f.trainable = get_as<bool>(fv, fk);
                    else if (fk == "mask") f.mask = get_as<bool>(fv, fk);
                    else if (fk == "denoise") f.denoise = get_as<bool>(fv, fk);
                    else throw ConfigError("unknown ablation flag '" + fk + "'");
                }
                c.ablation_flags = f;
            }
        } else if (key == "n_agents") c.n_agents = get_as<std::size_t>(val, key);
        else if (key == "landmarks") c.landmarks = get_as<std::size_t>(val, key);
        else if (key == "nystrom_iters") c.nystrom_iters = get_as<std::size_t>(val, key);
        else if (key == "threshold_mode") c.threshold_mode = parse_threshold_mode(get_as<std::string>(val, key));
        else if (key == "cnn_groups") c.cnn_groups = get_as<std::size_t>(val, key);
        else if (key == "raw_product") c.raw_product = get_as<bool>(val, key);
        else if (key == "early_stop_patience") c.early_stop_patience = get_as<std::size_t>(val, key);
        else if (key == "folds") c.folds = get_as<std::size_t>(val, key);
        else if (key == "stratified") c.stratified = get_as<bool>(val, key);
        else if (key == "jobs") c.jobs = get_as<std::size_t>(val, key);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    c.validate();
    return c;
}

std::string run_record_to_json(const RunRecord& rec) {
    json j;
    j["config"] = config_json(rec.config);
    j["config"]["resolved_aggregator"] = std::string(to_string(rec.config.resolved_aggregator()));
    j["feature_dim"] = rec.feature_dim;
    j["classes"] = rec.classes;
    json folds = json::array();
    for (const auto& f : rec.folds) {
        folds.push_back({{"fold", f.fold},
                         {"train_ids", f.train_ids},
                         {"test_ids", f.test_ids},
                         {"epoch_loss", f.epoch_loss},
                         {"epochs_run", f.epochs_run},
                         {"acc", f.acc},
                         {"macro_f1", f.macro_f1},
                         {"auc", std::isnan(f.auc) ? json(nullptr) : json(f.auc)},
                         {"seconds", f.seconds}});
    }
    j["folds"] = folds;
    auto ms = [](const MeanStd& m) { return json{{"mean", m.mean}, {"std", m.std}}; };
    j["summary"] = {{"acc", ms(rec.acc)}, {"macro_f1", ms(rec.macro_f1)}, {"auc", ms(rec.auc)}};
    json att = json::array();
    for (const auto& a : rec.attention) {
        json entry{{"id", a.id}, {"fold", a.fold}, {"label", a.label}, {"scores", a.scores}};
        if (a.instance_labels) entry["instance_labels"] = *a.instance_labels;
        att.push_back(std::move(entry));
    }
    j["attention"] = att;
    j["seconds"] = rec.seconds;
    return j.dump(2);
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << v;
    return os.str();
}

std::string signed_fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << std::showpos << std::fixed << v;
    return os.str();
}

}  // namespace

std::string ablation_csv(const std::vector<RunRecord>& rows) {
    std::ostringstream os;
    os << "row,nystrom,agent,train,mask,denoise,acc_mean,acc_std,f1_mean,f1_std,auc_mean,auc_std,delta_acc,delta_f1,"
          "delta_auc\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const AblationFlags f = r.config.ablation_flags.value_or(flags_for(r.config.aggregator).value_or(AblationFlags{}));
        const double da = i == 0 ? 0.0 : r.acc.mean - rows[i - 1].acc.mean;
        const double df = i == 0 ? 0.0 : r.macro_f1.mean - rows[i - 1].macro_f1.mean;
        const double du = i == 0 ? 0.0 : r.auc.mean - rows[i - 1].auc.mean;
        os << i + 1 << ',' << (f.agent ? 0 : 1) << ',' << f.agent << ',' << f.trainable << ',' << f.mask << ','
           << f.denoise << ',' << fmt(r.acc.mean) << ',' << fmt(r.acc.std) << ',' << fmt(r.macro_f1.mean) << ','
           << fmt(r.macro_f1.std) << ',' << fmt(r.auc.mean) << ',' << fmt(r.auc.std) << ',' << signed_fmt(da) << ','
           << signed_fmt(df) << ',' << signed_fmt(du) << '\n';
    }
    return os.str();
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
    std::ostringstream os;
    os << "n_agents,acc_mean,acc_std,auc_mean,auc_std,seconds\n";
    for (const auto& p : points) {
        os << p.agents << ',' << fmt(p.record.acc.mean) << ',' << fmt(p.record.acc.std) << ','
           << fmt(p.record.auc.mean) << ',' << fmt(p.record.auc.std) << ',' << fmt(p.record.seconds) << '\n';
    }
    return os.str();
}

std::string loss_curve_csv(const RunRecord& rec) {
    std::ostringstream os;
    os << "fold,epoch,loss\n";
    os.precision(10);
    for (const auto& f : rec.folds)
        for (std::size_t e = 0; e < f.epoch_loss.size(); ++e) os << f.fold << ',' << e << ',' << f.epoch_loss[e] << '\n';
    return os.str();
}

std::string attention_csv(const Model& model, const Bag& bag) {
    const auto out = pipeline_forward(bag, model);
    std::ostringstream os;
    os.precision(10);
    os << "instance_index,attention_score,instance_label\n";
    for (std::size_t i = 0; i < out.attention.size(); ++i) {
        os << i << ',' << out.attention[i] << ',';
        if (bag.instance_labels) os << static_cast<int>((*bag.instance_labels)[i]);
        os << '\n';
    }
    return os.str();
}

void export_attention(const Model& model, const Bag& bag, const std::filesystem::path& path) {
    const std::string csv = attention_csv(model, bag);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << csv;
    if (!out) throw Error("write failed for " + path.string());
}

}  // namespace amdmil
