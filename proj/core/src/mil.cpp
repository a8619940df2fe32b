#include "amdmil/mil.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "amdmil/error.hpp"

namespace amdmil {

std::uint32_t bag_label_rule(const std::vector<std::uint8_t>& instance_labels) {
    if (instance_labels.empty()) throw ConfigError("bag_label_rule: bag has no instances");
    return std::any_of(instance_labels.begin(), instance_labels.end(), [](std::uint8_t y) { return y != 0; }) ? 1u
                                                                                                               : 0u;
}

std::vector<double> mean_pool_aggregate(const Matrix& features) {
    if (features.rows() == 0) throw ShapeError("mean_pool_aggregate: empty bag");
    std::vector<double> out(features.cols(), 0.0);
    for (std::size_t r = 0; r < features.rows(); ++r)
        for (std::size_t c = 0; c < features.cols(); ++c) out[c] += features(r, c);
    for (double& v : out) v /= static_cast<double>(features.rows());
    return out;
}

std::vector<double> max_pool_aggregate(const Matrix& features) {
    if (features.rows() == 0) throw ShapeError("max_pool_aggregate: empty bag");
    auto first = features.row(0);
    std::vector<double> out(first.begin(), first.end());
    for (std::size_t r = 1; r < features.rows(); ++r)
        for (std::size_t c = 0; c < features.cols(); ++c) out[c] = std::max(out[c], features(r, c));
    return out;
}

AbmilTrace abmil_forward(const Matrix& features, const AggregatorParams& params) {
    if (features.rows() == 0) throw ShapeError("abmil_aggregate: empty bag");
    AbmilTrace t;
    t.tanh_branch = linear_forward(features, params.attn_v);
    for (double& x : t.tanh_branch.data()) x = std::tanh(x);
    t.sigmoid_branch = linear_forward(features, params.attn_u);
    for (double& x : t.sigmoid_branch.data()) x = 1.0 / (1.0 + std::exp(-x));
    t.gated = hadamard(t.tanh_branch, t.sigmoid_branch);
    Matrix logits = transpose(linear_forward(t.gated, params.attn_w));  // 1 x N
    t.weights = softmax_rows(logits);
    t.pooled = matmul(t.weights, features);
    return t;
}

AbmilResult abmil_aggregate(const Matrix& features, const AggregatorParams& params) {
    auto t = abmil_forward(features, params);
    return {t.pooled.data(), t.weights.data()};
}

Matrix prepend_class_token(const Matrix& features, const ParamTensor& class_token) {
    if (class_token.rows() != 1 || class_token.cols() != features.cols()) {
        throw ShapeError("prepend_class_token: token " + class_token.value.shape_string() +
                         " does not match features " + features.shape_string());
    }
    return vstack(class_token.value, features);
}

std::string_view to_string(Aggregator a) {
    switch (a) {
        case Aggregator::Mean: return "mean";
        case Aggregator::Max: return "max";
        case Aggregator::Abmil: return "abmil";
        case Aggregator::Dense: return "dense";
        case Aggregator::Nystrom: return "nystrom";
        case Aggregator::PoolingAgent: return "pooling-agent";
        case Aggregator::TrainableAgent: return "trainable-agent";
        case Aggregator::AgentMask: return "agent-mask";
        case Aggregator::Amd: return "amd";
    }
    return "amd";
}

std::vector<Aggregator> all_aggregators() {
    return {Aggregator::Mean,         Aggregator::Max,           Aggregator::Abmil,
            Aggregator::Dense,        Aggregator::Nystrom,       Aggregator::PoolingAgent,
            Aggregator::TrainableAgent, Aggregator::AgentMask,   Aggregator::Amd};
}

Aggregator parse_aggregator(std::string_view name) {
    for (Aggregator a : all_aggregators())
        if (to_string(a) == name) return a;
    throw ConfigError("unknown aggregator '" + std::string(name) +
                      "' (expected mean, max, abmil, dense, nystrom, pooling-agent, trainable-agent, agent-mask "
                      "or amd)");
}

bool uses_class_token(Aggregator a) {
    return a != Aggregator::Mean && a != Aggregator::Max && a != Aggregator::Abmil;
}

std::vector<std::string> model_param_names(Aggregator a) {
    std::vector<std::string> names;
    switch (a) {
        case Aggregator::Mean:
        case Aggregator::Max: break;
        case Aggregator::Abmil: names = {"attn_V", "attn_U", "attn_w"}; break;
        case Aggregator::Dense:
        case Aggregator::Nystrom:
        case Aggregator::PoolingAgent: names = {"W_Q", "W_K", "W_V", "class_token"}; break;
        case Aggregator::TrainableAgent: names = {"W_Q", "W_K", "W_V", "A", "class_token"}; break;
        case Aggregator::AgentMask: names = {"W_Q", "W_K", "W_V", "A", "W_M", "W_tau", "class_token"}; break;
        case Aggregator::Amd: names = {"W_Q", "W_K", "W_V", "A", "W_M", "W_DN", "W_tau", "class_token"}; break;
    }
    names.emplace_back("head");
    names.emplace_back("head_bias");
    return names;
}

Model Model::create(Aggregator aggregator, const AttentionConfig& attention, std::size_t classes,
                    std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Model m;
    m.aggregator = aggregator;
    m.attention = attention;
    m.classes = classes;
    m.params = AggregatorParams::init(attention, classes, rng);
    return m;
}

std::vector<std::pair<std::string, ParamTensor*>> Model::trainable() {
    const auto names = model_param_names(aggregator);
    std::vector<std::pair<std::string, ParamTensor*>> out;
    for (auto& entry : params.all())
        if (std::find(names.begin(), names.end(), entry.first) != names.end()) out.push_back(entry);
    return out;
}

std::vector<std::pair<std::string, const ParamTensor*>> Model::trainable() const {
    auto mut = const_cast<Model*>(this)->trainable();
    std::vector<std::pair<std::string, const ParamTensor*>> out;
    for (auto& [name, p] : mut) out.emplace_back(name, p);
    return out;
}

ParamTensor& Model::param(std::string_view name) {
    for (auto& [n, p] : params.all())
        if (n == name) return *p;
    throw ConfigError("no parameter named '" + std::string(name) + "'");
}

void Model::zero_grad() {
    for (auto& [name, p] : trainable()) p->zero_grad();
}

NamedTensors Model::to_tensors() const {
    NamedTensors out;
    for (const auto& [name, p] : trainable()) out.emplace_back(name, p->value);
    return out;
}

void Model::load_tensors(const NamedTensors& tensors) {
    for (auto& [name, p] : trainable()) {
        auto it = std::find_if(tensors.begin(), tensors.end(), [&](const auto& t) { return t.first == name; });
        if (it == tensors.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
        if (!it->second.same_shape(p->value)) {
            throw FormatError("checkpoint tensor '" + name + "' has shape " + it->second.shape_string() +
                              ", model expects " + p->value.shape_string());
        }
        *p = ParamTensor(it->second);
    }
}

std::size_t effective_count(std::size_t configured, std::size_t tokens) { return std::min(configured, tokens); }

namespace {

AgentOptions agent_options(const Model& model) {
    AgentOptions opts;
    opts.mask = model.aggregator == Aggregator::AgentMask || model.aggregator == Aggregator::Amd;
    opts.denoise = model.aggregator == Aggregator::Amd;
    opts.threshold_mode = model.attention.threshold_mode;
    opts.cnn_groups = model.attention.cnn_groups;
    return opts;
}

void finish_head(PipelineOutput& out, const Model& model) {
    Matrix logits = linear_forward(out.readout, model.params.head, &model.params.head_bias);
    out.logits = logits.data();
    out.probabilities = softmax_rows(logits).data();
}

}  // namespace

PipelineOutput pipeline_forward(const Matrix& features, const Model& model) {
    if (features.rows() == 0) throw ShapeError("pipeline_forward: empty bag");
    if (features.cols() != model.attention.feature_dim) {
        throw ShapeError("pipeline_forward: bag width " + std::to_string(features.cols()) + " does not match D=" +
                         std::to_string(model.attention.feature_dim));
    }
    const std::size_t n = features.rows();
    const auto& params = model.params;
    PipelineOutput out;
    switch (model.aggregator) {
        case Aggregator::Mean: {
            out.readout = Matrix(1, features.cols(), mean_pool_aggregate(features));
            out.attention.assign(n, 1.0 / static_cast<double>(n));
            out.cache = PooledCache{};
            break;
        }
        case Aggregator::Max: {
            PooledCache cache;
            cache.argmax.assign(features.cols(), 0);
            Matrix g(1, features.cols());
            for (std::size_t c = 0; c < features.cols(); ++c) {
                std::size_t best = 0;
                for (std::size_t r = 1; r < n; ++r)
                    if (features(r, c) > features(best, c)) best = r;
                cache.argmax[c] = best;
                g(0, c) = features(best, c);
            }
            out.attention.assign(n, 0.0);
            for (std::size_t best : cache.argmax) out.attention[best] += 1.0 / static_cast<double>(features.cols());
            out.readout = std::move(g);
            out.cache = std::move(cache);
            break;
        }
        case Aggregator::Abmil: {
            auto trace = abmil_forward(features, params);
            out.readout = trace.pooled;
            out.attention = trace.weights.data();
            out.cache = std::move(trace);
            break;
        }
        case Aggregator::Dense: {
            DenseCache cache;
            cache.h = prepend_class_token(features, params.class_token);
            cache.qkv = qkv_project(cache.h, params);
            cache.trace = dense_forward(cache.qkv.q, cache.qkv.k, cache.qkv.v);
            out.readout = slice_rows(cache.trace.o, 0, 1);
            auto row = cache.trace.scores.row(0);
            out.attention.assign(row.begin() + 1, row.end());
            out.cache = std::move(cache);
            break;
        }
        case Aggregator::Nystrom: {
            NystromCache cache;
            cache.h = prepend_class_token(features, params.class_token);
            cache.qkv = qkv_project(cache.h, params);
            cache.trace = nystrom_forward(cache.qkv.q, cache.qkv.k, cache.qkv.v,
                                          effective_count(model.attention.landmark_count, n + 1),
                                          model.attention.nystrom_iters);
            out.readout = slice_rows(cache.trace.o, 0, 1);
            auto scores = nystrom_class_scores(cache.trace);
            out.attention.assign(scores.begin() + 1, scores.end());
            out.cache = std::move(cache);
            break;
        }
        case Aggregator::PoolingAgent:
        case Aggregator::TrainableAgent:
        case Aggregator::AgentMask:
        case Aggregator::Amd: {
            AgentCache cache;
            cache.h = prepend_class_token(features, params.class_token);
            cache.qkv = qkv_project(cache.h, params);
            cache.agents = model.aggregator == Aggregator::PoolingAgent
                               ? pooling_agent(cache.qkv.q, effective_count(model.attention.agent_count, n + 1))
                               : params.agents.value;
            cache.options = agent_options(model);
            cache.trace = agent_forward(cache.qkv.q, cache.qkv.k, cache.qkv.v, cache.agents, params, cache.options);
            out.readout = slice_rows(cache.trace.o, 0, 1);
            out.attention = attention_scores(cache.trace.q_agent, cache.trace.k_agent, model.attention);
            out.cache = std::move(cache);
            break;
        }
    }
    finish_head(out, model);
    return out;
}

PipelineOutput pipeline_forward(const Bag& bag, const Model& model) { return pipeline_forward(bag.features, model); }

double cross_entropy(const std::vector<double>& logits, std::size_t label) {
    if (label >= logits.size()) throw ConfigError("cross_entropy: label out of range");
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double z : logits) total += std::exp(z - mx);
    return -(logits[label] - mx - std::log(total));
}

namespace {

/// Backpropagates dL/dQ, dL/dK, dL/dV through the projections and the class
/// token.
void backprop_tokens(const Matrix& h, const QkvGrads& grads, Model& model) {
    auto& p = model.params;
    Matrix dh = linear_backward(h, p.w_q, nullptr, grads.dq);
    dh += linear_backward(h, p.w_k, nullptr, grads.dk);
    dh += linear_backward(h, p.w_v, nullptr, grads.dv);
    p.class_token.accumulate(slice_rows(dh, 0, 1));
}

Matrix readout_grad(const Matrix& d_readout, std::size_t rows) {
    Matrix d_o(rows, d_readout.cols());
    for (std::size_t c = 0; c < d_readout.cols(); ++c) d_o(0, c) = d_readout(0, c);
    return d_o;
}

}  // namespace

double pipeline_backward(const PipelineOutput& out, const Matrix& features, Model& model, std::size_t label) {
    const double loss = cross_entropy(out.logits, label);
    auto& p = model.params;

    Matrix d_logits(1, out.probabilities.size(), out.probabilities);
    d_logits(0, label) -= 1.0;
    const Matrix d_readout = linear_backward(out.readout, p.head, &p.head_bias, d_logits);

    std::visit(
        [&](const auto& cache) {
            using T = std::decay_t<decltype(cache)>;
            if constexpr (std::is_same_v<T, PooledCache>) {
                // Features are fixed inputs; nothing upstream of the pooling trains.
            } else if constexpr (std::is_same_v<T, AbmilTrace>) {
                const std::size_t n = features.rows();
                Matrix d_weights = matmul_nt(d_readout, features);  // 1 x N
                Matrix d_scores = transpose(softmax_rows_backward(cache.weights, d_weights));  // N x 1
                Matrix d_gated = linear_backward(cache.gated, p.attn_w, nullptr, d_scores);
                Matrix d_tanh_pre(n, AggregatorParams::kAbmilHidden);
                Matrix d_sig_pre(n, AggregatorParams::kAbmilHidden);
                for (std::size_t i = 0; i < d_gated.size(); ++i) {
                    const double th = cache.tanh_branch.data()[i];
                    const double sg = cache.sigmoid_branch.data()[i];
                    const double g = d_gated.data()[i];
                    d_tanh_pre.data()[i] = g * sg * (1.0 - th * th);
                    d_sig_pre.data()[i] = g * th * sg * (1.0 - sg);
                }
                linear_backward(features, p.attn_v, nullptr, d_tanh_pre);
                linear_backward(features, p.attn_u, nullptr, d_sig_pre);
            } else if constexpr (std::is_same_v<T, DenseCache>) {
                auto g = dense_backward(cache.trace, cache.qkv.q, cache.qkv.k, cache.qkv.v,
                                        readout_grad(d_readout, cache.h.rows()));
                backprop_tokens(cache.h, g, model);
            } else if constexpr (std::is_same_v<T, NystromCache>) {
                auto g = nystrom_backward(cache.trace, cache.qkv.q, cache.qkv.k, cache.qkv.v,
                                          readout_grad(d_readout, cache.h.rows()));
                backprop_tokens(cache.h, g, model);
            } else if constexpr (std::is_same_v<T, AgentCache>) {
                auto g = agent_backward(cache.trace, cache.qkv.q, cache.qkv.k, cache.qkv.v, cache.agents, p,
                                        cache.options, readout_grad(d_readout, cache.h.rows()));
                if (model.aggregator == Aggregator::PoolingAgent) {
                    g.dq += segment_mean_backward(g.d_agents, cache.qkv.q.rows(), cache.agents.rows());
                } else {
                    p.agents.accumulate(g.d_agents);
                }
                backprop_tokens(cache.h, {std::move(g.dq), std::move(g.dk), std::move(g.dv)}, model);
            }
        },
        out.cache);
    return loss;
}

}  // namespace amdmil
