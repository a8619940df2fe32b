#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "amdmil/aggregators.hpp"
#include "amdmil/checkpoint.hpp"
#include "amdmil/matrix.hpp"

namespace amdmil {

/// A multiple-instance bag: N instance embeddings of width D and one label.
struct Bag {
    std::string id;
    Matrix features;  // N x D
    std::uint32_t label = 0;
    /// Per-instance 0/1 labels; only synthetic data has them.
    std::optional<std::vector<std::uint8_t>> instance_labels;

    std::size_t size() const { return features.rows(); }
    std::size_t dim() const { return features.cols(); }

    friend bool operator==(const Bag&, const Bag&) = default;
};

/// 1 iff any instance is positive. Throws ConfigError on empty input.
std::uint32_t bag_label_rule(const std::vector<std::uint8_t>& instance_labels);

std::vector<double> mean_pool_aggregate(const Matrix& features);
std::vector<double> max_pool_aggregate(const Matrix& features);

struct AbmilTrace {
    Matrix tanh_branch;     // tanh(H attn_V^T), N x hidden
    Matrix sigmoid_branch;  // sigmoid(H attn_U^T), N x hidden
    Matrix gated;
    Matrix weights;  // 1 x N softmax attention
    Matrix pooled;   // 1 x D
};

/// Gated attention pooling: a = softmax_i(w . (tanh(V h_i) * sigmoid(U h_i))),
/// G = sum_i a_i h_i.
AbmilTrace abmil_forward(const Matrix& features, const AggregatorParams& params);

struct AbmilResult {
    std::vector<double> pooled;
    std::vector<double> weights;
};
AbmilResult abmil_aggregate(const Matrix& features, const AggregatorParams& params);

/// Row 0 = class token, rows 1..N = features.
Matrix prepend_class_token(const Matrix& features, const ParamTensor& class_token);

enum class Aggregator { Mean, Max, Abmil, Dense, Nystrom, PoolingAgent, TrainableAgent, AgentMask, Amd };

std::string_view to_string(Aggregator a);
Aggregator parse_aggregator(std::string_view name);
std::vector<Aggregator> all_aggregators();

/// True for the variants that prepend a class token and read out row 0.
bool uses_class_token(Aggregator a);

/// Names (as in AggregatorParams::all()) of the tensors a variant trains.
std::vector<std::string> model_param_names(Aggregator a);

/// An aggregator variant together with its parameters and classifier head.
struct Model {
    Aggregator aggregator = Aggregator::Amd;
    AttentionConfig attention;
    std::size_t classes = 2;
    AggregatorParams params;

    static Model create(Aggregator aggregator, const AttentionConfig& attention, std::size_t classes,
                        std::uint64_t seed);

    std::vector<std::pair<std::string, ParamTensor*>> trainable();
    std::vector<std::pair<std::string, const ParamTensor*>> trainable() const;
    ParamTensor& param(std::string_view name);

    void zero_grad();

    NamedTensors to_tensors() const;
    /// Replaces the values of every trainable tensor. Missing names or shape
    /// mismatches raise FormatError.
    void load_tensors(const NamedTensors& tensors);
};

/// Intermediates kept for the backward pass.
struct PooledCache {
    std::vector<std::size_t> argmax;  // per feature, for max pooling
};
struct DenseCache {
    Matrix h;
    Qkv qkv;
    DenseTrace trace;
};
struct NystromCache {
    Matrix h;
    Qkv qkv;
    NystromTrace trace;
};
struct AgentCache {
    Matrix h;
    Qkv qkv;
    Matrix agents;
    AgentOptions options;
    AgentTrace trace;
};
using ForwardCache = std::variant<PooledCache, AbmilTrace, DenseCache, NystromCache, AgentCache>;

struct PipelineOutput {
    std::vector<double> logits;
    std::vector<double> probabilities;
    std::vector<double> attention;  // length N
    Matrix readout;                 // 1 x D vector fed to the head
    ForwardCache cache;
};

/// h(g(f(X))) with f the identity, g the model's aggregator and h a linear
/// head followed by softmax. Token-based variants read out the class-token
/// row of the aggregator output; pooled baselines read out G.
PipelineOutput pipeline_forward(const Matrix& features, const Model& model);
PipelineOutput pipeline_forward(const Bag& bag, const Model& model);

/// -log softmax(logits)[label]
double cross_entropy(const std::vector<double>& logits, std::size_t label);

/// Accumulates d(cross-entropy)/d(param) into every trainable tensor of
/// `model` and returns the loss. `out` must come from pipeline_forward on
/// the same features and parameter values.
double pipeline_backward(const PipelineOutput& out, const Matrix& features, Model& model, std::size_t label);

/// Landmark and agent counts actually used for a bag with `tokens` rows
/// (class token included): the configured count, capped at `tokens`.
std::size_t effective_count(std::size_t configured, std::size_t tokens);

}  // namespace amdmil
