#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "amdmil/matrix.hpp"
#include "amdmil/param.hpp"

namespace amdmil {

enum class ThresholdMode { Linear, Mean, CNN };

std::string_view to_string(ThresholdMode mode);
ThresholdMode parse_threshold_mode(std::string_view name);

struct AttentionConfig {
    std::size_t feature_dim = 64;
    std::size_t agent_count = 8;
    std::size_t landmark_count = 8;
    std::size_t nystrom_iters = 6;
    ThresholdMode threshold_mode = ThresholdMode::Linear;
    /// Number of feature groups for ThresholdMode::CNN; must divide feature_dim.
    std::size_t cnn_groups = 4;
    /// Score instances with the un-normalised Q_A * K_A product instead of
    /// the softmax factors used by the forward pass.
    bool raw_product = false;

    void validate() const;
};

/// Every trainable matrix used by any aggregator variant plus the linear
/// classifier head. A variant only reads (and trains) the subset it needs;
/// see model_param_names() in mil.hpp.
struct AggregatorParams {
    ParamTensor w_q;          // D x D
    ParamTensor w_k;          // D x D
    ParamTensor w_v;          // D x D
    ParamTensor agents;       // n x D
    ParamTensor w_mask;       // D x D
    ParamTensor w_denoise;    // D x D
    ParamTensor w_tau;        // 1 x D
    ParamTensor class_token;  // 1 x D
    ParamTensor head;         // C x D
    ParamTensor head_bias;    // 1 x C
    // Gated attention baseline.
    ParamTensor attn_v;  // hidden x D
    ParamTensor attn_u;  // hidden x D
    ParamTensor attn_w;  // 1 x hidden

    static constexpr std::size_t kAbmilHidden = 128;

    /// Weights ~ N(0, 1/D), agents ~ N(0, 1/D), head bias zero.
    static AggregatorParams init(const AttentionConfig& cfg, std::size_t classes, std::mt19937_64& rng);

    /// (name, tensor) for every tensor, in a fixed order.
    std::vector<std::pair<std::string, ParamTensor*>> all();
    std::vector<std::pair<std::string, const ParamTensor*>> all() const;
};

// ---------------------------------------------------------------------------
// Forward operations on plain matrices.

struct Qkv {
    Matrix q;
    Matrix k;
    Matrix v;
};

/// Q = H W_Q^T, K = H W_K^T, V = H W_V^T. H carries the class token in row 0.
Qkv qkv_project(const Matrix& h, const AggregatorParams& params);

/// softmax(Q K^T / sqrt(D)) V.
Matrix self_attention_dense(const Matrix& q, const Matrix& k, const Matrix& v);

/// Mean of `segments` contiguous row blocks. When rows are not a multiple of
/// `segments` the input is padded at the end with zero rows, so the last
/// segment mean includes the padding.
Matrix segment_mean(const Matrix& x, std::size_t segments);
/// Adjoint of segment_mean for an input with `rows` rows.
Matrix segment_mean_backward(const Matrix& dy, std::size_t rows, std::size_t segments);

std::pair<Matrix, Matrix> nystrom_landmarks(const Matrix& q, const Matrix& k, std::size_t landmarks);

/// Iterative Moore-Penrose approximation. Starts from
/// Z0 = S^T / (max row abs-sum * max column abs-sum) and applies
/// Z <- Z (13I - SZ (15I - SZ (7I - SZ))) / 4.
Matrix pseudo_inverse_iter(const Matrix& s, std::size_t iters);

Matrix nystrom_attention(const Matrix& q, const Matrix& k, const Matrix& v, const AttentionConfig& cfg);

/// Agents pooled from Q by segment means.
Matrix pooling_agent(const Matrix& q, std::size_t agents);

/// softmax(Q A^T) softmax(A K^T) V. No sqrt(D) scaling.
Matrix agent_attention(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& agents);

/// V_A = softmax(A K^T) V.
Matrix agent_aggregate_values(const Matrix& k, const Matrix& v, const Matrix& agents);

struct MaskThreshold {
    Matrix m;
    double tau = 0.0;
};

/// M = V_A W_M^T and the scalar threshold for the configured mode.
MaskThreshold mask_threshold(const Matrix& v_agg, const AggregatorParams& params, ThresholdMode mode,
                             std::size_t cnn_groups = 4);

/// 1[M > tau] as a 0/1 matrix.
Matrix binarize(const Matrix& m, double tau);

/// V_MD = V_A * 1[M > tau] + V_A W_DN^T (the second term only when `denoise`).
Matrix mask_denoise(const Matrix& v_agg, const Matrix& m, double tau, const AggregatorParams& params,
                    bool denoise = true);

struct AmdResult {
    Matrix o;
    Matrix v_agg;
    Matrix m;
    double tau = 0.0;
    Matrix q_agent;  // Q A^T, pre-softmax, (N+1) x n
    Matrix k_agent;  // A K^T, pre-softmax, n x (N+1)
};

/// Trainable agents with the mask-denoise refinement:
/// O = softmax(Q A^T) V_MD.
AmdResult amd_forward(const Matrix& h, const AggregatorParams& params, const AttentionConfig& cfg);

/// Per-instance attention (class token excluded), length N.
std::vector<double> attention_scores(const Matrix& q_agent, const Matrix& k_agent, const AttentionConfig& cfg);

// ---------------------------------------------------------------------------
// Traced forward passes and their analytic backward passes.

struct QkvGrads {
    Matrix dq;
    Matrix dk;
    Matrix dv;
};

struct DenseTrace {
    Matrix scores;  // softmax(Q K^T / sqrt(D))
    Matrix o;
};
DenseTrace dense_forward(const Matrix& q, const Matrix& k, const Matrix& v);
QkvGrads dense_backward(const DenseTrace& t, const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& d_o);

struct PinvTrace {
    Matrix s;
    double row_max = 0.0;
    double col_max = 0.0;
    std::size_t row_arg = 0;
    std::size_t col_arg = 0;
    std::vector<Matrix> z;  // z[0] .. z[iters]
    std::vector<Matrix> sz;
    std::vector<Matrix> a1;
    std::vector<Matrix> a2;
    std::vector<Matrix> a3;
};
PinvTrace pinv_forward(const Matrix& s, std::size_t iters);
/// dL/dS given dL/dZ for the final iterate.
Matrix pinv_backward(const PinvTrace& t, const Matrix& dz);

struct NystromTrace {
    std::size_t landmarks = 0;
    Matrix q_land;
    Matrix k_land;
    Matrix f1;  // softmax(Q K~^T / sqrt(D)), L x m
    Matrix f2;  // softmax(Q~ K~^T / sqrt(D)), m x m
    Matrix f3;  // softmax(Q~ K^T / sqrt(D)), m x L
    PinvTrace pinv;
    Matrix t;  // f3 V
    Matrix u;  // Z t
    Matrix o;  // f1 u
};
/// `landmarks` is used as given and must not exceed Q's row count.
NystromTrace nystrom_forward(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t landmarks,
                             std::size_t iters);
QkvGrads nystrom_backward(const NystromTrace& t, const Matrix& q, const Matrix& k, const Matrix& v,
                          const Matrix& d_o);
/// Row 0 of the approximate score matrix, i.e. the class token's attention.
std::vector<double> nystrom_class_scores(const NystromTrace& t);

struct AgentOptions {
    bool mask = false;
    bool denoise = false;
    ThresholdMode threshold_mode = ThresholdMode::Linear;
    std::size_t cnn_groups = 4;
};

struct AgentTrace {
    Matrix q_agent;
    Matrix k_agent;
    Matrix s1;  // softmax(Q_A)
    Matrix s2;  // softmax(K_A)
    Matrix v_agg;
    Matrix m;
    double tau = 0.0;
    Matrix keep;  // 0/1 indicator; all ones when masking is off
    Matrix v_md;
    Matrix o;
};
AgentTrace agent_forward(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& agents,
                         const AggregatorParams& params, const AgentOptions& opts);

struct AgentGrads {
    Matrix dq;
    Matrix dk;
    Matrix dv;
    Matrix d_agents;
};
/// Accumulates the denoise-matrix gradient into `params` when denoising is
/// on. The indicator is held constant, so W_M and W_tau receive no gradient.
AgentGrads agent_backward(const AgentTrace& t, const Matrix& q, const Matrix& k, const Matrix& v,
                          const Matrix& agents, AggregatorParams& params, const AgentOptions& opts,
                          const Matrix& d_o);

}  // namespace amdmil
