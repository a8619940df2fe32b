#include "amdmil/aggregators.hpp"

#include <cmath>
#include <limits>
#include <tuple>

#include "amdmil/error.hpp"

namespace amdmil {

namespace {

void require_same_cols(const char* op, const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": feature dimension mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
    }
}

void require_qkv(const char* op, const Matrix& q, const Matrix& k, const Matrix& v) {
    if (!q.same_shape(k) || k.rows() != v.rows()) {
        throw ShapeError(std::string(op) + ": Q " + q.shape_string() + ", K " + k.shape_string() + ", V " +
                         v.shape_string() + " are not compatible");
    }
}

double inv_sqrt_dim(const Matrix& q) { return 1.0 / std::sqrt(static_cast<double>(q.cols())); }

Matrix scaled_scores(const Matrix& a, const Matrix& b, double scale) { return scale * matmul_nt(a, b); }

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

Matrix diag_minus(double c, const Matrix& x) {
    Matrix out = -1.0 * x;
    for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) += c;
    return out;
}

}  // namespace

std::string_view to_string(ThresholdMode mode) {
    switch (mode) {
        case ThresholdMode::Linear: return "linear";
        case ThresholdMode::Mean: return "mean";
        case ThresholdMode::CNN: return "cnn";
    }
    return "linear";
}

ThresholdMode parse_threshold_mode(std::string_view name) {
    if (name == "linear" || name == "Linear") return ThresholdMode::Linear;
    if (name == "mean" || name == "Mean") return ThresholdMode::Mean;
    if (name == "cnn" || name == "CNN") return ThresholdMode::CNN;
    throw ConfigError("unknown threshold mode '" + std::string(name) + "' (expected linear, mean or cnn)");
}

void AttentionConfig::validate() const {
    if (feature_dim == 0) throw ConfigError("feature_dim must be >= 1");
    if (agent_count == 0) throw ConfigError("agent_count must be >= 1");
    if (landmark_count == 0) throw ConfigError("landmark_count must be >= 1");
    if (nystrom_iters == 0) throw ConfigError("nystrom_iters must be >= 1");
    if (cnn_groups == 0 || feature_dim % cnn_groups != 0) {
        throw ConfigError("cnn_groups (" + std::to_string(cnn_groups) + ") must divide feature_dim (" +
                          std::to_string(feature_dim) + ")");
    }
}

AggregatorParams AggregatorParams::init(const AttentionConfig& cfg, std::size_t classes, std::mt19937_64& rng) {
    cfg.validate();
    if (classes < 2) throw ConfigError("need at least two classes");
    const std::size_t d = cfg.feature_dim;
    const double std_d = 1.0 / std::sqrt(static_cast<double>(d));
    AggregatorParams p;
    p.w_q = ParamTensor::normal(d, d, std_d, rng);
    p.w_k = ParamTensor::normal(d, d, std_d, rng);
    p.w_v = ParamTensor::normal(d, d, std_d, rng);
    p.agents = ParamTensor::normal(cfg.agent_count, d, std_d, rng);
    p.w_mask = ParamTensor::normal(d, d, std_d, rng);
    p.w_denoise = ParamTensor::normal(d, d, std_d, rng);
    p.w_tau = ParamTensor::normal(1, d, std_d, rng);
    p.class_token = ParamTensor::normal(1, d, std_d, rng);
    p.head = ParamTensor::normal(classes, d, std_d, rng);
    p.head_bias = ParamTensor::zeros(1, classes);
    p.attn_v = ParamTensor::normal(kAbmilHidden, d, std_d, rng);
    p.attn_u = ParamTensor::normal(kAbmilHidden, d, std_d, rng);
    p.attn_w = ParamTensor::normal(1, kAbmilHidden, 1.0 / std::sqrt(static_cast<double>(kAbmilHidden)), rng);
    return p;
}

std::vector<std::pair<std::string, ParamTensor*>> AggregatorParams::all() {
    return {{"W_Q", &w_q},         {"W_K", &w_k},         {"W_V", &w_v},     {"A", &agents},
            {"W_M", &w_mask},      {"W_DN", &w_denoise},  {"W_tau", &w_tau}, {"class_token", &class_token},
            {"head", &head},       {"head_bias", &head_bias}, {"attn_V", &attn_v}, {"attn_U", &attn_u},
            {"attn_w", &attn_w}};
}

std::vector<std::pair<std::string, const ParamTensor*>> AggregatorParams::all() const {
    auto mut = const_cast<AggregatorParams*>(this)->all();
    std::vector<std::pair<std::string, const ParamTensor*>> out;
    out.reserve(mut.size());
    for (auto& [name, ptr] : mut) out.emplace_back(name, ptr);
    return out;
}

Qkv qkv_project(const Matrix& h, const AggregatorParams& params) {
    return {linear_forward(h, params.w_q), linear_forward(h, params.w_k), linear_forward(h, params.w_v)};
}

// --- dense -----------------------------------------------------------------

DenseTrace dense_forward(const Matrix& q, const Matrix& k, const Matrix& v) {
    require_qkv("self_attention_dense", q, k, v);
    DenseTrace t;
    t.scores = softmax_rows(scaled_scores(q, k, inv_sqrt_dim(q)));
    t.o = matmul(t.scores, v);
    return t;
}

QkvGrads dense_backward(const DenseTrace& t, const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& d_o) {
    const double s = inv_sqrt_dim(q);
    Matrix d_scores = matmul_nt(d_o, v);
    Matrix dv = matmul_tn(t.scores, d_o);
    Matrix d_raw = s * softmax_rows_backward(t.scores, d_scores);
    return {matmul(d_raw, k), matmul_tn(d_raw, q), std::move(dv)};
}

Matrix self_attention_dense(const Matrix& q, const Matrix& k, const Matrix& v) { return dense_forward(q, k, v).o; }

// --- segment pooling -------------------------------------------------------

Matrix segment_mean(const Matrix& x, std::size_t segments) {
    if (segments == 0) throw ConfigError("segment count must be >= 1");
    if (segments > x.rows()) {
        throw ConfigError("segment count " + std::to_string(segments) + " exceeds row count " +
                          std::to_string(x.rows()));
    }
    const std::size_t len = (x.rows() + segments - 1) / segments;
    Matrix out(segments, x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto dst = out.row(r / len);
        auto src = x.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
    const double inv = 1.0 / static_cast<double>(len);
    for (double& v : out.data()) v *= inv;
    return out;
}

Matrix segment_mean_backward(const Matrix& dy, std::size_t rows, std::size_t segments) {
    const std::size_t len = (rows + segments - 1) / segments;
    const double inv = 1.0 / static_cast<double>(len);
    Matrix dx(rows, dy.cols());
    for (std::size_t r = 0; r < rows; ++r) {
        auto src = dy.row(r / len);
        auto dst = dx.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] * inv;
    }
    return dx;
}

std::pair<Matrix, Matrix> nystrom_landmarks(const Matrix& q, const Matrix& k, std::size_t landmarks) {
    require_same_cols("nystrom_landmarks", q, k);
    return {segment_mean(q, landmarks), segment_mean(k, landmarks)};
}

Matrix pooling_agent(const Matrix& q, std::size_t agents) { return segment_mean(q, agents); }

// --- iterative pseudo-inverse ----------------------------------------------

PinvTrace pinv_forward(const Matrix& s, std::size_t iters) {
    if (s.rows() != s.cols() || s.empty()) {
        throw ShapeError("pseudo_inverse_iter: expected a non-empty square matrix, got " + s.shape_string());
    }
    if (iters == 0) throw ConfigError("pseudo_inverse_iter: iterations must be >= 1");
    const std::size_t n = s.rows();
    PinvTrace t;
    t.s = s;
    t.row_max = -1.0;
    t.col_max = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        double rs = 0.0, cs = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            rs += std::abs(s(i, j));
            cs += std::abs(s(j, i));
        }
        if (rs > t.row_max) {
            t.row_max = rs;
            t.row_arg = i;
        }
        if (cs > t.col_max) {
            t.col_max = cs;
            t.col_arg = i;
        }
    }
    const double denom = t.row_max * t.col_max;
    if (!(denom > 0.0)) throw NumericError("pseudo_inverse_iter: input matrix is zero");
    t.z.push_back((1.0 / denom) * transpose(s));
    for (std::size_t it = 0; it < iters; ++it) {
        const Matrix& z = t.z.back();
        Matrix sz = matmul(s, z);
        Matrix a1 = diag_minus(7.0, sz);
        Matrix a2 = diag_minus(15.0, matmul(sz, a1));
        Matrix a3 = diag_minus(13.0, matmul(sz, a2));
        Matrix next = 0.25 * matmul(z, a3);
        if (!next.all_finite() || max_abs(next) > 1e6) {
            throw NumericError("pseudo_inverse_iter: iteration diverged at step " + std::to_string(it + 1));
        }
        t.sz.push_back(std::move(sz));
        t.a1.push_back(std::move(a1));
        t.a2.push_back(std::move(a2));
        t.a3.push_back(std::move(a3));
        t.z.push_back(std::move(next));
    }
    return t;
}

Matrix pinv_backward(const PinvTrace& t, const Matrix& dz_final) {
    const std::size_t iters = t.sz.size();
    Matrix ds(t.s.rows(), t.s.cols());
    Matrix dz = dz_final;
    for (std::size_t it = iters; it-- > 0;) {
        const Matrix& z = t.z[it];
        const Matrix& sz = t.sz[it];
        // next = 0.25 * z * a3, a3 = 13I - sz*a2, a2 = 15I - sz*a1, a1 = 7I - sz
        Matrix dz_prev = 0.25 * matmul_nt(dz, t.a3[it]);
        Matrix da3 = 0.25 * matmul_tn(z, dz);
        Matrix d_sz = -1.0 * matmul_nt(da3, t.a2[it]);
        Matrix da2 = -1.0 * matmul_tn(sz, da3);
        d_sz += -1.0 * matmul_nt(da2, t.a1[it]);
        Matrix da1 = -1.0 * matmul_tn(sz, da2);
        d_sz += -1.0 * da1;
        ds += matmul_nt(d_sz, z);
        dz_prev += matmul_tn(t.s, d_sz);
        dz = std::move(dz_prev);
    }
    // z0 = s^T / (row_max * col_max)
    const double c = t.row_max * t.col_max;
    ds += (1.0 / c) * transpose(dz);
    double dot = 0.0;
    for (std::size_t i = 0; i < dz.rows(); ++i)
        for (std::size_t j = 0; j < dz.cols(); ++j) dot += dz(i, j) * t.s(j, i);
    const double dc = -dot / (c * c);
    const double d_row = dc * t.col_max;
    const double d_col = dc * t.row_max;
    for (std::size_t j = 0; j < t.s.cols(); ++j) ds(t.row_arg, j) += d_row * sign(t.s(t.row_arg, j));
    for (std::size_t i = 0; i < t.s.rows(); ++i) ds(i, t.col_arg) += d_col * sign(t.s(i, t.col_arg));
    return ds;
}

Matrix pseudo_inverse_iter(const Matrix& s, std::size_t iters) { return pinv_forward(s, iters).z.back(); }

// --- Nystrom ---------------------------------------------------------------

NystromTrace nystrom_forward(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t landmarks,
                             std::size_t iters) {
    require_qkv("nystrom_attention", q, k, v);
    NystromTrace t;
    t.landmarks = landmarks;
    std::tie(t.q_land, t.k_land) = nystrom_landmarks(q, k, landmarks);
    const double s = inv_sqrt_dim(q);
    t.f1 = softmax_rows(scaled_scores(q, t.k_land, s));
    t.f2 = softmax_rows(scaled_scores(t.q_land, t.k_land, s));
    t.f3 = softmax_rows(scaled_scores(t.q_land, k, s));
    t.pinv = pinv_forward(t.f2, iters);
    t.t = matmul(t.f3, v);
    t.u = matmul(t.pinv.z.back(), t.t);
    t.o = matmul(t.f1, t.u);
    return t;
}

QkvGrads nystrom_backward(const NystromTrace& t, const Matrix& q, const Matrix& k, const Matrix& v,
                          const Matrix& d_o) {
    const double s = inv_sqrt_dim(q);
    const Matrix& z = t.pinv.z.back();
    Matrix d_f1 = matmul_nt(d_o, t.u);
    Matrix d_u = matmul_tn(t.f1, d_o);
    Matrix d_z = matmul_nt(d_u, t.t);
    Matrix d_t = matmul_tn(z, d_u);
    Matrix d_f3 = matmul_nt(d_t, v);
    Matrix dv = matmul_tn(t.f3, d_t);
    Matrix d_f2 = pinv_backward(t.pinv, d_z);

    Matrix r1 = s * softmax_rows_backward(t.f1, d_f1);
    Matrix r2 = s * softmax_rows_backward(t.f2, d_f2);
    Matrix r3 = s * softmax_rows_backward(t.f3, d_f3);

    Matrix dq = matmul(r1, t.k_land);
    Matrix dk_land = matmul_tn(r1, q);
    Matrix dq_land = matmul(r2, t.k_land);
    dk_land += matmul_tn(r2, t.q_land);
    dq_land += matmul(r3, k);
    Matrix dk = matmul_tn(r3, t.q_land);

    dq += segment_mean_backward(dq_land, q.rows(), t.landmarks);
    dk += segment_mean_backward(dk_land, k.rows(), t.landmarks);
    return {std::move(dq), std::move(dk), std::move(dv)};
}

std::vector<double> nystrom_class_scores(const NystromTrace& t) {
    // row 0 of f1 * Z * f3
    Matrix head = matmul(slice_rows(t.f1, 0, 1), t.pinv.z.back());
    Matrix row = matmul(head, t.f3);
    return {row.data().begin(), row.data().end()};
}

Matrix nystrom_attention(const Matrix& q, const Matrix& k, const Matrix& v, const AttentionConfig& cfg) {
    return nystrom_forward(q, k, v, cfg.landmark_count, cfg.nystrom_iters).o;
}

// --- agent attention -------------------------------------------------------

Matrix agent_aggregate_values(const Matrix& k, const Matrix& v, const Matrix& agents) {
    require_same_cols("agent_aggregate_values", agents, k);
    if (k.rows() != v.rows()) throw ShapeError("agent_aggregate_values: K and V row counts differ");
    return matmul(softmax_rows(matmul_nt(agents, k)), v);
}

Matrix agent_attention(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& agents) {
    require_qkv("agent_attention", q, k, v);
    require_same_cols("agent_attention", q, agents);
    return matmul(softmax_rows(matmul_nt(q, agents)), agent_aggregate_values(k, v, agents));
}

MaskThreshold mask_threshold(const Matrix& v_agg, const AggregatorParams& params, ThresholdMode mode,
                             std::size_t cnn_groups) {
    MaskThreshold out;
    out.m = linear_forward(v_agg, params.w_mask);
    switch (mode) {
        case ThresholdMode::Linear: {
            out.tau = sum(linear_forward(v_agg, params.w_tau)) / static_cast<double>(v_agg.rows());
            break;
        }
        case ThresholdMode::Mean: {
            out.tau = sum(out.m) / static_cast<double>(out.m.size());
            break;
        }
        case ThresholdMode::CNN: {
            const std::size_t d = v_agg.cols();
            if (cnn_groups == 0 || d % cnn_groups != 0) {
                throw ConfigError("mask_threshold: cnn_groups must divide the feature dimension");
            }
            // Fixed averaging kernel per group: D -> cnn_groups channels.
            const std::size_t width = d / cnn_groups;
            Matrix grouped(v_agg.rows(), cnn_groups);
            for (std::size_t r = 0; r < v_agg.rows(); ++r)
                for (std::size_t c = 0; c < d; ++c) grouped(r, c / width) += v_agg(r, c) / static_cast<double>(width);
            out.tau = sum(grouped) / static_cast<double>(grouped.size());
            break;
        }
    }
    return out;
}

Matrix binarize(const Matrix& m, double tau) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = m.data()[i] > tau ? 1.0 : 0.0;
    return out;
}

Matrix mask_denoise(const Matrix& v_agg, const Matrix& m, double tau, const AggregatorParams& params, bool denoise) {
    if (!v_agg.same_shape(m)) {
        throw ShapeError("mask_denoise: V_A " + v_agg.shape_string() + " and M " + m.shape_string() + " differ");
    }
    Matrix out = hadamard(v_agg, binarize(m, tau));
    if (denoise) out += linear_forward(v_agg, params.w_denoise);
    return out;
}

AgentTrace agent_forward(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& agents,
                         const AggregatorParams& params, const AgentOptions& opts) {
    require_qkv("agent_forward", q, k, v);
    require_same_cols("agent_forward", q, agents);
    AgentTrace t;
    t.q_agent = matmul_nt(q, agents);
    t.k_agent = matmul_nt(agents, k);
    t.s1 = softmax_rows(t.q_agent);
    t.s2 = softmax_rows(t.k_agent);
    t.v_agg = matmul(t.s2, v);
    if (opts.mask) {
        auto mt = mask_threshold(t.v_agg, params, opts.threshold_mode, opts.cnn_groups);
        t.m = std::move(mt.m);
        t.tau = mt.tau;
        t.keep = binarize(t.m, t.tau);
        t.v_md = hadamard(t.v_agg, t.keep);
        if (opts.denoise) t.v_md += linear_forward(t.v_agg, params.w_denoise);
    } else {
        t.keep = Matrix(t.v_agg.rows(), t.v_agg.cols(), 1.0);
        t.v_md = t.v_agg;
    }
    t.o = matmul(t.s1, t.v_md);
    return t;
}

AgentGrads agent_backward(const AgentTrace& t, const Matrix& q, const Matrix& k, const Matrix& v,
                          const Matrix& agents, AggregatorParams& params, const AgentOptions& opts,
                          const Matrix& d_o) {
    Matrix d_s1 = matmul_nt(d_o, t.v_md);
    Matrix d_vmd = matmul_tn(t.s1, d_o);
    Matrix d_vagg = opts.mask ? hadamard(d_vmd, t.keep) : d_vmd;
    if (opts.mask && opts.denoise) d_vagg += linear_backward(t.v_agg, params.w_denoise, nullptr, d_vmd);

    Matrix d_s2 = matmul_nt(d_vagg, v);
    Matrix dv = matmul_tn(t.s2, d_vagg);
    Matrix d_qa = softmax_rows_backward(t.s1, d_s1);
    Matrix d_ka = softmax_rows_backward(t.s2, d_s2);

    AgentGrads g;
    g.dq = matmul(d_qa, agents);
    g.d_agents = matmul_tn(d_qa, q);
    g.d_agents += matmul(d_ka, k);
    g.dk = matmul_tn(d_ka, agents);
    g.dv = std::move(dv);
    return g;
}

AmdResult amd_forward(const Matrix& h, const AggregatorParams& params, const AttentionConfig& cfg) {
    if (h.cols() != params.w_q.cols()) {
        throw ShapeError("amd_forward: H " + h.shape_string() + " does not match D=" + std::to_string(params.w_q.cols()));
    }
    const auto qkv = qkv_project(h, params);
    AgentOptions opts{true, true, cfg.threshold_mode, cfg.cnn_groups};
    auto t = agent_forward(qkv.q, qkv.k, qkv.v, params.agents.value, params, opts);
    return {std::move(t.o), std::move(t.v_agg), std::move(t.m), t.tau, std::move(t.q_agent), std::move(t.k_agent)};
}

std::vector<double> attention_scores(const Matrix& q_agent, const Matrix& k_agent, const AttentionConfig& cfg) {
    if (q_agent.rows() == 0 || q_agent.cols() != k_agent.rows() || k_agent.cols() != q_agent.rows()) {
        throw ShapeError("attention_scores: Q_A " + q_agent.shape_string() + " and K_A " + k_agent.shape_string() +
                         " are not (N+1)xn and nx(N+1)");
    }
    const std::size_t positions = k_agent.cols();
    if (positions <= 1) return {};
    Matrix qa = slice_rows(q_agent, 0, 1);
    Matrix ka = k_agent;
    if (!cfg.raw_product) {
        qa = softmax_rows(qa);
        ka = softmax_rows(ka);
    }
    Matrix row = matmul(qa, ka);
    return {row.data().begin() + 1, row.data().end()};
}

}  // namespace amdmil
