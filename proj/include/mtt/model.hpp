#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mtt/ops.hpp"
#include "mtt/tensor.hpp"

namespace mtt {

// Shared hyperparameters of the three timeline transformers. Each branch has
// its own input width and sequence length; everything else is common.
struct ModelConfig {
    int d_model = 16;
    int n_heads = 2;
    int n_enc_layers = 2;
    int n_dec_layers = 1;
    int ff_mult = 4;
    double leaky_slope = 0.01;
    bool merge_bias = true;

    int f_past = 0, f_present = 0, f_prem = 0;  // input feature widths
    int t_past = 0, t_present = 0, t_prem = 0;  // sequence lengths

    int d_k() const { return d_model / n_heads; }
    int d_v() const { return d_model / n_heads; }
    int ff_width() const { return ff_mult * d_model; }

    void validate() const;
};

// Precomputed sin/cos table, rows indexed by position.
struct PositionalEncodingTable {
    int t_max = 0;
    int d = 0;
    std::vector<double> values;  // [t_max x d] row-major

    double at(int pos, int i) const { return values[static_cast<size_t>(pos) * d + i]; }
};

PositionalEncodingTable build_positional_encoding(int t_max, int d);

// x[t] + PE[t] for every row. Throws if x has more rows than the table.
Tensor apply_positional_encoding(const Tensor& x, const PositionalEncodingTable& table,
                                 Tape* tape = nullptr);

// One attention block: per-head projections plus the output projection.
struct AttentionParams {
    std::vector<Tensor> w_q;  // h tensors [D x d_k]
    std::vector<Tensor> w_k;  // h tensors [D x d_k]
    std::vector<Tensor> w_v;  // h tensors [D x d_v]
    Tensor w_o;               // [h*d_v x D]
};

struct EncoderLayerParams {
    AttentionParams self_attn;
    Tensor ln1_gain, ln1_bias;
    Tensor ff_w1, ff_b1, ff_w2, ff_b2;
    Tensor ln2_gain, ln2_bias;
};

struct DecoderLayerParams {
    AttentionParams self_attn;
    Tensor ln1_gain, ln1_bias;
    AttentionParams cross_attn;
    Tensor ln2_gain, ln2_bias;
    Tensor ff_w1, ff_b1, ff_w2, ff_b2;
    Tensor ln3_gain, ln3_bias;
};

// One timeline transformer. The decoder consumes a single learned query
// token, so each branch summarises its window into one [1 x D] vector.
struct BranchParams {
    Tensor input_proj;  // [F_branch x D]
    std::vector<EncoderLayerParams> enc;
    Tensor decoder_query;  // [1 x D]
    std::vector<DecoderLayerParams> dec;
    PositionalEncodingTable pe;  // fixed, not trained
};

// Final dense merge: y = a_t.W_t + a_n.W_n + a_f.W_f (+ optional bias).
struct MergeHead {
    Tensor w_past, w_present, w_prem;  // [D x 1] each
    Tensor bias;                       // [1], absent when disabled
    bool use_bias = true;
};

struct MTTParams {
    ModelConfig config;
    BranchParams past, present, premonition;
    MergeHead merge;

    // All trainable tensors in declared order (checkpoint order).
    std::vector<Tensor> parameters() const;
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    int64_t parameter_count() const;
    MTTParams clone() const;
};

// Builds the parameter structure with all-zero tensors (the trainer fills
// them in).
MTTParams build_mtt_params(const ModelConfig& cfg);

// Row-wise layer normalisation with affine rescale.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       Tape* tape = nullptr);

// softmax(Q K^T / sqrt(d_k), mask) V
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    const Mask* mask = nullptr, Tape* tape = nullptr);

Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const AttentionParams& p,
                            const Mask* mask = nullptr, Tape* tape = nullptr);

// Input projection, positional encoding, then n_enc_layers of
// self-attention / add+norm / feed-forward / add+norm.
Tensor encoder_forward(const Tensor& x, const BranchParams& bp, const ModelConfig& cfg,
                       Tape* tape = nullptr);

// A learned query token attends over the encoder memory; returns [1 x D].
Tensor decoder_forward(const Tensor& memory, const BranchParams& bp, const ModelConfig& cfg,
                       Tape* tape = nullptr);

// Weighted sum of the three branch summaries -> scalar tensor [1].
// No output nonlinearity.
Tensor merge_forward(const Tensor& a_past, const Tensor& a_present, const Tensor& a_prem,
                     const MergeHead& head, Tape* tape = nullptr);

// Full tri-transformer forward over one (normalized) example.
Tensor mtt_forward(const Tensor& past, const Tensor& present, const Tensor& prem,
                   const MTTParams& params, Tape* tape = nullptr);

// Checkpoint: JSON manifest plus a flat little-endian binary of all
// parameters in declared order. Round-trips bit-exactly.
void save_checkpoint(const MTTParams& params, const std::filesystem::path& dir,
                     const std::map<std::string, std::string>& extra_manifest = {});
MTTParams load_checkpoint(const std::filesystem::path& dir);

}  // namespace mtt
