#include "mtt/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "mtt/errors.hpp"
#include "mtt/ioutil.hpp"

namespace mtt {

namespace {
constexpr double kLayerNormEps = 1e-8;
}

void ModelConfig::validate() const {
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
        throw ValidationError("model width " + std::to_string(d_model) +
                              " must be a positive multiple of head count " +
                              std::to_string(n_heads));
    }
    if (n_enc_layers < 1 || n_dec_layers < 1 || ff_mult < 1) {
        throw ValidationError("layer counts and ff multiplier must be >= 1");
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
        throw ValidationError("leaky slope must be in (0, 1)");
    }
    if (f_past < 1 || f_present < 1 || f_prem < 1 || t_past < 1 || t_present < 1 || t_prem < 1) {
        throw ValidationError("branch widths and sequence lengths must be >= 1");
    }
}

PositionalEncodingTable build_positional_encoding(int t_max, int d) {
    if (t_max < 1 || d < 1) throw ValidationError("positional encoding needs t_max, d >= 1");
    PositionalEncodingTable table{t_max, d, std::vector<double>(static_cast<size_t>(t_max) * d)};
    for (int pos = 0; pos < t_max; ++pos) {
        for (int i = 0; 2 * i < d; ++i) {
            const double angle = pos / std::pow(10000.0, (2.0 * i) / d);
            table.values[static_cast<size_t>(pos) * d + 2 * i] = std::sin(angle);
            if (2 * i + 1 < d) {  // odd d drops the trailing cos column
                table.values[static_cast<size_t>(pos) * d + 2 * i + 1] = std::cos(angle);
            }
        }
    }
    return table;
}

Tensor apply_positional_encoding(const Tensor& x, const PositionalEncodingTable& table,
                                 Tape* tape) {
    if (x.rank() != 2 || x.cols() != table.d) {
        throw ShapeError("positional encoding width " + std::to_string(table.d) +
                         " does not match input " + x.shape_str());
    }
    if (x.rows() > table.t_max) {
        throw ShapeError("sequence length " + std::to_string(x.rows()) +
                         " exceeds encoding table t_max " + std::to_string(table.t_max));
    }
    const int t = x.rows(), d = table.d;
    Tensor pe = Tensor::from_values(
        {t, d}, std::vector<double>(table.values.begin(),
                                    table.values.begin() + static_cast<size_t>(t) * d));
    return add(x, pe, tape);
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, Tape* tape) {
    if (x.rank() != 2 || gain.rank() != 1 || bias.rank() != 1 || gain.shape()[0] != x.cols() ||
        bias.shape()[0] != x.cols()) {
        throw ShapeError("layer_norm_rows shapes: x " + x.shape_str() + ", gain " +
                         gain.shape_str() + ", bias " + bias.shape_str());
    }
    const int m = x.rows(), n = x.cols();
    Tensor out = Tensor::zeros({m, n}, x.requires_grad() || gain.requires_grad() ||
                                           bias.requires_grad());
    // Normalised rows and per-row inverse stddev, kept for the backward rule.
    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(m) * n);
    auto inv_std = std::make_shared<std::vector<double>>(m);
    auto ov = out.values_mut();
    for (int i = 0; i < m; ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double c = x(i, j) - mean;
            var += c * c;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        (*inv_std)[i] = inv;
        for (int j = 0; j < n; ++j) {
            const double h = (x(i, j) - mean) * inv;
            (*xhat)[static_cast<size_t>(i) * n + j] = h;
            ov[static_cast<int64_t>(i) * n + j] = gain(j) * h + bias(j);
        }
    }
    for (double v : out.values()) {
        if (!std::isfinite(v)) throw NumericError("layer_norm_rows produced a non-finite value");
    }

    if (tape && out.requires_grad()) {
        tape->record([x, gain, bias, out, xhat, inv_std, m, n]() {
            const auto& dy = out.impl()->grad;
            if (dy.empty()) return;
            if (gain.requires_grad()) {
                std::vector<double> dg(static_cast<size_t>(n), 0.0);
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) {
                        const size_t idx = static_cast<size_t>(i) * n + j;
                        dg[j] += dy[idx] * (*xhat)[idx];
                    }
                }
                accumulate_grad(gain, dg);
            }
            if (bias.requires_grad()) {
                std::vector<double> db(static_cast<size_t>(n), 0.0);
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) db[j] += dy[static_cast<size_t>(i) * n + j];
                }
                accumulate_grad(bias, db);
            }
            if (x.requires_grad()) {
                std::vector<double> dx(static_cast<size_t>(m) * n);
                for (int i = 0; i < m; ++i) {
                    double mean_dh = 0.0, mean_dh_xhat = 0.0;
                    for (int j = 0; j < n; ++j) {
                        const size_t idx = static_cast<size_t>(i) * n + j;
                        const double dh = dy[idx] * gain(j);
                        mean_dh += dh;
                        mean_dh_xhat += dh * (*xhat)[idx];
                    }
                    mean_dh /= n;
                    mean_dh_xhat /= n;
                    for (int j = 0; j < n; ++j) {
                        const size_t idx = static_cast<size_t>(i) * n + j;
                        const double dh = dy[idx] * gain(j);
                        dx[idx] = (*inv_std)[i] * (dh - mean_dh - (*xhat)[idx] * mean_dh_xhat);
                    }
                }
                accumulate_grad(x, dx);
            }
        });
    }
    return out;
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    const Mask* mask, Tape* tape) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.cols() != k.cols() ||
        k.rows() != v.rows()) {
        throw ShapeError("attention shapes: Q " + q.shape_str() + ", K " + k.shape_str() +
                         ", V " + v.shape_str());
    }
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor scores = scale(matmul(q, transpose(k, tape), tape), inv_sqrt_dk, tape);
    Tensor weights = softmax_rows(scores, mask, tape);
    return matmul(weights, v, tape);
}

Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const AttentionParams& p,
                            const Mask* mask, Tape* tape) {
    if (p.w_q.empty() || p.w_q.size() != p.w_k.size() || p.w_q.size() != p.w_v.size()) {
        throw ShapeError("attention parameter head counts disagree");
    }
    Tensor heads;
    for (size_t h = 0; h < p.w_q.size(); ++h) {
        Tensor qh = matmul(x_q, p.w_q[h], tape);
        Tensor kh = matmul(x_kv, p.w_k[h], tape);
        Tensor vh = matmul(x_kv, p.w_v[h], tape);
        Tensor head = scaled_dot_product_attention(qh, kh, vh, mask, tape);
        heads = h == 0 ? head : concat_last(heads, head, tape);
    }
    return matmul(heads, p.w_o, tape);
}

namespace {

Tensor feed_forward(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                    const Tensor& b2, double slope, Tape* tape) {
    Tensor h = leaky_relu(add(matmul(x, w1, tape), b1, tape), slope, tape);
    return add(matmul(h, w2, tape), b2, tape);
}

}  // namespace

Tensor encoder_forward(const Tensor& x, const BranchParams& bp, const ModelConfig& cfg,
                       Tape* tape) {
    if (x.rank() != 2 || x.cols() != bp.input_proj.rows()) {
        throw ShapeError("encoder input " + x.shape_str() + " does not match projection " +
                         bp.input_proj.shape_str());
    }
    if (x.rows() != bp.pe.t_max) {
        throw ShapeError("encoder input length " + std::to_string(x.rows()) +
                         " does not match branch sequence length " + std::to_string(bp.pe.t_max));
    }
    Tensor h = apply_positional_encoding(matmul(x, bp.input_proj, tape), bp.pe, tape);
    for (const auto& layer : bp.enc) {
        Tensor attn = multi_head_attention(h, h, layer.self_attn, nullptr, tape);
        h = layer_norm_rows(add(h, attn, tape), layer.ln1_gain, layer.ln1_bias, tape);
        Tensor ff = feed_forward(h, layer.ff_w1, layer.ff_b1, layer.ff_w2, layer.ff_b2,
                                 cfg.leaky_slope, tape);
        h = layer_norm_rows(add(h, ff, tape), layer.ln2_gain, layer.ln2_bias, tape);
    }
    return h;
}

Tensor decoder_forward(const Tensor& memory, const ModelConfig& cfg, const BranchParams& bp,
                       Tape* tape);

Tensor decoder_forward(const Tensor& memory, const BranchParams& bp, const ModelConfig& cfg,
                       Tape* tape) {
    if (memory.rank() != 2 || memory.cols() != cfg.d_model || memory.rows() < 1) {
        throw ShapeError("decoder memory must be [T x D], got " + memory.shape_str());
    }
    // The single query token gets position 0 of the fixed encoding.
    Tensor pe0 = Tensor::from_values(
        {1, cfg.d_model},
        std::vector<double>(bp.pe.values.begin(), bp.pe.values.begin() + cfg.d_model));
    Tensor q = add(bp.decoder_query, pe0, tape);
    for (const auto& layer : bp.dec) {
        // Self-attention over a length-1 sequence; the causal mask is trivial.
        Tensor sa = multi_head_attention(q, q, layer.self_attn, nullptr, tape);
        q = layer_norm_rows(add(q, sa, tape), layer.ln1_gain, layer.ln1_bias, tape);
        Tensor ca = multi_head_attention(q, memory, layer.cross_attn, nullptr, tape);
        q = layer_norm_rows(add(q, ca, tape), layer.ln2_gain, layer.ln2_bias, tape);
        Tensor ff = feed_forward(q, layer.ff_w1, layer.ff_b1, layer.ff_w2, layer.ff_b2,
                                 cfg.leaky_slope, tape);
        q = layer_norm_rows(add(q, ff, tape), layer.ln3_gain, layer.ln3_bias, tape);
    }
    return q;
}

Tensor merge_forward(const Tensor& a_past, const Tensor& a_present, const Tensor& a_prem,
                     const MergeHead& head, Tape* tape) {
    Tensor y = add(add(matmul(a_past, head.w_past, tape), matmul(a_present, head.w_present, tape),
                       tape),
                   matmul(a_prem, head.w_prem, tape), tape);
    if (head.use_bias) y = add(y, head.bias, tape);
    return y;  // [1 x 1], no output nonlinearity
}

Tensor mtt_forward(const Tensor& past, const Tensor& present, const Tensor& prem,
                   const MTTParams& params, Tape* tape) {
    Tensor a_t = decoder_forward(encoder_forward(past, params.past, params.config, tape),
                                 params.past, params.config, tape);
    Tensor a_n = decoder_forward(encoder_forward(present, params.present, params.config, tape),
                                 params.present, params.config, tape);
    Tensor a_f =
        decoder_forward(encoder_forward(prem, params.premonition, params.config, tape),
                        params.premonition, params.config, tape);
    return merge_forward(a_t, a_n, a_f, params.merge, tape);
}

namespace {

AttentionParams build_attention(const ModelConfig& cfg) {
    AttentionParams p;
    for (int h = 0; h < cfg.n_heads; ++h) {
        p.w_q.push_back(Tensor::zeros({cfg.d_model, cfg.d_k()}, true));
        p.w_k.push_back(Tensor::zeros({cfg.d_model, cfg.d_k()}, true));
        p.w_v.push_back(Tensor::zeros({cfg.d_model, cfg.d_v()}, true));
    }
    p.w_o = Tensor::zeros({cfg.n_heads * cfg.d_v(), cfg.d_model}, true);
    return p;
}

BranchParams build_branch(const ModelConfig& cfg, int f_input, int t_seq) {
    BranchParams bp;
    bp.input_proj = Tensor::zeros({f_input, cfg.d_model}, true);
    for (int l = 0; l < cfg.n_enc_layers; ++l) {
        EncoderLayerParams layer;
        layer.self_attn = build_attention(cfg);
        layer.ln1_gain = Tensor::zeros({cfg.d_model}, true);
        layer.ln1_bias = Tensor::zeros({cfg.d_model}, true);
        layer.ff_w1 = Tensor::zeros({cfg.d_model, cfg.ff_width()}, true);
        layer.ff_b1 = Tensor::zeros({cfg.ff_width()}, true);
        layer.ff_w2 = Tensor::zeros({cfg.ff_width(), cfg.d_model}, true);
        layer.ff_b2 = Tensor::zeros({cfg.d_model}, true);
        layer.ln2_gain = Tensor::zeros({cfg.d_model}, true);
        layer.ln2_bias = Tensor::zeros({cfg.d_model}, true);
        bp.enc.push_back(std::move(layer));
    }
    bp.decoder_query = Tensor::zeros({1, cfg.d_model}, true);
    for (int l = 0; l < cfg.n_dec_layers; ++l) {
        DecoderLayerParams layer;
        layer.self_attn = build_attention(cfg);
        layer.ln1_gain = Tensor::zeros({cfg.d_model}, true);
        layer.ln1_bias = Tensor::zeros({cfg.d_model}, true);
        layer.cross_attn = build_attention(cfg);
        layer.ln2_gain = Tensor::zeros({cfg.d_model}, true);
        layer.ln2_bias = Tensor::zeros({cfg.d_model}, true);
        layer.ff_w1 = Tensor::zeros({cfg.d_model, cfg.ff_width()}, true);
        layer.ff_b1 = Tensor::zeros({cfg.ff_width()}, true);
        layer.ff_w2 = Tensor::zeros({cfg.ff_width(), cfg.d_model}, true);
        layer.ff_b2 = Tensor::zeros({cfg.d_model}, true);
        layer.ln3_gain = Tensor::zeros({cfg.d_model}, true);
        layer.ln3_bias = Tensor::zeros({cfg.d_model}, true);
        bp.dec.push_back(std::move(layer));
    }
    bp.pe = build_positional_encoding(t_seq, cfg.d_model);
    return bp;
}

void collect_attention(const std::string& prefix, const AttentionParams& p,
                       std::vector<std::pair<std::string, Tensor>>& out) {
    for (size_t h = 0; h < p.w_q.size(); ++h) {
        out.emplace_back(prefix + ".h" + std::to_string(h) + ".wq", p.w_q[h]);
        out.emplace_back(prefix + ".h" + std::to_string(h) + ".wk", p.w_k[h]);
        out.emplace_back(prefix + ".h" + std::to_string(h) + ".wv", p.w_v[h]);
    }
    out.emplace_back(prefix + ".wo", p.w_o);
}

void collect_branch(const std::string& name, const BranchParams& bp,
                    std::vector<std::pair<std::string, Tensor>>& out) {
    out.emplace_back(name + ".input_proj", bp.input_proj);
    for (size_t l = 0; l < bp.enc.size(); ++l) {
        const std::string p = name + ".enc" + std::to_string(l);
        const auto& layer = bp.enc[l];
        collect_attention(p + ".self", layer.self_attn, out);
        out.emplace_back(p + ".ln1_gain", layer.ln1_gain);
        out.emplace_back(p + ".ln1_bias", layer.ln1_bias);
        out.emplace_back(p + ".ff_w1", layer.ff_w1);
        out.emplace_back(p + ".ff_b1", layer.ff_b1);
        out.emplace_back(p + ".ff_w2", layer.ff_w2);
        out.emplace_back(p + ".ff_b2", layer.ff_b2);
        out.emplace_back(p + ".ln2_gain", layer.ln2_gain);
        out.emplace_back(p + ".ln2_bias", layer.ln2_bias);
    }
    out.emplace_back(name + ".decoder_query", bp.decoder_query);
    for (size_t l = 0; l < bp.dec.size(); ++l) {
        const std::string p = name + ".dec" + std::to_string(l);
        const auto& layer = bp.dec[l];
        collect_attention(p + ".self", layer.self_attn, out);
        out.emplace_back(p + ".ln1_gain", layer.ln1_gain);
        out.emplace_back(p + ".ln1_bias", layer.ln1_bias);
        collect_attention(p + ".cross", layer.cross_attn, out);
        out.emplace_back(p + ".ln2_gain", layer.ln2_gain);
        out.emplace_back(p + ".ln2_bias", layer.ln2_bias);
        out.emplace_back(p + ".ff_w1", layer.ff_w1);
        out.emplace_back(p + ".ff_b1", layer.ff_b1);
        out.emplace_back(p + ".ff_w2", layer.ff_w2);
        out.emplace_back(p + ".ff_b2", layer.ff_b2);
        out.emplace_back(p + ".ln3_gain", layer.ln3_gain);
        out.emplace_back(p + ".ln3_bias", layer.ln3_bias);
    }
}

}  // namespace

MTTParams build_mtt_params(const ModelConfig& cfg) {
    cfg.validate();
    MTTParams params;
    params.config = cfg;
    params.past = build_branch(cfg, cfg.f_past, cfg.t_past);
    params.present = build_branch(cfg, cfg.f_present, cfg.t_present);
    params.premonition = build_branch(cfg, cfg.f_prem, cfg.t_prem);
    params.merge.w_past = Tensor::zeros({cfg.d_model, 1}, true);
    params.merge.w_present = Tensor::zeros({cfg.d_model, 1}, true);
    params.merge.w_prem = Tensor::zeros({cfg.d_model, 1}, true);
    params.merge.use_bias = cfg.merge_bias;
    if (cfg.merge_bias) params.merge.bias = Tensor::zeros({1}, true);
    return params;
}

std::vector<std::pair<std::string, Tensor>> MTTParams::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    collect_branch("past", past, out);
    collect_branch("present", present, out);
    collect_branch("premonition", premonition, out);
    out.emplace_back("merge.w_past", merge.w_past);
    out.emplace_back("merge.w_present", merge.w_present);
    out.emplace_back("merge.w_prem", merge.w_prem);
    if (merge.use_bias) out.emplace_back("merge.bias", merge.bias);
    return out;
}

std::vector<Tensor> MTTParams::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

int64_t MTTParams::parameter_count() const {
    int64_t n = 0;
    for (const auto& t : parameters()) n += t.size();
    return n;
}

MTTParams MTTParams::clone() const {
    MTTParams copy = build_mtt_params(config);
    auto src = parameters();
    auto dst = copy.parameters();
    for (size_t i = 0; i < src.size(); ++i) {
        dst[i].impl()->values = src[i].impl()->values;
        dst[i].impl()->grad = src[i].impl()->grad;
    }
    return copy;
}

namespace {

using json = nlohmann::ordered_json;

json config_to_json(const ModelConfig& cfg) {
    return json{{"d_model", cfg.d_model},
                {"n_heads", cfg.n_heads},
                {"n_enc_layers", cfg.n_enc_layers},
                {"n_dec_layers", cfg.n_dec_layers},
                {"ff_mult", cfg.ff_mult},
                {"leaky_slope", cfg.leaky_slope},
                {"merge_bias", cfg.merge_bias},
                {"f_past", cfg.f_past},
                {"f_present", cfg.f_present},
                {"f_prem", cfg.f_prem},
                {"t_past", cfg.t_past},
                {"t_present", cfg.t_present},
                {"t_prem", cfg.t_prem}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.d_model = j.at("d_model").get<int>();
    cfg.n_heads = j.at("n_heads").get<int>();
    cfg.n_enc_layers = j.at("n_enc_layers").get<int>();
    cfg.n_dec_layers = j.at("n_dec_layers").get<int>();
    cfg.ff_mult = j.at("ff_mult").get<int>();
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
    cfg.merge_bias = j.at("merge_bias").get<bool>();
    cfg.f_past = j.at("f_past").get<int>();
    cfg.f_present = j.at("f_present").get<int>();
    cfg.f_prem = j.at("f_prem").get<int>();
    cfg.t_past = j.at("t_past").get<int>();
    cfg.t_present = j.at("t_present").get<int>();
    cfg.t_prem = j.at("t_prem").get<int>();
    return cfg;
}

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

}  // namespace

void save_checkpoint(const MTTParams& params, const std::filesystem::path& dir,
                     const std::map<std::string, std::string>& extra_manifest) {
    std::filesystem::create_directories(dir);
    const auto named = params.named_parameters();

    json manifest;
    manifest["format"] = "mtt-checkpoint";
    manifest["version"] = 1;
    manifest["config"] = config_to_json(params.config);
    json plist = json::array();
    int64_t offset = 0;
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(params.parameter_count()));
    for (const auto& [name, t] : named) {
        plist.push_back(json{{"name", name}, {"shape", t.shape()}, {"offset", offset}});
        offset += t.size();
        flat.insert(flat.end(), t.values().begin(), t.values().end());
    }
    manifest["parameters"] = plist;
    manifest["total_values"] = offset;
    for (const auto& [k, v] : extra_manifest) manifest[k] = v;

    atomic_write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    atomic_write_file(dir / "params.bin", flat.data(), flat.size() * sizeof(double));
}

MTTParams load_checkpoint(const std::filesystem::path& dir) {
    json manifest = json::parse(read_file(dir / "manifest.json"));
    if (manifest.at("format").get<std::string>() != "mtt-checkpoint") {
        throw ValidationError("'" + (dir / "manifest.json").string() + "' is not a model checkpoint");
    }
    MTTParams params = build_mtt_params(config_from_json(manifest.at("config")));

    const std::string blob = read_file(dir / "params.bin");
    const int64_t total = manifest.at("total_values").get<int64_t>();
    if (blob.size() != static_cast<size_t>(total) * sizeof(double)) {
        throw ValidationError("params.bin holds " + std::to_string(blob.size() / sizeof(double)) +
                              " values, manifest declares " + std::to_string(total));
    }
    auto named = params.named_parameters();
    const auto& plist = manifest.at("parameters");
    if (plist.size() != named.size()) {
        throw ValidationError("checkpoint parameter list does not match the declared config");
    }
    int64_t offset = 0;
    for (size_t i = 0; i < named.size(); ++i) {
        auto& [name, t] = named[i];
        const auto& entry = plist[i];
        if (entry.at("name").get<std::string>() != name ||
            entry.at("shape").get<std::vector<int>>() != t.shape()) {
            throw ValidationError("checkpoint parameter '" +
                                  entry.at("name").get<std::string>() +
                                  "' does not match expected '" + name + "'");
        }
        std::memcpy(t.impl()->values.data(), blob.data() + offset * sizeof(double),
                    static_cast<size_t>(t.size()) * sizeof(double));
        offset += t.size();
    }
    return params;
}

}  // namespace mtt
