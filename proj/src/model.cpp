#include "tft/model.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "tft/errors.hpp"

namespace tft {

namespace fs = std::filesystem;

std::string to_string(PosMode mode) {
    switch (mode) {
        case PosMode::None: return "none";
        case PosMode::OneD: return "1d";
        case PosMode::TwoD: return "2d";
    }
    return "1d";
}

PosMode pos_mode_from_string(const std::string& s) {
    if (s == "none") return PosMode::None;
    if (s == "1d") return PosMode::OneD;
    if (s == "2d") return PosMode::TwoD;
    throw ConfigError("unknown position-encoding mode: " + s);
}

std::string to_string(GeluMode mode) { return mode == GeluMode::Erf ? "erf" : "tanh"; }

GeluMode gelu_mode_from_string(const std::string& s) {
    if (s == "erf") return GeluMode::Erf;
    if (s == "tanh") return GeluMode::Tanh;
    throw ConfigError("unknown gelu mode: " + s);
}

void ModelConfig::validate() const {
    if (n_t < 1 || n_f < 1 || c < 1) throw ConfigError("model config: extents must be >= 1");
    if (d_model < 1 || d_ff < 1 || h < 1 || n_blocks < 1 || n_cla < 2)
        throw ConfigError("model config: dimensions must be positive (and n_cla >= 2)");
    if (d_model % h != 0) throw ConfigError("model config: d_model must be divisible by h");
    if (r_dp < 0.0 || r_dp >= 1.0) throw ConfigError("model config: dropout rate must be in [0, 1)");
    if (class_token_rows < 1) throw ConfigError("model config: class_token_rows must be >= 1");
}

std::size_t TftParameters::total_entries() const {
    std::size_t n = 0;
    for (const auto& [name, t] : registry) n += t.numel();
    return n;
}

std::vector<std::vector<double>> TftParameters::snapshot() const {
    std::vector<std::vector<double>> snap;
    snap.reserve(registry.size());
    for (const auto& [name, t] : registry) snap.push_back(t.data());
    return snap;
}

void TftParameters::restore(const std::vector<std::vector<double>>& snap) {
    if (snap.size() != registry.size()) throw ConfigError("restore: snapshot mismatch");
    for (std::size_t i = 0; i < snap.size(); ++i) {
        if (snap[i].size() != registry[i].second.numel())
            throw ConfigError("restore: shape mismatch on " + registry[i].first);
        registry[i].second.data_mut() = snap[i];
    }
}

void TftParameters::zero_grads() {
    for (auto& [name, t] : registry) t.zero_grad();
}

namespace {

Tensor reg(TftParameters& p, const std::string& name, Tensor t) {
    t.set_requires_grad(true);
    p.registry.emplace_back(name, t);
    return t;
}

Tensor uniform_fan_in(const std::vector<int>& shape, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return uniform_tensor(shape, -bound, bound, rng);
}

}  // namespace

TftParameters init_parameters(const ModelConfig& cfg, Rng rng) {
    cfg.validate();
    TftParameters p;
    const int d = cfg.d_model;

    p.token_w = reg(p, "tokenizer.w", uniform_fan_in({cfg.patch_width(), d}, cfg.patch_width(), rng));
    p.token_b = reg(p, "tokenizer.b", Tensor::zeros({d}));
    p.class_token =
        reg(p, "class_token", normal_tensor({cfg.class_token_rows, d}, 0.0, 0.02, rng));
    if (cfg.pos_mode == PosMode::OneD)
        p.pos_1d = reg(p, "pos.e1d", normal_tensor({cfg.n_t + 1}, 0.0, 0.02, rng));
    else if (cfg.pos_mode == PosMode::TwoD)
        p.pos_2d = reg(p, "pos.e2d", normal_tensor({cfg.n_t + 1, d}, 0.0, 0.02, rng));

    for (int l = 0; l < cfg.n_blocks; ++l) {
        const std::string b = "block" + std::to_string(l) + ".";
        BlockParams blk;
        blk.wq = reg(p, b + "attn.wq", uniform_fan_in({d, d}, d, rng));
        blk.bq = reg(p, b + "attn.bq", Tensor::zeros({d}));
        blk.wk = reg(p, b + "attn.wk", uniform_fan_in({d, d}, d, rng));
        blk.wv = reg(p, b + "attn.wv", uniform_fan_in({d, d}, d, rng));
        blk.bv = reg(p, b + "attn.bv", Tensor::zeros({d}));
        blk.wo = reg(p, b + "attn.wo", uniform_fan_in({d, d}, d, rng));
        blk.bo = reg(p, b + "attn.bo", Tensor::zeros({d}));
        blk.ff_w1 = reg(p, b + "ff.w1", uniform_fan_in({d, cfg.d_ff}, d, rng));
        blk.ff_b1 = reg(p, b + "ff.b1", Tensor::zeros({cfg.d_ff}));
        blk.ff_w2 = reg(p, b + "ff.w2", uniform_fan_in({cfg.d_ff, d}, cfg.d_ff, rng));
        blk.ff_b2 = reg(p, b + "ff.b2", Tensor::zeros({d}));
        blk.ln1_g = reg(p, b + "ln1.gamma", Tensor::full({d}, 1.0));
        blk.ln1_b = reg(p, b + "ln1.beta", Tensor::zeros({d}));
        blk.ln2_g = reg(p, b + "ln2.gamma", Tensor::full({d}, 1.0));
        blk.ln2_b = reg(p, b + "ln2.beta", Tensor::zeros({d}));
        p.blocks.push_back(std::move(blk));
    }

    p.cls_w1 = reg(p, "classifier.w1", uniform_fan_in({d, cfg.d_ff}, d, rng));
    p.cls_b1 = reg(p, "classifier.b1", Tensor::zeros({cfg.d_ff}));
    p.cls_w2 = reg(p, "classifier.w2", uniform_fan_in({cfg.d_ff, cfg.n_cla}, cfg.d_ff, rng));
    p.cls_b2 = reg(p, "classifier.b2", Tensor::zeros({cfg.n_cla}));
    return p;
}

Tensor tokenize(const Tensor& tfr, const TftParameters& params, const ModelConfig& cfg) {
    const std::vector<int> expect{cfg.n_t, cfg.n_f, cfg.c};
    if (tfr.shape() != expect && tfr.shape() != std::vector<int>{cfg.n_t, cfg.patch_width()})
        throw ConfigError("tokenize: sample shape does not match the model config");
    Tensor patches = reshape(tfr, {cfg.n_t, cfg.patch_width()});
    return add_rowvec(matmul(patches, params.token_w), params.token_b);
}

Tensor assemble_input(const Tensor& tokens, const TftParameters& params, const ModelConfig& cfg) {
    Tensor cls = mean_rows(params.class_token);  // 1 x d_model; identity for a 1-row bank
    Tensor z = concat_rows(cls, tokens);
    switch (cfg.pos_mode) {
        case PosMode::None: return z;
        case PosMode::OneD: return add_pos1d(z, params.pos_1d);
        case PosMode::TwoD: return add(z, params.pos_2d);
    }
    return z;
}

std::pair<Tensor, Tensor> single_head_attention(const Tensor& q, const Tensor& k,
                                                const Tensor& v) {
    if (q.cols() != k.cols() || q.rows() != k.rows() || k.rows() != v.rows())
        throw ConfigError("attention: Q/K/V shapes disagree");
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Tensor weights = softmax_lastaxis(scale(matmul(q, transpose(k)), inv_sqrt_dk));
    return {matmul(weights, v), weights};
}

std::pair<Tensor, std::vector<Tensor>> multi_head_attention(const Tensor& x,
                                                            const BlockParams& block, int h) {
    const int d = x.cols();
    if (d % h != 0) throw ConfigError("attention: d_model not divisible by head count");
    const int dk = d / h;
    Tensor q = add_rowvec(matmul(x, block.wq), block.bq);
    Tensor k = matmul(x, block.wk);
    Tensor v = add_rowvec(matmul(x, block.wv), block.bv);
    std::vector<Tensor> heads, weights;
    heads.reserve(h);
    weights.reserve(h);
    for (int i = 0; i < h; ++i) {
        auto [out, w] = single_head_attention(slice_cols(q, i * dk, (i + 1) * dk),
                                              slice_cols(k, i * dk, (i + 1) * dk),
                                              slice_cols(v, i * dk, (i + 1) * dk));
        heads.push_back(out);
        weights.push_back(w);
    }
    Tensor merged = h == 1 ? heads.front() : concat_cols(heads);
    return {add_rowvec(matmul(merged, block.wo), block.bo), weights};
}

Tensor transformer_block(const Tensor& z, const BlockParams& block, const ModelConfig& cfg,
                         bool training, Rng* rng, std::vector<Tensor>* attn_out) {
    auto [attn, weights] = multi_head_attention(z, block, cfg.h);
    if (attn_out) *attn_out = weights;
    if (training && cfg.r_dp > 0.0) attn = dropout(attn, cfg.r_dp, *rng, true);
    Tensor z_mid = layer_norm(add(attn, z), block.ln1_g, block.ln1_b);

    Tensor hidden = gelu(add_rowvec(matmul(z_mid, block.ff_w1), block.ff_b1), cfg.gelu_mode);
    if (training && cfg.r_dp > 0.0) hidden = dropout(hidden, cfg.r_dp, *rng, true);
    Tensor ff = add_rowvec(matmul(hidden, block.ff_w2), block.ff_b2);
    return layer_norm(add(ff, z_mid), block.ln2_g, block.ln2_b);
}

ForwardResult forward(const Tensor& tfr, const TftParameters& params, const ModelConfig& cfg,
                      bool training, Rng* rng) {
    cfg.validate();
    if (training && cfg.r_dp > 0.0 && rng == nullptr)
        throw ConfigError("forward: training mode needs an rng for dropout");

    Tensor z = assemble_input(tokenize(tfr, params, cfg), params, cfg);
    if (training && cfg.r_dp > 0.0) z = dropout(z, cfg.r_dp, *rng, true);
    check_finite(z, "input embeddings");

    ForwardResult result;
    result.attention.n = cfg.n_t + 1;
    for (int l = 0; l < cfg.n_blocks; ++l) {
        std::vector<Tensor> weights;
        z = transformer_block(z, params.blocks[l], cfg, training, rng, &weights);
        check_finite(z, "block " + std::to_string(l) + " output");
        std::vector<std::vector<double>> head_weights;
        head_weights.reserve(weights.size());
        for (const Tensor& w : weights) head_weights.push_back(w.data());
        result.attention.weights.push_back(std::move(head_weights));
    }

    result.hidden = slice_rows(z, 0, 1);
    Tensor cls_hidden =
        gelu(add_rowvec(matmul(result.hidden, params.cls_w1), params.cls_b1), cfg.gelu_mode);
    result.logits = add_rowvec(matmul(cls_hidden, params.cls_w2), params.cls_b2);
    check_finite(result.logits, "classifier logits");
    result.probs = softmax_lastaxis(result.logits);
    return result;
}

ParamCount count_parameters(const ModelConfig& cfg) {
    cfg.validate();
    ParamCount out;
    const long d = cfg.d_model, dff = cfg.d_ff;
    auto item = [&](const std::string& name, long n) {
        out.breakdown.emplace_back(name, n);
        out.total += n;
    };
    item("tokenizer (n_f*c x d_model + bias)", static_cast<long>(cfg.patch_width()) * d + d);
    item("class token (rows x d_model)", static_cast<long>(cfg.class_token_rows) * d);
    switch (cfg.pos_mode) {
        case PosMode::None: item("position encoding (none)", 0); break;
        case PosMode::OneD: item("position encoding (n_t+1)", cfg.n_t + 1); break;
        case PosMode::TwoD:
            item("position encoding ((n_t+1) x d_model)", static_cast<long>(cfg.n_t + 1) * d);
            break;
    }
    const long qkv = 3 * d * d + 2 * d;  // key projection is bias-free
    const long attn_out = d * d + d;
    const long ff = d * dff + dff + dff * d + d;
    const long norms = 4 * d;
    const long per_block = qkv + attn_out + ff + norms;
    item("per block: q/k/v projections (3*d^2 + 2*d)", qkv);
    item("per block: output projection (d^2+d)", attn_out);
    item("per block: feed-forward (2*d*d_ff + d_ff + d)", ff);
    item("per block: two layer norms (4*d)", norms);
    out.total -= per_block;  // the four lines above describe one block
    item("encoder blocks total (N * per-block)", cfg.n_blocks * per_block);
    item("classifier (d*d_ff + d_ff + d_ff*n_cla + n_cla)",
         d * dff + dff + dff * cfg.n_cla + cfg.n_cla);

    std::ostringstream formula;
    formula << "total = (n_f*c)*d + d  +  rows*d  +  pos  +  N*((3*d^2 + 2*d) + (d^2+d) + "
               "(2*d*d_ff + d_ff + d) + 4*d)  +  (d*d_ff + d_ff + d_ff*n_cla + n_cla)\n"
            << "      = " << out.total << " with d=" << d << ", d_ff=" << dff
            << ", N=" << cfg.n_blocks << ", n_t=" << cfg.n_t << ", n_f=" << cfg.n_f
            << ", c=" << cfg.c << ", n_cla=" << cfg.n_cla << ", rows=" << cfg.class_token_rows
            << ", pos=" << to_string(cfg.pos_mode);
    out.formula = formula.str();
    return out;
}

// ---- checkpoints --------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string config_blob(const ModelConfig& cfg) {
    std::ostringstream out;
    out << "n_t=" << cfg.n_t << "\nn_f=" << cfg.n_f << "\nc=" << cfg.c
        << "\nd_model=" << cfg.d_model << "\nd_ff=" << cfg.d_ff << "\nh=" << cfg.h
        << "\nn_blocks=" << cfg.n_blocks << "\nr_dp=" << format_double(cfg.r_dp)
        << "\npos_mode=" << to_string(cfg.pos_mode) << "\nn_cla=" << cfg.n_cla
        << "\ngelu_mode=" << to_string(cfg.gelu_mode)
        << "\nclass_token_rows=" << cfg.class_token_rows << "\n";
    return out.str();
}

ModelConfig parse_config_blob(const std::string& blob) {
    ModelConfig cfg;
    std::istringstream in(blob);
    std::string line;
    std::map<std::string, std::string> kv;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw CheckpointError(CheckpointError::Kind::Truncated, "malformed config blob");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto want = [&](const char* key) {
        auto it = kv.find(key);
        if (it == kv.end())
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  std::string("config blob missing ") + key);
        return it->second;
    };
    cfg.n_t = std::stoi(want("n_t"));
    cfg.n_f = std::stoi(want("n_f"));
    cfg.c = std::stoi(want("c"));
    cfg.d_model = std::stoi(want("d_model"));
    cfg.d_ff = std::stoi(want("d_ff"));
    cfg.h = std::stoi(want("h"));
    cfg.n_blocks = std::stoi(want("n_blocks"));
    cfg.r_dp = std::stod(want("r_dp"));
    cfg.pos_mode = pos_mode_from_string(want("pos_mode"));
    cfg.n_cla = std::stoi(want("n_cla"));
    cfg.gelu_mode = gelu_mode_from_string(want("gelu_mode"));
    cfg.class_token_rows = std::stoi(want("class_token_rows"));
    return cfg;
}

}  // namespace

std::string checkpoint_bytes(const TftParameters& params, const ModelConfig& cfg) {
    std::string out = "TFTC";
    put_u32(out, 1);  // version
    const std::string blob = config_blob(cfg);
    put_u32(out, static_cast<std::uint32_t>(blob.size()));
    out += blob;
    for (const auto& [name, t] : params.registry) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : t.data()) {
            const float f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, sizeof bits);
            put_u32(out, bits);
        }
    }
    return out;
}

void save_checkpoint(const fs::path& path, const TftParameters& params, const ModelConfig& cfg) {
    const std::string bytes = checkpoint_bytes(params, cfg);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

std::pair<TftParameters, ModelConfig> load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());

    auto read_u32 = [&](const char* what) {
        unsigned char b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4))
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  std::string("checkpoint truncated reading ") + what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    };

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "TFTC", 4) != 0)
        throw CheckpointError(CheckpointError::Kind::BadMagic,
                              "not a checkpoint file: " + path.string());
    const std::uint32_t version = read_u32("version");
    if (version != 1)
        throw CheckpointError(CheckpointError::Kind::BadMagic,
                              "unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t blob_len = read_u32("config length");
    std::string blob(blob_len, '\0');
    if (!in.read(blob.data(), blob_len))
        throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated in config");
    ModelConfig cfg = parse_config_blob(blob);
    cfg.validate();

    // allocate with a throwaway seed, then overwrite every tensor from the file
    TftParameters params = init_parameters(cfg, Rng(0));
    for (auto& [name, tensor] : params.registry) {
        const std::uint32_t name_len = read_u32("tensor name length");
        std::string stored(name_len, '\0');
        if (!in.read(stored.data(), name_len))
            throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated in name");
        if (stored != name)
            throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                                  "tensor order mismatch: expected " + name + ", found " + stored);
        const std::uint32_t rank = read_u32("tensor rank");
        if (rank != static_cast<std::uint32_t>(tensor.rank()))
            throw CheckpointError(CheckpointError::Kind::ShapeMismatch, "rank mismatch on " + name);
        std::size_t numel = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            const std::uint32_t dim = read_u32("tensor dim");
            if (dim != static_cast<std::uint32_t>(tensor.shape()[i]))
                throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                                      "dimension mismatch on " + name);
            numel *= dim;
        }
        auto& values = tensor.data_mut();
        for (std::size_t i = 0; i < numel; ++i) {
            const std::uint32_t bits = read_u32("tensor data");
            float f;
            std::memcpy(&f, &bits, sizeof f);
            values[i] = static_cast<double>(f);
        }
    }
    return {std::move(params), cfg};
}

}  // namespace tft
