#include "tft/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "tft/errors.hpp"

namespace tft {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw ConfigError("trailing characters in number: " + s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("not a number: " + s);
    }
}

long parse_long(const std::string& s) {
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size()) throw ConfigError("trailing characters in integer: " + s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("not an integer: " + s);
    }
}

bool parse_bool(const std::string& s) {
    if (s == "1" || s == "true" || s == "on") return true;
    if (s == "0" || s == "false" || s == "off") return false;
    throw ConfigError("not a boolean: " + s);
}

template <typename T>
std::vector<T> parse_list(const std::string& s, T (*one)(const std::string&)) {
    std::vector<T> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(one(item));
    }
    return out;
}

struct Key {
    const char* name;
    const char* description;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

#define KEY_DOUBLE(field, desc)                                            \
    Key{#field, desc, [](const RunConfig& rc) { return fmt_double(rc.field); }, \
        [](RunConfig& rc, const std::string& v) { rc.field = parse_double(v); }}
#define KEY_INT(field, desc)                                                  \
    Key{#field, desc, [](const RunConfig& rc) { return std::to_string(rc.field); }, \
        [](RunConfig& rc, const std::string& v) { rc.field = static_cast<int>(parse_long(v)); }}
#define KEY_LONG(field, desc)                                                 \
    Key{#field, desc, [](const RunConfig& rc) { return std::to_string(rc.field); }, \
        [](RunConfig& rc, const std::string& v) { rc.field = parse_long(v); }}
#define KEY_BOOL(field, desc)                                                       \
    Key{#field, desc, [](const RunConfig& rc) { return rc.field ? "1" : "0"; },     \
        [](RunConfig& rc, const std::string& v) { rc.field = parse_bool(v); }}
#define KEY_STRING(field, desc)                                  \
    Key{#field, desc, [](const RunConfig& rc) { return rc.field; }, \
        [](RunConfig& rc, const std::string& v) { rc.field = v; }}

const std::vector<Key>& key_table() {
    static const std::vector<Key> keys = {
        KEY_DOUBLE(sample_rate, "sampling frequency of synthesized vibration, Hz"),
        KEY_INT(signal_length, "samples per synthesized window"),
        KEY_DOUBLE(shaft_hz, "shaft rotation frequency, Hz"),
        KEY_DOUBLE(bpfo_mult, "outer-race fault order (fault_hz = mult * shaft_hz)"),
        KEY_DOUBLE(bpfi_mult, "inner-race fault order"),
        KEY_DOUBLE(resonance_inner_hz, "ring frequency excited by inner-race impacts"),
        KEY_DOUBLE(resonance_outer_hz, "ring frequency excited by outer-race impacts"),
        KEY_DOUBLE(damping, "impact ring decay rate, 1/s"),
        KEY_DOUBLE(modulation_depth, "shaft-frequency AM depth on inner-race trains"),
        KEY_DOUBLE(noise_floor, "additive Gaussian RMS in every synthesized window"),
        KEY_DOUBLE(weak_scale, "impact amplitude factor for weak-fault classes"),
        KEY_INT(classes, "number of roster classes to synthesize (first N)"),
        Key{"class_ids", "explicit roster class ids, comma separated (overrides classes)",
            [](const RunConfig& rc) {
                std::string out;
                for (std::size_t i = 0; i < rc.class_ids.size(); ++i)
                    out += (i ? "," : "") + std::to_string(rc.class_ids[i]);
                return out;
            },
            [](RunConfig& rc, const std::string& v) {
                rc.class_ids.clear();
                for (long id : parse_list<long>(v, parse_long))
                    rc.class_ids.push_back(static_cast<int>(id));
            }},
        KEY_LONG(per_class, "samples synthesized per class"),
        KEY_INT(channels, "TFR channels (phase-shifted copies per sample)"),
        KEY_DOUBLE(snr_db, "SNR of injected noise, dB (inf = clean)"),
        KEY_BOOL(normalize, "scale each sample to unit peak"),
        KEY_INT(out_h, "TFR rows after resize (token count n_t)"),
        KEY_INT(out_w, "TFR columns after resize (n_f)"),
        KEY_DOUBLE(swt_omega0, "analytic Morlet center frequency, rad"),
        KEY_INT(swt_voices, "wavelet scales per octave"),
        KEY_DOUBLE(swt_fmin, "lowest analysis frequency, Hz"),
        KEY_DOUBLE(swt_fmax, "highest analysis frequency, Hz"),
        KEY_INT(swt_bins, "squeeze bins before resize"),
        KEY_DOUBLE(swt_gamma_rel, "reassignment threshold, relative to max |W|"),
        KEY_INT(d_model, "embedding dimension"),
        KEY_INT(d_ff, "feed-forward hidden dimension"),
        KEY_INT(heads, "attention heads"),
        KEY_INT(blocks, "encoder blocks N"),
        KEY_DOUBLE(dropout_rate, "dropout rate r_dp"),
        KEY_STRING(pos_encoding, "position encoding: none | 1d | 2d"),
        KEY_STRING(gelu, "gelu flavor: erf (exact) | tanh (fast approximation)"),
        KEY_INT(class_token_rows, "stored class-token rows (mean is the token)"),
        KEY_INT(batch_size, "minibatch size n_b"),
        KEY_INT(max_epochs, "training epochs"),
        KEY_DOUBLE(lr, "Adam learning rate"),
        KEY_DOUBLE(label_smoothing, "label smoothing rate"),
        KEY_DOUBLE(adam_beta1, "Adam first-moment decay"),
        KEY_DOUBLE(adam_beta2, "Adam second-moment decay"),
        KEY_DOUBLE(adam_eps, "Adam denominator epsilon"),
        KEY_DOUBLE(f_train, "training split fraction"),
        KEY_DOUBLE(f_val, "validation split fraction"),
        KEY_DOUBLE(f_test, "test split fraction"),
        KEY_INT(checkpoint_every, "periodic checkpoint cadence, epochs (0 = off)"),
        KEY_INT(patience, "early-stop patience, epochs (0 = off)"),
        Key{"seed", "master seed for synthesis, init, shuffling, dropout",
            [](const RunConfig& rc) { return std::to_string(rc.seed); },
            [](RunConfig& rc, const std::string& v) {
                rc.seed = static_cast<std::uint64_t>(std::stoull(v));
            }},
        Key{"snr_list", "sweep SNRs in dB, comma separated",
            [](const RunConfig& rc) {
                std::string out;
                for (std::size_t i = 0; i < rc.snr_list.size(); ++i)
                    out += (i ? "," : "") + fmt_double(rc.snr_list[i]);
                return out;
            },
            [](RunConfig& rc, const std::string& v) {
                rc.snr_list = parse_list<double>(v, parse_double);
            }},
    };
    return keys;
}

const Key& find_key(const std::string& name) {
    for (const Key& k : key_table())
        if (name == k.name) return k;
    throw ConfigError("unknown config key: " + name);
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

RunConfig profile_desk() { return RunConfig{}; }

RunConfig profile_paper() {
    RunConfig rc;
    rc.per_class = 2000;
    rc.out_h = 224;
    rc.out_w = 224;
    rc.swt_fmin = 50.0;  // 4 * sample_rate / signal_length
    rc.swt_bins = 256;
    rc.d_model = 64;
    rc.d_ff = 256;
    rc.heads = 8;
    rc.blocks = 6;
    rc.class_token_rows = 32;
    rc.batch_size = 32;
    rc.max_epochs = 100;
    rc.lr = 5e-5;
    return rc;
}

RunConfig profile_by_name(const std::string& name) {
    if (name == "desk") return profile_desk();
    if (name == "paper") return profile_paper();
    throw ConfigError("unknown profile: " + name + " (expected desk or paper)");
}

void apply_config_file(RunConfig& rc, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        find_key(key).set(rc, value);
    }
}

void apply_override(RunConfig& rc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value: " + assignment);
    find_key(trim(assignment.substr(0, eq))).set(rc, trim(assignment.substr(eq + 1)));
}

std::string config_text(const RunConfig& rc) {
    std::ostringstream out;
    for (const Key& k : key_table()) out << k.name << " = " << k.get(rc) << "\n";
    return out.str();
}

std::string config_reference() {
    const RunConfig desk = profile_desk();
    const RunConfig paper = profile_paper();
    std::ostringstream out;
    out << "Config keys (key = value files and --set overrides):\n";
    for (const Key& k : key_table()) {
        out << "  " << k.name << "\n      " << k.description << "\n      desk: " << k.get(desk)
            << "    paper: " << k.get(paper) << "\n";
    }
    return out.str();
}

FleetParams fleet_params(const RunConfig& rc) {
    FleetParams p;
    p.sample_rate = rc.sample_rate;
    p.length = rc.signal_length;
    p.shaft_hz = rc.shaft_hz;
    p.bpfo_mult = rc.bpfo_mult;
    p.bpfi_mult = rc.bpfi_mult;
    p.resonance_inner_hz = rc.resonance_inner_hz;
    p.resonance_outer_hz = rc.resonance_outer_hz;
    p.damping = rc.damping;
    p.modulation_depth = rc.modulation_depth;
    p.noise_floor = rc.noise_floor;
    p.weak_scale = rc.weak_scale;
    return p;
}

WaveletPlan wavelet_plan(const RunConfig& rc) {
    WaveletPlan plan;
    plan.sample_rate = rc.sample_rate;
    plan.omega0 = rc.swt_omega0;
    plan.voices = rc.swt_voices;
    plan.fmin = rc.swt_fmin;
    plan.fmax = rc.swt_fmax;
    plan.ssq_bins = rc.swt_bins;
    plan.gamma_rel = rc.swt_gamma_rel;
    return plan;
}

std::vector<SignalSpec> selected_specs(const RunConfig& rc) {
    const auto roster = class_roster(fleet_params(rc));
    std::vector<int> ids = rc.class_ids;
    if (ids.empty())
        for (int i = 0; i < rc.classes; ++i) ids.push_back(i);
    std::vector<SignalSpec> specs;
    int label = 0;
    for (int id : ids) {
        if (id < 0 || id >= static_cast<int>(roster.size()))
            throw ConfigError("class id out of range: " + std::to_string(id));
        SignalSpec spec = roster[id];
        spec.class_id = label++;  // compact labels in selection order
        specs.push_back(std::move(spec));
    }
    return specs;
}

DatasetParams dataset_params(const RunConfig& rc) {
    DatasetParams p;
    p.specs = selected_specs(rc);
    p.per_class = rc.per_class;
    p.channels = rc.channels;
    p.snr_db = rc.snr_db;
    p.plan = wavelet_plan(rc);
    p.out_h = rc.out_h;
    p.out_w = rc.out_w;
    p.normalize = rc.normalize;
    p.master_seed = rc.seed;
    return p;
}

ModelConfig model_config(const RunConfig& rc, int n_cla) {
    ModelConfig cfg;
    cfg.n_t = rc.out_h;
    cfg.n_f = rc.out_w;
    cfg.c = rc.channels;
    cfg.d_model = rc.d_model;
    cfg.d_ff = rc.d_ff;
    cfg.h = rc.heads;
    cfg.n_blocks = rc.blocks;
    cfg.r_dp = rc.dropout_rate;
    cfg.pos_mode = pos_mode_from_string(rc.pos_encoding);
    cfg.n_cla = n_cla;
    cfg.gelu_mode = gelu_mode_from_string(rc.gelu);
    cfg.class_token_rows = rc.class_token_rows;
    return cfg;
}

TrainConfig train_config(const RunConfig& rc) {
    TrainConfig cfg;
    cfg.batch_size = rc.batch_size;
    cfg.max_epochs = rc.max_epochs;
    cfg.adam.lr = rc.lr;
    cfg.adam.beta1 = rc.adam_beta1;
    cfg.adam.beta2 = rc.adam_beta2;
    cfg.adam.eps = rc.adam_eps;
    cfg.label_smoothing = rc.label_smoothing;
    cfg.seed = rc.seed;
    cfg.checkpoint_every = rc.checkpoint_every;
    cfg.patience = rc.patience;
    return cfg;
}

}  // namespace tft
