#include "tft/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "tft/errors.hpp"
#include "tft/resize.hpp"

namespace tft {

namespace fs = std::filesystem;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u32(out, bits);
}

std::uint32_t get_u32(std::istream& in, const fs::path& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw IoError("truncated file: " + path.string());
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& context) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw IoError("bad number in " + context);
    return v;
}

}  // namespace

void write_tfr(const fs::path& path, const Tensor& tensor) {
    std::string blob;
    blob.reserve(8 + tensor.rank() * 4 + tensor.numel() * 4);
    blob += "TFR1";
    put_u32(blob, static_cast<std::uint32_t>(tensor.rank()));
    for (int d : tensor.shape()) put_u32(blob, static_cast<std::uint32_t>(d));
    for (double v : tensor.data()) put_f32(blob, static_cast<float>(v));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Tensor read_tfr(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "TFR1", 4) != 0)
        throw IoError("bad magic in " + path.string());
    const std::uint32_t rank = get_u32(in, path);
    if (rank == 0 || rank > 8) throw IoError("implausible rank in " + path.string());
    std::vector<int> shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        shape[i] = static_cast<int>(get_u32(in, path));
        if (shape[i] <= 0) throw IoError("bad dimension in " + path.string());
        numel *= static_cast<std::size_t>(shape[i]);
    }
    std::vector<double> data(numel);
    for (std::size_t i = 0; i < numel; ++i) {
        const std::uint32_t bits = get_u32(in, path);
        float f;
        std::memcpy(&f, &bits, sizeof f);
        data[i] = static_cast<double>(f);
    }
    return Tensor::from_data(shape, std::move(data));
}

void write_manifest(const fs::path& path, const std::vector<ManifestRow>& rows) {
    std::ostringstream out;
    for (const ManifestRow& r : rows)
        out << r.path << '\t' << r.label << '\t' << r.class_name << '\t' << format_double(r.rpm)
            << '\t' << format_double(r.snr_db) << '\t' << r.seed << '\n';
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << out.str();
    if (!f) throw IoError("write failed: " + path.string());
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    std::vector<ManifestRow> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        const std::string context = path.string() + ":" + std::to_string(lineno);
        if (fields.size() != 6) throw IoError("malformed manifest row at " + context);
        ManifestRow r;
        r.path = fields[0];
        r.label = static_cast<int>(parse_double(fields[1], context));
        r.class_name = fields[2];
        r.rpm = parse_double(fields[3], context);
        r.snr_db = parse_double(fields[4], context);
        r.seed = static_cast<std::uint64_t>(std::stoull(fields[5]));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<TfrSample> load_samples(const fs::path& manifest_dir,
                                    const std::vector<ManifestRow>& rows) {
    std::vector<TfrSample> samples;
    samples.reserve(rows.size());
    for (const ManifestRow& r : rows) {
        TfrSample s;
        s.tfr = read_tfr(manifest_dir / r.path);
        s.label = r.label;
        s.class_name = r.class_name;
        s.rpm = r.rpm;
        s.snr_db = r.snr_db;
        s.seed = r.seed;
        samples.push_back(std::move(s));
    }
    return samples;
}

Tensor synthesize_tfr(const DatasetParams& params, const SignalSpec& spec,
                      std::uint64_t sample_seed, double snr_db) {
    const int c = params.channels;
    if (c < 1) throw ConfigError("dataset: channels must be >= 1");
    const int h = params.out_h, w = params.out_w;
    Tensor stacked = Tensor::zeros({h, w, c});
    auto& sv = stacked.data_mut();
    const Rng sample_rng(sample_seed);
    for (int ch = 0; ch < c; ++ch) {
        SignalSpec ch_spec = spec;
        ch_spec.phase = static_cast<double>(ch) / c;  // phase-shifted copies
        auto signal = generate_signal(ch_spec, sample_rng.fork(ch));
        if (!(std::isinf(snr_db) && snr_db > 0.0))
            signal = inject_noise(signal, snr_db, sample_rng.fork(1000 + ch));
        Tensor plane = synchrosqueeze(cwt(signal, params.plan), params.plan);
        Tensor small = bicubic_resize(plane, h, w);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                // cubic undershoot is clamped; TFR magnitudes are nonnegative
                const double v = std::max(0.0, small.at(i, j));
                sv[(static_cast<std::size_t>(i) * w + j) * c + ch] = v;
            }
    }
    if (params.normalize) {
        double peak = 0.0;
        for (double v : sv) peak = std::max(peak, v);
        if (peak > 0.0)
            for (double& v : sv) v /= peak;
    }
    // round through storage precision so a regenerated sample is bit-identical
    // to one loaded from a TFR1 file
    for (double& v : sv) v = static_cast<double>(static_cast<float>(v));
    return stacked;
}

std::vector<ManifestRow> build_dataset(const DatasetParams& params, const fs::path& out_dir) {
    if (params.specs.size() < 2) throw ConfigError("dataset: at least two classes required");
    if (params.per_class < 1) throw ConfigError("dataset: per_class must be >= 1");
    std::error_code ec;
    fs::create_directories(out_dir / "samples", ec);
    if (ec) throw IoError("cannot create " + (out_dir / "samples").string());

    const Rng master(params.master_seed);
    std::vector<ManifestRow> rows;
    long index = 0;
    for (const SignalSpec& spec : params.specs) {
        for (long i = 0; i < params.per_class; ++i, ++index) {
            const std::uint64_t sample_seed = master.fork(static_cast<std::uint64_t>(index)).seed();
            Tensor tfr = synthesize_tfr(params, spec, sample_seed, params.snr_db);
            char name[64];
            std::snprintf(name, sizeof name, "samples/s%06ld.tfr", index);
            write_tfr(out_dir / name, tfr);
            ManifestRow r;
            r.path = name;
            r.label = spec.class_id;
            r.class_name = spec.class_name;
            r.rpm = spec.shaft_hz * 60.0;
            r.snr_db = params.snr_db;
            r.seed = sample_seed;
            rows.push_back(std::move(r));
        }
    }
    write_manifest(out_dir / "manifest.tsv", rows);
    return rows;
}

SplitResult split_dataset(const std::vector<ManifestRow>& rows, double f_train, double f_val,
                          double f_test, Rng rng) {
    const double fractions[3] = {f_train, f_val, f_test};
    double total = 0.0;
    for (double f : fractions) {
        if (f < 0.0) throw ConfigError("split: negative fraction");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < rows.size(); ++i) by_class[rows[i].label].push_back(i);

    SplitResult result;
    for (auto& [label, indices] : by_class) {
        // seeded Fisher-Yates
        for (std::size_t i = indices.size(); i > 1; --i)
            std::swap(indices[i - 1], indices[rng.below(i)]);

        const long n = static_cast<long>(indices.size());
        long counts[3];
        double remainders[3];
        long assigned = 0;
        for (int k = 0; k < 3; ++k) {
            const double want = fractions[k] * n;
            counts[k] = static_cast<long>(std::floor(want));
            remainders[k] = want - counts[k];
            assigned += counts[k];
        }
        while (assigned < n) {  // largest remainder, ties to the earlier split
            int best = 0;
            for (int k = 1; k < 3; ++k)
                if (remainders[k] > remainders[best]) best = k;
            ++counts[best];
            remainders[best] = -1.0;
            ++assigned;
        }
        for (int k = 0; k < 3; ++k)
            if (fractions[k] > 0.0 && counts[k] == 0)
                throw ConfigError("split: class " + std::to_string(label) +
                                  " has too few samples for stratification");
        std::vector<ManifestRow>* outs[3] = {&result.train, &result.val, &result.test};
        std::size_t pos = 0;
        for (int k = 0; k < 3; ++k)
            for (long i = 0; i < counts[k]; ++i) outs[k]->push_back(rows[indices[pos++]]);
    }
    return result;
}

}  // namespace tft
