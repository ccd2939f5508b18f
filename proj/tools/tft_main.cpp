// tft: synthetic bearing TFR fault-diagnosis pipeline driver.
// Subcommands: generate, train, eval, attn, snr, params, features.
// Exit codes: 0 success, 2 config error, 3 numeric fault, 4 I/O failure.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <set>

#include "tft/config.hpp"
#include "tft/errors.hpp"
#include "tft/eval.hpp"
#include "tft/train.hpp"

namespace fs = std::filesystem;
using namespace tft;

namespace {

struct CommonOpts {
    std::string profile = "desk";
    std::vector<std::string> config_files;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--profile", opts.profile, "base profile: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--config", opts.config_files, "key = value config file(s), applied in order");
    cmd->add_option("--set", opts.overrides, "single key=value override (repeatable)");
}

RunConfig assemble(const CommonOpts& opts, const fs::path& provenance = {}) {
    RunConfig rc = profile_by_name(opts.profile);
    if (!provenance.empty() && fs::exists(provenance)) apply_config_file(rc, provenance);
    for (const std::string& f : opts.config_files) apply_config_file(rc, f);
    for (const std::string& o : opts.overrides) apply_override(rc, o);
    return rc;
}

int manifest_class_count(const std::vector<ManifestRow>& rows) {
    std::set<int> labels;
    for (const ManifestRow& r : rows) labels.insert(r.label);
    if (labels.empty()) throw ConfigError("manifest has no rows");
    if (*labels.begin() != 0 || *labels.rbegin() != static_cast<int>(labels.size()) - 1)
        throw ConfigError("manifest labels are not contiguous from 0");
    return static_cast<int>(labels.size());
}

std::vector<ManifestRow> rebase_rows(const std::vector<ManifestRow>& rows, const fs::path& from_dir,
                                     const fs::path& to_dir) {
    std::vector<ManifestRow> out = rows;
    for (ManifestRow& r : out) {
        const fs::path abs = fs::absolute(from_dir / r.path);
        std::error_code ec;
        const fs::path rel = fs::relative(abs, to_dir, ec);
        r.path = (ec || rel.empty()) ? abs.string() : rel.string();
    }
    return out;
}

std::vector<std::string> class_names_of(const std::vector<ManifestRow>& rows, int n_cla) {
    std::vector<std::string> names(n_cla);
    for (const ManifestRow& r : rows)
        if (r.label >= 0 && r.label < n_cla && names[r.label].empty()) names[r.label] = r.class_name;
    return names;
}

// ---- generate -----------------------------------------------------------------

int cmd_generate(const CommonOpts& opts, const std::string& out_dir, bool force) {
    RunConfig rc = assemble(opts);
    const fs::path out(out_dir);
    if (fs::exists(out) && !fs::is_empty(out) && !force)
        throw ConfigError("output directory " + out.string() +
                          " is not empty (pass --force to overwrite)");
    fs::create_directories(out);
    std::ofstream prov(out / "provenance.cfg", std::ios::binary | std::ios::trunc);
    if (!prov) throw IoError("cannot write " + (out / "provenance.cfg").string());
    prov << config_text(rc);
    prov.close();

    auto rows = build_dataset(dataset_params(rc), out);
    std::cout << "wrote " << rows.size() << " samples (" << rc.out_h << "x" << rc.out_w << "x"
              << rc.channels << ") to " << out.string() << "\n";
    return 0;
}

// ---- train ----------------------------------------------------------------------

int cmd_train(const CommonOpts& opts, const std::string& data_dir, const std::string& out_dir) {
    const fs::path data(data_dir);
    RunConfig rc = assemble(opts, data / "provenance.cfg");
    const fs::path out(out_dir);
    fs::create_directories(out);

    auto manifest = read_manifest(data / "manifest.tsv");
    const int n_cla = manifest_class_count(manifest);
    auto split = split_dataset(manifest, rc.f_train, rc.f_val, rc.f_test, Rng(rc.seed).fork(777));
    write_manifest(out / "train.tsv", rebase_rows(split.train, data, out));
    write_manifest(out / "val.tsv", rebase_rows(split.val, data, out));
    write_manifest(out / "test.tsv", rebase_rows(split.test, data, out));

    auto train_set = load_samples(data, split.train);
    auto val_set = load_samples(data, split.val);
    const ModelConfig model_cfg = model_config(rc, n_cla);
    if (!train_set.empty() &&
        train_set.front().tfr.shape() != std::vector<int>{model_cfg.n_t, model_cfg.n_f, model_cfg.c}) {
        std::ostringstream msg;
        msg << "dataset sample shape [";
        for (int d : train_set.front().tfr.shape()) msg << d << " ";
        msg << "] does not match the configured model input [" << model_cfg.n_t << " "
            << model_cfg.n_f << " " << model_cfg.c << "]";
        throw ConfigError(msg.str());
    }

    auto params = init_parameters(model_cfg, Rng(rc.seed).fork(11));
    TrainConfig tcfg = train_config(rc);
    tcfg.periodic_path = out / "last.ckpt";
    auto result = train(params, model_cfg, train_set, val_set, tcfg,
                        [](const EpochStats& e) {
                            std::cout << "epoch " << e.epoch << "  train loss " << e.train_loss
                                      << " acc " << e.train_acc << "  val loss " << e.val_loss
                                      << " acc " << e.val_acc << "\n";
                        });
    write_history(out / "history.tsv", result.history);
    params.restore(result.best_params);
    save_checkpoint(out / "best.ckpt", params, model_cfg);

    if (result.diverged) {
        std::cerr << "training diverged; best checkpoint up to the fault was kept\n";
        throw NumericFault("non-finite loss during training");
    }
    std::cout << "best validation accuracy " << result.best_val_acc << " at epoch "
              << result.best_epoch << "\n";

    auto test_set = load_samples(data, split.test);
    if (!test_set.empty()) {
        auto [acc, cm] = evaluate(params, model_cfg, test_set);
        std::cout << "test accuracy " << acc << "\n"
                  << cm.format(class_names_of(manifest, n_cla));
    }
    return 0;
}

// ---- eval / attn / snr / features ------------------------------------------------

std::pair<TftParameters, ModelConfig> load_run_checkpoint(const std::string& run_dir,
                                                          std::string checkpoint) {
    if (checkpoint.empty()) checkpoint = (fs::path(run_dir) / "best.ckpt").string();
    if (!fs::exists(checkpoint))
        throw IoError("checkpoint not found: " + checkpoint + " (train first?)");
    return load_checkpoint(checkpoint);
}

std::vector<ManifestRow> load_run_manifest(const std::string& run_dir, std::string manifest,
                                           fs::path& manifest_dir) {
    if (manifest.empty()) manifest = (fs::path(run_dir) / "test.tsv").string();
    if (!fs::exists(manifest)) throw IoError("manifest not found: " + manifest);
    manifest_dir = fs::path(manifest).parent_path();
    return read_manifest(manifest);
}

int cmd_eval(const std::string& run_dir, const std::string& checkpoint, const std::string& manifest,
             const std::string& out_file) {
    auto [params, cfg] = load_run_checkpoint(run_dir, checkpoint);
    fs::path manifest_dir;
    auto rows = load_run_manifest(run_dir, manifest, manifest_dir);
    auto samples = load_samples(manifest_dir, rows);
    auto [acc, cm] = evaluate(params, cfg, samples);
    std::ostringstream report;
    report << "samples " << cm.total() << "\naccuracy " << acc << "\n"
           << cm.format(class_names_of(rows, cfg.n_cla));
    std::cout << report.str();
    if (!out_file.empty()) {
        std::ofstream f(out_file, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + out_file);
        f << report.str();
    }
    return 0;
}

int cmd_attn(const std::string& run_dir, const std::string& checkpoint, const std::string& manifest,
             int sample_index, const std::string& block_arg, const std::string& out_dir) {
    auto [params, cfg] = load_run_checkpoint(run_dir, checkpoint);
    fs::path manifest_dir;
    auto rows = load_run_manifest(run_dir, manifest, manifest_dir);
    if (sample_index < 0 || sample_index >= static_cast<int>(rows.size()))
        throw ConfigError("sample index out of range (manifest has " +
                          std::to_string(rows.size()) + " rows)");
    auto samples = load_samples(manifest_dir, {rows[sample_index]});

    int block = 0;
    if (block_arg == "first") block = 0;
    else if (block_arg == "last") block = cfg.n_blocks - 1;
    else block = std::stoi(block_arg) - 1;  // 1-based on the command line
    if (block < 0 || block >= cfg.n_blocks) throw ConfigError("block out of range: " + block_arg);

    auto res = forward(samples[0].tfr, params, cfg);
    auto summary = attention_summary(res.attention, block);
    const fs::path out(out_dir.empty() ? run_dir : out_dir);
    fs::create_directories(out);
    const std::string tag = "attn_block" + std::to_string(block + 1);
    {
        std::ofstream f(out / (tag + ".tsv"), std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write summary table");
        f << attention_summary_table(summary);
    }
    write_attention_pgm(out / (tag + ".pgm"), res.attention, block);
    std::cout << "sample " << sample_index << " (" << samples[0].class_name << "), block "
              << block + 1 << " of " << cfg.n_blocks << "\n"
              << attention_summary_table(summary);
    return 0;
}

int cmd_snr(const CommonOpts& opts, const std::string& run_dir, const std::string& data_dir,
            const std::string& checkpoint, const std::string& out_file) {
    const fs::path data(data_dir);
    if (!fs::exists(data / "provenance.cfg"))
        throw IoError("dataset provenance not found: " + (data / "provenance.cfg").string());
    RunConfig rc = assemble(opts, data / "provenance.cfg");
    auto [params, cfg] = load_run_checkpoint(run_dir, checkpoint);
    fs::path manifest_dir;
    auto rows = load_run_manifest(run_dir, "", manifest_dir);
    auto sweep = snr_sweep(params, cfg, dataset_params(rc), rows, rc.snr_list);
    const std::string table = snr_table(sweep);
    std::cout << "snr_db\taccuracy\n" << table;
    const std::string target = out_file.empty() ? (fs::path(run_dir) / "snr.tsv").string() : out_file;
    std::ofstream f(target, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + target);
    f << table;
    return 0;
}

int cmd_params(const CommonOpts& opts) {
    RunConfig rc = assemble(opts);
    const int n_cla = rc.class_ids.empty() ? rc.classes : static_cast<int>(rc.class_ids.size());
    auto count = count_parameters(model_config(rc, n_cla));
    std::size_t width = 0;
    for (const auto& [name, n] : count.breakdown) width = std::max(width, name.size());
    for (const auto& [name, n] : count.breakdown)
        std::cout << name << std::string(width + 2 - name.size(), ' ') << n << "\n";
    std::cout << "\n" << count.formula << "\n\ntotal trainable parameters: " << count.total << "\n";
    return 0;
}

int cmd_features(const std::string& run_dir, const std::string& checkpoint,
                 const std::string& manifest, const std::string& out_file) {
    auto [params, cfg] = load_run_checkpoint(run_dir, checkpoint);
    fs::path manifest_dir;
    auto rows = load_run_manifest(run_dir, manifest, manifest_dir);
    auto samples = load_samples(manifest_dir, rows);
    const std::string target =
        out_file.empty() ? (fs::path(run_dir) / "features.tsv").string() : out_file;
    export_hidden_features(params, cfg, samples, target);
    std::cout << "wrote " << samples.size() << " rows (label, rpm, " << cfg.d_model
              << " hidden values) to " << target << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"time-frequency transformer fault-diagnosis pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "tft 1.0.0");
    app.footer(config_reference());

    CommonOpts gen_opts, train_opts, snr_opts, params_opts;

    auto* generate = app.add_subcommand("generate", "synthesize a labeled TFR dataset");
    std::string gen_out = "dataset";
    bool gen_force = false;
    add_common(generate, gen_opts);
    generate->add_option("--out", gen_out, "output dataset directory");
    generate->add_flag("--force", gen_force, "allow writing into a non-empty directory");
    std::string gen_classes, gen_class_ids, gen_per_class, gen_channels, gen_snr, gen_seed;
    generate->add_option("--classes", gen_classes, "first N roster classes");
    generate->add_option("--class-ids", gen_class_ids, "explicit roster ids, e.g. 0,1,3,5");
    generate->add_option("--per-class", gen_per_class, "samples per class");
    generate->add_option("--channels", gen_channels, "TFR channels");
    generate->add_option("--snr", gen_snr, "injected SNR in dB (inf = clean)");
    generate->add_option("--seed", gen_seed, "master seed");

    auto* train_cmd = app.add_subcommand("train", "split, train, and checkpoint");
    std::string train_data = "dataset", train_out = "run";
    add_common(train_cmd, train_opts);
    train_cmd->add_option("--data", train_data, "dataset directory (from generate)");
    train_cmd->add_option("--out", train_out, "run directory for checkpoints and manifests");
    std::string tr_pos, tr_dropout, tr_epochs, tr_lr, tr_batch, tr_seed;
    train_cmd->add_option("--pos-encoding", tr_pos, "none | 1d | 2d");
    train_cmd->add_option("--dropout", tr_dropout, "dropout rate");
    train_cmd->add_option("--epochs", tr_epochs, "max epochs");
    train_cmd->add_option("--lr", tr_lr, "learning rate");
    train_cmd->add_option("--batch", tr_batch, "batch size");
    train_cmd->add_option("--seed", tr_seed, "master seed");

    auto* eval_cmd = app.add_subcommand("eval", "accuracy and confusion matrix");
    std::string eval_run = "run", eval_ckpt, eval_manifest, eval_out;
    eval_cmd->add_option("--run", eval_run, "run directory (best.ckpt + test.tsv)");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "explicit checkpoint path");
    eval_cmd->add_option("--manifest", eval_manifest, "explicit manifest path");
    eval_cmd->add_option("--out", eval_out, "also write the report here");

    auto* attn_cmd = app.add_subcommand("attn", "attention summary table and PGM heat map");
    std::string attn_run = "run", attn_ckpt, attn_manifest, attn_block = "last", attn_out;
    int attn_sample = 0;
    attn_cmd->add_option("--run", attn_run, "run directory");
    attn_cmd->add_option("--checkpoint", attn_ckpt, "explicit checkpoint path");
    attn_cmd->add_option("--manifest", attn_manifest, "explicit manifest path");
    attn_cmd->add_option("--sample", attn_sample, "manifest row index");
    attn_cmd->add_option("--block", attn_block, "first | last | 1-based block index");
    attn_cmd->add_option("--out-dir", attn_out, "output directory (default: run dir)");

    auto* snr_cmd = app.add_subcommand("snr", "accuracy sweep over injected SNR");
    std::string snr_run = "run", snr_data = "dataset", snr_ckpt, snr_out;
    add_common(snr_cmd, snr_opts);
    snr_cmd->add_option("--run", snr_run, "run directory");
    snr_cmd->add_option("--data", snr_data, "dataset directory (provenance source)");
    snr_cmd->add_option("--checkpoint", snr_ckpt, "explicit checkpoint path");
    snr_cmd->add_option("--out", snr_out, "output table (default: run/snr.tsv)");
    std::string snr_list_arg;
    snr_cmd->add_option("--snr-list", snr_list_arg, "comma-separated SNRs in dB");

    auto* params_cmd = app.add_subcommand("params", "trainable-parameter audit");
    add_common(params_cmd, params_opts);

    auto* features_cmd = app.add_subcommand("features", "export hidden class-token features");
    std::string feat_run = "run", feat_ckpt, feat_manifest, feat_out;
    features_cmd->add_option("--run", feat_run, "run directory");
    features_cmd->add_option("--checkpoint", feat_ckpt, "explicit checkpoint path");
    features_cmd->add_option("--manifest", feat_manifest, "explicit manifest path");
    features_cmd->add_option("--out", feat_out, "output file (default: run/features.tsv)");

    try {
        app.parse(argc, argv);

        if (generate->parsed()) {
            if (!gen_classes.empty()) gen_opts.overrides.push_back("classes=" + gen_classes);
            if (!gen_class_ids.empty()) gen_opts.overrides.push_back("class_ids=" + gen_class_ids);
            if (!gen_per_class.empty()) gen_opts.overrides.push_back("per_class=" + gen_per_class);
            if (!gen_channels.empty()) gen_opts.overrides.push_back("channels=" + gen_channels);
            if (!gen_snr.empty()) gen_opts.overrides.push_back("snr_db=" + gen_snr);
            if (!gen_seed.empty()) gen_opts.overrides.push_back("seed=" + gen_seed);
            return cmd_generate(gen_opts, gen_out, gen_force);
        }
        if (train_cmd->parsed()) {
            if (!tr_pos.empty()) train_opts.overrides.push_back("pos_encoding=" + tr_pos);
            if (!tr_dropout.empty()) train_opts.overrides.push_back("dropout_rate=" + tr_dropout);
            if (!tr_epochs.empty()) train_opts.overrides.push_back("max_epochs=" + tr_epochs);
            if (!tr_lr.empty()) train_opts.overrides.push_back("lr=" + tr_lr);
            if (!tr_batch.empty()) train_opts.overrides.push_back("batch_size=" + tr_batch);
            if (!tr_seed.empty()) train_opts.overrides.push_back("seed=" + tr_seed);
            return cmd_train(train_opts, train_data, train_out);
        }
        if (eval_cmd->parsed()) return cmd_eval(eval_run, eval_ckpt, eval_manifest, eval_out);
        if (attn_cmd->parsed())
            return cmd_attn(attn_run, attn_ckpt, attn_manifest, attn_sample, attn_block, attn_out);
        if (snr_cmd->parsed()) {
            if (!snr_list_arg.empty()) snr_opts.overrides.push_back("snr_list=" + snr_list_arg);
            return cmd_snr(snr_opts, snr_run, snr_data, snr_ckpt, snr_out);
        }
        if (params_cmd->parsed()) return cmd_params(params_opts);
        if (features_cmd->parsed()) return cmd_features(feat_run, feat_ckpt, feat_manifest, feat_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericFault& e) {
        std::cerr << "numeric fault: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    }
}
