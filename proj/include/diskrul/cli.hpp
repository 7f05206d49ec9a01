// Command-line front end: one subcommand per pipeline stage. Every writing
// command drops a run.json (resolved config plus artifact hashes) into its
// output directory so a run can be reproduced from the artifacts alone.
//
// Exit codes: 0 success, 1 runtime failure (message prefixed with its
// category: io, schema, domain, numeric), 2 usage error.
#pragma once

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "diskrul/common.hpp"
#include "diskrul/dataset.hpp"
#include "diskrul/eval.hpp"
#include "diskrul/featsel.hpp"
#include "diskrul/ingest.hpp"
#include "diskrul/preprocess.hpp"
#include "diskrul/seqnet.hpp"
#include "diskrul/synth.hpp"
#include "diskrul/train.hpp"

namespace diskrul {
namespace cli_detail {

namespace fs = std::filesystem;

inline nlohmann::json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("bad JSON in " + path.string() + ": " + e.what());
    }
}

inline void ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

inline void write_run_json(const fs::path& out_dir, const std::string& command,
                           const nlohmann::json& config, const std::vector<fs::path>& artifacts) {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config;
    auto hashes = nlohmann::json::object();
    for (const auto& p : artifacts)
        if (fs::exists(p)) hashes[p.filename().string()] = hex64(hash_file(p));
    j["artifacts"] = hashes;
    const fs::path path = out_dir / "run.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path.string());
}

// "2019:2021" or a single year.
inline std::pair<int, int> parse_years(const std::string& s) {
    const auto pos = s.find(':');
    try {
        if (pos == std::string::npos) {
            const int y = std::stoi(s);
            return {y, y};
        }
        return {std::stoi(s.substr(0, pos)), std::stoi(s.substr(pos + 1))};
    } catch (const std::exception&) {
        throw DomainError("bad year range '" + s + "' (expected YYYY or YYYY:YYYY)");
    }
}

inline std::vector<std::string> parse_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto& item : split(s, ',')) {
        const std::string t{trim(item)};
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

inline std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    for (const auto& item : parse_list(s)) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw DomainError("bad integer list '" + s + "'");
        }
    }
    return out;
}

inline SplitSpec parse_split(const std::string& s, std::uint64_t seed) {
    const auto parts = parse_list(s);
    if (parts.size() != 3) throw DomainError("--split expects three fractions, got '" + s + "'");
    SplitSpec spec;
    try {
        spec.train = std::stod(parts[0]);
        spec.val = std::stod(parts[1]);
        spec.test = std::stod(parts[2]);
    } catch (const std::exception&) {
        throw DomainError("bad split fractions '" + s + "'");
    }
    spec.seed = seed;
    spec.validate();
    return spec;
}

// Training flags shared by train/sweep-configs/sweep-windows. A --config file
// supplies {"train": {...}, "model": {...}}; explicit flags win over the file.
struct TrainFlags {
    TrainConfig flags;
    std::string precision_str = "single";
    CLI::Option *o_epochs = nullptr, *o_batch = nullptr, *o_lr = nullptr, *o_patience = nullptr,
                *o_min_delta = nullptr, *o_seed = nullptr, *o_precision = nullptr,
                *o_clip = nullptr;

    void add(CLI::App* cmd) {
        o_epochs = cmd->add_option("--epochs", flags.max_epochs, "maximum training epochs");
        o_batch = cmd->add_option("--batch", flags.batch_size, "minibatch size");
        o_lr = cmd->add_option("--lr", flags.learning_rate, "Adam learning rate");
        o_patience = cmd->add_option("--patience", flags.patience, "early-stopping patience");
        o_min_delta =
            cmd->add_option("--min-delta", flags.min_delta, "early-stopping improvement floor");
        o_seed = cmd->add_option("--seed", flags.seed, "top-level seed for all randomness");
        o_precision = cmd->add_option("--precision", precision_str, "single|double");
        o_clip = cmd->add_option("--clip-norm", flags.clip_norm,
                                 "global gradient-norm clip (0 disables)");
    }

    TrainConfig resolve(const nlohmann::json* file_cfg) const {
        TrainConfig cfg;
        if (file_cfg) cfg = TrainConfig::from_json(*file_cfg);
        if (o_epochs->count()) cfg.max_epochs = flags.max_epochs;
        if (o_batch->count()) cfg.batch_size = flags.batch_size;
        if (o_lr->count()) cfg.learning_rate = flags.learning_rate;
        if (o_patience->count()) cfg.patience = flags.patience;
        if (o_min_delta->count()) cfg.min_delta = flags.min_delta;
        if (o_seed->count()) cfg.seed = flags.seed;
        if (o_precision->count()) cfg.precision = precision_from_string(precision_str);
        if (o_clip->count()) cfg.clip_norm = flags.clip_norm;
        cfg.validate();
        return cfg;
    }
};

struct NetFlags {
    int units = 100, encoder_layers = 1, decoder_layers = 1;
    bool log1p_target = false;
    double input_scale = 1.0 / 255.0;
    CLI::Option *o_units = nullptr, *o_enc = nullptr, *o_dec = nullptr, *o_log1p = nullptr,
                *o_scale = nullptr;

    void add(CLI::App* cmd, bool with_shape) {
        if (with_shape) {
            o_units = cmd->add_option("--units", units, "LSTM units per layer");
            o_enc = cmd->add_option("--encoder-layers", encoder_layers, "encoder LSTM layers");
            o_dec = cmd->add_option("--decoder-layers", decoder_layers, "decoder LSTM layers");
        }
        o_log1p = cmd->add_flag("--log1p-target", log1p_target, "train on log1p(RUL)");
        o_scale = cmd->add_option("--input-scale", input_scale,
                                  "fixed input scaling applied inside the network");
    }

    // Dataset dimensions always come from the data, never the config file.
    EncoderDecoderConfig resolve(const nlohmann::json* file_cfg, int input_features,
                                 int timesteps) const {
        EncoderDecoderConfig cfg;
        if (file_cfg) {
            const auto& j = *file_cfg;
            cfg.units = j.value("units", cfg.units);
            cfg.encoder_layers = j.value("encoder_layers", cfg.encoder_layers);
            cfg.decoder_layers = j.value("decoder_layers", cfg.decoder_layers);
            if (j.contains("dense_widths"))
                cfg.dense_widths = j.at("dense_widths").get<std::vector<int>>();
            cfg.input_scale = j.value("input_scale", cfg.input_scale);
            cfg.log1p_target = j.value("log1p_target", cfg.log1p_target);
        }
        if (o_units && o_units->count()) cfg.units = units;
        if (o_enc && o_enc->count()) cfg.encoder_layers = encoder_layers;
        if (o_dec && o_dec->count()) cfg.decoder_layers = decoder_layers;
        if (o_log1p->count()) cfg.log1p_target = log1p_target;
        if (o_scale->count()) cfg.input_scale = input_scale;
        cfg.input_features = input_features;
        cfg.timesteps = timesteps;
        cfg.validate();
        return cfg;
    }
};

// --data accepts either a build-dataset output directory (pre-split files)
// or a single windows.bin, which is then split by drive here.
inline DataSplits load_splits(const fs::path& data, const std::string& split_str,
                              std::uint64_t seed) {
    DataSplits out;
    if (fs::is_directory(data)) {
        out.train = load_windows(data / "windows_train.bin");
        out.val = load_windows(data / "windows_val.bin");
        out.test = load_windows(data / "windows_test.bin");
        return out;
    }
    const WindowedDataset ds = load_windows(data);
    auto parts = split_by_drive(ds, parse_split(split_str, seed));
    out.train = std::move(parts[0]);
    out.val = std::move(parts[1]);
    out.test = std::move(parts[2]);
    return out;
}

inline Eigen::MatrixXd stack_features(const std::vector<DriveHistory>& histories,
                                      Eigen::VectorXd& y_out) {
    Eigen::Index rows = 0;
    for (const auto& h : histories) rows += h.X.rows();
    if (rows == 0) throw DomainError("no labeled rows to fit on");
    Eigen::MatrixXd X(rows, histories.front().X.cols());
    y_out.resize(rows);
    Eigen::Index at = 0;
    for (const auto& h : histories) {
        X.middleRows(at, h.X.rows()) = h.X;
        y_out.segment(at, h.rul.size()) = h.rul;
        at += h.X.rows();
    }
    return X;
}

}  // namespace cli_detail

inline int run_cli(const std::vector<std::string>& args) {
    namespace fs = std::filesystem;
    using cli_detail::ensure_out_dir;
    using cli_detail::load_json_file;
    using cli_detail::write_run_json;

    CLI::App app{"hard-disk remaining-useful-life toolkit"};
    app.name("diskrul");
    app.require_subcommand(1);

    // ---- synth ----------------------------------------------------------
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic fleet CSV");
    struct {
        std::string spec_file, out_file;
        SynthSpec flags;
        CLI::Option *o_drives, *o_mean, *o_features, *o_informative, *o_noise, *o_missing,
            *o_seed, *o_model;
    } sy;
    synth_cmd->add_option("--spec", sy.spec_file, "SynthSpec JSON file");
    synth_cmd->add_option("--out", sy.out_file, "output CSV path")->required();
    sy.o_drives = synth_cmd->add_option("--drives", sy.flags.n_drives, "number of drives");
    sy.o_mean = synth_cmd->add_option("--mean-lifetime", sy.flags.mean_lifetime_days,
                                      "mean lifetime in days");
    sy.o_features = synth_cmd->add_option("--features", sy.flags.n_features, "total features");
    sy.o_informative =
        synth_cmd->add_option("--informative", sy.flags.n_informative, "informative features");
    sy.o_noise = synth_cmd->add_option("--noise-sigma", sy.flags.noise_sigma, "relative noise");
    sy.o_missing =
        synth_cmd->add_option("--missing-rate", sy.flags.missing_rate, "value deletion rate");
    sy.o_seed = synth_cmd->add_option("--seed", sy.flags.seed, "generator seed");
    sy.o_model = synth_cmd->add_option("--model", sy.flags.model, "drive model id");
    synth_cmd->callback([&] {
        SynthSpec spec;
        if (!sy.spec_file.empty()) spec = SynthSpec::from_json(load_json_file(sy.spec_file));
        if (sy.o_drives->count()) spec.n_drives = sy.flags.n_drives;
        if (sy.o_mean->count()) spec.mean_lifetime_days = sy.flags.mean_lifetime_days;
        if (sy.o_features->count()) spec.n_features = sy.flags.n_features;
        if (sy.o_informative->count()) spec.n_informative = sy.flags.n_informative;
        if (sy.o_noise->count()) spec.noise_sigma = sy.flags.noise_sigma;
        if (sy.o_missing->count()) spec.missing_rate = sy.flags.missing_rate;
        if (sy.o_seed->count()) spec.seed = sy.flags.seed;
        if (sy.o_model->count()) spec.model = sy.flags.model;
        spec.validate();

        const fs::path out_file = sy.out_file;
        const fs::path out_dir = out_file.has_parent_path() ? out_file.parent_path() : ".";
        ensure_out_dir(out_dir);
        const auto fleet = generate(spec);
        write_fleet_csv(out_file, spec, fleet);
        std::size_t rows = 0;
        for (const auto& d : fleet) rows += d.records.size();
        std::cout << "wrote " << fleet.size() << " drives, " << rows << " rows to "
                  << out_file.string() << "\n";
        write_run_json(out_dir, "synth", {{"spec", spec.to_json()}}, {out_file});
    });

    // ---- ingest ---------------------------------------------------------
    auto* ingest_cmd = app.add_subcommand("ingest", "ingest daily CSV files into a store");
    struct {
        std::string root;
        std::vector<std::string> inputs;
        std::string model_filter;
        unsigned threads = 0;
    } ig;
    ingest_cmd->add_option("--root", ig.root, "store root directory")->required();
    ingest_cmd->add_option("--input", ig.inputs, "input CSV file (repeatable)")->required();
    ingest_cmd->add_option("--model", ig.model_filter, "keep only this drive model");
    ingest_cmd->add_option("--threads", ig.threads, "partition flush threads");
    ingest_cmd->callback([&] {
        Store store{fs::path(ig.root)};
        std::vector<fs::path> paths(ig.inputs.begin(), ig.inputs.end());
        const std::optional<std::string> filter =
            ig.model_filter.empty() ? std::nullopt
                                    : std::optional<std::string>(ig.model_filter);
        const IngestSummary s = store.ingest_csv(paths, filter, ig.threads);
        std::cout << "files processed " << s.files_processed << ", skipped " << s.files_skipped
                  << "; rows read " << s.rows_read << ", kept " << s.rows_kept
                  << ", malformed " << s.rows_malformed << "; partitions written "
                  << s.partitions_written << "\n";
        nlohmann::json cfg = {{"root", ig.root},
                              {"inputs", ig.inputs},
                              {"model", ig.model_filter},
                              {"threads", ig.threads}};
        write_run_json(store.root(), "ingest", cfg, {store.root() / "manifest.json"});
    });

    // ---- stats ----------------------------------------------------------
    auto* stats_cmd = app.add_subcommand("stats", "failed-drive counts per model");
    struct {
        std::string root, models, out_dir;
    } st;
    stats_cmd->add_option("--root", st.root, "store root directory")->required();
    stats_cmd->add_option("--models", st.models, "comma list restricting the census");
    stats_cmd->add_option("--out", st.out_dir, "also write stats.csv and run.json here");
    stats_cmd->callback([&] {
        const Store store{fs::path(st.root)};
        std::optional<std::vector<std::string>> filter;
        if (!st.models.empty()) filter = cli_detail::parse_list(st.models);
        const FailureCensus census = store.failure_census(filter);
        std::cout << "model,failed_drives\n";
        for (const auto& [model, count] : census.entries)
            std::cout << model << "," << count << "\n";
        if (!st.out_dir.empty()) {
            const fs::path dir = st.out_dir;
            ensure_out_dir(dir);
            std::ofstream out(dir / "stats.csv");
            if (!out) throw IoError("cannot write " + (dir / "stats.csv").string());
            write_csv_row(out, {"model", "failed_drives"});
            for (const auto& [model, count] : census.entries)
                write_csv_row(out, {model, std::to_string(count)});
            write_run_json(dir, "stats", {{"root", st.root}, {"models", st.models}},
                           {dir / "stats.csv"});
        }
    });

    // ---- select-features ------------------------------------------------
    auto* feat_cmd =
        app.add_subcommand("select-features", "rank attributes by boosted-tree importance");
    struct {
        std::string root, model, years, out_dir;
        int top = 10;
        GBTConfig gbt;
        std::uint64_t seed = 0;
    } sf;
    feat_cmd->add_option("--root", sf.root, "store root directory")->required();
    feat_cmd->add_option("--model", sf.model, "drive model to fit on")->required();
    feat_cmd->add_option("--years", sf.years, "year range YYYY[:YYYY]");
    feat_cmd->add_option("--out", sf.out_dir, "output directory")->required();
    feat_cmd->add_option("--top", sf.top, "number of attributes to keep");
    feat_cmd->add_option("--trees", sf.gbt.n_trees, "boosting rounds");
    feat_cmd->add_option("--depth", sf.gbt.max_depth, "tree depth");
    feat_cmd->add_option("--gbt-lr", sf.gbt.learning_rate, "boosting learning rate");
    feat_cmd->add_option("--min-leaf", sf.gbt.min_samples_leaf, "minimum samples per leaf");
    feat_cmd->add_option("--max-rows", sf.gbt.max_rows, "row subsample cap");
    feat_cmd->add_option("--seed", sf.seed, "subsampling seed");
    feat_cmd->callback([&] {
        const Store store{fs::path(sf.root)};
        const FeatureSet candidates = FeatureSet::defaults();
        HistoryOptions opt;
        if (!sf.years.empty())
            std::tie(opt.year_from, opt.year_to) = cli_detail::parse_years(sf.years);
        const auto histories = prepare_histories(store, sf.model, candidates, opt);
        if (histories.empty())
            throw DomainError("no failed drives for model " + sf.model + " in range");
        Eigen::VectorXd y;
        const Eigen::MatrixXd X = cli_detail::stack_features(histories, y);
        const GBTEnsemble ens = fit_gbt(X, y, candidates.attributes, sf.gbt, sf.seed);
        const ImportanceReport report = importance(ens);
        const FeatureSet selected = select_features(report, sf.top);

        const fs::path dir = sf.out_dir;
        ensure_out_dir(dir);
        report.save_csv(dir / "importance.csv");
        selected.save(dir / "features.json");
        std::cout << "attribute,weight,gain\n";
        for (const auto& e : report.entries)
            std::cout << e.attribute << "," << e.weight << "," << format_double(e.gain) << "\n";
        nlohmann::json cfg = {{"root", sf.root},     {"model", sf.model},
                              {"years", sf.years},   {"top", sf.top},
                              {"seed", sf.seed},     {"trees", sf.gbt.n_trees},
                              {"depth", sf.gbt.max_depth}, {"gbt_lr", sf.gbt.learning_rate},
                              {"min_leaf", sf.gbt.min_samples_leaf},
                              {"max_rows", sf.gbt.max_rows}};
        write_run_json(dir, "select-features", cfg,
                       {dir / "importance.csv", dir / "features.json"});
    });

    // ---- build-dataset --------------------------------------------------
    auto* build_cmd =
        app.add_subcommand("build-dataset", "window, split, and scale one model's histories");
    struct {
        std::string root, model, years, features_file, out_dir;
        int timesteps = 25, stride = 1, horizon = 0;
        double cap_rul = 0.0;
        bool include_healthy = false;
        std::string split = "0.70,0.15,0.15";
        std::uint64_t seed = 0;
    } bd;
    build_cmd->add_option("--root", bd.root, "store root directory")->required();
    build_cmd->add_option("--model", bd.model, "drive model")->required();
    build_cmd->add_option("--years", bd.years, "year range YYYY[:YYYY]");
    build_cmd->add_option("--features", bd.features_file,
                          "features.json (default: the standard attribute set)");
    build_cmd->add_option("--timesteps", bd.timesteps, "window size T");
    build_cmd->add_option("--stride", bd.stride, "window stride");
    build_cmd->add_option("--horizon", bd.horizon, "label shift into the future");
    build_cmd->add_option("--cap-rul", bd.cap_rul,
                          "cap labels at this many days (required for --include-healthy)");
    build_cmd->add_flag("--include-healthy", bd.include_healthy,
                        "keep non-failed drives with capped labels");
    build_cmd->add_option("--split", bd.split, "train,val,test fractions");
    build_cmd->add_option("--seed", bd.seed, "split seed");
    build_cmd->add_option("--out", bd.out_dir, "output directory")->required();
    build_cmd->callback([&] {
        const Store store{fs::path(bd.root)};
        const FeatureSet features = bd.features_file.empty()
                                        ? FeatureSet::defaults()
                                        : FeatureSet::load(bd.features_file);
        HistoryOptions opt;
        if (!bd.years.empty())
            std::tie(opt.year_from, opt.year_to) = cli_detail::parse_years(bd.years);
        opt.failed_only = !bd.include_healthy;
        if (bd.cap_rul > 0.0) opt.cap_rul = bd.cap_rul;
        if (bd.include_healthy && !opt.cap_rul)
            throw DomainError("--include-healthy requires --cap-rul");
        auto histories = prepare_histories(store, bd.model, features, opt);
        if (histories.empty())
            throw DomainError("no labeled drives for model " + bd.model + " in range");

        WindowReport wrep;
        const WindowedDataset ds =
            make_windows(histories, bd.timesteps, bd.stride, bd.horizon, &wrep);
        if (ds.empty())
            throw DomainError("no windows: no drive spans " + std::to_string(bd.timesteps) +
                              " days");
        auto parts = split_by_drive(ds, cli_detail::parse_split(bd.split, bd.seed));

        // The scaler sees only the training drives' histories.
        const auto train_serials = parts[0].distinct_serials();
        std::vector<DriveHistory> train_histories;
        for (const auto& h : histories)
            if (train_serials.count(h.serial)) train_histories.push_back(h);
        const ScalerParams scaler = fit_scaler(train_histories, features);
        for (auto& part : parts) scale_dataset(part, scaler);

        const fs::path dir = bd.out_dir;
        ensure_out_dir(dir);
        save_windows(dir / "windows_train.bin", parts[0]);
        save_windows(dir / "windows_val.bin", parts[1]);
        save_windows(dir / "windows_test.bin", parts[2]);
        scaler.save(dir / "scaler.json");
        features.save(dir / "features.json");
        std::cout << "windows train/val/test: " << parts[0].n_samples() << "/"
                  << parts[1].n_samples() << "/" << parts[2].n_samples() << " from "
                  << ds.distinct_serials().size() << " drives (" << wrep.skipped.size()
                  << " skipped as too short)\n";
        nlohmann::json cfg = {{"root", bd.root},
                              {"model", bd.model},
                              {"years", bd.years},
                              {"timesteps", bd.timesteps},
                              {"stride", bd.stride},
                              {"horizon", bd.horizon},
                              {"cap_rul", bd.cap_rul},
                              {"include_healthy", bd.include_healthy},
                              {"split", bd.split},
                              {"seed", bd.seed},
                              {"attributes", features.attributes},
                              {"skipped_drives", wrep.skipped.size()}};
        write_run_json(dir, "build-dataset", cfg,
                       {dir / "windows_train.bin", dir / "windows_val.bin",
                        dir / "windows_test.bin", dir / "scaler.json", dir / "features.json"});
    });

    // ---- train ----------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "fit the encoder-decoder network");
    struct {
        std::string data, out_dir, config_file;
        std::string split = "0.70,0.15,0.15";
        cli_detail::TrainFlags tf;
        cli_detail::NetFlags nf;
    } tr;
    train_cmd->add_option("--data", tr.data, "dataset directory or windows.bin")->required();
    train_cmd->add_option("--out", tr.out_dir, "output directory")->required();
    train_cmd->add_option("--config", tr.config_file, "JSON with {\"model\":{},\"train\":{}}");
    train_cmd->add_option("--split", tr.split, "fractions when --data is a single file");
    tr.tf.add(train_cmd);
    tr.nf.add(train_cmd, true);
    train_cmd->callback([&] {
        nlohmann::json file_cfg;
        if (!tr.config_file.empty()) file_cfg = load_json_file(tr.config_file);
        const nlohmann::json* train_json =
            file_cfg.contains("train") ? &file_cfg.at("train") : nullptr;
        const nlohmann::json* model_json =
            file_cfg.contains("model") ? &file_cfg.at("model") : nullptr;
        const TrainConfig tcfg = tr.tf.resolve(train_json);
        const DataSplits splits = cli_detail::load_splits(tr.data, tr.split, tcfg.seed);
        const EncoderDecoderConfig mcfg = tr.nf.resolve(model_json, int(splits.train.n_features),
                                                        splits.train.timesteps);

        const FitResult result = fit(mcfg, splits.train, splits.val, tcfg);
        const fs::path dir = tr.out_dir;
        ensure_out_dir(dir);
        std::visit(
            [&](const auto& net) {
                using Scalar = typename std::decay_t<decltype(net)>::scalar_type;
                const auto& adam = std::get<AdamState<Scalar>>(result.adam);
                save_checkpoint(dir / "model.ckpt", net, &adam, result.report.best_epoch);
            },
            result.model);
        {
            std::ofstream out(dir / "train_report.json");
            if (!out) throw IoError("cannot write " + (dir / "train_report.json").string());
            out << result.report.to_json().dump(2) << "\n";
        }
        const auto& rep = result.report;
        std::cout << "stopped after epoch " << rep.stopped_epoch << ", best epoch "
                  << rep.best_epoch << ", best val rmse " << format_double(rep.best_val_rmse)
                  << " (report digest " << hex64(rep.digest()) << ")\n";
        nlohmann::json cfg = {{"data", tr.data},
                              {"model", mcfg.to_json()},
                              {"train", tcfg.to_json()}};
        write_run_json(dir, "train", cfg, {dir / "model.ckpt", dir / "train_report.json"});
    });

    // ---- eval -----------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a dataset split");
    struct {
        std::string data, ckpt, out_dir;
        std::string split_name = "test";
        std::string split = "0.70,0.15,0.15";
        std::uint64_t seed = 0;
    } ev;
    eval_cmd->add_option("--data", ev.data, "dataset directory or windows.bin")->required();
    eval_cmd->add_option("--model", ev.ckpt, "model checkpoint")->required();
    eval_cmd->add_option("--out", ev.out_dir, "output directory")->required();
    eval_cmd->add_option("--split-name", ev.split_name, "train|val|test (directories only)");
    eval_cmd->add_option("--split", ev.split, "fractions when --data is a single file");
    eval_cmd->add_option("--seed", ev.seed, "split seed when --data is a single file");
    eval_cmd->callback([&] {
        const Checkpoint ckpt = load_checkpoint(ev.ckpt);
        WindowedDataset ds;
        if (fs::is_directory(fs::path(ev.data))) {
            if (ev.split_name != "train" && ev.split_name != "val" && ev.split_name != "test")
                throw DomainError("--split-name must be train, val, or test");
            ds = load_windows(fs::path(ev.data) / ("windows_" + ev.split_name + ".bin"));
        } else {
            const DataSplits splits = cli_detail::load_splits(ev.data, ev.split, ev.seed);
            ds = ev.split_name == "train" ? splits.train
                                          : ev.split_name == "val" ? splits.val : splits.test;
        }
        if (ds.empty()) throw DomainError("selected split is empty");
        const auto preds = predict_final_rul(ckpt.model, ds);
        std::vector<std::pair<double, double>> pairs(preds.size());
        for (std::size_t s = 0; s < preds.size(); ++s)
            pairs[s] = {ds.y(s, ds.timesteps - 1), preds[s]};
        const EvalReport rep =
            EvalReport::from_pairs(std::move(pairs), "", config_of(ckpt.model).name(),
                                   ds.timesteps, ev.split_name);

        const fs::path dir = ev.out_dir;
        ensure_out_dir(dir);
        save_predictions_csv(dir / ("predictions_" + ev.split_name + ".csv"), ds, preds);
        {
            std::ofstream out(dir / "eval.csv");
            if (!out) throw IoError("cannot write " + (dir / "eval.csv").string());
            write_csv_row(out, {"config", "split", "timesteps", "rmse", "r2", "n"});
            write_csv_row(out, {rep.config_id, rep.split, std::to_string(rep.window),
                                format_double(rep.rmse), format_double(rep.r2),
                                std::to_string(rep.n)});
        }
        std::cout << "split " << ev.split_name << ": rmse " << format_double(rep.rmse)
                  << ", r2 " << format_double(rep.r2) << ", n " << rep.n << "\n";
        nlohmann::json cfg = {{"data", ev.data},
                              {"model", ev.ckpt},
                              {"split_name", ev.split_name},
                              {"seed", ev.seed}};
        write_run_json(dir, "eval", cfg,
                       {dir / "eval.csv", dir / ("predictions_" + ev.split_name + ".csv")});
    });

    // ---- sweep-configs --------------------------------------------------
    auto* sc_cmd = app.add_subcommand("sweep-configs",
                                      "train the six standard configurations on one dataset");
    struct {
        std::string data, out_dir, config_file;
        std::string split = "0.70,0.15,0.15";
        cli_detail::TrainFlags tf;
        cli_detail::NetFlags nf;
    } sc;
    sc_cmd->add_option("--data", sc.data, "dataset directory or windows.bin")->required();
    sc_cmd->add_option("--out", sc.out_dir, "output directory")->required();
    sc_cmd->add_option("--config", sc.config_file, "JSON with {\"model\":{},\"train\":{}}");
    sc_cmd->add_option("--split", sc.split, "fractions when --data is a single file");
    sc.tf.add(sc_cmd);
    sc.nf.add(sc_cmd, false);  // units/layers are what the sweep varies
    sc_cmd->callback([&] {
        nlohmann::json file_cfg;
        if (!sc.config_file.empty()) file_cfg = load_json_file(sc.config_file);
        const nlohmann::json* train_json =
            file_cfg.contains("train") ? &file_cfg.at("train") : nullptr;
        const nlohmann::json* model_json =
            file_cfg.contains("model") ? &file_cfg.at("model") : nullptr;
        const TrainConfig tcfg = sc.tf.resolve(train_json);
        const DataSplits splits = cli_detail::load_splits(sc.data, sc.split, tcfg.seed);
        const EncoderDecoderConfig base = sc.nf.resolve(model_json, int(splits.train.n_features),
                                                        splits.train.timesteps);

        const ConfigSweep sweep = config_sweep(splits, base, tcfg);
        const fs::path dir = sc.out_dir;
        ensure_out_dir(dir);
        sweep.save_csv(dir / "table4.csv");
        std::cout << "config,status,train_rmse,val_rmse,test_rmse\n";
        for (const auto& r : sweep.rows)
            std::cout << r.config_id << "," << (r.ok ? "ok" : "failed") << ","
                      << (r.ok ? format_double(r.train.rmse) : "") << ","
                      << (r.ok ? format_double(r.val.rmse) : "") << ","
                      << (r.ok ? format_double(r.test.rmse) : "") << "\n";
        nlohmann::json cfg = {{"data", sc.data},
                              {"base_model", base.to_json()},
                              {"train", tcfg.to_json()}};
        write_run_json(dir, "sweep-configs", cfg, {dir / "table4.csv"});
    });

    // ---- sweep-windows --------------------------------------------------
    auto* sw_cmd = app.add_subcommand(
        "sweep-windows", "cross-validate window sizes on one model's histories");
    struct {
        std::string root, model, years, features_file, out_dir, config_file;
        std::string t_list = "5,10,15,20,25,30";
        int k = 5, stride = 1;
        double cap_rul = 0.0;
        bool include_healthy = false;
        cli_detail::TrainFlags tf;
        cli_detail::NetFlags nf;
    } sw;
    sw_cmd->add_option("--root", sw.root, "store root directory")->required();
    sw_cmd->add_option("--model", sw.model, "drive model")->required();
    sw_cmd->add_option("--years", sw.years, "year range YYYY[:YYYY]");
    sw_cmd->add_option("--features", sw.features_file, "features.json");
    sw_cmd->add_option("--t", sw.t_list, "comma list of window sizes");
    sw_cmd->add_option("--k", sw.k, "cross-validation folds");
    sw_cmd->add_option("--stride", sw.stride, "window stride");
    sw_cmd->add_option("--cap-rul", sw.cap_rul, "cap labels at this many days");
    sw_cmd->add_flag("--include-healthy", sw.include_healthy,
                     "keep non-failed drives with capped labels");
    sw_cmd->add_option("--out", sw.out_dir, "output directory")->required();
    sw_cmd->add_option("--config", sw.config_file, "JSON with {\"model\":{},\"train\":{}}");
    sw.tf.add(sw_cmd);
    sw.nf.add(sw_cmd, true);
    sw_cmd->callback([&] {
        nlohmann::json file_cfg;
        if (!sw.config_file.empty()) file_cfg = load_json_file(sw.config_file);
        const nlohmann::json* train_json =
            file_cfg.contains("train") ? &file_cfg.at("train") : nullptr;
        const nlohmann::json* model_json =
            file_cfg.contains("model") ? &file_cfg.at("model") : nullptr;
        const TrainConfig tcfg = sw.tf.resolve(train_json);
        const std::vector<int> t_values = cli_detail::parse_int_list(sw.t_list);
        if (t_values.empty()) throw DomainError("--t lists no window sizes");

        const Store store{fs::path(sw.root)};
        const FeatureSet features = sw.features_file.empty()
                                        ? FeatureSet::defaults()
                                        : FeatureSet::load(sw.features_file);
        HistoryOptions opt;
        if (!sw.years.empty())
            std::tie(opt.year_from, opt.year_to) = cli_detail::parse_years(sw.years);
        opt.failed_only = !sw.include_healthy;
        if (sw.cap_rul > 0.0) opt.cap_rul = sw.cap_rul;
        if (sw.include_healthy && !opt.cap_rul)
            throw DomainError("--include-healthy requires --cap-rul");
        auto histories = prepare_histories(store, sw.model, features, opt);
        if (histories.empty())
            throw DomainError("no labeled drives for model " + sw.model + " in range");
        // Scaled once over the sweep's drives: the folds here pick a window
        // size, they are not a held-out generalization claim.
        const ScalerParams scaler = fit_scaler(histories, features);
        for (auto& h : histories) h.X = apply_scaler(h.X, scaler);

        const EncoderDecoderConfig base =
            sw.nf.resolve(model_json, int(features.attributes.size()), 1);
        const WindowSweep sweep =
            window_sweep(histories, t_values, sw.k, base, tcfg, sw.stride);
        const fs::path dir = sw.out_dir;
        ensure_out_dir(dir);
        sweep.save_csv(dir / "fig6.csv");
        scaler.save(dir / "scaler.json");
        std::cout << "timesteps,folds,mean_train_rmse,mean_val_rmse\n";
        for (const auto& pt : sweep.points) {
            if (pt.empty) {
                std::cout << pt.timesteps << ",0,," << "\n";
                continue;
            }
            double tr_sum = 0, va_sum = 0;
            int ok = 0;
            for (const auto& f : pt.folds)
                if (f.ok) {
                    tr_sum += f.train.rmse;
                    va_sum += f.val.rmse;
                    ++ok;
                }
            std::cout << pt.timesteps << "," << ok << ","
                      << (ok ? format_double(tr_sum / ok) : "") << ","
                      << (ok ? format_double(va_sum / ok) : "") << "\n";
        }
        nlohmann::json cfg = {{"root", sw.root},     {"model", sw.model},
                              {"years", sw.years},   {"t", sw.t_list},
                              {"k", sw.k},           {"stride", sw.stride},
                              {"cap_rul", sw.cap_rul},
                              {"include_healthy", sw.include_healthy},
                              {"base_model", base.to_json()},
                              {"train", tcfg.to_json()}};
        write_run_json(dir, "sweep-windows", cfg, {dir / "fig6.csv", dir / "scaler.json"});
    });

    // ---- generalize -----------------------------------------------------
    auto* gen_cmd = app.add_subcommand(
        "generalize", "apply a trained model to other drive models' failed drives");
    struct {
        std::string root, ckpt, scaler_file, features_file, targets, source, years, out_dir;
        int stride = 1;
    } ge;
    gen_cmd->add_option("--root", ge.root, "store root directory")->required();
    gen_cmd->add_option("--model", ge.ckpt, "trained checkpoint")->required();
    gen_cmd->add_option("--scaler", ge.scaler_file, "scaler.json from the source run")
        ->required();
    gen_cmd->add_option("--features", ge.features_file, "features.json from the source run")
        ->required();
    gen_cmd->add_option("--targets", ge.targets, "comma list of target drive models")
        ->required();
    gen_cmd->add_option("--source", ge.source, "source drive model (context only)");
    gen_cmd->add_option("--years", ge.years, "year range YYYY[:YYYY]");
    gen_cmd->add_option("--stride", ge.stride, "window stride");
    gen_cmd->add_option("--out", ge.out_dir, "output directory")->required();
    gen_cmd->callback([&] {
        const Store store{fs::path(ge.root)};
        const Checkpoint ckpt = load_checkpoint(ge.ckpt);
        const ScalerParams scaler = ScalerParams::load(ge.scaler_file);
        const FeatureSet features = FeatureSet::load(ge.features_file);
        HistoryOptions opt;
        if (!ge.years.empty())
            std::tie(opt.year_from, opt.year_to) = cli_detail::parse_years(ge.years);
        const auto targets = cli_detail::parse_list(ge.targets);
        if (targets.empty()) throw DomainError("--targets lists no models");

        const fs::path dir = ge.out_dir;
        ensure_out_dir(dir);
        const GeneralizeReport rep = generalize(ckpt.model, scaler, features, targets, store,
                                                opt, ge.stride, dir, ge.source);
        rep.save_csv(dir / "table5.csv");
        std::cout << "target_model,status,r2,rmse,n\n";
        std::vector<fs::path> artifacts{dir / "table5.csv"};
        for (const auto& r : rep.rows) {
            std::cout << r.target_model << "," << r.status << ","
                      << (r.status == "ok" ? format_double(r.eval.r2) : "") << ","
                      << (r.status == "ok" ? format_double(r.eval.rmse) : "") << ","
                      << (r.status == "ok" ? std::to_string(r.eval.n) : "") << "\n";
            if (r.status == "ok")
                artifacts.push_back(dir / ("predictions_" + r.target_model + ".csv"));
        }
        nlohmann::json cfg = {{"root", ge.root},         {"model", ge.ckpt},
                              {"scaler", ge.scaler_file}, {"features", ge.features_file},
                              {"targets", ge.targets},    {"source", ge.source},
                              {"years", ge.years},        {"stride", ge.stride},
                              {"scaler_digest", rep.scaler_digest}};
        write_run_json(dir, "generalize", cfg, artifacts);
    });

    std::vector<std::string> argv_storage = args;
    std::vector<const char*> argv;
    argv.push_back("diskrul");
    for (const auto& a : argv_storage) argv.push_back(a.c_str());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.category()) << "): " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace diskrul
