// Evaluation metrics and the three experiment harnesses: the six-configuration
// sweep, the window-size sweep with grouped k-fold cross-validation, and
// cross-drive-model generalization with a frozen source scaler.
#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diskrul/common.hpp"
#include "diskrul/csv.hpp"
#include "diskrul/dataset.hpp"
#include "diskrul/ingest.hpp"
#include "diskrul/preprocess.hpp"
#include "diskrul/train.hpp"

namespace diskrul {

inline double rmse(const std::vector<double>& y, const std::vector<double>& y_hat) {
    if (y.empty() || y.size() != y_hat.size())
        throw DomainError("rmse: need equal nonzero lengths");
    double sse = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y_hat[i] - y[i];
        sse += d * d;
    }
    return std::sqrt(sse / double(y.size()));
}

inline double r2(const std::vector<double>& y, const std::vector<double>& y_hat) {
    if (y.size() != y_hat.size()) throw DomainError("r2: length mismatch");
    if (y.size() < 2) throw DomainError("r2: need at least two points");
    double sum = 0.0;
    for (double v : y) sum += v;
    const double mean = sum / double(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - y_hat[i];
        const double d = y[i] - mean;
        ss_res += r * r;
        ss_tot += d * d;
    }
    if (ss_tot == 0.0) throw DomainError("r2: undefined for constant targets");
    return 1.0 - ss_res / ss_tot;
}

struct EvalReport {
    std::string drive_model;
    std::string config_id;
    int window = 0;
    std::string split;
    double rmse = 0.0;
    double r2 = std::numeric_limits<double>::quiet_NaN();  // NaN when undefined
    std::size_t n = 0;
    std::vector<std::pair<double, double>> pairs;  // (expected, predicted)

    static EvalReport from_pairs(std::vector<std::pair<double, double>> pairs,
                                 std::string drive_model, std::string config_id, int window,
                                 std::string split) {
        if (pairs.empty()) throw DomainError("evaluation needs at least one prediction");
        std::vector<double> y(pairs.size()), y_hat(pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            y[i] = pairs[i].first;
            y_hat[i] = pairs[i].second;
        }
        EvalReport rep;
        rep.drive_model = std::move(drive_model);
        rep.config_id = std::move(config_id);
        rep.window = window;
        rep.split = std::move(split);
        rep.n = pairs.size();
        rep.rmse = diskrul::rmse(y, y_hat);
        try {
            rep.r2 = diskrul::r2(y, y_hat);
        } catch (const DomainError&) {
            // constant targets or a single point: R^2 stays NaN
        }
        rep.pairs = std::move(pairs);
        return rep;
    }
};

inline std::vector<std::pair<double, double>> final_step_pairs(const AnyModel& model,
                                                              const WindowedDataset& ds) {
    const auto preds = predict_final_rul(model, ds);
    std::vector<std::pair<double, double>> pairs(preds.size());
    const int T = ds.timesteps;
    for (std::size_t s = 0; s < preds.size(); ++s)
        pairs[s] = {ds.y(s, T - 1), preds[s]};
    return pairs;
}

inline EvalReport evaluate_final(const AnyModel& model, const WindowedDataset& ds,
                                 std::string drive_model, std::string config_id,
                                 std::string split) {
    return EvalReport::from_pairs(final_step_pairs(model, ds), std::move(drive_model),
                                  std::move(config_id), ds.timesteps, std::move(split));
}

inline void save_predictions_csv(const std::filesystem::path& path, const WindowedDataset& ds,
                                 const std::vector<double>& preds) {
    if (preds.size() != ds.n_samples())
        throw DomainError("prediction count does not match dataset");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_csv_row(out, {"serial_number", "expected_rul", "predicted_rul"});
    const int T = ds.timesteps;
    for (std::size_t s = 0; s < preds.size(); ++s)
        write_csv_row(out, {ds.group(s), format_double(ds.y(s, T - 1)),
                            format_double(preds[s])});
    if (!out) throw IoError("write failed for " + path.string());
}

// Rescale a windowed dataset in place; window values are history rows, so this
// commutes with windowing.
inline void scale_dataset(WindowedDataset& ds, const ScalerParams& scaler) {
    if (ds.attributes != scaler.attributes)
        throw DomainError("scaler attributes do not match dataset");
    const std::size_t F = ds.n_features;
    for (std::size_t f = 0; f < F; ++f) {
        const double lo = scaler.min[f];
        const double span = scaler.max[f] - lo;
        const double k = span == 0.0 ? 0.0 : 255.0 / span;
        for (std::size_t i = f; i < ds.X.size(); i += F) ds.X[i] = (ds.X[i] - lo) * k;
    }
}

struct HistoryOptions {
    int year_from = kMinPartitionYear;
    int year_to = kMaxPartitionYear;
    bool failed_only = true;
    std::optional<double> cap_rul;  // keep healthy drives, capping labels here
};

// Extract per-drive histories for one drive model: clean, interpolate, label.
// Scaling happens later, once the training drives are known.
inline std::vector<DriveHistory> prepare_histories(const Store& store, const std::string& model,
                                                   const FeatureSet& features,
                                                   const HistoryOptions& opt = {}) {
    std::vector<DriveHistory> out;
    for (const auto& records : store.extract_histories(model, opt.year_from, opt.year_to)) {
        DriveHistory h = build_history(records, features);
        if (h.failed) {
            if (opt.cap_rul)
                label_rul_capped(h, *opt.cap_rul);
            else
                label_rul(h);
        } else if (!opt.failed_only && opt.cap_rul) {
            label_rul_capped(h, *opt.cap_rul);
        } else {
            continue;  // healthy drives have no observed failure to label from
        }
        out.push_back(std::move(h));
    }
    return out;
}

struct DataSplits {
    WindowedDataset train, val, test;
};

struct ConfigRow {
    int units;
    int encoder_layers;
    int decoder_layers;
};

// The six swept configurations, identified as units-encoderlayers-decoderlayers.
inline std::vector<ConfigRow> standard_configs() {
    return {{50, 1, 1}, {100, 1, 1}, {200, 1, 1}, {100, 1, 3}, {100, 3, 1}, {100, 2, 2}};
}

struct ConfigResult {
    std::string config_id;
    int units = 0, encoder_layers = 0, decoder_layers = 0;
    bool ok = false;
    std::string error;
    EvalReport train, val, test;
    std::size_t param_count = 0;
    int best_epoch = 0, stopped_epoch = 0;
    double seconds = 0.0;
};

struct ConfigSweep {
    std::vector<ConfigResult> rows;

    void save_csv(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        write_csv_row(out, {"config", "units", "encoder_layers", "decoder_layers", "status",
                            "train_rmse", "val_rmse", "test_rmse", "train_r2", "val_r2",
                            "test_r2", "param_count", "best_epoch", "stopped_epoch", "seconds",
                            "error"});
        for (const auto& r : rows) {
            if (r.ok)
                write_csv_row(out, {r.config_id, std::to_string(r.units),
                                    std::to_string(r.encoder_layers),
                                    std::to_string(r.decoder_layers), "ok",
                                    format_double(r.train.rmse), format_double(r.val.rmse),
                                    format_double(r.test.rmse), format_double(r.train.r2),
                                    format_double(r.val.r2), format_double(r.test.r2),
                                    std::to_string(r.param_count), std::to_string(r.best_epoch),
                                    std::to_string(r.stopped_epoch), format_double(r.seconds),
                                    ""});
            else
                write_csv_row(out, {r.config_id, std::to_string(r.units),
                                    std::to_string(r.encoder_layers),
                                    std::to_string(r.decoder_layers), "failed", "", "", "", "",
                                    "", "", "", "", "", format_double(r.seconds), r.error});
        }
        if (!out) throw IoError("write failed for " + path.string());
    }
};

// Trains every standard configuration on identical splits and seed so row
// differences are attributable to the architecture alone. A row that fails
// is marked and the sweep continues.
inline ConfigSweep config_sweep(const DataSplits& splits, const EncoderDecoderConfig& base,
                                const TrainConfig& tcfg) {
    ConfigSweep sweep;
    for (const auto& row : standard_configs()) {
        ConfigResult res;
        res.units = row.units;
        res.encoder_layers = row.encoder_layers;
        res.decoder_layers = row.decoder_layers;
        EncoderDecoderConfig cfg = base;
        cfg.units = row.units;
        cfg.encoder_layers = row.encoder_layers;
        cfg.decoder_layers = row.decoder_layers;
        res.config_id = cfg.name();
        const auto t0 = std::chrono::steady_clock::now();
        try {
            auto fitted = fit(cfg, splits.train, splits.val, tcfg);
            res.param_count =
                std::visit([](const auto& net) { return net.param_count(); }, fitted.model);
            res.best_epoch = fitted.report.best_epoch;
            res.stopped_epoch = fitted.report.stopped_epoch;
            res.train = evaluate_final(fitted.model, splits.train, "", res.config_id, "train");
            res.val = evaluate_final(fitted.model, splits.val, "", res.config_id, "val");
            res.test = evaluate_final(fitted.model, splits.test, "", res.config_id, "test");
            res.ok = true;
        } catch (const std::exception& e) {
            res.error = e.what();
        }
        res.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        sweep.rows.push_back(std::move(res));
    }
    return sweep;
}

struct FoldResult {
    int timesteps = 0;
    int fold = 0;
    bool ok = false;
    std::string error;
    EvalReport train, val;
    TrainReport trajectory;
    double seconds = 0.0;
};

struct WindowPoint {
    int timesteps = 0;
    bool empty = false;
    std::string note;
    std::vector<FoldResult> folds;
};

struct WindowSweep {
    std::vector<WindowPoint> points;

    void save_csv(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        write_csv_row(out, {"timesteps", "fold", "status", "train_rmse", "val_rmse", "train_r2",
                            "val_r2", "n_train", "n_val", "best_epoch", "stopped_epoch",
                            "seconds", "note"});
        for (const auto& pt : points) {
            if (pt.empty) {
                write_csv_row(out, {std::to_string(pt.timesteps), "", "empty", "", "", "", "",
                                    "", "", "", "", "", pt.note});
                continue;
            }
            for (const auto& f : pt.folds) {
                if (f.ok)
                    write_csv_row(out, {std::to_string(pt.timesteps), std::to_string(f.fold),
                                        "ok", format_double(f.train.rmse),
                                        format_double(f.val.rmse), format_double(f.train.r2),
                                        format_double(f.val.r2), std::to_string(f.train.n),
                                        std::to_string(f.val.n),
                                        std::to_string(f.trajectory.best_epoch),
                                        std::to_string(f.trajectory.stopped_epoch),
                                        format_double(f.seconds), ""});
                else
                    write_csv_row(out, {std::to_string(pt.timesteps), std::to_string(f.fold),
                                        "failed", "", "", "", "", "", "", "", "",
                                        format_double(f.seconds), f.error});
            }
        }
        if (!out) throw IoError("write failed for " + path.string());
    }
};

// For each window size: rebuild windows from the given (labeled, scaled)
// histories and cross-validate by drive. Window sizes no drive can fill are
// reported as empty points rather than failing the sweep.
inline WindowSweep window_sweep(const std::vector<DriveHistory>& histories,
                                const std::vector<int>& t_values, int k,
                                const EncoderDecoderConfig& base, const TrainConfig& tcfg,
                                int stride = 1) {
    if (k < 2) throw DomainError("window_sweep: need at least 2 folds");
    WindowSweep sweep;
    for (int T : t_values) {
        WindowPoint pt;
        pt.timesteps = T;
        WindowReport wrep;
        const WindowedDataset ds = make_windows(histories, T, stride, 0, &wrep);
        if (ds.empty()) {
            pt.empty = true;
            pt.note = "no drive has " + std::to_string(T) + " labeled days";
            sweep.points.push_back(std::move(pt));
            continue;
        }
        if (ds.distinct_serials().size() < std::size_t(k)) {
            pt.empty = true;
            pt.note = "only " + std::to_string(ds.distinct_serials().size()) + " drives for " +
                      std::to_string(k) + " folds";
            sweep.points.push_back(std::move(pt));
            continue;
        }
        EncoderDecoderConfig cfg = base;
        cfg.timesteps = T;
        const auto folds = kfold_by_drive(ds, k, tcfg.seed);
        for (std::size_t i = 0; i < folds.size(); ++i) {
            FoldResult fr;
            fr.timesteps = T;
            fr.fold = int(i);
            const auto t0 = std::chrono::steady_clock::now();
            try {
                auto fitted = fit(cfg, folds[i].first, folds[i].second, tcfg);
                fr.trajectory = fitted.report;
                fr.train = evaluate_final(fitted.model, folds[i].first, "", cfg.name(),
                                          "fold" + std::to_string(i) + "-train");
                fr.val = evaluate_final(fitted.model, folds[i].second, "", cfg.name(),
                                        "fold" + std::to_string(i) + "-val");
                fr.ok = true;
            } catch (const std::exception& e) {
                fr.error = e.what();
            }
            fr.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            pt.folds.push_back(std::move(fr));
        }
        sweep.points.push_back(std::move(pt));
    }
    return sweep;
}

struct GeneralizeRow {
    std::string target_model;
    std::string status;  // ok | missing | empty | failed
    std::string error;
    EvalReport eval;
    std::size_t n_drives = 0;
    double seconds = 0.0;
};

struct GeneralizeReport {
    std::string source_model;
    std::string scaler_digest;
    std::vector<GeneralizeRow> rows;

    void save_csv(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        write_csv_row(out, {"target_model", "status", "r2", "rmse", "n_windows", "n_drives",
                            "seconds", "error"});
        for (const auto& r : rows) {
            if (r.status == "ok")
                write_csv_row(out, {r.target_model, r.status, format_double(r.eval.r2),
                                    format_double(r.eval.rmse), std::to_string(r.eval.n),
                                    std::to_string(r.n_drives), format_double(r.seconds), ""});
            else
                write_csv_row(out, {r.target_model, r.status, "", "", "", "",
                                    format_double(r.seconds), r.error});
        }
        if (!out) throw IoError("write failed for " + path.string());
    }
};

// Applies a trained model to other drive models' failed drives. The source
// scaler and feature set are reused untouched; refitting on a target would
// leak its statistics into the transform.
inline GeneralizeReport generalize(const AnyModel& model, const ScalerParams& scaler,
                                   const FeatureSet& features,
                                   const std::vector<std::string>& targets, const Store& store,
                                   const HistoryOptions& opt = {}, int stride = 1,
                                   const std::optional<std::filesystem::path>& out_dir =
                                       std::nullopt,
                                   std::string source_model = {}) {
    const auto& mcfg = config_of(model);
    const std::uint64_t digest_before = scaler.digest();
    GeneralizeReport rep;
    rep.source_model = std::move(source_model);

    std::vector<std::string> known_models;
    for (const auto& key : store.partitions()) known_models.push_back(key.model);

    for (const auto& target : targets) {
        GeneralizeRow row;
        row.target_model = target;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const bool present = std::find(known_models.begin(), known_models.end(), target) !=
                                 known_models.end();
            if (!present) {
                row.status = "missing";
                row.error = "model not present in store";
            } else {
                HistoryOptions hopt = opt;
                hopt.failed_only = true;  // generalization scores observed failures only
                auto histories = prepare_histories(store, target, features, hopt);
                for (auto& h : histories) h.X = apply_scaler(h.X, scaler);
                const WindowedDataset ds = make_windows(histories, mcfg.timesteps, stride);
                if (ds.empty()) {
                    row.status = "empty";
                    row.error = "no failed drive spans " + std::to_string(mcfg.timesteps) +
                                " days";
                } else {
                    const auto preds = predict_final_rul(model, ds);
                    std::vector<std::pair<double, double>> pairs(preds.size());
                    for (std::size_t s = 0; s < preds.size(); ++s)
                        pairs[s] = {ds.y(s, ds.timesteps - 1), preds[s]};
                    row.eval = EvalReport::from_pairs(std::move(pairs), target, mcfg.name(),
                                                      mcfg.timesteps, "generalize");
                    row.n_drives = ds.distinct_serials().size();
                    row.status = "ok";
                    if (out_dir)
                        save_predictions_csv(*out_dir / ("predictions_" + target + ".csv"), ds,
                                             preds);
                }
            }
        } catch (const std::exception& e) {
            row.status = "failed";
            row.error = e.what();
        }
        row.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rep.rows.push_back(std::move(row));
    }

    if (scaler.digest() != digest_before)
        throw DomainError("scaler parameters changed during generalization");
    rep.scaler_digest = hex64(digest_before);
    return rep;
}

}  // namespace diskrul
