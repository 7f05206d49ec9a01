// Minibatch training for the encoder-decoder network: Adam, early stopping on
// validation RMSE, deterministic batching, and a versioned checkpoint format.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "diskrul/common.hpp"
#include "diskrul/dataset.hpp"
#include "diskrul/seqnet.hpp"
#include <json.hpp>

namespace diskrul {

enum class Precision { f32, f64 };

inline std::string to_string(Precision p) {
    return p == Precision::f32 ? "single" : "double";
}

inline Precision precision_from_string(const std::string& s) {
    if (s == "single") return Precision::f32;
    if (s == "double") return Precision::f64;
    throw DomainError("unknown precision '" + s + "' (use single or double)");
}

struct TrainConfig {
    int max_epochs = 100;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int patience = 10;
    double min_delta = 1e-4;
    std::uint64_t seed = 0;
    Precision precision = Precision::f32;
    double clip_norm = 0.0;  // 0 disables clipping

    void validate() const {
        if (max_epochs <= 0) throw DomainError("max_epochs must be positive");
        if (batch_size <= 0) throw DomainError("batch_size must be positive");
        if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw DomainError("adam betas must lie in [0, 1)");
        if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
        if (patience < 1) throw DomainError("patience must be at least 1");
        if (min_delta < 0.0) throw DomainError("min_delta must be nonnegative");
        if (clip_norm < 0.0) throw DomainError("clip_norm must be nonnegative");
    }

    nlohmann::json to_json() const {
        return {{"max_epochs", max_epochs},   {"batch_size", batch_size},
                {"learning_rate", learning_rate}, {"beta1", beta1},
                {"beta2", beta2},             {"epsilon", epsilon},
                {"patience", patience},       {"min_delta", min_delta},
                {"seed", seed},               {"precision", to_string(precision)},
                {"clip_norm", clip_norm}};
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig cfg;
        cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.beta1 = j.value("beta1", cfg.beta1);
        cfg.beta2 = j.value("beta2", cfg.beta2);
        cfg.epsilon = j.value("epsilon", cfg.epsilon);
        cfg.patience = j.value("patience", cfg.patience);
        cfg.min_delta = j.value("min_delta", cfg.min_delta);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("precision"))
            cfg.precision = precision_from_string(j.at("precision").get<std::string>());
        cfg.clip_norm = j.value("clip_norm", cfg.clip_norm);
        cfg.validate();
        return cfg;
    }
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_rmse = 0.0;
    double val_rmse = 0.0;
    double val_final_rmse = 0.0;  // last-step predictions in RUL days
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;
    int stopped_epoch = 0;
    double best_val_rmse = std::numeric_limits<double>::infinity();

    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& e : epochs)
            rows.push_back({{"epoch", e.epoch},
                            {"train_rmse", e.train_rmse},
                            {"val_rmse", e.val_rmse},
                            {"val_final_rmse", e.val_final_rmse}});
        return {{"epochs", rows},
                {"best_epoch", best_epoch},
                {"stopped_epoch", stopped_epoch},
                {"best_val_rmse", best_val_rmse}};
    }

    std::uint64_t digest() const { return fnv1a64(to_json().dump()); }
};

template <class Scalar>
struct AdamState {
    std::vector<Mat<Scalar>> m, v;
    std::int64_t t = 0;

    void init(const EncoderDecoderModel<Scalar>& model) {
        m.clear();
        v.clear();
        for (const auto* p : model.tensors()) {
            m.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
            v.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
        }
        t = 0;
    }

    void step(EncoderDecoderModel<Scalar>& model, const EncoderDecoderModel<Scalar>& grads,
              const TrainConfig& cfg) {
        const Scalar b1 = Scalar(cfg.beta1);
        const Scalar b2 = Scalar(cfg.beta2);
        const Scalar lr = Scalar(cfg.learning_rate);
        const Scalar eps = Scalar(cfg.epsilon);
        ++t;
        const Scalar corr1 = Scalar(1) - Scalar(std::pow(cfg.beta1, double(t)));
        const Scalar corr2 = Scalar(1) - Scalar(std::pow(cfg.beta2, double(t)));
        auto params = model.tensors();
        auto gs = grads.tensors();
        if (params.size() != m.size() || gs.size() != m.size())
            throw DomainError("adam state does not match model shape");
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& g = *gs[i];
            m[i] = b1 * m[i] + (Scalar(1) - b1) * g;
            v[i] = (b2 * v[i].array() + (Scalar(1) - b2) * g.array().square()).matrix();
            params[i]->array() -=
                lr * (m[i].array() / corr1) / ((v[i].array() / corr2).sqrt() + eps);
        }
    }
};

// Gathers dataset samples into per-timestep F x B matrices plus a B x T target.
template <class Scalar>
void fill_batch(const WindowedDataset& ds, const std::vector<std::size_t>& idx,
                bool log1p_target, std::vector<Mat<Scalar>>& x, Mat<Scalar>& y) {
    const int T = ds.timesteps;
    const int F = int(ds.n_features);
    const Eigen::Index B = Eigen::Index(idx.size());
    x.resize(std::size_t(T));
    for (int t = 0; t < T; ++t) {
        auto& xt = x[std::size_t(t)];
        xt.resize(F, B);
        for (Eigen::Index b = 0; b < B; ++b)
            for (int f = 0; f < F; ++f)
                xt(f, b) = Scalar(ds.x(idx[std::size_t(b)], t, std::size_t(f)));
    }
    y.resize(B, T);
    for (Eigen::Index b = 0; b < B; ++b)
        for (int t = 0; t < T; ++t) {
            const double raw = ds.y(idx[std::size_t(b)], t);
            y(b, t) = Scalar(log1p_target ? std::log1p(raw) : raw);
        }
}

namespace detail {

inline std::vector<std::vector<std::size_t>> chunk_indices(const std::vector<std::size_t>& idx,
                                                           int batch_size) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < idx.size(); start += std::size_t(batch_size)) {
        const std::size_t stop = std::min(idx.size(), start + std::size_t(batch_size));
        out.emplace_back(idx.begin() + std::ptrdiff_t(start), idx.begin() + std::ptrdiff_t(stop));
    }
    return out;
}

template <class Scalar>
double grad_norm(const EncoderDecoderModel<Scalar>& grads) {
    double sq = 0.0;
    for (const auto* g : grads.tensors()) sq += double(g->squaredNorm());
    return std::sqrt(sq);
}

}  // namespace detail

// Validation metrics in one pass: sequence RMSE in training (possibly log)
// space drives early stopping; final-step RMSE in RUL days is reported.
template <class Scalar>
std::pair<double, double> validation_rmse(const EncoderDecoderModel<Scalar>& model,
                                          const WindowedDataset& ds, int batch_size) {
    const bool log1p_target = model.config.log1p_target;
    const int T = ds.timesteps;
    std::vector<std::size_t> all(ds.n_samples());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    double seq_sse = 0.0, final_sse = 0.0;
    std::size_t seq_n = 0;
    std::vector<Mat<Scalar>> x;
    Mat<Scalar> y;
    for (const auto& batch : detail::chunk_indices(all, batch_size)) {
        fill_batch(ds, batch, log1p_target, x, y);
        const Mat<Scalar> y_hat = forward(model, x);
        seq_sse += double((y_hat - y).squaredNorm());
        seq_n += batch.size() * std::size_t(T);
        for (Eigen::Index b = 0; b < y_hat.rows(); ++b) {
            double pred = double(y_hat(b, T - 1));
            if (log1p_target) pred = std::expm1(pred);
            const double truth = ds.y(batch[std::size_t(b)], T - 1);
            final_sse += (pred - truth) * (pred - truth);
        }
    }
    if (seq_n == 0) throw DomainError("validation set is empty");
    return {std::sqrt(seq_sse / double(seq_n)),
            std::sqrt(final_sse / double(ds.n_samples()))};
}

template <class Scalar>
TrainReport train(EncoderDecoderModel<Scalar>& model, const WindowedDataset& train_ds,
                  const WindowedDataset& val_ds, const TrainConfig& cfg,
                  AdamState<Scalar>* adam_out = nullptr) {
    cfg.validate();
    model.config.validate();
    if (train_ds.empty()) throw DomainError("training set is empty");
    if (val_ds.empty()) throw DomainError("validation set is empty");
    for (const WindowedDataset* ds : {&train_ds, &val_ds}) {
        if (ds->timesteps != model.config.timesteps)
            throw DomainError("dataset timesteps " + std::to_string(ds->timesteps) +
                              " do not match model timesteps " +
                              std::to_string(model.config.timesteps));
        if (int(ds->n_features) != model.config.input_features)
            throw DomainError("dataset features do not match model input_features");
    }

    const bool log1p_target = model.config.log1p_target;
    const int T = model.config.timesteps;
    AdamState<Scalar> adam;
    adam.init(model);
    EncoderDecoderModel<Scalar> grads;
    grads.build(model.config);

    Rng shuffler(derive_seed(cfg.seed, 1));
    std::vector<std::size_t> order(train_ds.n_samples());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainReport report;
    EncoderDecoderModel<Scalar> best = model;
    AdamState<Scalar> best_adam = adam;
    int wait = 0;

    std::vector<Mat<Scalar>> x;
    Mat<Scalar> y;
    ForwardCache<Scalar> cache;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffler.shuffle(order);
        double train_sse = 0.0;
        std::size_t train_n = 0;
        for (const auto& batch : detail::chunk_indices(order, cfg.batch_size)) {
            fill_batch(train_ds, batch, log1p_target, x, y);
            forward(model, x, &cache);
            const Mat<Scalar> resid = cache.y_hat - y;
            const double batch_sse = double(resid.squaredNorm());
            if (!std::isfinite(batch_sse))
                throw NumericError("training diverged at epoch " + std::to_string(epoch));
            train_sse += batch_sse;
            train_n += batch.size() * std::size_t(T);
            const Scalar scale = Scalar(2) / Scalar(double(batch.size()) * double(T));
            const Mat<Scalar> dY = scale * resid;
            grads.set_zero();
            backward(model, cache, dY, grads);
            if (cfg.clip_norm > 0.0) {
                const double norm = detail::grad_norm(grads);
                if (norm > cfg.clip_norm) {
                    const Scalar s = Scalar(cfg.clip_norm / norm);
                    for (auto* g : grads.tensors()) (*g) *= s;
                }
            }
            adam.step(model, grads, cfg);
        }

        const auto [val_rmse, val_final] = validation_rmse(model, val_ds, cfg.batch_size);
        if (!std::isfinite(val_rmse))
            throw NumericError("validation diverged at epoch " + std::to_string(epoch));
        report.epochs.push_back(
            {epoch, std::sqrt(train_sse / double(train_n)), val_rmse, val_final});
        report.stopped_epoch = epoch;

        if (val_rmse < report.best_val_rmse - cfg.min_delta) {
            report.best_val_rmse = val_rmse;
            report.best_epoch = epoch;
            best = model;
            best_adam = adam;
            wait = 0;
        } else if (++wait >= cfg.patience) {
            break;
        }
    }

    if (report.best_epoch == 0) {
        // No epoch beat the (infinite) initial best by min_delta only if
        // every loss was non-finite, which throws above; keep the last state.
        report.best_epoch = report.stopped_epoch;
    } else {
        model = best;
        adam = best_adam;
    }
    if (adam_out) *adam_out = std::move(adam);
    return report;
}

// Per-sample predicted RUL at the final timestep, inverse-transformed.
template <class Scalar>
std::vector<double> predict_final_rul(const EncoderDecoderModel<Scalar>& model,
                                      const WindowedDataset& ds, int batch_size = 256) {
    if (ds.timesteps != model.config.timesteps)
        throw DomainError("dataset timesteps do not match model");
    if (int(ds.n_features) != model.config.input_features)
        throw DomainError("dataset features do not match model");
    const int T = ds.timesteps;
    std::vector<std::size_t> all(ds.n_samples());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<double> out(ds.n_samples());
    std::vector<Mat<Scalar>> x;
    Mat<Scalar> y;
    for (const auto& batch : detail::chunk_indices(all, batch_size)) {
        fill_batch(ds, batch, false, x, y);
        const Mat<Scalar> y_hat = forward(model, x);
        for (Eigen::Index b = 0; b < y_hat.rows(); ++b) {
            double pred = double(y_hat(b, T - 1));
            if (model.config.log1p_target) pred = std::expm1(pred);
            out[batch[std::size_t(b)]] = pred;
        }
    }
    return out;
}

using AnyModel = std::variant<EncoderDecoderModel<float>, EncoderDecoderModel<double>>;

inline Precision precision_of(const AnyModel& m) {
    return std::holds_alternative<EncoderDecoderModel<float>>(m) ? Precision::f32
                                                                 : Precision::f64;
}

inline const EncoderDecoderConfig& config_of(const AnyModel& m) {
    return std::visit([](const auto& net) -> const EncoderDecoderConfig& { return net.config; },
                      m);
}

using AnyAdam = std::variant<AdamState<float>, AdamState<double>>;

struct FitResult {
    AnyModel model;
    TrainReport report;
    AnyAdam adam;  // optimizer state at the restored best epoch
};

inline FitResult fit(const EncoderDecoderConfig& mcfg, const WindowedDataset& train_ds,
                     const WindowedDataset& val_ds, const TrainConfig& tcfg) {
    FitResult out;
    if (tcfg.precision == Precision::f64) {
        auto net = EncoderDecoderModel<double>::make(mcfg, derive_seed(tcfg.seed, 0));
        AdamState<double> adam;
        out.report = train(net, train_ds, val_ds, tcfg, &adam);
        out.model = std::move(net);
        out.adam = std::move(adam);
    } else {
        auto net = EncoderDecoderModel<float>::make(mcfg, derive_seed(tcfg.seed, 0));
        AdamState<float> adam;
        out.report = train(net, train_ds, val_ds, tcfg, &adam);
        out.model = std::move(net);
        out.adam = std::move(adam);
    }
    return out;
}

inline std::vector<double> predict_final_rul(const AnyModel& model, const WindowedDataset& ds,
                                             int batch_size = 256) {
    return std::visit(
        [&](const auto& net) { return predict_final_rul(net, ds, batch_size); }, model);
}

// Checkpoint layout: "DRULCKPT", u32 version, u32 header length, JSON header
// (config, precision, epoch, adam step count, has_adam), then each tensor as
// u32 rows, u32 cols, and column-major little-endian values at the trained
// precision. Tensor order matches EncoderDecoderModel::tensors(); Adam first
// moments follow the parameters, second moments follow the first.
namespace detail {

template <class Scalar>
void write_tensor(std::ostream& out, const Mat<Scalar>& m) {
    write_u32(out, std::uint32_t(m.rows()));
    write_u32(out, std::uint32_t(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            if constexpr (std::is_same_v<Scalar, float>)
                write_f32(out, m(r, c));
            else
                write_f64(out, m(r, c));
        }
}

template <class Scalar>
void read_tensor(std::istream& in, Mat<Scalar>& m) {
    const auto rows = read_u32(in);
    const auto cols = read_u32(in);
    if (Eigen::Index(rows) != m.rows() || Eigen::Index(cols) != m.cols())
        throw SchemaError("checkpoint tensor shape mismatch");
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            if constexpr (std::is_same_v<Scalar, float>)
                m(r, c) = read_f32(in);
            else
                m(r, c) = read_f64(in);
        }
}

}  // namespace detail

template <class Scalar>
void save_checkpoint(const std::filesystem::path& path, const EncoderDecoderModel<Scalar>& model,
                     const AdamState<Scalar>* adam = nullptr, int epoch = 0) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    const Precision prec = std::is_same_v<Scalar, float> ? Precision::f32 : Precision::f64;
    const nlohmann::json header = {{"config", model.config.to_json()},
                                   {"precision", to_string(prec)},
                                   {"epoch", epoch},
                                   {"adam_t", adam ? adam->t : 0},
                                   {"has_adam", adam != nullptr}};
    const std::string head = header.dump();
    out.write("DRULCKPT", 8);
    detail::write_u32(out, 1);
    detail::write_u32(out, std::uint32_t(head.size()));
    out.write(head.data(), std::streamsize(head.size()));
    for (const auto* t : model.tensors()) detail::write_tensor(out, *t);
    if (adam) {
        for (const auto& t : adam->m) detail::write_tensor(out, t);
        for (const auto& t : adam->v) detail::write_tensor(out, t);
    }
    if (!out) throw IoError("write failed for checkpoint " + path.string());
}

inline void save_checkpoint(const std::filesystem::path& path, const AnyModel& model,
                            int epoch = 0) {
    std::visit(
        [&](const auto& net) {
            using Scalar = typename std::decay_t<decltype(net)>::scalar_type;
            save_checkpoint(path, net, static_cast<const AdamState<Scalar>*>(nullptr), epoch);
        },
        model);
}

struct Checkpoint {
    Precision precision = Precision::f32;
    int epoch = 0;
    AnyModel model;
    std::optional<std::variant<AdamState<float>, AdamState<double>>> adam;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "DRULCKPT", 8) != 0)
        throw SchemaError("not a checkpoint file: " + path.string());
    const auto version = detail::read_u32(in);
    if (version != 1)
        throw SchemaError("unsupported checkpoint version " + std::to_string(version));
    const auto head_len = detail::read_u32(in);
    std::string head(head_len, '\0');
    in.read(head.data(), std::streamsize(head.size()));
    if (!in) throw SchemaError("truncated checkpoint header: " + path.string());
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(head);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad checkpoint header: ") + e.what());
    }

    Checkpoint ckpt;
    const auto cfg = EncoderDecoderConfig::from_json(header.at("config"));
    ckpt.precision = precision_from_string(header.at("precision").get<std::string>());
    ckpt.epoch = header.value("epoch", 0);
    const bool has_adam = header.value("has_adam", false);
    const std::int64_t adam_t = header.value("adam_t", std::int64_t(0));

    auto load_typed = [&](auto scalar_tag) {
        using Scalar = decltype(scalar_tag);
        EncoderDecoderModel<Scalar> net;
        net.build(cfg);
        for (auto* t : net.tensors()) detail::read_tensor(in, *t);
        if (has_adam) {
            AdamState<Scalar> adam;
            adam.init(net);
            adam.t = adam_t;
            for (auto& t : adam.m) detail::read_tensor(in, t);
            for (auto& t : adam.v) detail::read_tensor(in, t);
            ckpt.adam = std::move(adam);
        }
        ckpt.model = std::move(net);
    };
    if (ckpt.precision == Precision::f32)
        load_typed(float{});
    else
        load_typed(double{});
    if (!in) throw SchemaError("truncated checkpoint file: " + path.string());
    return ckpt;
}

}  // namespace diskrul
