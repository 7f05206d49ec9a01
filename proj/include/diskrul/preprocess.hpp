#pragma once

// Raw record sequences -> clean labeled DriveHistory matrices: calendar gap
// insertion, per-feature linear interpolation, RUL labels and the [0,255]
// min-max scaler with exact inverse.

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "diskrul/common.hpp"
#include "diskrul/ingest.hpp"

namespace diskrul {

/// Ordered S.M.A.R.T. attribute subset; its order fixes the column order of
/// every downstream matrix.
struct FeatureSet {
    std::vector<int> attributes;

    FeatureSet() = default;
    explicit FeatureSet(std::vector<int> attrs) : attributes(std::move(attrs)) {
        std::set<int> seen;
        for (int a : attributes)
            if (!seen.insert(a).second)
                throw DomainError("duplicate attribute " + std::to_string(a) + " in feature set");
    }

    /// The attribute set commonly tied to impending drive failure; used as
    /// the pipeline default when no importance file is supplied.
    static FeatureSet defaults() {
        return FeatureSet({1, 4, 5, 7, 9, 188, 190, 192, 193, 194, 197, 198, 199, 241, 242});
    }

    std::size_t size() const { return attributes.size(); }

    nlohmann::json to_json() const { return nlohmann::json{{"attributes", attributes}}; }

    static FeatureSet from_json(const nlohmann::json& j) {
        return FeatureSet(j.at("attributes").get<std::vector<int>>());
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write feature set " + path.string());
        out << to_json().dump(2) << '\n';
    }

    static FeatureSet load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read feature set " + path.string());
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }
};

/// Gap-free, time-ordered feature matrix for one drive. `rul` stays empty
/// until labeled.
struct DriveHistory {
    std::string serial;
    std::string model;
    std::vector<int> attributes;   // column order, from the FeatureSet used to build
    std::vector<DayNumber> dates;  // strictly increasing, one row per calendar day
    Eigen::MatrixXd X;             // days x features
    Eigen::VectorXd rul;           // days; RUL in whole days once labeled
    bool failed = false;
    std::vector<int> all_absent;  // attributes with no observed value (filled with 0)

    std::size_t days() const { return dates.size(); }
    bool labeled() const { return rul.size() == Eigen::Index(dates.size()); }
};

/// Builds one DriveHistory from a date-sorted raw sequence. Missing calendar
/// days become interpolated rows; leading/trailing gaps extend the nearest
/// observed value; a feature absent everywhere is zero-filled and flagged.
inline DriveHistory build_history(const std::vector<DriveDayRecord>& records,
                                  const FeatureSet& features) {
    if (records.empty()) throw DomainError("build_history: empty record sequence");
    if (features.attributes.empty()) throw DomainError("build_history: empty feature set");
    for (std::size_t i = 1; i < records.size(); ++i)
        if (records[i].date <= records[i - 1].date)
            throw DomainError("build_history: records not strictly date-sorted");

    DriveHistory h;
    h.serial = records.front().serial;
    h.model = records.front().model;
    h.attributes = features.attributes;
    h.failed = records.back().failure;

    const DayNumber first = records.front().date;
    const DayNumber last = records.back().date;
    const std::size_t n_days = std::size_t(last - first) + 1;
    const std::size_t n_feat = features.size();

    h.dates.resize(n_days);
    for (std::size_t i = 0; i < n_days; ++i) h.dates[i] = first + DayNumber(i);

    const double absent = std::numeric_limits<double>::quiet_NaN();
    h.X = Eigen::MatrixXd::Constant(n_days, n_feat, absent);
    for (const auto& rec : records) {
        const std::size_t row = std::size_t(rec.date - first);
        for (std::size_t f = 0; f < n_feat; ++f) {
            auto it = rec.smart_raw.find(features.attributes[f]);
            if (it != rec.smart_raw.end()) h.X(row, f) = it->second;
        }
    }

    // Per-feature fill: interior gaps by linear interpolation between the
    // nearest observed neighbors, boundaries by nearest-value extension.
    for (std::size_t f = 0; f < n_feat; ++f) {
        std::vector<std::size_t> present;
        for (std::size_t i = 0; i < n_days; ++i)
            if (!std::isnan(h.X(i, f))) present.push_back(i);
        if (present.empty()) {
            h.X.col(f).setZero();
            h.all_absent.push_back(features.attributes[f]);
            continue;
        }
        for (std::size_t i = 0; i < present.front(); ++i) h.X(i, f) = h.X(present.front(), f);
        for (std::size_t i = present.back() + 1; i < n_days; ++i) h.X(i, f) = h.X(present.back(), f);
        for (std::size_t k = 0; k + 1 < present.size(); ++k) {
            const std::size_t a = present[k], b = present[k + 1];
            const double va = h.X(a, f), vb = h.X(b, f);
            for (std::size_t i = a + 1; i < b; ++i)
                h.X(i, f) = va + (vb - va) * double(i - a) / double(b - a);
        }
    }
    return h;
}

/// Attaches supervised RUL labels: rul[i] = failure_date - dates[i] in whole
/// days. Requires an observed failure.
inline void label_rul(DriveHistory& h) {
    if (!h.failed) throw DomainError("label_rul: unlabeled drive (no observed failure): " + h.serial);
    const DayNumber failure_date = h.dates.back();
    h.rul.resize(Eigen::Index(h.dates.size()));
    for (std::size_t i = 0; i < h.dates.size(); ++i)
        h.rul(Eigen::Index(i)) = double(failure_date - h.dates[i]);
}

/// Experimental capped labeling (the --cap-rul path): failed drives get
/// min(cap, true RUL); healthy drives get the constant cap, reading the cap
/// as "at least this far from failure".
inline void label_rul_capped(DriveHistory& h, double cap) {
    if (cap <= 0) throw DomainError("label_rul_capped: cap must be positive");
    h.rul.resize(Eigen::Index(h.dates.size()));
    if (h.failed) {
        const DayNumber failure_date = h.dates.back();
        for (std::size_t i = 0; i < h.dates.size(); ++i)
            h.rul(Eigen::Index(i)) = std::min(cap, double(failure_date - h.dates[i]));
    } else {
        h.rul.setConstant(cap);
    }
}

/// Per-feature min/max mapping onto [0, 255]. Fit on training data only; the
/// map extrapolates linearly outside the fitted range (no clamping).
struct ScalerParams {
    std::vector<int> attributes;
    std::vector<double> min;
    std::vector<double> max;
    static constexpr double lo = 0.0;
    static constexpr double hi = 255.0;

    std::size_t size() const { return attributes.size(); }

    nlohmann::json to_json() const {
        nlohmann::json feats = nlohmann::json::array();
        for (std::size_t f = 0; f < size(); ++f)
            feats.push_back({{"attribute", attributes[f]}, {"min", min[f]}, {"max", max[f]}});
        return nlohmann::json{{"range", {lo, hi}}, {"features", feats}};
    }

    static ScalerParams from_json(const nlohmann::json& j) {
        ScalerParams p;
        for (const auto& f : j.at("features")) {
            p.attributes.push_back(f.at("attribute").get<int>());
            p.min.push_back(f.at("min").get<double>());
            p.max.push_back(f.at("max").get<double>());
        }
        return p;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write scaler " + path.string());
        out << to_json().dump(2) << '\n';
    }

    static ScalerParams load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read scaler " + path.string());
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }

    std::uint64_t digest() const { return fnv1a64(to_json().dump()); }
};

inline ScalerParams fit_scaler(const std::vector<DriveHistory>& train_histories,
                               const FeatureSet& features) {
    if (train_histories.empty()) throw DomainError("fit_scaler: empty training set");
    const std::size_t n_feat = features.size();
    ScalerParams p;
    p.attributes = features.attributes;
    p.min.assign(n_feat, std::numeric_limits<double>::infinity());
    p.max.assign(n_feat, -std::numeric_limits<double>::infinity());
    for (const auto& h : train_histories) {
        if (std::size_t(h.X.cols()) != n_feat)
            throw DomainError("fit_scaler: history column count does not match feature set");
        for (std::size_t f = 0; f < n_feat; ++f) {
            p.min[f] = std::min(p.min[f], h.X.col(Eigen::Index(f)).minCoeff());
            p.max[f] = std::max(p.max[f], h.X.col(Eigen::Index(f)).maxCoeff());
        }
    }
    return p;
}

/// x' = 255 (x - min) / (max - min); constant features map to 0.
inline Eigen::MatrixXd apply_scaler(const Eigen::MatrixXd& X, const ScalerParams& params) {
    if (std::size_t(X.cols()) != params.size())
        throw DomainError("apply_scaler: column count mismatch");
    Eigen::MatrixXd out(X.rows(), X.cols());
    for (std::size_t f = 0; f < params.size(); ++f) {
        const double span = params.max[f] - params.min[f];
        if (span == 0.0)
            out.col(Eigen::Index(f)).setZero();
        else
            out.col(Eigen::Index(f)) =
                (X.col(Eigen::Index(f)).array() - params.min[f]) * (ScalerParams::hi / span);
    }
    return out;
}

inline Eigen::MatrixXd inverse_scaler(const Eigen::MatrixXd& X, const ScalerParams& params) {
    if (std::size_t(X.cols()) != params.size())
        throw DomainError("inverse_scaler: column count mismatch");
    Eigen::MatrixXd out(X.rows(), X.cols());
    for (std::size_t f = 0; f < params.size(); ++f) {
        const double span = params.max[f] - params.min[f];
        if (span == 0.0)
            out.col(Eigen::Index(f)).setConstant(params.min[f]);
        else
            out.col(Eigen::Index(f)) =
                X.col(Eigen::Index(f)).array() * (span / ScalerParams::hi) + params.min[f];
    }
    return out;
}

}  // namespace diskrul
