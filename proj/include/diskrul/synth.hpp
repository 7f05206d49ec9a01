// Synthetic S.M.A.R.T.-like fleets with known degradation laws: informative
// attributes ramp monotonically toward a drawn failure date, the rest are
// stationary noise. Lets the whole pipeline be exercised without real data.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "diskrul/common.hpp"
#include "diskrul/csv.hpp"
#include "diskrul/ingest.hpp"
#include "diskrul/preprocess.hpp"
#include <json.hpp>

namespace diskrul {

struct SynthSpec {
    int n_drives = 0;
    double mean_lifetime_days = 120.0;
    int n_features = 15;
    int n_informative = 5;
    double noise_sigma = 0.02;
    double missing_rate = 0.0;
    std::uint64_t seed = 0;
    std::string model = "SYNTH01";

    void validate() const {
        if (n_drives < 0) throw DomainError("n_drives must be nonnegative");
        if (!(mean_lifetime_days > 0.0))
            throw DomainError("mean_lifetime_days must be positive");
        if (n_features <= 0) throw DomainError("n_features must be positive");
        if (n_informative < 0 || n_informative > n_features)
            throw DomainError("n_informative must lie in [0, n_features]");
        if (noise_sigma < 0.0) throw DomainError("noise_sigma must be nonnegative");
        if (!(missing_rate >= 0.0 && missing_rate < 1.0))
            throw DomainError("missing_rate must lie in [0, 1)");
        if (model.empty()) throw DomainError("model id must be nonempty");
    }

    nlohmann::json to_json() const {
        return {{"n_drives", n_drives},
                {"mean_lifetime_days", mean_lifetime_days},
                {"n_features", n_features},
                {"n_informative", n_informative},
                {"noise_sigma", noise_sigma},
                {"missing_rate", missing_rate},
                {"seed", seed},
                {"model", model}};
    }

    static SynthSpec from_json(const nlohmann::json& j) {
        SynthSpec s;
        s.n_drives = j.value("n_drives", s.n_drives);
        s.mean_lifetime_days = j.value("mean_lifetime_days", s.mean_lifetime_days);
        s.n_features = j.value("n_features", s.n_features);
        s.n_informative = j.value("n_informative", s.n_informative);
        s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
        s.missing_rate = j.value("missing_rate", s.missing_rate);
        s.seed = j.value("seed", s.seed);
        s.model = j.value("model", s.model);
        s.validate();
        return s;
    }
};

// First ids mirror the usual selection of S.M.A.R.T. attributes so synthetic
// fleets flow through default feature sets; extra features get ids from 300.
inline std::vector<int> synth_attribute_ids(int n_features) {
    const std::vector<int> base = FeatureSet::defaults().attributes;
    std::vector<int> ids;
    for (int i = 0; i < n_features; ++i)
        ids.push_back(i < int(base.size()) ? base[std::size_t(i)] : 300 + i - int(base.size()));
    return ids;
}

inline std::vector<int> synth_informative_ids(const SynthSpec& spec) {
    auto ids = synth_attribute_ids(spec.n_features);
    ids.resize(std::size_t(spec.n_informative));
    return ids;
}

struct SynthDrive {
    std::string serial;
    int lifetime = 0;  // failure occurs on day index `lifetime`
    std::vector<DriveDayRecord> records;
};

namespace detail {

inline std::string synth_serial(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "SYN-%04d", index);
    return buf;
}

}  // namespace detail

inline std::vector<SynthDrive> generate(const SynthSpec& spec) {
    spec.validate();
    const std::vector<int> ids = synth_attribute_ids(spec.n_features);
    const DayNumber start = parse_date("2022-01-01");

    // Fleet-wide constants: one amplitude and ramp shape per feature.
    Rng fleet(spec.seed);
    std::vector<double> amplitude(std::size_t(spec.n_features));
    std::vector<double> ramp_power(std::size_t(spec.n_features));
    for (int f = 0; f < spec.n_features; ++f) {
        const bool informative = f < spec.n_informative;
        const double lo = std::log(informative ? 1e2 : 1.0);
        const double hi = std::log(informative ? 1e14 : 1e6);
        amplitude[std::size_t(f)] = std::exp(fleet.uniform(lo, hi));
        ramp_power[std::size_t(f)] = (f % 2 == 0) ? 1.0 : 2.0;
    }

    // Lognormal lifetimes with coefficient of variation 0.3.
    const double sigma2 = std::log(1.0 + 0.3 * 0.3);
    const double mu = std::log(spec.mean_lifetime_days) - sigma2 / 2.0;
    const double sigma = std::sqrt(sigma2);

    std::vector<SynthDrive> fleet_out;
    fleet_out.reserve(std::size_t(spec.n_drives));
    for (int d = 0; d < spec.n_drives; ++d) {
        Rng rng(derive_seed(spec.seed, std::uint64_t(d)));
        SynthDrive drive;
        drive.serial = detail::synth_serial(d);
        drive.lifetime =
            std::max(1, int(std::llround(std::exp(mu + sigma * rng.normal()))));
        const int L = drive.lifetime;
        drive.records.reserve(std::size_t(L) + 1);
        for (int day = 0; day <= L; ++day) {
            DriveDayRecord rec;
            rec.date = start + day;
            rec.serial = drive.serial;
            rec.model = spec.model;
            rec.capacity_bytes = std::int64_t(4000000000000);
            rec.failure = day == L;
            for (int f = 0; f < spec.n_features; ++f) {
                const double A = amplitude[std::size_t(f)];
                double value;
                if (f < spec.n_informative) {
                    const double progress = double(day) / double(L);
                    value = A * std::pow(progress, ramp_power[std::size_t(f)]) +
                            spec.noise_sigma * A * rng.normal();
                } else {
                    value = A + spec.noise_sigma * A * rng.normal();
                }
                if (rng.uniform() < spec.missing_rate) continue;  // value deleted
                rec.smart_raw[ids[std::size_t(f)]] = value;
            }
            drive.records.push_back(std::move(rec));
        }
        fleet_out.push_back(std::move(drive));
    }
    return fleet_out;
}

// Daily-log CSV with one smart_<id>_raw column per generated attribute; a
// deleted value becomes an empty field.
inline void write_fleet_csv(const std::filesystem::path& path,
                            const std::vector<SynthDrive>& fleet,
                            const std::vector<int>& attribute_ids) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    std::vector<std::string> header{"date", "serial_number", "model", "capacity_bytes",
                                    "failure"};
    for (int id : attribute_ids) header.push_back("smart_" + std::to_string(id) + "_raw");
    write_csv_row(out, header);
    std::vector<std::string> row;
    for (const auto& drive : fleet) {
        for (const auto& rec : drive.records) {
            row.clear();
            row.push_back(format_date(rec.date));
            row.push_back(rec.serial);
            row.push_back(rec.model);
            row.push_back(rec.capacity_bytes ? std::to_string(*rec.capacity_bytes) : "");
            row.push_back(rec.failure ? "1" : "0");
            for (int id : attribute_ids) {
                const auto it = rec.smart_raw.find(id);
                row.push_back(it == rec.smart_raw.end() ? "" : format_double(it->second));
            }
            write_csv_row(out, row);
        }
    }
    if (!out) throw IoError("write failed for " + path.string());
}

inline void write_fleet_csv(const std::filesystem::path& path, const SynthSpec& spec,
                            const std::vector<SynthDrive>& fleet) {
    write_fleet_csv(path, fleet, synth_attribute_ids(spec.n_features));
}

}  // namespace diskrul
