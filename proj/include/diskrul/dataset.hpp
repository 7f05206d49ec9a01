#pragma once

// Sliding-window tensor construction ([samples x timesteps x features] with
// aligned RUL target sequences), grouped train/val/test splits, grouped
// k-fold cross-validation and the versioned windows.bin cache.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "diskrul/common.hpp"
#include "diskrul/preprocess.hpp"

namespace diskrul {

struct WindowedDataset {
    int timesteps = 0;
    std::size_t n_features = 0;
    std::vector<int> attributes;           // column order
    std::vector<double> X;                 // [sample][timestep][feature], row-major
    std::vector<double> Y;                 // [sample][timestep] RUL days
    std::vector<std::uint32_t> group_idx;  // per-sample index into `serials`
    std::vector<std::string> serials;      // distinct drive serials, canonical order

    std::size_t n_samples() const { return group_idx.size(); }
    bool empty() const { return group_idx.empty(); }

    double x(std::size_t s, std::size_t t, std::size_t f) const {
        return X[(s * std::size_t(timesteps) + t) * n_features + f];
    }
    double y(std::size_t s, std::size_t t) const { return Y[s * std::size_t(timesteps) + t]; }
    const std::string& group(std::size_t s) const { return serials[group_idx[s]]; }

    std::set<std::string> distinct_serials() const {
        std::set<std::string> out;
        for (auto g : group_idx) out.insert(serials[g]);
        return out;
    }
};

struct SkippedDrive {
    std::string serial;
    std::size_t days = 0;
};

struct WindowReport {
    std::vector<SkippedDrive> skipped;  // too short for the requested window
};

/// Cuts every drive with L >= T (+horizon) days into windows starting at
/// offsets 0, stride, 2*stride, ...; targets are the RUL values aligned to
/// the window's own days, shifted `horizon` days into the future when
/// forecasting. Output order: serial ascending, then start offset.
inline WindowedDataset make_windows(const std::vector<DriveHistory>& histories, int T,
                                    int stride = 1, int horizon = 0,
                                    WindowReport* report = nullptr) {
    if (T < 1) throw DomainError("make_windows: timesteps must be positive");
    if (stride < 1) throw DomainError("make_windows: stride must be positive");
    if (horizon < 0) throw DomainError("make_windows: horizon must be nonnegative");

    std::vector<const DriveHistory*> ordered;
    ordered.reserve(histories.size());
    for (const auto& h : histories) {
        if (!h.labeled())
            throw DomainError("make_windows: history " + h.serial + " has no RUL labels");
        ordered.push_back(&h);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const DriveHistory* a, const DriveHistory* b) { return a->serial < b->serial; });

    WindowedDataset ds;
    ds.timesteps = T;
    if (!ordered.empty()) {
        ds.attributes = ordered.front()->attributes;
        ds.n_features = std::size_t(ordered.front()->X.cols());
    }
    for (const DriveHistory* h : ordered) {
        if (std::size_t(h->X.cols()) != ds.n_features || h->attributes != ds.attributes)
            throw DomainError("make_windows: inconsistent feature columns across histories");
        const std::size_t days = h->days();
        if (days < std::size_t(T + horizon)) {
            if (report) report->skipped.push_back({h->serial, days});
            continue;
        }
        const std::uint32_t serial_id = std::uint32_t(ds.serials.size());
        ds.serials.push_back(h->serial);
        const std::size_t last_start = days - std::size_t(T + horizon);
        for (std::size_t start = 0; start <= last_start; start += std::size_t(stride)) {
            ds.group_idx.push_back(serial_id);
            for (int t = 0; t < T; ++t) {
                for (std::size_t f = 0; f < ds.n_features; ++f)
                    ds.X.push_back(h->X(Eigen::Index(start + std::size_t(t)), Eigen::Index(f)));
                ds.Y.push_back(h->rul(Eigen::Index(start + std::size_t(t) + std::size_t(horizon))));
            }
        }
    }
    return ds;
}

struct SplitSpec {
    double train = 0.70, val = 0.15, test = 0.15;
    std::uint64_t seed = 0;

    void validate() const {
        if (train <= 0 || val < 0 || test <= 0)
            throw DomainError("SplitSpec: fractions must be positive");
        if (std::abs(train + val + test - 1.0) > 1e-9)
            throw DomainError("SplitSpec: fractions must sum to 1");
    }
};

namespace detail {

inline WindowedDataset subset_by_serial(const WindowedDataset& ds,
                                        const std::set<std::string>& keep) {
    WindowedDataset out;
    out.timesteps = ds.timesteps;
    out.n_features = ds.n_features;
    out.attributes = ds.attributes;
    std::vector<std::int64_t> remap(ds.serials.size(), -1);
    const std::size_t T = std::size_t(ds.timesteps), F = ds.n_features;
    for (std::size_t s = 0; s < ds.n_samples(); ++s) {
        const std::uint32_t g = ds.group_idx[s];
        if (!keep.count(ds.serials[g])) continue;
        if (remap[g] < 0) {
            remap[g] = std::int64_t(out.serials.size());
            out.serials.push_back(ds.serials[g]);
        }
        out.group_idx.push_back(std::uint32_t(remap[g]));
        out.X.insert(out.X.end(), ds.X.begin() + std::ptrdiff_t(s * T * F),
                     ds.X.begin() + std::ptrdiff_t((s + 1) * T * F));
        out.Y.insert(out.Y.end(), ds.Y.begin() + std::ptrdiff_t(s * T),
                     ds.Y.begin() + std::ptrdiff_t((s + 1) * T));
    }
    return out;
}

inline std::vector<std::string> shuffled_serials(const WindowedDataset& ds, std::uint64_t seed) {
    std::vector<std::string> serials = ds.serials;
    std::sort(serials.begin(), serials.end());
    Rng rng(seed);
    rng.shuffle(serials);
    return serials;
}

}  // namespace detail

/// Partitions drives (never rows) into train/val/test by the spec fractions:
/// floor for train and val, remainder to test. Deterministic given seed.
inline std::array<WindowedDataset, 3> split_by_drive(const WindowedDataset& ds,
                                                     const SplitSpec& spec) {
    spec.validate();
    const std::vector<std::string> serials = detail::shuffled_serials(ds, spec.seed);
    const std::size_t n = serials.size();
    if (n < 3) throw DomainError("split_by_drive: need at least 3 distinct drives");
    const std::size_t n_train = std::size_t(std::floor(spec.train * double(n)));
    const std::size_t n_val = std::size_t(std::floor(spec.val * double(n)));

    std::set<std::string> train_set(serials.begin(), serials.begin() + std::ptrdiff_t(n_train));
    std::set<std::string> val_set(serials.begin() + std::ptrdiff_t(n_train),
                                  serials.begin() + std::ptrdiff_t(n_train + n_val));
    std::set<std::string> test_set(serials.begin() + std::ptrdiff_t(n_train + n_val), serials.end());

    return {detail::subset_by_serial(ds, train_set), detail::subset_by_serial(ds, val_set),
            detail::subset_by_serial(ds, test_set)};
}

/// Grouped k-fold: drives shuffled then dealt round-robin into k near-equal
/// folds; pair i trains on all folds but i and validates on fold i.
inline std::vector<std::pair<WindowedDataset, WindowedDataset>> kfold_by_drive(
    const WindowedDataset& ds, int k, std::uint64_t seed) {
    if (k < 2) throw DomainError("kfold_by_drive: k must be at least 2");
    const std::vector<std::string> serials = detail::shuffled_serials(ds, seed);
    if (serials.size() < std::size_t(k)) throw DomainError("kfold_by_drive: fewer drives than folds");

    std::vector<std::set<std::string>> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < serials.size(); ++i) folds[i % std::size_t(k)].insert(serials[i]);

    std::vector<std::pair<WindowedDataset, WindowedDataset>> out;
    out.reserve(std::size_t(k));
    for (int i = 0; i < k; ++i) {
        std::set<std::string> train_set;
        for (int j = 0; j < k; ++j)
            if (j != i) train_set.insert(folds[std::size_t(j)].begin(), folds[std::size_t(j)].end());
        out.emplace_back(detail::subset_by_serial(ds, train_set),
                         detail::subset_by_serial(ds, folds[std::size_t(i)]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// windows.bin: little-endian versioned container.
//   magic "DRULWND1" | u32 version | u32 T | u32 F | u64 samples
//   | i32 attribute ids (F) | u32 n_serials | { u32 len, bytes } per serial
//   | u32 group index per sample | X doubles | Y doubles

namespace detail {

inline void put_le(std::ostream& out, std::uint64_t bits, std::size_t nbytes) {
    unsigned char buf[8];
    for (std::size_t i = 0; i < nbytes; ++i) buf[i] = (bits >> (8 * i)) & 0xff;
    out.write(reinterpret_cast<const char*>(buf), std::streamsize(nbytes));
}

inline std::uint64_t get_le(std::istream& in, std::size_t nbytes) {
    unsigned char buf[8] = {};
    in.read(reinterpret_cast<char*>(buf), std::streamsize(nbytes));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < nbytes; ++i) bits |= std::uint64_t(buf[i]) << (8 * i);
    return bits;
}

inline void write_u32(std::ostream& out, std::uint32_t v) { put_le(out, v, 4); }
inline void write_u64(std::ostream& out, std::uint64_t v) { put_le(out, v, 8); }
inline void write_i32(std::ostream& out, std::int32_t v) { put_le(out, std::uint32_t(v), 4); }
inline void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_le(out, bits, 8);
}
inline void write_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_le(out, bits, 4);
}

inline std::uint32_t read_u32(std::istream& in) { return std::uint32_t(get_le(in, 4)); }
inline std::uint64_t read_u64(std::istream& in) { return get_le(in, 8); }
inline std::int32_t read_i32(std::istream& in) { return std::int32_t(std::uint32_t(get_le(in, 4))); }
inline double read_f64(std::istream& in) {
    const std::uint64_t bits = get_le(in, 8);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}
inline float read_f32(std::istream& in) {
    const std::uint32_t bits = std::uint32_t(get_le(in, 4));
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace detail

inline void save_windows(const std::filesystem::path& path, const WindowedDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write dataset " + path.string());
    out.write("DRULWND1", 8);
    detail::write_u32(out, 1);
    detail::write_u32(out, std::uint32_t(ds.timesteps));
    detail::write_u32(out, std::uint32_t(ds.n_features));
    detail::write_u64(out, ds.n_samples());
    for (int a : ds.attributes) detail::write_i32(out, a);
    detail::write_u32(out, std::uint32_t(ds.serials.size()));
    for (const auto& s : ds.serials) {
        detail::write_u32(out, std::uint32_t(s.size()));
        out.write(s.data(), std::streamsize(s.size()));
    }
    for (auto g : ds.group_idx) detail::write_u32(out, g);
    for (double v : ds.X) detail::write_f64(out, v);
    for (double v : ds.Y) detail::write_f64(out, v);
    if (!out) throw IoError("write failed for dataset " + path.string());
}

inline WindowedDataset load_windows(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read dataset " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "DRULWND1", 8) != 0)
        throw SchemaError("not a windows.bin file: " + path.string());
    const auto version = detail::read_u32(in);
    if (version != 1) throw SchemaError("unsupported windows.bin version " + std::to_string(version));
    WindowedDataset ds;
    ds.timesteps = int(detail::read_u32(in));
    ds.n_features = detail::read_u32(in);
    const auto samples = detail::read_u64(in);
    ds.attributes.resize(ds.n_features);
    for (auto& a : ds.attributes) a = detail::read_i32(in);
    ds.serials.resize(detail::read_u32(in));
    for (auto& s : ds.serials) {
        s.resize(detail::read_u32(in));
        in.read(s.data(), std::streamsize(s.size()));
    }
    ds.group_idx.resize(samples);
    for (auto& g : ds.group_idx) g = detail::read_u32(in);
    ds.X.resize(samples * std::size_t(ds.timesteps) * ds.n_features);
    for (auto& v : ds.X) v = detail::read_f64(in);
    ds.Y.resize(samples * std::size_t(ds.timesteps));
    for (auto& v : ds.Y) v = detail::read_f64(in);
    if (!in) throw SchemaError("truncated windows.bin file: " + path.string());
    return ds;
}

}  // namespace diskrul
