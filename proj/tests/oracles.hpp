#pragma once

// Independent reference implementations the tests check the library against.
// Everything here is written the slow, obvious way on purpose: plain loops,
// compensated sums, brute-force enumeration.

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "diskrul/dataset.hpp"
#include "diskrul/preprocess.hpp"

namespace oracle {

// Kahan-compensated sum, independent of any library accumulation order.
inline double ksum(const std::vector<double>& xs) {
    double s = 0.0, c = 0.0;
    for (double x : xs) {
        const double y = x - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

inline double rmse(const std::vector<double>& y, const std::vector<double>& y_hat) {
    std::vector<double> sq(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y_hat[i] - y[i];
        sq[i] = d * d;
    }
    return std::sqrt(ksum(sq) / double(y.size()));
}

inline double r2(const std::vector<double>& y, const std::vector<double>& y_hat) {
    const double mean = ksum(y) / double(y.size());
    std::vector<double> res(y.size()), tot(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        res[i] = (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
        tot[i] = (y[i] - mean) * (y[i] - mean);
    }
    return 1.0 - ksum(res) / ksum(tot);
}

// One enumerated window: the flattened input block plus its target sequence,
// tagged with the owning serial. Comparable so multisets can be sorted.
struct Window {
    std::string serial;
    std::vector<double> x;  // timestep-major, then feature
    std::vector<double> y;

    bool operator<(const Window& o) const {
        if (serial != o.serial) return serial < o.serial;
        if (x != o.x) return x < o.x;
        return y < o.y;
    }
    bool operator==(const Window& o) const {
        return serial == o.serial && x == o.x && y == o.y;
    }
};

// Brute-force window enumeration straight from the definition: every start
// offset on the stride grid whose window and shifted targets stay in range.
inline std::vector<Window> enumerate_windows(const std::vector<diskrul::DriveHistory>& histories,
                                             int T, int stride, int horizon) {
    std::vector<Window> out;
    for (const auto& h : histories) {
        const long days = long(h.days());
        for (long start = 0; start < days; start += stride) {
            if (start + T + horizon > days) break;
            Window w;
            w.serial = h.serial;
            for (long t = 0; t < T; ++t) {
                for (long f = 0; f < h.X.cols(); ++f) w.x.push_back(h.X(start + t, f));
                w.y.push_back(h.rul(start + t + horizon));
            }
            out.push_back(std::move(w));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<Window> collect_windows(const diskrul::WindowedDataset& ds) {
    std::vector<Window> out;
    const std::size_t T = std::size_t(ds.timesteps), F = ds.n_features;
    for (std::size_t s = 0; s < ds.n_samples(); ++s) {
        Window w;
        w.serial = ds.group(s);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t f = 0; f < F; ++f) w.x.push_back(ds.x(s, t, f));
            w.y.push_back(ds.y(s, t));
        }
        out.push_back(std::move(w));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Hand-rolled per-drive fixture: deterministic ramp features so any window
// mix-up shows up as a value mismatch, not just a count mismatch.
inline std::vector<diskrul::DriveHistory> ramp_fleet(int n_drives, int min_days, int max_days,
                                                     int n_features, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> len(min_days, max_days);
    std::vector<diskrul::DriveHistory> fleet;
    for (int d = 0; d < n_drives; ++d) {
        diskrul::DriveHistory h;
        char buf[16];
        std::snprintf(buf, sizeof buf, "FIX-%04d", d);
        h.serial = buf;
        h.model = "FIXTURE";
        const int L = len(gen);
        for (int f = 0; f < n_features; ++f) h.attributes.push_back(f + 1);
        h.dates.resize(std::size_t(L));
        for (int i = 0; i < L; ++i) h.dates[std::size_t(i)] = diskrul::DayNumber(1000 + i);
        h.X.resize(L, n_features);
        for (int i = 0; i < L; ++i)
            for (int f = 0; f < n_features; ++f)
                h.X(i, f) = 1000.0 * d + 10.0 * (f + 1) + 0.25 * i;
        h.failed = true;
        h.rul.resize(L);
        for (int i = 0; i < L; ++i) h.rul(i) = double(L - 1 - i);
        fleet.push_back(std::move(h));
    }
    return fleet;
}

// Scratch directory unique to one test, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("diskrul-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace oracle
