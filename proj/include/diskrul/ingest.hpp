#pragma once

// Backblaze-format CSV ingestion into a partitioned on-disk store.
//
// Store layout:
//   <root>/<model>/<year>.csv     one partition per (model, year)
//   <root>/manifest.json          ingested-file hashes + partition row counts
//
// Partition files are plain CSV with the header
//   date,serial_number,capacity_bytes,failure,smart_raw,smart_norm
// where smart_raw / smart_norm hold `attr=value` pairs joined by ';', sorted
// by attribute number, values in shortest round-trip decimal form. Absent
// attributes are simply omitted, so re-extraction is lossless.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "diskrul/common.hpp"
#include "diskrul/csv.hpp"

namespace diskrul {

namespace fs = std::filesystem;

struct DriveDayRecord {
    DayNumber date = 0;
    std::string serial;
    std::string model;
    std::optional<std::int64_t> capacity_bytes;
    bool failure = false;
    std::map<int, double> smart_raw;
    std::map<int, double> smart_norm;  // stored for completeness, unused downstream
};

struct PartitionKey {
    std::string model;
    int year = 0;

    bool operator<(const PartitionKey& o) const {
        return model != o.model ? model < o.model : year < o.year;
    }
    bool operator==(const PartitionKey& o) const = default;
};

constexpr int kMinPartitionYear = 2013;
constexpr int kMaxPartitionYear = 2099;

struct FailureCensus {
    // (model, unique failed serials), sorted descending by count.
    std::vector<std::pair<std::string, std::size_t>> entries;
};

struct IngestSummary {
    std::size_t files_processed = 0;
    std::size_t files_skipped = 0;  // already ingested (same content hash)
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;
    std::size_t rows_malformed = 0;
    std::size_t partitions_written = 0;
};

namespace detail {

inline std::string encode_smart(const std::map<int, double>& m) {
    std::string out;
    for (const auto& [attr, value] : m) {
        if (!out.empty()) out.push_back(';');
        out += std::to_string(attr);
        out.push_back('=');
        out += format_double(value);
    }
    return out;
}

inline std::map<int, double> decode_smart(std::string_view s) {
    std::map<int, double> m;
    std::size_t start = 0;
    while (start < s.size()) {
        std::size_t end = s.find(';', start);
        if (end == std::string_view::npos) end = s.size();
        const std::string_view pair = s.substr(start, end - start);
        const std::size_t eq = pair.find('=');
        if (eq == std::string_view::npos) throw SchemaError("corrupt smart payload in store");
        int attr = 0;
        const auto rc = std::from_chars(pair.data(), pair.data() + eq, attr);
        auto value = try_parse_double(pair.substr(eq + 1));
        if (rc.ec != std::errc{} || !value) throw SchemaError("corrupt smart payload in store");
        m[attr] = *value;
        start = end + 1;
    }
    return m;
}

// Column map discovered from a Backblaze-style header.
struct SourceSchema {
    int date = -1, serial = -1, model = -1, capacity = -1, failure = -1;
    std::vector<std::pair<int, int>> raw_cols;   // (column index, attribute)
    std::vector<std::pair<int, int>> norm_cols;  // (column index, attribute)
};

inline SourceSchema discover_schema(const CsvReader& reader, const fs::path& path) {
    SourceSchema s;
    s.date = reader.column("date");
    s.serial = reader.column("serial_number");
    s.model = reader.column("model");
    s.capacity = reader.column("capacity_bytes");
    s.failure = reader.column("failure");
    std::string missing;
    if (s.date < 0) missing += " date";
    if (s.serial < 0) missing += " serial_number";
    if (s.model < 0) missing += " model";
    if (s.failure < 0) missing += " failure";
    if (!missing.empty())
        throw SchemaError("malformed header in " + path.string() + ": missing columns:" + missing);
    const auto& header = reader.header();
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string_view name = header[i];
        if (name.substr(0, 6) != "smart_") continue;
        name.remove_prefix(6);
        bool raw = false;
        if (name.size() > 4 && name.substr(name.size() - 4) == "_raw") {
            raw = true;
            name.remove_suffix(4);
        } else if (name.size() > 11 && name.substr(name.size() - 11) == "_normalized") {
            name.remove_suffix(11);
        } else {
            continue;
        }
        int attr = 0;
        const auto rc = std::from_chars(name.data(), name.data() + name.size(), attr);
        if (rc.ec != std::errc{} || rc.ptr != name.data() + name.size()) continue;
        (raw ? s.raw_cols : s.norm_cols).emplace_back(int(i), attr);
    }
    return s;
}

}  // namespace detail

/// Partitioned store rooted at a directory. Writes are serialized per
/// partition; queries may run concurrently with each other.
class Store {
public:
    explicit Store(fs::path root) : root_(std::move(root)) {
        std::error_code ec;
        fs::create_directories(root_, ec);
        if (ec) throw IoError("cannot create store root " + root_.string() + ": " + ec.message());
        load_manifest();
    }

    const fs::path& root() const { return root_; }

    /// Parses Backblaze daily CSV files and appends matching rows to their
    /// (model, year) partitions. Files already ingested (same content hash)
    /// are skipped. Distinct partitions are flushed concurrently.
    IngestSummary ingest_csv(const std::vector<fs::path>& paths,
                             const std::optional<std::string>& model_filter = std::nullopt,
                             unsigned threads = 0) {
        IngestSummary summary;
        std::map<PartitionKey, std::vector<DriveDayRecord>> buckets;
        std::vector<std::pair<std::string, std::string>> new_files;  // (hash hex, path)

        for (const auto& path : paths) {
            const std::string digest = hex64(hash_file(path));
            if (manifest_files_.count(digest)) {
                ++summary.files_skipped;
                continue;
            }
            parse_source_file(path, model_filter, buckets, summary);
            new_files.emplace_back(digest, path.string());
            ++summary.files_processed;
        }

        // Flush buckets; each partition touches its own file so partitions
        // can be written in parallel.
        std::vector<std::pair<const PartitionKey*, const std::vector<DriveDayRecord>*>> work;
        for (const auto& [key, rows] : buckets)
            if (!rows.empty()) work.emplace_back(&key, &rows);

        if (threads == 0) threads = 1;
        if (threads <= 1 || work.size() <= 1) {
            for (auto& [key, rows] : work) append_partition(*key, *rows);
        } else {
            std::atomic<std::size_t> next{0};
            auto worker = [&] {
                for (std::size_t i = next++; i < work.size(); i = next++)
                    append_partition(*work[i].first, *work[i].second);
            };
            std::vector<std::future<void>> futs;
            for (unsigned t = 0; t < std::min<std::size_t>(threads, work.size()); ++t)
                futs.push_back(std::async(std::launch::async, worker));
            for (auto& f : futs) f.get();
        }
        summary.partitions_written = work.size();

        {
            std::lock_guard lock(manifest_mutex_);
            for (auto& [digest, path] : new_files) manifest_files_[digest] = path;
            for (auto& [key, rows] : work) partition_rows_[*key] += rows->size();
            save_manifest();
        }
        return summary;
    }

    /// Unique failed serials per model over the whole store.
    FailureCensus failure_census(const std::optional<std::vector<std::string>>& models = std::nullopt) const {
        std::vector<std::string> wanted;
        if (models) {
            wanted = *models;
        } else {
            for (const auto& e : fs::directory_iterator(root_))
                if (e.is_directory()) wanted.push_back(e.path().filename().string());
            std::sort(wanted.begin(), wanted.end());
        }
        FailureCensus census;
        for (const auto& model : wanted) {
            std::set<std::string> failed;
            for (const auto& key : partitions_of(model)) {
                std::ifstream in(partition_path(key));
                if (!in) continue;
                CsvReader reader(in);
                const int serial_col = reader.column("serial_number");
                const int failure_col = reader.column("failure");
                std::vector<std::string> fields;
                while (reader.next(fields)) {
                    if (failure_col < int(fields.size()) && fields[failure_col] == "1")
                        failed.insert(fields[serial_col]);
                }
            }
            census.entries.emplace_back(model, failed.size());
        }
        std::stable_sort(census.entries.begin(), census.entries.end(),
                         [](const auto& a, const auto& b) {
                             return a.second != b.second ? a.second > b.second : a.first < b.first;
                         });
        return census;
    }

    /// Per-drive record sequences for one model over an inclusive year range,
    /// each strictly increasing in date. Duplicate (serial, date) rows keep
    /// the last occurrence; rows after a drive's first failure are dropped.
    std::vector<std::vector<DriveDayRecord>> extract_histories(const std::string& model,
                                                               int year_from, int year_to,
                                                               bool* missing_warning = nullptr) const {
        if (year_to < year_from) throw DomainError("extract_histories: empty year range");
        std::map<std::string, std::map<DayNumber, DriveDayRecord>> by_serial;
        bool any_partition = false;
        for (int year = year_from; year <= year_to; ++year) {
            const fs::path p = partition_path({model, year});
            std::ifstream in(p);
            if (!in) continue;
            any_partition = true;
            CsvReader reader(in);
            std::vector<std::string> fields;
            while (reader.next(fields)) {
                DriveDayRecord rec = decode_partition_row(fields, model);
                by_serial[rec.serial][rec.date] = std::move(rec);  // keep-last on duplicates
            }
        }
        if (missing_warning) *missing_warning = !any_partition;

        std::vector<std::vector<DriveDayRecord>> out;
        out.reserve(by_serial.size());
        for (auto& [serial, days] : by_serial) {
            std::vector<DriveDayRecord> seq;
            seq.reserve(days.size());
            for (auto& [day, rec] : days) {
                const bool failed = rec.failure;
                seq.push_back(std::move(rec));
                if (failed) break;  // drop trailing rows after first failure
            }
            out.push_back(std::move(seq));
        }
        return out;
    }

    std::vector<PartitionKey> partitions() const {
        std::vector<PartitionKey> keys;
        if (!fs::exists(root_)) return keys;
        for (const auto& model_dir : fs::directory_iterator(root_)) {
            if (!model_dir.is_directory()) continue;
            for (const auto& key : partitions_of(model_dir.path().filename().string()))
                keys.push_back(key);
        }
        std::sort(keys.begin(), keys.end());
        return keys;
    }

    std::size_t partition_row_count(const PartitionKey& key) const {
        auto it = partition_rows_.find(key);
        return it == partition_rows_.end() ? 0 : it->second;
    }

private:
    fs::path partition_path(const PartitionKey& key) const {
        return root_ / key.model / (std::to_string(key.year) + ".csv");
    }

    std::vector<PartitionKey> partitions_of(const std::string& model) const {
        std::vector<PartitionKey> keys;
        const fs::path dir = root_ / model;
        if (!fs::exists(dir)) return keys;
        for (const auto& e : fs::directory_iterator(dir)) {
            const std::string name = e.path().filename().string();
            if (name.size() == 8 && name.substr(4) == ".csv") {
                int year = 0;
                const auto rc = std::from_chars(name.data(), name.data() + 4, year);
                if (rc.ec == std::errc{}) keys.push_back({model, year});
            }
        }
        std::sort(keys.begin(), keys.end());
        return keys;
    }

    void parse_source_file(const fs::path& path, const std::optional<std::string>& model_filter,
                           std::map<PartitionKey, std::vector<DriveDayRecord>>& buckets,
                           IngestSummary& summary) const {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open input file: " + path.string());
        CsvReader reader(in);
        if (reader.header().empty()) throw SchemaError("empty file (no header): " + path.string());
        const detail::SourceSchema schema = detail::discover_schema(reader, path);

        std::vector<std::string> fields;
        while (reader.next(fields)) {
            ++summary.rows_read;
            const int max_col = std::max({schema.date, schema.serial, schema.model, schema.failure});
            if (int(fields.size()) <= max_col) {
                ++summary.rows_malformed;
                continue;
            }
            DriveDayRecord rec;
            rec.model = std::string(trim(fields[schema.model]));  // observed corpus quirk
            if (model_filter && rec.model != *model_filter) continue;
            try {
                rec.date = parse_date(trim(fields[schema.date]));
            } catch (const SchemaError&) {
                ++summary.rows_malformed;
                continue;
            }
            const int year = year_of(rec.date);
            if (year < kMinPartitionYear || year > kMaxPartitionYear) {
                ++summary.rows_malformed;
                continue;
            }
            rec.serial = std::string(trim(fields[schema.serial]));
            const std::string_view failure = trim(fields[schema.failure]);
            if (failure == "1") {
                rec.failure = true;
            } else if (failure == "0" || failure.empty()) {
                rec.failure = false;
            } else {
                ++summary.rows_malformed;
                continue;
            }
            if (rec.serial.empty()) {
                ++summary.rows_malformed;
                continue;
            }
            if (schema.capacity >= 0 && schema.capacity < int(fields.size())) {
                const std::string_view cap = trim(fields[schema.capacity]);
                if (!cap.empty()) {
                    std::int64_t v = 0;
                    const auto rc = std::from_chars(cap.data(), cap.data() + cap.size(), v);
                    // Old corpus years report capacity -1 for unknown; treat as absent.
                    if (rc.ec == std::errc{} && rc.ptr == cap.data() + cap.size() && v >= 0)
                        rec.capacity_bytes = v;
                }
            }
            bool bad_value = false;
            auto read_smart = [&](const std::vector<std::pair<int, int>>& cols,
                                  std::map<int, double>& dest) {
                for (const auto& [col, attr] : cols) {
                    if (col >= int(fields.size())) continue;
                    const std::string_view v = trim(fields[col]);
                    if (v.empty()) continue;
                    if (auto value = try_parse_double(v))
                        dest[attr] = *value;
                    else
                        bad_value = true;
                }
            };
            read_smart(schema.raw_cols, rec.smart_raw);
            read_smart(schema.norm_cols, rec.smart_norm);
            if (bad_value) {
                ++summary.rows_malformed;
                continue;
            }
            ++summary.rows_kept;
            buckets[{rec.model, year}].push_back(std::move(rec));
        }
    }

    void append_partition(const PartitionKey& key, const std::vector<DriveDayRecord>& rows) {
        std::lock_guard lock(partition_mutex(key));
        const fs::path p = partition_path(key);
        fs::create_directories(p.parent_path());
        const bool fresh = !fs::exists(p);
        std::ofstream out(p, std::ios::app);
        if (!out) throw IoError("cannot write partition " + p.string());
        if (fresh) out << "date,serial_number,capacity_bytes,failure,smart_raw,smart_norm\n";
        std::vector<std::string> fields(6);
        for (const auto& rec : rows) {
            fields[0] = format_date(rec.date);
            fields[1] = rec.serial;
            fields[2] = rec.capacity_bytes ? std::to_string(*rec.capacity_bytes) : "";
            fields[3] = rec.failure ? "1" : "0";
            fields[4] = detail::encode_smart(rec.smart_raw);
            fields[5] = detail::encode_smart(rec.smart_norm);
            write_csv_row(out, fields);
        }
    }

    DriveDayRecord decode_partition_row(const std::vector<std::string>& fields,
                                        const std::string& model) const {
        if (fields.size() != 6) throw SchemaError("corrupt partition row in store for " + model);
        DriveDayRecord rec;
        rec.date = parse_date(fields[0]);
        rec.serial = fields[1];
        rec.model = model;
        if (!fields[2].empty()) rec.capacity_bytes = std::stoll(fields[2]);
        rec.failure = fields[3] == "1";
        rec.smart_raw = detail::decode_smart(fields[4]);
        rec.smart_norm = detail::decode_smart(fields[5]);
        return rec;
    }

    std::mutex& partition_mutex(const PartitionKey& key) {
        std::lock_guard lock(mutex_map_mutex_);
        return partition_mutexes_[key];
    }

    void load_manifest() {
        const fs::path p = root_ / "manifest.json";
        if (!fs::exists(p)) return;
        std::ifstream in(p);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("corrupt manifest " + p.string() + ": " + e.what());
        }
        const nlohmann::json files = j.value("files", nlohmann::json::object());
        for (const auto& [digest, path] : files.items())
            manifest_files_[digest] = path.get<std::string>();
        const nlohmann::json parts = j.value("partitions", nlohmann::json::object());
        for (const auto& [name, count] : parts.items()) {
            const auto slash = name.find('/');
            if (slash == std::string::npos) continue;
            partition_rows_[{name.substr(0, slash), std::stoi(name.substr(slash + 1))}] =
                count.get<std::size_t>();
        }
    }

    void save_manifest() const {
        nlohmann::json j;
        j["version"] = 1;
        j["files"] = nlohmann::json::object();
        for (const auto& [digest, path] : manifest_files_) j["files"][digest] = path;
        j["partitions"] = nlohmann::json::object();
        for (const auto& [key, count] : partition_rows_)
            j["partitions"][key.model + "/" + std::to_string(key.year)] = count;
        const fs::path p = root_ / "manifest.json";
        std::ofstream out(p);
        if (!out) throw IoError("cannot write manifest " + p.string());
        out << j.dump(2) << '\n';
    }

    fs::path root_;
    std::map<std::string, std::string> manifest_files_;  // content hash -> source path
    std::map<PartitionKey, std::size_t> partition_rows_;
    mutable std::mutex manifest_mutex_;
    std::mutex mutex_map_mutex_;
    std::map<PartitionKey, std::mutex> partition_mutexes_;
};

}  // namespace diskrul
