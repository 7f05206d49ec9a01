#pragma once

// Header-driven CSV reading and plain writing. Quoted fields are accepted on
// input (Backblaze files occasionally quote model names); output never needs
// quoting because store fields contain no commas.

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "diskrul/common.hpp"

namespace diskrul {

/// Splits one CSV line into fields, honoring double-quote escaping.
inline void split_csv_line(std::string_view line, std::vector<std::string>& out) {
    out.clear();
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
}

class CsvReader {
public:
    /// Reads the header row up front; empty stream yields an empty header.
    explicit CsvReader(std::istream& in) : in_(in) {
        std::string line;
        if (std::getline(in_, line)) {
            split_csv_line(line, header_);
            for (std::size_t i = 0; i < header_.size(); ++i) index_.emplace(header_[i], int(i));
        }
    }

    const std::vector<std::string>& header() const { return header_; }

    int column(std::string_view name) const {
        auto it = index_.find(std::string(name));
        return it == index_.end() ? -1 : it->second;
    }

    /// Next data row; returns false at end of input. Blank lines are skipped.
    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in_, line)) {
            if (trim(line).empty()) continue;
            split_csv_line(line, fields);
            return true;
        }
        return false;
    }

private:
    std::istream& in_;
    std::vector<std::string> header_;
    std::unordered_map<std::string, int> index_;
};

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << fields[i];
    }
    out << '\n';
}

}  // namespace diskrul
