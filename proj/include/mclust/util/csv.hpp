#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mclust/util/error.hpp"

namespace mclust::csv {

// Splits one CSV line. Double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// Reads a header plus data rows, tracking 1-based line numbers for diagnostics.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    // Reads the header and checks it against `expected`, ignoring a UTF-8 BOM and CR.
    void expect_header(const std::vector<std::string>& expected) {
        std::string line;
        if (!next_raw(line)) throw InputError("missing CSV header");
        if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        auto got = split_line(line);
        if (got != expected) {
            std::string want;
            for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
            throw InputError("unexpected CSV header '" + line + "', expected '" + want + "'");
        }
    }

    // Next non-blank row; false at end of input.
    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (next_raw(line)) {
            if (line.empty()) continue;
            fields = split_line(line);
            return true;
        }
        return false;
    }

    std::size_t line_number() const noexcept { return line_; }

private:
    bool next_raw(std::string& line) {
        if (!std::getline(in_, line)) return false;
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    }

    std::istream& in_;
    std::size_t line_ = 0;
};

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

inline std::optional<double> parse_double(std::string_view text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<long long> parse_int(std::string_view text) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return v;
}

// Shortest representation that round-trips exactly.
inline std::string format(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string format(const std::optional<double>& v) { return v ? format(*v) : std::string{}; }

}  // namespace mclust::csv
