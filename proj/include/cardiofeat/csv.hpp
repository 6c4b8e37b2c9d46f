#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "cardiofeat/error.hpp"
#include "cardiofeat/feature_vector.hpp"

namespace cardiofeat::csv {

/// Shortest round-trippable decimal; empty for the missing sentinel.
inline std::string format_double(double v) {
    if (is_missing(v)) return {};
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Plain comma split (no quoting; ids and names never contain commas).
inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

/// Empty cell -> kMissing. Throws MalformedHeader on junk.
inline double parse_double(std::string_view cell) {
    while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
    while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
    if (cell.empty()) return kMissing;
    double v = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw Error(ErrorCode::MalformedHeader, "bad numeric cell '" + std::string(cell) + "'");
    }
    return v;
}

}  // namespace cardiofeat::csv
