#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

#include "vhj/error.hpp"

namespace vhj {

/// Shortest round-trip decimal form of a double. Output depends only on the
/// bit pattern, which keeps emitted tables byte-stable across runs.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";  // folds -0 into 0
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& context) {
    std::string t;
    for (char c : s)
        if (c != ' ' && c != '\t' && c != '\r') t.push_back(c);
    if (t == "nan") return std::nan("");
    if (t == "inf") return INFINITY;
    if (t == "-inf") return -INFINITY;
    double v = 0.0;
    const char* first = t.data();
    if (!t.empty() && t[0] == '+') ++first;
    auto res = std::from_chars(first, t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
        fail(ErrorKind::config, context + ": cannot parse number '" + s + "'");
    return v;
}

}  // namespace vhj
