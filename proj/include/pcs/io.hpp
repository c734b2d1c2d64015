/*
   Copyright 2026 The pcs Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

// Plain-text vector files: one decimal value per line. Doubles are written in
// shortest round-trip form so write -> read -> write is byte-stable.

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcs/error.hpp"

namespace pcs::io {

inline std::string format_double(double x)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::string_view what)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    double x = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ValidationError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
    return x;
}

inline std::uint64_t parse_u64(std::string_view s, std::string_view what)
{
    std::uint64_t x = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ValidationError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
    return x;
}

inline void write_values(std::ostream& os, std::span<const double> v)
{
    for (double x : v) os << format_double(x) << '\n';
}

inline void write_values(std::ostream& os, std::span<const std::uint64_t> v)
{
    for (auto x : v) os << x << '\n';
}

inline std::vector<double> read_values(std::istream& is)
{
    std::vector<double> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        out.push_back(parse_double(line, "value"));
    }
    return out;
}

/// Counts must be nonnegative integers; "12" and "12.0" are both accepted.
inline std::vector<std::uint64_t> read_counts(std::istream& is)
{
    std::vector<std::uint64_t> out;
    for (double x : read_values(is)) {
        if (!(x >= 0.0) || x != static_cast<double>(static_cast<std::uint64_t>(x)))
            throw ValidationError("count vector entry is not a nonnegative integer: " + format_double(x));
        out.push_back(static_cast<std::uint64_t>(x));
    }
    return out;
}

inline std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    return out;
}

} // namespace pcs::io
