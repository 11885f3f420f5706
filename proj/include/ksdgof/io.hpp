#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ksdgof/errors.hpp"
#include "ksdgof/types.hpp"

namespace ksdgof {

// Plain-text data files: one observation per line, coordinates separated by
// commas, '#' starts a comment, blank lines are skipped.

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\f\v");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\f\v");
    return s.substr(first, last - first + 1);
}

inline double parse_number(std::string_view field, const std::string& where) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
        throw DataError(where + ": cannot parse '" + std::string(field) + "' as a number");
    }
    if (!std::isfinite(v)) throw DataError(where + ": non-finite value");
    return v;
}

}  // namespace detail

/// Reads a dataset from a stream. `name` prefixes error messages.
inline Dataset read_dataset(std::istream& in, const std::string& name = "<input>") {
    std::vector<double> values;
    Eigen::Index dim = 0;
    std::size_t line_no = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body(line);
        if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        body = detail::trim(body);
        if (body.empty()) continue;

        const std::string where = name + ":" + std::to_string(line_no);
        Eigen::Index fields = 0;
        std::size_t start = 0;
        while (true) {
            const auto comma = body.find(',', start);
            values.push_back(detail::parse_number(body.substr(start, comma - start), where));
            ++fields;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (dim == 0) {
            dim = fields;
        } else if (fields != dim) {
            throw DataError(where + ": expected " + std::to_string(dim) + " columns, found " +
                            std::to_string(fields));
        }
    }
    if (dim == 0) throw DataError(name + ": no observations");
    const auto n = static_cast<Eigen::Index>(values.size()) / dim;
    return Eigen::Map<const Matrix>(values.data(), dim, n);
}

inline Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file " + path.string());
    return read_dataset(in, path.string());
}

inline constexpr Eigen::Index kGalaxiesRows = 82;

/// The 82 galaxy velocities (km/s), unnormalized.
inline std::vector<double> load_galaxies(const std::filesystem::path& path) {
    const Dataset d = load_dataset(path);
    if (d.rows() != 1) {
        throw DataError(path.string() + ": galaxies data must have one column, found " +
                        std::to_string(d.rows()));
    }
    if (d.cols() != kGalaxiesRows) {
        throw DataError(path.string() + ": galaxies data must have " + std::to_string(kGalaxiesRows) +
                        " rows, found " + std::to_string(d.cols()));
    }
    return values_of(d);
}

}  // namespace ksdgof
