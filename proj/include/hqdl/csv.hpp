// Copyright 2026 The hqdl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hqdl/error.hpp"

namespace hqdl::csv {

/// Shortest round-trippable rendering (so re-parsed rows compare bit-exact).
inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string num(std::uint64_t v) { return std::to_string(v); }

inline std::string join(const std::vector<std::string> &fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) {
            out += ',';
        }
        out += fields[i];
    }
    return out;
}

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string &field, const std::string &where) {
    const std::string t = trim(field);
    try {
        std::size_t used = 0;
        const double v = std::stod(t, &used);
        if (used != t.size()) {
            throw std::invalid_argument(t);
        }
        return v;
    } catch (const std::exception &) {
        fail(ErrorCode::InvalidArgument, where + ": '" + t + "' is not a number");
    }
}

/// Numeric CSV with a constant column count. Lines starting with '#' and
/// blank lines are skipped; a non-numeric first row is treated as a header.
inline std::vector<std::vector<double>> read_table(std::istream &in, const std::string &name) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        const auto fields = split(t);
        if (rows.empty() && width == 0) {
            bool header = false;
            for (const auto &f : fields) {
                const std::string ft = trim(f);
                if (!ft.empty() && (std::isalpha(static_cast<unsigned char>(ft[0])) != 0) &&
                    ft != "nan" && ft != "inf") {
                    header = true;
                }
            }
            if (header) {
                width = fields.size();
                continue;
            }
        }
        std::vector<double> row;
        for (std::size_t c = 0; c < fields.size(); ++c) {
            row.push_back(parse_double(fields[c], name + ":" + std::to_string(lineno) + ": column " +
                                                      std::to_string(c + 1)));
        }
        if (width == 0) {
            width = row.size();
        }
        require(row.size() == width, ErrorCode::InvalidArgument,
                name + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                    " columns, found " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<std::vector<double>> read_table_file(const std::string &path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::InvalidArgument, "cannot open '" + path + "'");
    return read_table(in, path);
}

inline Eigen::MatrixXd read_matrix_file(const std::string &path) {
    const auto rows = read_table_file(path);
    require(!rows.empty(), ErrorCode::InvalidArgument, path + ": matrix file is empty");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return m;
}

inline void write_matrix(std::ostream &out, const Eigen::MatrixXd &m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out << (j ? "," : "") << num(m(i, j));
        }
        out << '\n';
    }
}

} // namespace hqdl::csv
