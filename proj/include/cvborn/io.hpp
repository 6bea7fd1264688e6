/**
 * Copyright 2026 The cvborn authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cvborn/common.hpp"

namespace cvborn {

/// Full-precision decimal rendering (17 significant digits round-trips double).
inline std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

/// Writes via a temp file and rename, so readers never observe partial output.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot open for writing: " + tmp.string());
        out << content;
        if (!out) throw ValidationError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& values) {
    if (header.size() != static_cast<std::size_t>(values.cols())) {
        throw ValidationError("write_csv: header does not match column count");
    }
    std::ostringstream out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i > 0) out << ',';
        out << header[i];
    }
    out << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            if (c > 0) out << ',';
            out << format_double(values(r, c));
        }
        out << '\n';
    }
    write_text_atomic(path, out.str());
}

struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open CSV: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty CSV: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();

    CsvTable table;
    {
        std::stringstream header(line);
        std::string field;
        while (std::getline(header, field, ',')) table.header.push_back(field);
    }
    if (table.header.empty()) throw ValidationError("CSV has no columns: " + path.string());

    std::vector<double> data;
    Eigen::Index rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string field;
        std::size_t cols = 0;
        while (std::getline(row, field, ',')) {
            try {
                data.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw ValidationError("CSV field is not a number: '" + field + "'");
            }
            ++cols;
        }
        if (cols != table.header.size()) {
            throw ValidationError("CSV row width mismatch in " + path.string());
        }
        ++rows;
    }
    table.values.resize(rows, static_cast<Eigen::Index>(table.header.size()));
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
            table.values(r, c) = data[static_cast<std::size_t>(r * table.values.cols() + c)];
        }
    }
    return table;
}

}  // namespace cvborn
