// CSV output for run records. The column set and formatting are part of the
// tool's external contract: header
//   t,e_A_norm,e_b_norm,e_R_norm,e_R_polar_norm,V,V_bound
// then one row per sample, values printed with 15 significant digits, LF
// line endings, "nan" for columns a run does not populate.

#pragma once

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "harness.hpp"

namespace gyrobs {

inline const char* kRunCsvHeader = "t,e_A_norm,e_b_norm,e_R_norm,e_R_polar_norm,V,V_bound";

inline std::string format_csv_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

inline void write_run_csv(const RunRecord& rec, std::ostream& out) {
    out << kRunCsvHeader << "\n";
    for (std::size_t i = 0; i < rec.samples(); ++i) {
        out << format_csv_value(rec.t[i]) << ','
            << format_csv_value(rec.signal_error[i]) << ','
            << format_csv_value(rec.bias_error[i]) << ','
            << format_csv_value(rec.attitude_error[i]) << ','
            << format_csv_value(rec.attitude_error_polar[i]) << ','
            << format_csv_value(rec.value[i]) << ','
            << format_csv_value(rec.value_bound[i]) << "\n";
    }
}

struct CsvSeries {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) return i;
        }
        throw std::out_of_range("csv: no column named " + name);
    }

    std::vector<double> column(const std::string& name) const {
        const std::size_t idx = column_index(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& row : rows) out.push_back(row[idx]);
        return out;
    }
};

inline CsvSeries parse_csv(std::istream& in) {
    CsvSeries series;
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("csv: empty input");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::stringstream header(line);
    std::string field;
    while (std::getline(header, field, ',')) series.columns.push_back(field);

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream row_stream(line);
        std::vector<double> row;
        while (std::getline(row_stream, field, ',')) {
            row.push_back(std::strtod(field.c_str(), nullptr));
        }
        if (row.size() != series.columns.size()) {
            throw std::runtime_error("csv: ragged row");
        }
        series.rows.push_back(std::move(row));
    }
    return series;
}

}  // namespace gyrobs
