#include "elflow/csv.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "elflow/errors.hpp"

namespace elflow {

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

std::string CsvCell::str() const {
    if (const auto* d = std::get_if<double>(&value_)) return format_double(*d);
    if (const auto* i = std::get_if<long long>(&value_)) return std::to_string(*i);
    return std::get<std::string>(value_);
}

void CsvTable::add_row(std::vector<CsvCell> row) {
    if (row.size() != header.size()) throw Error("csv row width does not match header");
    rows.push_back(std::move(row));
}

std::string to_csv_string(const CsvTable& table) {
    std::string out;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out += ',';
        out += table.header[i];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += row[i].str();
        }
        out += '\n';
    }
    return out;
}

void write_csv(const CsvTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << to_csv_string(table);
    if (!out) throw Error("failed writing '" + path + "'");
}

CsvContent read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    };
    CsvContent content;
    std::string line;
    if (!std::getline(in, line)) throw Error("'" + path + "' has no header");
    content.header = split(line);
    while (std::getline(in, line)) content.rows.push_back(split(line));
    return content;
}

void write_matrix_text(const Eigen::MatrixXd& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ' ';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
    if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace elflow
