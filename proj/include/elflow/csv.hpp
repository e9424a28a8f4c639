#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace elflow {

/// One CSV field. Doubles are printed with 17 significant digits.
class CsvCell {
public:
    CsvCell(double v) : value_(v) {}
    CsvCell(long long v) : value_(v) {}
    CsvCell(int v) : value_(static_cast<long long>(v)) {}
    CsvCell(std::string v) : value_(std::move(v)) {}
    CsvCell(const char* v) : value_(std::string(v)) {}

    std::string str() const;

private:
    std::variant<double, long long, std::string> value_;
};

struct CsvTable {
    explicit CsvTable(std::vector<std::string> header_) : header(std::move(header_)) {}
    void add_row(std::vector<CsvCell> row);

    std::vector<std::string> header;
    std::vector<std::vector<CsvCell>> rows;
};

std::string format_double(double v);

/// Header line plus rows, LF line endings. Throws Error on I/O failure or a
/// row whose width differs from the header.
void write_csv(const CsvTable& table, const std::string& path);
std::string to_csv_string(const CsvTable& table);

/// Parsed CSV: header plus string cells.
struct CsvContent {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvContent read_csv(const std::string& path);

/// Plain-text dump: one matrix row per line, space separated.
void write_matrix_text(const Eigen::MatrixXd& m, const std::string& path);

}  // namespace elflow
