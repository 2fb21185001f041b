#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mbma/mixture.hpp"

namespace mbma::io {

struct CsvReadOptions {
    // Column to exclude, by header name or 1-based index.
    std::optional<std::string> label_column;
};

struct CsvTable {
    std::vector<std::string> columns;  // numeric column names (generated if no header)
    Matrix values;
    std::vector<std::string> labels;   // label column, when requested
};

// Reads a numeric CSV. Lines starting with '#' are comments; the first
// non-comment line is a header when any of its fields is non-numeric.
// Malformed content raises InputError naming the 1-based line and column.
CsvTable read_csv(const std::filesystem::path& path, const CsvReadOptions& opts = {});

// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
// Hash of the row-major little-endian float64 bytes plus the shape.
std::string data_fingerprint(const DataMatrix& data);

void write_file(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

// Flat little-endian float64, row-major, no header.
void write_matrix_binary(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_binary(const std::filesystem::path& path, Index rows, Index cols);

// CSV with a header row and rows of shortest-round-trip numbers.
std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& header);

}  // namespace mbma::io
