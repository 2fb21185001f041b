#include "mbma/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace mbma::io {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\"");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

void append_le(std::string& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) {
        out.push_back(static_cast<char>(bits & 0xFF));
        bits >>= 8;
    }
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path, const CsvReadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open CSV file '" + path.string() + "'");
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_no;
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        rows.push_back(split(line));
        line_no.push_back(ln);
    }
    if (rows.empty()) throw InputError("CSV file '" + path.string() + "' has no data");

    CsvTable table;
    std::vector<std::string> header;
    std::size_t first = 0;
    const bool has_header = std::any_of(rows[0].begin(), rows[0].end(), [](const auto& c) { return !parse_number(c); });
    if (has_header) {
        header = rows[0];
        first = 1;
    }
    const std::size_t ncol = rows[0].size();
    if (header.empty())
        for (std::size_t j = 0; j < ncol; ++j) header.push_back("V" + std::to_string(j + 1));

    std::optional<std::size_t> label;
    if (opts.label_column) {
        const auto& want = *opts.label_column;
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == want) label = j;
        if (!label) {
            if (auto idx = parse_number(want); idx && *idx >= 1 && *idx <= static_cast<double>(ncol) && *idx == std::floor(*idx))
                label = static_cast<std::size_t>(*idx) - 1;
        }
        if (!label) throw InputError("label column '" + want + "' not found");
    }
    if (first >= rows.size()) throw InputError("CSV file '" + path.string() + "' has a header but no rows");

    const std::size_t nvals = ncol - (label ? 1 : 0);
    if (nvals == 0) throw InputError("CSV file has no numeric columns");
    for (std::size_t j = 0; j < ncol; ++j)
        if (!label || j != *label) table.columns.push_back(header[j]);

    table.values.resize(static_cast<Index>(rows.size() - first), static_cast<Index>(nvals));
    for (std::size_t r = first; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != ncol)
            throw InputError("line " + std::to_string(line_no[r]) + ": expected " + std::to_string(ncol) +
                             " columns, found " + std::to_string(row.size()));
        std::size_t out = 0;
        for (std::size_t j = 0; j < ncol; ++j) {
            if (label && j == *label) {
                table.labels.push_back(row[j]);
                continue;
            }
            const auto v = parse_number(row[j]);
            if (!v || !std::isfinite(*v))
                throw InputError("line " + std::to_string(line_no[r]) + ", column " + std::to_string(j + 1) +
                                 ": non-numeric value '" + row[j] + "'");
            table.values(static_cast<Index>(r - first), static_cast<Index>(out++)) = *v;
        }
    }
    return table;
}

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw NumericError("cannot format number");
    return std::string(buf.data(), ptr);
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string data_fingerprint(const DataMatrix& data) {
    std::string bytes = std::to_string(data.rows()) + "x" + std::to_string(data.cols()) + ":";
    for (Index i = 0; i < data.rows(); ++i)
        for (Index j = 0; j < data.cols(); ++j) append_le(bytes, data.values()(i, j));
    return sha256_hex(bytes);
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("write failed for '" + path.string() + "'");
}

void write_matrix_binary(const std::filesystem::path& path, const Matrix& m) {
    std::string bytes;
    bytes.reserve(static_cast<std::size_t>(m.size()) * 8);
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) append_le(bytes, m(i, j));
    write_file(path, bytes);
}

Matrix read_matrix_binary(const std::filesystem::path& path, Index rows, Index cols) {
    const std::string bytes = read_file(path);
    if (bytes.size() != static_cast<std::size_t>(rows * cols) * 8)
        throw InputError("binary matrix '" + path.string() + "' has unexpected size");
    Matrix m(rows, cols);
    std::size_t pos = 0;
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) {
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(k)])) << (8 * k);
            pos += 8;
            m(i, j) = std::bit_cast<double>(bits);
        }
    return m;
}

std::string matrix_to_csv(const Matrix& m, const std::vector<std::string>& header) {
    std::string out;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j) out += ',';
        out += header[j];
    }
    out += '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

}  // namespace mbma::io
