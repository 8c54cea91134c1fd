#include "conserva/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>

#include "conserva/errors.hpp"

namespace conserva {

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& preamble,
                     const std::vector<std::string>& columns)
    : out_(path, std::ios::binary) {
    if (!out_) throw validation_error("cannot open for writing: " + path);
    for (const auto& line : preamble) out_ << "# " << line << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) out_ << ",";
        out_ << columns[i];
    }
    out_ << "\n";
}

CsvWriter::~CsvWriter() {
    if (row_open_) out_ << "\n";
}

void CsvWriter::cell(const std::string& v) {
    if (row_open_) out_ << ",";
    out_ << v;
    row_open_ = true;
}

void CsvWriter::cell(double v) { cell(format_double(v)); }

void CsvWriter::cell(std::int64_t v) { cell(std::to_string(v)); }

void CsvWriter::end_row() {
    out_ << "\n";
    row_open_ = false;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_matrix(const std::string& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot open for writing: " + path);
    out.write(kMatrixMagic, 16);
    const std::uint64_t dims[2] = {std::uint64_t(m.rows()), std::uint64_t(m.cols())};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    out.write(reinterpret_cast<const char*>(m.data().data()),
              std::streamsize(m.data().size() * sizeof(double)));
}

Matrix read_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot open for reading: " + path);
    char magic[16];
    in.read(magic, 16);
    if (std::memcmp(magic, kMatrixMagic, 16) != 0) {
        throw validation_error("not a matrix dump: " + path);
    }
    std::uint64_t dims[2];
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    Matrix m{int(dims[0]), int(dims[1])};
    in.read(reinterpret_cast<char*>(m.data().data()),
            std::streamsize(m.data().size() * sizeof(double)));
    if (!in) throw validation_error("truncated matrix dump: " + path);
    return m;
}

void ensure_directory(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw validation_error("cannot create directory: " + path);
}

} // namespace conserva
