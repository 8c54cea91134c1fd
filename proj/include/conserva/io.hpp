#ifndef CONSERVA_IO_HPP
#define CONSERVA_IO_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "conserva/linalg.hpp"

namespace conserva {

/// CSV writer: '#'-prefixed preamble lines (resolved config, seed, command),
/// then a header row, then rows. Doubles are printed with %.17g so reruns are
/// byte-identical.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& preamble,
              const std::vector<std::string>& columns);
    ~CsvWriter();

    void cell(const std::string& v);
    void cell(double v);
    void cell(std::int64_t v);
    void end_row();

  private:
    std::ofstream out_;
    bool row_open_ = false;
};

std::string format_double(double v);

/// Binary matrix dump: 16-byte magic, u64 rows, u64 cols, row-major little
/// endian doubles.
inline constexpr char kMatrixMagic[17] = "CONSERVAMAT00001";
void write_matrix(const std::string& path, const Matrix& m);
Matrix read_matrix(const std::string& path);

void ensure_directory(const std::string& path);

} // namespace conserva

#endif
