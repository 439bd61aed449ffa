#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ttsa {

/// Full-precision, locale-independent float formatting (%.17g): parsing the
/// text back recovers the exact double, and equal runs produce equal bytes.
std::string format_double(double v);

/// FNV-1a 64-bit over the bytes of `text`.
std::uint64_t fnv1a64(const std::string& text);

std::string to_hex(std::uint64_t v);

/// One parsed CSV table: a leading "# ..." comment line (optional), a header
/// row, then numeric rows.
struct CsvTable {
    std::string comment;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int column_index(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);

}  // namespace ttsa
