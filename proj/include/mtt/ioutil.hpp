#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mtt {

// All artifact writes go through a temp file + rename so readers never see a
// half-written file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);
void atomic_write_file(const std::filesystem::path& path, const void* data, size_t n);

std::string read_file(const std::filesystem::path& path);

// FNV-1a 64-bit, used to stamp artifacts with their config hash.
uint64_t fnv1a64(const std::string& s);
std::string fnv1a64_hex(const std::string& s);

// Minimal CSV support: comma separation, no quoting (none of our fields need
// it). Lines starting with '#' are skipped on read.
std::vector<std::string> split_csv_line(const std::string& line);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
// Fixed-precision form for report-style columns.
std::string format_fixed(double v, int digits);

}  // namespace mtt
