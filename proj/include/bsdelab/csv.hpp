#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace bsdelab {

// One formatted field. Doubles use %.17g so files round-trip exactly.
class CsvCell {
public:
    CsvCell(double v);
    CsvCell(int v) : text_(std::to_string(v)) {}
    CsvCell(long v) : text_(std::to_string(v)) {}
    CsvCell(unsigned long v) : text_(std::to_string(v)) {}
    CsvCell(unsigned long long v) : text_(std::to_string(v)) {}
    CsvCell(const std::string& v) : text_(v) {}
    CsvCell(const char* v) : text_(v) {}

    const std::string& text() const { return text_; }

private:
    std::string text_;
};

// Writes rows as they come. Non-finite numbers throw DataError, so reports
// never contain NaN or inf.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& file, const std::vector<std::string>& header);

    void row(std::initializer_list<CsvCell> cells);
    void row(const std::vector<CsvCell>& cells);

private:
    std::filesystem::path file_;
    std::ofstream out_;
    std::size_t columns_;
};

std::string format_double(double v);

}  // namespace bsdelab
