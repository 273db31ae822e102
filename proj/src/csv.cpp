#include "bsdelab/csv.hpp"

#include <cmath>
#include <cstdio>

#include "bsdelab/errors.hpp"

namespace bsdelab {

std::string format_double(double v) {
    if (!std::isfinite(v)) throw DataError("refusing to write a non-finite value to a report");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);  // no "-0"
    return buf;
}

CsvCell::CsvCell(double v) : text_(format_double(v)) {}

CsvWriter::CsvWriter(const std::filesystem::path& file, const std::vector<std::string>& header)
    : file_(file), out_(file), columns_(header.size()) {
    if (!out_) throw DataError("cannot write " + file.string());
    for (std::size_t c = 0; c < header.size(); ++c) out_ << (c ? "," : "") << header[c];
    out_ << '\n';
}

void CsvWriter::row(std::initializer_list<CsvCell> cells) { row(std::vector<CsvCell>(cells)); }

void CsvWriter::row(const std::vector<CsvCell>& cells) {
    if (cells.size() != columns_) throw DataError(file_.string() + ": row width does not match the header");
    for (std::size_t c = 0; c < cells.size(); ++c) out_ << (c ? "," : "") << cells[c].text();
    out_ << '\n';
    if (!out_) throw DataError("write failed for " + file_.string());
}

}  // namespace bsdelab
