#include "specmp/csv.hpp"

#include "specmp/errors.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

namespace specmp {

std::string format_double(double value) {
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    return std::string(buf, result.ptr);
}

std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& columns) {
    if (header.size() != columns.size()) throw ValidationError("CSV header and column count differ");
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (const auto& c : columns) {
        if (c.size() != rows) throw ValidationError("CSV columns differ in length");
    }
    std::string out;
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (k > 0) out += ',';
        out += header[k];
    }
    out += '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < columns.size(); ++k) {
            if (k > 0) out += ',';
            out += format_double(columns[k][r]);
        }
        out += '\n';
    }
    return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
    const auto text = to_csv(header, columns);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open " + path + " for writing");
    file << text;
    if (!file) throw std::runtime_error("failed writing " + path);
}

}  // namespace specmp
