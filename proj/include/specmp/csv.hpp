#pragma once

#include <string>
#include <vector>

namespace specmp {

/// Shortest-safe decimal form with 17 significant digits, '.' separator,
/// independent of the global locale.
[[nodiscard]] std::string format_double(double value);

/**
 * Writes a CSV file with a header row and one row per index of the
 * (equal-length) columns.
 *
 * @throws ValidationError if the columns differ in length or the header
 *         size does not match.
 * @throws std::runtime_error if the file cannot be written.
 */
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

/// Same as write_csv but returns the text.
[[nodiscard]] std::string to_csv(const std::vector<std::string>& header,
                                 const std::vector<std::vector<double>>& columns);

}  // namespace specmp
