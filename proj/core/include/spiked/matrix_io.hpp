#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "spiked/spectral.hpp"

namespace spiked {

/// Row-major CSV, no header. Throws ValidationError on ragged rows or
/// unparsable fields.
Matrix read_matrix_csv(const std::filesystem::path& path);
Matrix parse_matrix_csv(std::istream& in);

/// Row-major CSV with 17 significant digits per entry.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
void write_matrix_csv(std::ostream& out, const Matrix& m);

/// All numbers in a file separated by whitespace and/or commas.
std::vector<double> read_numbers(const std::filesystem::path& path);

/// Shortest-safe decimal form with 17 significant digits.
std::string format_double(double x);

}  // namespace spiked
