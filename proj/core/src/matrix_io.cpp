#include "spiked/matrix_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "spiked/errors.hpp"

namespace spiked {

namespace {

double parse_field(std::string_view field, std::size_t line) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
        field.remove_suffix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw ValidationError("line " + std::to_string(line) + ": cannot parse number \"" +
                              std::string(field) + "\"");
    }
    return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    return in;
}

}  // namespace

Matrix parse_matrix_csv(std::istream& in) {
    std::vector<double> values;
    Eigen::Index cols = -1;
    Eigen::Index rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Eigen::Index count = 0;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            values.push_back(parse_field(rest.substr(0, comma), line_no));
            ++count;
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (cols < 0) cols = count;
        if (count != cols) {
            throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(cols) + " fields, got " + std::to_string(count));
        }
        ++rows;
    }
    if (rows == 0) throw ValidationError("matrix file is empty");
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(i * cols + j)];
    }
    return m;
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_matrix_csv(in);
}

std::string format_double(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
    std::string row;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        row.clear();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) row += ',';
            row += format_double(m(i, j));
        }
        row += '\n';
        out << row;
    }
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    write_matrix_csv(out, m);
}

std::vector<double> read_numbers(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<double> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        for (char& c : line) {
            if (c == ',' || c == ';') c = ' ';
        }
        std::istringstream fields(line);
        std::string token;
        while (fields >> token) out.push_back(parse_field(token, line_no));
    }
    return out;
}

}  // namespace spiked
