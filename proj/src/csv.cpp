#include "costknock/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "costknock/errors.hpp"

namespace costknock {

std::string format_double(double v) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
    return std::string(buffer, result.ptr);
}

int CsvFile::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return s.substr(a, b - a);
}

} // namespace

CsvFile read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open file: " + path);

    CsvFile file;
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (!saw_header && !line.empty() && line.front() == '\xef') {
            line.erase(0, 3); // UTF-8 byte-order mark
        }
        std::vector<std::string> fields = split_line(line);
        for (auto& f : fields) f = trim(f);
        const bool blank = fields.size() == 1 && fields[0].empty();
        if (blank) continue;
        if (!saw_header) {
            file.header = std::move(fields);
            saw_header = true;
        } else {
            if (fields.size() != file.header.size()) {
                throw input_error(path + ": data row " + std::to_string(file.rows.size() + 1) +
                                  " has " + std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(file.header.size()));
            }
            file.rows.push_back(std::move(fields));
        }
    }
    if (!saw_header) throw input_error(path + ": file is empty");
    return file;
}

double parse_cell(const CsvFile& file, std::size_t row, int col, const std::string& context) {
    const std::string& cell = file.rows[row][static_cast<std::size_t>(col)];
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    double value = 0.0;
    const auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc() || result.ptr != end) {
        throw input_error(context + ": row " + std::to_string(row + 1) + ", column '" +
                          file.header[static_cast<std::size_t>(col)] + "' holds non-numeric value '" +
                          cell + "'");
    }
    return value;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open file: " + path);
    std::ostringstream body;
    body << in.rdbuf();
    return body.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write file: " + path);
    out << content;
    if (!out) throw input_error("write failed: " + path);
}

std::string join_fields(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) line += ',';
        line += fields[i];
    }
    return line;
}

} // namespace costknock
