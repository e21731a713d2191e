#pragma once

#include <string>
#include <vector>

namespace costknock {

/// Shortest decimal string that parses back to exactly the same double.
/// All numeric file output goes through this so reruns are byte-identical.
std::string format_double(double v);

/// Raw CSV file: a header row plus string cells. No quoting or escaping is
/// supported; the interchange files written by this project never need it.
struct CsvFile {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column position by header name, -1 when absent.
    int column_index(const std::string& name) const;
};

CsvFile read_csv(const std::string& path);

/// Parse one cell as a double; errors name the file position (1-based data
/// row) and the offending column.
double parse_cell(const CsvFile& file, std::size_t row, int col,
                  const std::string& context);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

std::string join_fields(const std::vector<std::string>& fields);

} // namespace costknock
