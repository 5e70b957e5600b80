#pragma once

#include <string>
#include <vector>

namespace sdlab {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

/// RFC-4180 style: quote fields holding a comma, quote or line break.
std::string csv_escape(const std::string& field);
std::string csv_line(const std::vector<std::string>& fields);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv_file(const std::string& path);
std::string read_text_file(const std::string& path);
/// Throws IoError when the file cannot be written.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace sdlab
