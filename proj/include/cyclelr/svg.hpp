#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cyclelr {

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column_index(const std::string& name) const;  // throws if absent
};

// Header line plus numeric rows; errors carry the line number.
CsvTable read_csv_table(const std::filesystem::path& path);

// Self-contained SVG 1.1 line chart: two axis lines, min/max tick labels,
// axis titles taken from the column names, and a single polyline.
std::string render_line_chart(const CsvTable& table, const std::string& x_column,
                              const std::string& y_column);

} // namespace cyclelr
