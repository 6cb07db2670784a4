#include "cyclelr/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cyclelr/common.hpp"

namespace cyclelr {

std::size_t CsvTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) return i;
    }
    std::string have;
    for (const auto& c : columns) have += (have.empty() ? "" : ", ") + c;
    throw ConfigError("column \"" + name + "\" not found (have: " + have + ")");
}

CsvTable read_csv_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open \"" + path.string() + "\"");

    CsvTable table;
    std::string line;
    check_config(static_cast<bool>(std::getline(in, line)),
          "\"" + path.string() + "\" is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::istringstream header(line);
        std::string cell;
        while (std::getline(header, cell, ',')) table.columns.push_back(cell);
    }
    check_config(!table.columns.empty(), "\"" + path.string() + "\" has no header columns");

    long long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            try {
                std::size_t consumed = 0;
                row.push_back(std::stod(cell, &consumed));
                check(consumed == cell.size(), "trailing junk");
            } catch (const std::exception&) {
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                  ": cannot parse \"" + cell + "\" as a number");
            }
        }
        if (row.size() != table.columns.size()) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(table.columns.size()) + " columns, got " +
                        std::to_string(row.size()));
        }
        table.rows.push_back(std::move(row));
    }
    check_config(!table.rows.empty(), "\"" + path.string() + "\" contains no data rows");
    return table;
}

std::string render_line_chart(const CsvTable& table, const std::string& x_column,
                              const std::string& y_column) {
    const std::size_t xi = table.column_index(x_column);
    const std::size_t yi = table.column_index(y_column);

    const double width = 640, height = 420;
    const double left = 70, right = 20, top = 20, bottom = 50;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double xmin = table.rows[0][xi], xmax = xmin;
    double ymin = table.rows[0][yi], ymax = ymin;
    for (const auto& row : table.rows) {
        xmin = std::min(xmin, row[xi]);
        xmax = std::max(xmax, row[xi]);
        ymin = std::min(ymin, row[yi]);
        ymax = std::max(ymax, row[yi]);
    }
    // degenerate ranges plot as a centered flat line
    const double xspan = xmax > xmin ? xmax - xmin : 1.0;
    const double yspan = ymax > ymin ? ymax - ymin : 1.0;

    auto sx = [&](double v) {
        return xmax > xmin ? left + (v - xmin) / xspan * plot_w : left + plot_w / 2;
    };
    auto sy = [&](double v) {
        return ymax > ymin ? top + plot_h - (v - ymin) / yspan * plot_h : top + plot_h / 2;
    };

    std::string points;
    for (const auto& row : table.rows) {
        if (!points.empty()) points += " ";
        points += fmt_double(sx(row[xi])) + "," + fmt_double(sy(row[yi]));
    }

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
           fmt_double(width) + "\" height=\"" + fmt_double(height) + "\" viewBox=\"0 0 " +
           fmt_double(width) + " " + fmt_double(height) + "\">\n";
    svg += "  <rect x=\"0\" y=\"0\" width=\"" + fmt_double(width) + "\" height=\"" +
           fmt_double(height) + "\" fill=\"white\"/>\n";
    // axes
    svg += "  <line x1=\"" + fmt_double(left) + "\" y1=\"" + fmt_double(top + plot_h) +
           "\" x2=\"" + fmt_double(left + plot_w) + "\" y2=\"" + fmt_double(top + plot_h) +
           "\" stroke=\"black\"/>\n";
    svg += "  <line x1=\"" + fmt_double(left) + "\" y1=\"" + fmt_double(top) + "\" x2=\"" +
           fmt_double(left) + "\" y2=\"" + fmt_double(top + plot_h) + "\" stroke=\"black\"/>\n";
    // tick labels
    svg += "  <text x=\"" + fmt_double(left) + "\" y=\"" + fmt_double(height - 28) +
           "\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">" +
           fmt_double(xmin) + "</text>\n";
    svg += "  <text x=\"" + fmt_double(left + plot_w) + "\" y=\"" + fmt_double(height - 28) +
           "\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">" +
           fmt_double(xmax) + "</text>\n";
    svg += "  <text x=\"" + fmt_double(left - 6) + "\" y=\"" + fmt_double(top + plot_h) +
           "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">" +
           fmt_double(ymin) + "</text>\n";
    svg += "  <text x=\"" + fmt_double(left - 6) + "\" y=\"" + fmt_double(top + 10) +
           "\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">" +
           fmt_double(ymax) + "</text>\n";
    // axis titles
    svg += "  <text x=\"" + fmt_double(left + plot_w / 2) + "\" y=\"" + fmt_double(height - 8) +
           "\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\">" + x_column +
           "</text>\n";
    svg += "  <text x=\"16\" y=\"" + fmt_double(top + plot_h / 2) +
           "\" font-size=\"13\" text-anchor=\"middle\" font-family=\"sans-serif\" transform=\"rotate(-90 16 " +
           fmt_double(top + plot_h / 2) + ")\">" + y_column + "</text>\n";
    svg += "  <polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\" points=\"" + points +
           "\"/>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace cyclelr
