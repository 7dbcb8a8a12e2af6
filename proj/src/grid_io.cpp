#include "powertrend/grid_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace powertrend {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

[[noreturn]] void bad_row(std::size_t lineno, const std::string& what) {
    std::ostringstream os;
    os << "grid csv, line " << lineno << ": " << what;
    throw std::runtime_error(os.str());
}

}  // namespace

LatticeGrid read_grid_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("grid csv: empty input");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header.back() != "y")
        throw std::runtime_error("grid csv: header must be u1,...,ud,y");
    const int d = static_cast<int>(header.size()) - 1;
    for (int i = 0; i < d; ++i)
        if (header[i] != "u" + std::to_string(i + 1))
            throw std::runtime_error("grid csv: header must be u1,...,ud,y");

    struct Row {
        std::vector<int> u;
        double y;
    };
    std::vector<Row> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != d + 1) bad_row(lineno, "wrong field count");
        Row row;
        row.u.resize(d);
        try {
            for (int i = 0; i < d; ++i) {
                std::size_t used = 0;
                row.u[i] = std::stoi(fields[i], &used);
                if (used != fields[i].size()) bad_row(lineno, "malformed index");
            }
            std::size_t used = 0;
            row.y = std::stod(fields[d], &used);
            if (used != fields[d].size()) bad_row(lineno, "malformed value");
        } catch (const std::invalid_argument&) {
            bad_row(lineno, "malformed number");
        } catch (const std::out_of_range&) {
            bad_row(lineno, "number out of range");
        }
        for (int i = 0; i < d; ++i)
            if (row.u[i] < 1) bad_row(lineno, "indices must be >= 1");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("grid csv: no data rows");

    LatticeGrid grid;
    grid.extents.assign(d, 0);
    for (const auto& row : rows)
        for (int i = 0; i < d; ++i) grid.extents[i] = std::max(grid.extents[i], row.u[i]);

    const long long n_sites = grid.site_count();
    if (static_cast<long long>(rows.size()) != n_sites)
        throw std::runtime_error("grid csv: row count does not cover the box exactly once");

    grid.values.assign(static_cast<std::size_t>(n_sites), 0.0);
    std::vector<char> seen(static_cast<std::size_t>(n_sites), 0);
    for (const auto& row : rows) {
        const std::size_t idx = grid.flat_index(row.u);
        if (seen[idx]) throw std::runtime_error("grid csv: duplicate site");
        seen[idx] = 1;
        grid.values[idx] = row.y;
    }
    grid.validate();
    return grid;
}

LatticeGrid read_grid_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_grid_csv(in);
}

void write_grid_csv(std::ostream& out, const LatticeGrid& grid) {
    grid.validate();
    const int d = static_cast<int>(grid.extents.size());
    for (int i = 0; i < d; ++i) out << "u" << (i + 1) << ",";
    out << "y\n";
    std::vector<int> u(d, 1);
    char buf[40];
    std::size_t idx = 0;
    do {
        for (int i = 0; i < d; ++i) out << u[i] << ",";
        std::snprintf(buf, sizeof(buf), "%.17g", grid.values[idx++]);
        out << buf << "\n";
    } while (next_site(grid.extents, u));
}

void write_grid_csv_file(const std::string& path, const LatticeGrid& grid) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    write_grid_csv(out, grid);
}

}  // namespace powertrend
