#include "chainbsde/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace chainbsde::csv {

std::string format(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

void write_table(const std::filesystem::path& file, const Table& table) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    auto line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    };
    line(table.header);
    for (const auto& row : table.rows) line(row);
}

Table read_table(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw MissingInputs("cannot read " + file.string());
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            t.rows.push_back(std::move(cells));
        }
    }
    if (first) throw MissingInputs(file.string() + " is empty");
    return t;
}

Table path_table(const ChainPath& path) {
    Table t{{"jump_index", "time", "state"}, {}};
    t.rows.push_back({"0", format(0.0), std::to_string(path.states.front())});
    for (int k = 0; k < path.jumps(); ++k)
        t.rows.push_back({std::to_string(k + 1), format(path.jump_times[static_cast<std::size_t>(k)]),
                          std::to_string(path.states[static_cast<std::size_t>(k + 1)])});
    return t;
}

Table bsde_table(const StateGridFunction& y) {
    Table t{{"time", "state", "y_value"}, {}};
    for (int k = 0; k < y.grid.nodes(); ++k)
        for (int i = 0; i < y.n_states(); ++i)
            t.rows.push_back({format(y.grid.time(k)), std::to_string(i), format(y(k, i))});
    return t;
}

Table rbsde_table(const RbsdeSolution& s) {
    Table t{{"time", "state", "v", "z", "k"}, {}};
    for (int k = 0; k < s.v.grid.nodes(); ++k)
        for (int i = 0; i < s.v.n_states(); ++i)
            t.rows.push_back(
                {format(s.v.grid.time(k)), std::to_string(i), format(s.v(k, i)), format(s.z(k, i)), format(s.k(k, i))});
    return t;
}

Table trace_table(const std::vector<PenalizationTracePoint>& trace) {
    Table t{{"n", "sup_distance"}, {}};
    for (const auto& p : trace) t.rows.push_back({format(p.n), format(p.sup_distance)});
    return t;
}

Table stocks_table(const StockCurves& curves) {
    Table t{{"time", "stock", "state", "price"}, {}};
    for (int k = 0; k < curves.grid.nodes(); ++k) {
        const Matrix& phi = curves.phi[static_cast<std::size_t>(k)];
        for (int j = 0; j < curves.n_stocks(); ++j)
            for (Eigen::Index i = 0; i < phi.rows(); ++i)
                t.rows.push_back({format(curves.grid.time(k)), std::to_string(j + 1), std::to_string(i),
                                  format(phi(i, j))});
    }
    return t;
}

Table hedge_table(const HedgeStrategy& s) {
    Table t{{"time", "state", "V", "K"}, {}};
    const auto stocks = s.h.empty() ? 0 : s.h.front().size();
    for (Eigen::Index j = 0; j < stocks; ++j) t.header.push_back("h_" + std::to_string(j + 1));
    t.header.push_back("h0");
    for (int k = 0; k < s.grid.nodes(); ++k)
        for (int i = 0; i < s.v.n_states(); ++i) {
            std::vector<std::string> row{format(s.grid.time(k)), std::to_string(i), format(s.v(k, i)),
                                         format(s.k(k, i))};
            for (Eigen::Index j = 0; j < stocks; ++j) row.push_back(format(s.h[static_cast<std::size_t>(k)](j)));
            row.push_back(format(s.h0(k, i)));
            t.rows.push_back(std::move(row));
        }
    return t;
}

Table report_table(const std::vector<CheckRecord>& records) {
    Table t{{"check_name", "lhs", "rhs", "std_error", "pass"}, {}};
    for (const auto& r : records)
        t.rows.push_back({r.name, format(r.lhs), format(r.rhs), format(r.std_error), r.pass ? "true" : "false"});
    return t;
}

}  // namespace chainbsde::csv
