#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "chainbsde/hedge.hpp"

namespace chainbsde::csv {

/// 17 significant digits, enough to round-trip a double.
std::string format(double x);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;
};

void write_table(const std::filesystem::path& file, const Table& table);
Table read_table(const std::filesystem::path& file);

/// jump_index, time, state
Table path_table(const ChainPath& path);
/// time, state, y_value
Table bsde_table(const StateGridFunction& y);
/// time, state, v, z, k
Table rbsde_table(const RbsdeSolution& solution);
/// n, sup_distance
Table trace_table(const std::vector<PenalizationTracePoint>& trace);
/// time, stock, state, price
Table stocks_table(const StockCurves& curves);
/// time, state, V, K, h_1..h_n, h0
Table hedge_table(const HedgeStrategy& strategy);
/// check_name, lhs, rhs, std_error, pass
Table report_table(const std::vector<CheckRecord>& records);

}  // namespace chainbsde::csv
