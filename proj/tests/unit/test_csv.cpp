#include "chainbsde/csv.hpp"

#include "doctest.h"
#include "fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace chainbsde;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "chainbsde_test_csv";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("17 significant digits round-trip every double") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double x = u(rng) * std::pow(10.0, static_cast<int>(u(rng) * 300));
        CHECK(std::stod(csv::format(x)) == x);
    }
    CHECK(csv::format(0.1) == "0.10000000000000001");
    CHECK(csv::format(1.0) == "1");
    CHECK(std::stod(csv::format(std::nextafter(1.0, 2.0))) == std::nextafter(1.0, 2.0));
}

TEST_CASE("tables survive a write/read cycle") {
    const csv::Table t{{"a", "b"}, {{"1", csv::format(M_PI)}, {"2", csv::format(-1e-300)}}};
    const auto file = scratch("nested/dir/t.csv");
    fs::remove_all(file.parent_path());
    csv::write_table(file, t);
    const auto back = csv::read_table(file);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(back.column("b") == 1);
    CHECK(back.column("c") == -1);
    CHECK(std::stod(back.rows[0][1]) == M_PI);
}

TEST_CASE("missing or empty inputs raise MissingInputs") {
    CHECK_THROWS_AS(csv::read_table(scratch("does_not_exist.csv")), MissingInputs);
    const auto empty = scratch("empty.csv");
    std::ofstream(empty).close();
    CHECK_THROWS_AS(csv::read_table(empty), MissingInputs);
}

TEST_CASE("path table lists the start and every jump") {
    const auto spec = fixtures::symmetric_two_state(2.0, 3.0);
    const auto path = simulate_path(spec, 9);
    const auto t = csv::path_table(path);
    CHECK(t.header == std::vector<std::string>{"jump_index", "time", "state"});
    REQUIRE(t.rows.size() == path.jump_times.size() + 1);
    CHECK(t.rows[0] == std::vector<std::string>{"0", "0", std::to_string(path.states.front())});
    for (int k = 0; k < path.jumps(); ++k) {
        const auto& row = t.rows[static_cast<std::size_t>(k + 1)];
        CHECK(std::stoi(row[0]) == k + 1);
        CHECK(std::stod(row[1]) == path.jump_times[static_cast<std::size_t>(k)]);
        CHECK(std::stoi(row[2]) == path.states[static_cast<std::size_t>(k + 1)]);
    }
}

TEST_CASE("value and report schemas") {
    const auto spec = fixtures::symmetric_two_state();
    Vector xi(2);
    xi << 1.0, 0.0;
    const auto bsde = solve_bsde(spec, zero_driver(), xi, 10);
    const auto y = csv::bsde_table(bsde.y);
    CHECK(y.header == std::vector<std::string>{"time", "state", "y_value"});
    CHECK(y.rows.size() == 22);
    CHECK(std::stod(y.rows.back()[2]) == 0.0);
    CHECK(std::stod(y.rows[20][2]) == 1.0);

    const Obstacle g{[](double t, int) { return 0.4 * (1.0 - t); }};
    const auto rb = solve_reflected(spec, zero_driver(), xi, g, 10);
    const auto r = csv::rbsde_table(rb);
    CHECK(r.header == std::vector<std::string>{"time", "state", "v", "z", "k"});
    CHECK(r.rows.size() == 22);
    CHECK(std::stod(r.rows[3][2]) == rb.v(1, 1));

    const auto tr = csv::trace_table({{1.0, 0.5}, {2.0, 0.25}});
    CHECK(tr.header == std::vector<std::string>{"n", "sup_distance"});
    CHECK(tr.rows[1] == std::vector<std::string>{"2", "0.25"});

    const auto rep = csv::report_table({{"iso", 1.0, 1.5, 0.1, false}, {"ok", 0.0, 0.0, 0.0, true}});
    CHECK(rep.header == std::vector<std::string>{"check_name", "lhs", "rhs", "std_error", "pass"});
    CHECK(rep.rows[0].back() == "false");
    CHECK(rep.rows[1].back() == "true");
}

TEST_CASE("market tables carry one row per node, stock and state") {
    const auto market = fixtures::two_state_market();
    const auto curves = stock_curves(market, 20);
    const auto s = csv::stocks_table(curves);
    CHECK(s.header == std::vector<std::string>{"time", "stock", "state", "price"});
    CHECK(s.rows.size() == 21u * 2u * 2u);
    CHECK(s.rows[0][1] == "1");
    CHECK(std::stod(s.rows[1][3]) == curves.phi[0](1, 0));

    const auto payoff = put_payoff(curves, 0, 22.0);
    const auto sol = price_american(market, payoff, 20);
    const auto strategy = extract_hedge(market, curves, sol);
    const auto h = csv::hedge_table(strategy);
    CHECK(h.header == std::vector<std::string>{"time", "state", "V", "K", "h_1", "h_2", "h0"});
    CHECK(h.rows.size() == 21u * 2u);
}
