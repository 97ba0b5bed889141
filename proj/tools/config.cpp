#include "config.hpp"

#include <fstream>
#include <sstream>

namespace chainbsde::app {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) { throw ConfigError(message); }

const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) fail(where + ": missing field '" + key + "'");
    return obj.at(key);
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) fail(where + " must be a number");
    return v.get<double>();
}

Vector vector_of(const json& v, int n, const std::string& where) {
    if (!v.is_array() || static_cast<int>(v.size()) != n)
        fail(where + " must be an array of " + std::to_string(n) + " numbers");
    Vector out(n);
    for (int i = 0; i < n; ++i) out(i) = number(v[static_cast<std::size_t>(i)], where);
    return out;
}

Matrix matrix_of(const json& v, int rows, int cols, const std::string& where) {
    if (!v.is_array() || static_cast<int>(v.size()) != rows)
        fail(where + " must have " + std::to_string(rows) + " rows");
    Matrix out(rows, cols);
    for (int i = 0; i < rows; ++i) {
        const json& row = v[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            fail(where + " row " + std::to_string(i) + " must have " + std::to_string(cols) + " entries");
        for (int j = 0; j < cols; ++j) out(i, j) = number(row[static_cast<std::size_t>(j)], where);
    }
    return out;
}

template <class T, class Read>
std::vector<typename PiecewiseConstant<T>::Piece> schedule_of(const json& v, const std::string& where, Read read) {
    if (!v.is_array() || v.empty()) fail(where + " must be a non-empty array of pieces");
    std::vector<typename PiecewiseConstant<T>::Piece> out;
    for (const auto& piece : v) {
        const double start = piece.contains("start") ? number(piece.at("start"), where + ".start") : 0.0;
        out.push_back({start, read(piece)});
    }
    return out;
}

Selector selector_of(const json& doc, const char* key, Selector fallback) {
    if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
    const json& v = doc.at(key);
    if (v.is_string()) return {v.get<std::string>(), json::object()};
    if (!v.is_object()) fail(std::string(key) + " must be an object with a 'type'");
    return {require(v, "type", key).get<std::string>(), v};
}

Scheme scheme_of(const std::string& s) {
    if (s == "rk4" || s == "explicit_rk4") return Scheme::explicit_rk4;
    if (s == "implicit_euler") return Scheme::implicit_euler;
    fail("unknown scheme '" + s + "'");
}

Predictor predictor_of(const std::string& s) {
    if (s == "explicit_euler" || s == "euler") return Predictor::explicit_euler;
    if (s == "rk4") return Predictor::rk4;
    fail("unknown predictor '" + s + "'");
}

void check_selector(const Selector& s, const char* what, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (s.type == a) return;
    std::ostringstream os;
    os << "unknown " << what << " type '" << s.type << "' (expected one of:";
    for (const char* a : allowed) os << ' ' << a;
    os << ')';
    fail(os.str());
}

// g(t, i) for the obstacle/payoff selectors
std::function<double(double, int)> exercise_function(const RunConfig& c, const Selector& s, const StockCurves* curves,
                                                     const char* what) {
    const int n = c.chain.n_states();
    const double horizon = c.chain.horizon();
    if (s.type == "zero") return [](double, int) { return 0.0; };
    if (s.type == "constant") {
        const double v = number(require(s.params, "value", what), std::string(what) + ".value");
        return [v](double, int) { return v; };
    }
    if (s.type == "state_vector") {
        const Vector v = vector_of(require(s.params, "values", what), n, std::string(what) + ".values");
        return [v](double, int i) { return v(i); };
    }
    if (s.type == "affine") {
        // level_i + slope_i (T - t)
        const Vector level = vector_of(require(s.params, "level", what), n, std::string(what) + ".level");
        const Vector slope = s.params.contains("slope") ? vector_of(s.params.at("slope"), n, std::string(what) + ".slope")
                                                        : Vector::Zero(n);
        return [level, slope, horizon](double t, int i) { return level(i) + slope(i) * (horizon - t); };
    }
    if (s.type == "put") {
        if (!curves) fail(std::string(what) + " of type put needs a market");
        const int stock = static_cast<int>(number(require(s.params, "stock", what), std::string(what) + ".stock"));
        const double strike = number(require(s.params, "strike", what), std::string(what) + ".strike");
        return put_payoff(*curves, stock - 1, strike).g;
    }
    fail(std::string("unknown ") + what + " type '" + s.type + "'");
}

}  // namespace

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    try {
        if (!doc.is_object()) fail("config must be a JSON object");
        RunConfig c;
        c.schema_version = static_cast<int>(number(require(doc, "schema_version", "config"), "schema_version"));
        if (c.schema_version != kSchemaVersion)
            fail("unsupported schema_version " + std::to_string(c.schema_version));

        const json& chain = require(doc, "chain", "config");
        const int n = static_cast<int>(number(require(chain, "n_states", "chain"), "chain.n_states"));
        if (n < 1) fail("chain.n_states must be positive");
        const double horizon = number(require(chain, "horizon", "chain"), "chain.horizon");
        const int init = chain.contains("initial_state")
                             ? static_cast<int>(number(chain.at("initial_state"), "chain.initial_state"))
                             : 0;
        auto generator = schedule_of<Matrix>(require(chain, "generator", "chain"), "chain.generator",
                                             [n](const json& p) { return matrix_of(require(p, "matrix", "chain.generator"), n, n, "chain.generator.matrix"); });
        c.chain = build_chain_spec(n, std::move(generator), init, horizon);

        if (doc.contains("market") && !doc.at("market").is_null()) {
            const json& m = doc.at("market");
            const json& div = require(m, "dividends", "market");
            if (!div.is_array() || div.empty() || !div[0].contains("matrix") || !div[0]["matrix"].is_array() ||
                div[0]["matrix"].empty() || !div[0]["matrix"][0].is_array())
                fail("market.dividends must be pieces with an N x n 'matrix'");
            const int stocks = static_cast<int>(div[0]["matrix"][0].size());
            auto cs = m.contains("C") ? schedule_of<Matrix>(m.at("C"), "market.C",
                                                            [n](const json& p) { return matrix_of(require(p, "matrix", "market.C"), n, n, "market.C.matrix"); })
                                      : std::vector<PiecewiseConstant<Matrix>::Piece>{{0.0, Matrix::Zero(n, n)}};
            auto ds = schedule_of<Vector>(require(m, "D", "market"), "market.D",
                                          [n](const json& p) { return vector_of(require(p, "vector", "market.D"), n, "market.D.vector"); });
            auto dv = schedule_of<Matrix>(div, "market.dividends", [n, stocks](const json& p) {
                return matrix_of(require(p, "matrix", "market.dividends"), n, stocks, "market.dividends.matrix");
            });
            const double r_max = m.contains("r_max") ? number(m.at("r_max"), "market.r_max") : 1.0;
            c.market = build_market_spec(c.chain, std::move(cs), std::move(ds), std::move(dv), r_max);
            if (m.contains("extension")) c.extension = number(m.at("extension"), "market.extension");
        }

        c.driver = selector_of(doc, "driver", c.driver);
        check_selector(c.driver, "driver", {"zero", "constant", "discount", "affine", "hedge"});
        c.terminal = selector_of(doc, "terminal", c.terminal);
        check_selector(c.terminal, "terminal", {"zero", "constant", "state_vector"});
        c.obstacle = selector_of(doc, "obstacle", c.obstacle);
        check_selector(c.obstacle, "obstacle", {"none", "zero", "constant", "state_vector", "affine", "put"});
        c.payoff = selector_of(doc, "payoff", c.payoff);
        check_selector(c.payoff, "payoff", {"none", "zero", "constant", "state_vector", "affine", "put"});
        if (!c.market && (c.driver.type == "hedge" || c.obstacle.type == "put" || c.payoff.type == "put"))
            fail("hedge drivers and put payoffs need a market section");

        if (doc.contains("solver")) {
            const json& s = doc.at("solver");
            auto& o = c.solver;
            if (s.contains("steps")) o.steps = static_cast<int>(number(s.at("steps"), "solver.steps"));
            if (s.contains("scheme")) o.scheme = scheme_of(s.at("scheme").get<std::string>());
            if (s.contains("predictor")) o.predictor = predictor_of(s.at("predictor").get<std::string>());
            if (s.contains("penalization")) {
                const json& p = s.at("penalization");
                o.penalization = p.value("enabled", true);
                o.penalization_tol = p.contains("tol") ? number(p.at("tol"), "solver.penalization.tol") : 1e-3;
            }
            if (s.contains("n_paths")) o.n_paths = static_cast<long>(number(s.at("n_paths"), "solver.n_paths"));
            if (s.contains("seed")) o.seed = s.at("seed").get<std::uint64_t>();
            if (s.contains("simulate_paths"))
                o.simulate_paths = static_cast<int>(number(s.at("simulate_paths"), "solver.simulate_paths"));
            if (s.contains("replication_paths"))
                o.replication_paths = static_cast<long>(number(s.at("replication_paths"), "solver.replication_paths"));
            if (s.contains("replication_steps"))
                o.replication_steps = static_cast<int>(number(s.at("replication_steps"), "solver.replication_steps"));
            if (s.contains("strict_contraction")) o.strict_contraction = s.at("strict_contraction").get<bool>();
            if (o.steps < 2) fail("solver.steps must be at least 2");
            if (o.n_paths < 2) fail("solver.n_paths must be at least 2");
            if (!(o.penalization_tol > 0.0)) fail("solver.penalization.tol must be positive");
        }
        if (doc.contains("verify") && doc.at("verify").contains("z"))
            c.verify_z = vector_of(doc.at("verify").at("z"), n, "verify.z");

        if (doc.contains("output_dir")) {
            std::filesystem::path out = doc.at("output_dir").get<std::string>();
            c.output_dir = out.is_absolute() || base_dir.empty() ? out : base_dir / out;
        }

        // parameters of the selectors are checked here, before any job runs
        make_driver(c);
        make_terminal(c);
        if (c.obstacle.present() && c.obstacle.type != "put") make_obstacle(c, nullptr);
        if (c.payoff.present() && c.payoff.type != "put") make_payoff(c, nullptr);
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(e.what());
    }
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config " + file.string());
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("cannot parse ") + file.string() + ": " + e.what());
    }
    return parse_config(doc, file.parent_path());
}

MarkovDriver make_driver(const RunConfig& c) {
    const Selector& s = c.driver;
    const int n = c.chain.n_states();
    if (s.type == "zero") return zero_driver();
    if (s.type == "discount") return discount_driver(number(require(s.params, "rate", "driver"), "driver.rate"));
    if (s.type == "constant") {
        const double v = number(require(s.params, "value", "driver"), "driver.value");
        MarkovDriver d;
        d.evaluate = [v](double, int, double, const Vector&) { return v; };
        return d;
    }
    if (s.type == "affine") {
        // a_i + b y
        const Vector a = vector_of(require(s.params, "a", "driver"), n, "driver.a");
        const double b = s.params.contains("b") ? number(s.params.at("b"), "driver.b") : 0.0;
        MarkovDriver d;
        d.evaluate = [a, b](double, int i, double y, const Vector&) { return a(i) + b * y; };
        d.lipschitz_y = std::abs(b);
        return d;
    }
    if (s.type == "hedge") return make_hedge_driver(*c.market);
    fail("unknown driver type '" + s.type + "'");
}

Vector make_terminal(const RunConfig& c) {
    const int n = c.chain.n_states();
    const Selector& s = c.terminal;
    if (s.type == "zero") return Vector::Zero(n);
    if (s.type == "constant") return Vector::Constant(n, number(require(s.params, "value", "terminal"), "terminal.value"));
    if (s.type == "state_vector") return vector_of(require(s.params, "values", "terminal"), n, "terminal.values");
    fail("unknown terminal type '" + s.type + "'");
}

StockCurves make_curves(const RunConfig& c, int steps) {
    if (!c.market) fail("stock curves need a market section");
    return stock_curves(*c.market, steps, c.extension);
}

Obstacle make_obstacle(const RunConfig& c, const StockCurves* curves) {
    if (!c.obstacle.present()) fail("no obstacle configured");
    return Obstacle{exercise_function(c, c.obstacle, curves, "obstacle")};
}

Payoff make_payoff(const RunConfig& c, const StockCurves* curves) {
    if (!c.payoff.present()) fail("no payoff configured");
    return chainbsde::make_payoff(exercise_function(c, c.payoff, curves, "payoff"), c.chain.n_states(),
                                  c.chain.horizon());
}

}  // namespace chainbsde::app
