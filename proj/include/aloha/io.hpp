// Output records and their CSV / JSON / table renderings.
//
// Machine formats print numbers with 10 significant digits through
// std::to_chars, so output never depends on the C locale; JSON numbers are
// rounded to the same digits so a CSV and a JSON dump parse to identical
// values.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <locale>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "aloha/optimizer.hpp"
#include "aloha/simulator.hpp"

namespace aloha::io {

inline constexpr const char* kToolName = "aloha-retx";
inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kMachineDigits = 10;

/// Shortest-form rendering with `digits` significant digits.
inline std::string format_number(double v, int digits = kMachineDigits) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, digits);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, ptr);
}

/// The value a reader recovers from format_number(v).
inline double round_to_digits(double v, int digits = kMachineDigits) {
    if (!std::isfinite(v)) return v;
    const auto s = format_number(v, digits);
    double out = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), out);
    return out;
}

inline nlohmann::json json_number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return round_to_digits(v);
}

/// Fixed 4-decimal rendering for human-readable tables.
inline std::string format_fixed4(double v) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

enum class Format { table, csv, json };

inline Format parse_format(const std::string& s) {
    if (s == "table") return Format::table;
    if (s == "csv") return Format::csv;
    if (s == "json") return Format::json;
    throw DomainError("unknown format '" + s + "' (expected table|csv|json)");
}

// ---------------------------------------------------------------------------
// OutputRecord
// ---------------------------------------------------------------------------

/// One self-describing result row: full parameter echo, metric, value and
/// where the value came from.
struct OutputRecord {
    std::string scenario;
    std::string family;  // finite | poisson
    std::optional<int> n;
    std::optional<double> q;
    std::optional<double> lambda;
    double epsilon = 0.0;
    std::optional<int> k;
    std::string variant;
    std::string metric;
    double value = 0.0;
    std::string provenance;  // analytic | simulated | optimizer
    std::vector<std::pair<std::string, double>> extras;
};

inline const std::vector<std::string>& base_columns() {
    static const std::vector<std::string> cols{"scenario", "family", "n",      "q",     "lambda",
                                               "epsilon",  "k",      "variant", "metric", "value",
                                               "provenance"};
    return cols;
}

/// Extra column names in order of first appearance.
inline std::vector<std::string> extra_columns(const std::vector<OutputRecord>& rows) {
    std::vector<std::string> names;
    for (const auto& r : rows)
        for (const auto& [name, v] : r.extras)
            if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    return names;
}

inline std::optional<double> extra(const OutputRecord& r, const std::string& name) {
    for (const auto& [n, v] : r.extras)
        if (n == name) return v;
    return std::nullopt;
}

inline std::vector<std::string> cells(const OutputRecord& r, const std::vector<std::string>& extras,
                                      bool human) {
    auto num = [&](double v) { return human ? format_fixed4(v) : format_number(v); };
    auto opt_num = [&](const std::optional<double>& v) { return v ? num(*v) : std::string{}; };
    auto opt_int = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string{}; };
    std::vector<std::string> out{r.scenario,      r.family,     opt_int(r.n),
                                 opt_num(r.q),    opt_num(r.lambda), num(r.epsilon),
                                 opt_int(r.k),    r.variant,    r.metric,
                                 num(r.value),    r.provenance};
    for (const auto& e : extras) out.push_back(opt_num(extra(r, e)));
    return out;
}

inline void write_csv(std::ostream& os, const std::vector<OutputRecord>& rows) {
    const auto extras = extra_columns(rows);
    auto header = base_columns();
    header.insert(header.end(), extras.begin(), extras.end());
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& r : rows) {
        const auto c = cells(r, extras, false);
        for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << c[i];
        os << '\n';
    }
}

inline void write_table(std::ostream& os, const std::vector<OutputRecord>& rows) {
    const auto extras = extra_columns(rows);
    auto header = base_columns();
    header.insert(header.end(), extras.begin(), extras.end());
    std::vector<std::vector<std::string>> grid{header};
    for (const auto& r : rows) grid.push_back(cells(r, extras, true));
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& line : grid)
        for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
    for (const auto& line : grid) {
        for (std::size_t i = 0; i < line.size(); ++i)
            os << (i ? "  " : "") << std::left << std::setw(static_cast<int>(width[i])) << line[i];
        os << '\n';
    }
}

inline nlohmann::json to_json(const OutputRecord& r) {
    nlohmann::json j;
    j["scenario"] = r.scenario;
    j["family"] = r.family;
    j["n"] = r.n ? nlohmann::json(*r.n) : nlohmann::json(nullptr);
    j["q"] = r.q ? json_number(*r.q) : nlohmann::json(nullptr);
    j["lambda"] = r.lambda ? json_number(*r.lambda) : nlohmann::json(nullptr);
    j["epsilon"] = json_number(r.epsilon);
    j["k"] = r.k ? nlohmann::json(*r.k) : nlohmann::json(nullptr);
    j["variant"] = r.variant;
    j["metric"] = r.metric;
    j["value"] = json_number(r.value);
    j["provenance"] = r.provenance;
    for (const auto& [name, v] : r.extras) j[name] = json_number(v);
    return j;
}

inline nlohmann::json meta(std::optional<std::uint64_t> seed = {}) {
    nlohmann::json m;
    m["tool"] = kToolName;
    m["version"] = kToolVersion;
    m["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
    return m;
}

/// One top-level object: parameters, results, meta.
inline nlohmann::json document(nlohmann::json parameters, nlohmann::json results,
                               std::optional<std::uint64_t> seed = {}) {
    return {{"parameters", std::move(parameters)}, {"results", std::move(results)}, {"meta", meta(seed)}};
}

inline void write_records(std::ostream& os, Format f, const std::vector<OutputRecord>& rows,
                          const nlohmann::json& parameters, std::optional<std::uint64_t> seed = {}) {
    switch (f) {
        case Format::csv: write_csv(os, rows); break;
        case Format::table: write_table(os, rows); break;
        case Format::json: {
            nlohmann::json results = nlohmann::json::array();
            for (const auto& r : rows) results.push_back(to_json(r));
            os << document(parameters, results, seed).dump(2) << '\n';
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// RegionGrid
// ---------------------------------------------------------------------------

/// Cells at or above this K are merged into one bucket when bucketing is on.
inline constexpr int kRegionBucket = 5;

inline int region_value(int k, bool bucket) { return bucket ? std::min(k, kRegionBucket) : k; }

/// Header `epsilon,lambda,k_star`, one row per cell, epsilon-major.
inline void write_region_csv(std::ostream& os, const RegionGrid& g, bool bucket = false) {
    os << "epsilon,lambda,k_star\n";
    for (std::size_t i = 0; i < g.epsilon_axis.size(); ++i)
        for (std::size_t j = 0; j < g.lambda_axis.size(); ++j)
            os << format_number(g.epsilon_axis[i]) << ',' << format_number(g.lambda_axis[j]) << ','
               << region_value(g.at(i, j), bucket) << '\n';
}

inline nlohmann::json region_to_json(const RegionGrid& g, bool bucket = false) {
    nlohmann::json eps = nlohmann::json::array(), lam = nlohmann::json::array();
    for (double e : g.epsilon_axis) eps.push_back(json_number(e));
    for (double l : g.lambda_axis) lam.push_back(json_number(l));
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < g.epsilon_axis.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < g.lambda_axis.size(); ++j) row.push_back(region_value(g.at(i, j), bucket));
        rows.push_back(std::move(row));
    }
    nlohmann::json j{{"epsilon_axis", eps}, {"lambda_axis", lam}, {"k_star", rows}};
    if (bucket) j["bucket_from"] = kRegionBucket;
    j["k_cap"] = g.k_cap >= 0 ? nlohmann::json(g.k_cap) : nlohmann::json("max(64, ceil(4/lambda))");
    return j;
}

// ---------------------------------------------------------------------------
// Simulation results
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ReplicationTally& t) {
    return {{"slots", t.slots},
            {"warmup", t.warmup},
            {"arrivals", t.arrivals},
            {"delivered_messages", t.delivered_messages},
            {"preempted_messages", t.preempted_messages},
            {"activations", t.activations},
            {"idle_slots", t.idle_slots},
            {"conflict_slots", t.conflict_slots},
            {"success_slots", t.success_slots},
            {"delivered_slots", t.delivered_slots}};
}

inline nlohmann::json to_json(const DeliveryStats& s, bool with_replications = false) {
    nlohmann::json j{{"arrivals", s.arrivals},
                     {"delivered_messages", s.delivered_messages},
                     {"total_slots", s.total_slots},
                     {"warmup_slots", s.warmup_slots},
                     {"v_hat", json_number(s.v_hat)},
                     {"w_hat", json_number(s.w_hat)},
                     {"v_stderr", json_number(s.v_stderr)},
                     {"w_stderr", json_number(s.w_stderr)},
                     {"preempted_messages", s.preempted_messages},
                     {"activations", s.activations},
                     {"idle_slots", s.idle_slots},
                     {"conflict_slots", s.conflict_slots},
                     {"success_slots", s.success_slots},
                     {"delivered_slots", s.delivered_slots},
                     {"replication_count", s.replications.size()}};
    if (with_replications) {
        nlohmann::json reps = nlohmann::json::array();
        for (const auto& r : s.replications) reps.push_back(to_json(r));
        j["replications"] = std::move(reps);
    }
    return j;
}

/// Per-replication tallies for external analysis.
inline void write_replications_csv(std::ostream& os, const DeliveryStats& s) {
    os << "replication,slots,warmup,arrivals,delivered_messages,preempted_messages,activations,"
          "idle_slots,conflict_slots,success_slots,delivered_slots,v_hat,w_hat\n";
    for (std::size_t i = 0; i < s.replications.size(); ++i) {
        const auto& r = s.replications[i];
        os << i << ',' << r.slots << ',' << r.warmup << ',' << r.arrivals << ',' << r.delivered_messages
           << ',' << r.preempted_messages << ',' << r.activations << ',' << r.idle_slots << ','
           << r.conflict_slots << ',' << r.success_slots << ',' << r.delivered_slots << ','
           << format_number(r.v_hat()) << ',' << format_number(r.w_hat()) << '\n';
    }
}

inline nlohmann::json to_json(const RootSolveResult& r) {
    return {{"x_star", json_number(r.x_star)},
            {"iterations", r.iterations},
            {"residual", json_number(r.residual)},
            {"converged", r.converged}};
}

}  // namespace aloha::io
