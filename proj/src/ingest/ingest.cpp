// SPDX-License-Identifier: Apache-2.0
#include "evpv/ingest.hpp"

#include "evpv/csv.hpp"
#include "evpv/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace evpv::ingest {

namespace fs = std::filesystem;
using csv::Row;
using csv::Table;

namespace {

constexpr double kMinuteSnap = 1e-6;

int digits(const std::string& s, std::size_t pos, std::size_t n) {
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i])))
            throw std::invalid_argument("not a timestamp: '" + s + "'");
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

// Whole steps in `minutes`, or nullopt when it is not a whole multiple.
std::optional<long> whole_steps(double minutes, double step_minutes) {
    const double n = minutes / step_minutes;
    const double r = std::round(n);
    if (std::abs(n - r) > 1e-9 * std::max(1.0, n)) return std::nullopt;
    return static_cast<long>(r);
}

std::string describe(const Timestamp& t) {
    using namespace std::chrono;
    const year_month_day ymd{sys_days{days{t.day}}};
    std::ostringstream os;
    if (t.day != 0)
        os << static_cast<int>(ymd.year()) << '-' << (static_cast<unsigned>(ymd.month()) < 10 ? "0" : "")
           << static_cast<unsigned>(ymd.month()) << '-' << (static_cast<unsigned>(ymd.day()) < 10 ? "0" : "")
           << static_cast<unsigned>(ymd.day()) << ' ';
    const int m = static_cast<int>(std::floor(t.minute + kMinuteSnap));
    os << (m / 60 < 10 ? "0" : "") << m / 60 << ':' << (m % 60 < 10 ? "0" : "") << m % 60;
    return os.str();
}

Timestamp cell_time(const Table& table, const Row& row, std::size_t col) {
    try {
        return parse_timestamp(row.cells[col]);
    } catch (const std::invalid_argument& e) {
        throw ParseError(table.source, row.line, e.what());
    }
}

double step_minutes_of(double step_hours) {
    if (!(step_hours > 0.0)) throw Error("step length must be positive");
    return step_hours * 60.0;
}

} // namespace

Timestamp parse_timestamp(const std::string& raw) {
    const std::string text = csv::trim(raw);
    Timestamp out;
    std::string clock = text;
    if (text.size() >= 10 && text[4] == '-' && text[7] == '-') {
        using namespace std::chrono;
        const year_month_day ymd{year{digits(text, 0, 4)}, month{static_cast<unsigned>(digits(text, 5, 2))},
                                 day{static_cast<unsigned>(digits(text, 8, 2))}};
        if (!ymd.ok()) throw std::invalid_argument("not a calendar date: '" + raw + "'");
        out.day = sys_days{ymd}.time_since_epoch().count();
        if (text.size() == 10) return out;
        if (text[10] != 'T' && text[10] != ' ') throw std::invalid_argument("not a timestamp: '" + raw + "'");
        clock = text.substr(11);
    }
    const double hours = parse_clock_hours(clock);
    if (hours >= 24.0) throw std::invalid_argument("clock time out of range: '" + raw + "'");
    out.minute = hours * 60.0;
    return out;
}

PriceUnit parse_price_unit(const std::string& text) {
    if (text == "usd_per_kwh" || text == "$/kWh") return PriceUnit::usd_per_kwh;
    if (text == "cents_per_kwh" || text == "c/kWh") return PriceUnit::cents_per_kwh;
    if (text == "usd_per_mwh" || text == "$/MWh") return PriceUnit::usd_per_mwh;
    throw Error("unknown price unit '" + text + "' (usd_per_kwh, cents_per_kwh, usd_per_mwh)");
}

std::string to_string(PriceUnit unit) {
    switch (unit) {
    case PriceUnit::usd_per_kwh: return "usd_per_kwh";
    case PriceUnit::cents_per_kwh: return "cents_per_kwh";
    case PriceUnit::usd_per_mwh: return "usd_per_mwh";
    }
    return "usd_per_kwh";
}

double to_usd_per_kwh(PriceUnit unit) noexcept {
    switch (unit) {
    case PriceUnit::usd_per_kwh: return 1.0;
    case PriceUnit::cents_per_kwh: return 0.01;
    case PriceUnit::usd_per_mwh: return 0.001;
    }
    return 1.0;
}

// ---------------------------------------------------------------- prices

PriceTable read_prices(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open price file '" + path + "'");
    return read_prices(in, path);
}

PriceTable read_prices(std::istream& in, const std::string& source) {
    const Table table = csv::read_stream(in, source);
    const auto c_ts = table.require_column("timestamp");
    const auto c_buy = table.require_column("spp_buy");
    const auto c_up = table.require_column("regup");
    const auto c_dn = table.require_column("regdn");
    const auto c_sell = table.column("spp_sell");

    PriceTable out;
    out.source = source;
    out.has_sell = c_sell.has_value();
    if (table.rows.empty()) throw ParseError(source, 0, "no price rows");
    double cadence = 0.0;
    for (const auto& row : table.rows) {
        RawPriceRow r;
        r.timestamp = row.cells[c_ts];
        r.spp_buy = csv::to_double(table, row, c_buy);
        r.regup = csv::to_double(table, row, c_up);
        r.regdn = csv::to_double(table, row, c_dn);
        if (c_sell) r.spp_sell = csv::to_double(table, row, *c_sell);
        const Timestamp t = cell_time(table, row, c_ts);
        if (!out.times.empty()) {
            const double delta = t.absolute_minutes() - out.times.back().absolute_minutes();
            if (delta <= 0.0)
                throw ParseError(source, row.line, "timestamps must increase: " + describe(out.times.back()) +
                                                       " then " + describe(t));
            if (cadence == 0.0) {
                cadence = delta;
            } else if (std::abs(delta - cadence) > kMinuteSnap) {
                std::ostringstream os;
                os << "gap in timestamps: " << describe(out.times.back()) << " to " << describe(t) << " is "
                   << delta << " min, cadence is " << cadence << " min";
                throw ParseError(source, row.line, os.str());
            }
        }
        out.rows.push_back(std::move(r));
        out.times.push_back(t);
    }
    return out;
}

void write_prices(std::ostream& out, const PriceTable& table) {
    using csv::format_number;
    out << "timestamp,spp_buy,regup,regdn" << (table.has_sell ? ",spp_sell" : "") << '\n';
    for (const auto& r : table.rows) {
        out << r.timestamp << ',' << format_number(r.spp_buy) << ',' << format_number(r.regup) << ','
            << format_number(r.regdn);
        if (table.has_sell) out << ',' << format_number(r.spp_sell.value_or(0.0));
        out << '\n';
    }
}

MarketSeries to_market(const PriceTable& table, double step_hours, double sell_factor, PriceUnit unit) {
    const double step_min = step_minutes_of(step_hours);
    if (table.rows.empty()) throw ParseError(table.source, 0, "no price rows");
    const double cadence = table.times.size() > 1
                               ? table.times[1].absolute_minutes() - table.times[0].absolute_minutes()
                               : 60.0;
    const double span = cadence * static_cast<double>(table.rows.size());
    const auto steps = whole_steps(span, step_min);
    if (!steps || *steps <= 0) {
        std::ostringstream os;
        os << "price span of " << span << " min is not a whole number of " << step_min << "-min steps";
        throw ParseError(table.source, 0, os.str());
    }
    const double k = to_usd_per_kwh(unit);
    MarketSeries m;
    for (long t = 0; t < *steps; ++t) {
        const auto i = std::min(table.rows.size() - 1,
                                static_cast<std::size_t>(std::floor((t * step_min + kMinuteSnap) / cadence)));
        const auto& r = table.rows[i];
        const double buy = r.spp_buy * k;
        // A factor below one would raise a negative price; the clamp keeps sell <= buy.
        double sell = r.spp_sell ? *r.spp_sell * k : std::min(sell_factor * buy, buy);
        if (sell > buy) {
            std::ostringstream os;
            os << "sell price " << sell << " exceeds buy price " << buy << " at " << r.timestamp;
            throw ParseError(table.source, 0, os.str());
        }
        m.buy_price.push_back(buy);
        m.sell_price.push_back(sell);
        m.regup_price.push_back(r.regup * k);
        m.regdn_price.push_back(r.regdn * k);
    }
    return m;
}

MarketSeries load_market(const std::string& path, double step_hours, double sell_factor, PriceUnit unit) {
    return to_market(read_prices(path), step_hours, sell_factor, unit);
}

// -------------------------------------------------------------------- PV

PvLoad load_pv(const std::string& path, double rated_kwp, double step_hours, double uncertainty) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open PV file '" + path + "'");
    return load_pv(in, path, rated_kwp, step_hours, uncertainty);
}

PvLoad load_pv(std::istream& in, const std::string& source, double rated_kwp, double step_hours,
               double uncertainty) {
    if (!(rated_kwp > 0.0)) throw Error("PV rating must be positive");
    if (!(uncertainty >= 0.0 && uncertainty < 1.0)) throw Error("PV uncertainty must lie in [0, 1)");
    const double step_min = step_minutes_of(step_hours);
    const auto per_day = whole_steps(1440.0, step_min);
    if (!per_day) throw Error("step length must divide the day");
    const auto per_bucket = whole_steps(step_min, 1.0);

    const Table table = csv::read_stream(in, source);
    const auto c_ts = table.require_column("timestamp");
    const auto c_p = table.require_column("power_kw");
    if (table.rows.empty()) throw ParseError(source, 0, "no PV samples");

    std::vector<Timestamp> times;
    std::vector<double> power;
    for (const auto& row : table.rows) {
        const Timestamp t = cell_time(table, row, c_ts);
        const double p = csv::to_double(table, row, c_p);
        if (p < 0.0) throw ParseError(source, row.line, "negative PV power " + row.cells[c_p]);
        if (!times.empty() && t.absolute_minutes() <= times.back().absolute_minutes())
            throw ParseError(source, row.line, "timestamps must increase: " + describe(times.back()) + " then " +
                                                   describe(t));
        times.push_back(t);
        power.push_back(p);
    }

    PvLoad out;
    out.first_day = times.front().day;
    const auto days = static_cast<std::size_t>(times.back().day - out.first_day + 1);
    const std::size_t steps = days * static_cast<std::size_t>(*per_day);
    std::vector<double> sum(steps, 0.0);
    std::vector<int> count(steps, 0);
    const double origin = static_cast<double>(out.first_day) * 1440.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const auto b = static_cast<std::size_t>(std::floor((times[k].absolute_minutes() - origin + kMinuteSnap) / step_min));
        sum[b] += power[k] / rated_kwp;
        ++count[b];
    }
    std::size_t empty = 0;
    auto& series = out.forecast.normalized_kw_per_kwp;
    series.assign(steps, 0.0);
    for (std::size_t b = 0; b < steps; ++b) {
        if (count[b] == 0) {
            ++empty;
            continue;
        }
        series[b] = sum[b] / count[b];
        if (per_bucket && count[b] < *per_bucket) {
            std::ostringstream os;
            os << source << ": step " << b % static_cast<std::size_t>(*per_day) << " of day " << b / static_cast<std::size_t>(*per_day)
               << " averages " << count[b] << " of " << *per_bucket << " minutes";
            out.warnings.push_back(os.str());
        }
    }
    if (empty > 0)
        out.warnings.push_back(source + ": " + std::to_string(empty) + " of " + std::to_string(steps) +
                               " steps have no samples and read 0");
    out.forecast.uncertainty = uncertainty;
    return out;
}

// ----------------------------------------------------------------- fleet

std::vector<EvSession> load_fleet(const std::string& path, double step_hours, int horizon_steps) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open fleet file '" + path + "'");
    return load_fleet(in, path, step_hours, horizon_steps);
}

std::vector<EvSession> load_fleet(std::istream& in, const std::string& source, double step_hours, int horizon_steps) {
    const Table table = csv::read_stream(in, source);
    static const char* names[] = {"id",           "arrival",          "departure",    "demand_kwh",
                                  "arrival_soc_kwh", "soc_min_kwh",   "soc_max_kwh",  "charge_max_kw",
                                  "discharge_min_kw", "eff_charge",   "eff_discharge", "penalty_rate",
                                  "charger_id"};
    std::size_t col[13];
    for (std::size_t i = 0; i < 13; ++i) col[i] = table.require_column(names[i]);

    std::vector<EvSession> fleet;
    std::vector<std::string> issues;
    for (const auto& row : table.rows) {
        const std::string where = source + ":" + std::to_string(row.line) + ": ";
        EvSession ev;
        ev.id = row.cells[col[0]];
        try {
            const double arr = parse_clock_hours(row.cells[col[1]]);
            const double dep = parse_clock_hours(row.cells[col[2]]);
            const auto w = to_step_window(arr, dep, step_hours);
            ev.arrival_step = w.arrival_step;
            ev.departure_step = w.departure_step;
            ev.demand_kwh = csv::to_double(table, row, col[3]);
            ev.arrival_soc_kwh = csv::to_double(table, row, col[4]);
            ev.soc_min_kwh = csv::to_double(table, row, col[5]);
            ev.soc_max_kwh = csv::to_double(table, row, col[6]);
            ev.charge_max_kw = csv::to_double(table, row, col[7]);
            ev.discharge_min_kw = csv::to_double(table, row, col[8]);
            ev.eff_charge = csv::to_double(table, row, col[9]);
            ev.eff_discharge = csv::to_double(table, row, col[10]);
            ev.penalty_rate = csv::to_double(table, row, col[11]);
            ev.charger_id = row.cells[col[12]];
        } catch (const InvalidScenario& e) {
            for (const auto& i : e.issues()) issues.push_back(where + i);
            continue;
        } catch (const std::exception& e) {
            issues.push_back(where + e.what());
            continue;
        }
        for (const auto& i : validate_session(ev, horizon_steps)) issues.push_back(where + i);
        for (const auto& other : fleet)
            if (other.id == ev.id) issues.push_back(where + "duplicate vehicle id '" + ev.id + "'");
        fleet.push_back(std::move(ev));
    }
    if (!issues.empty()) throw InvalidScenario(std::move(issues));
    return fleet;
}

// -------------------------------------------------------------- chargers

std::vector<ChargerSpec> load_chargers(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open charger file '" + path + "'");
    return load_chargers(in, path);
}

std::vector<ChargerSpec> load_chargers(std::istream& in, const std::string& source) {
    const Table table = csv::read_stream(in, source);
    const auto c_id = table.require_column("id");
    const auto c_pv = table.require_column("pv_rated_kw");
    const auto c_inv = table.require_column("inverter_rated_kw");
    const auto c_port = table.require_column("ev_port_rated_kw");
    const auto c_nch = table.require_column("dc_converter_count");
    const auto c_ncon = table.require_column("connection_count");
    const auto c_eta = table.require_column("eff_conv");
    const auto c_scale = table.require_column("pv_scale");

    std::vector<ChargerSpec> out;
    std::vector<std::string> issues;
    for (const auto& row : table.rows) {
        ChargerSpec c;
        c.id = row.cells[c_id];
        c.pv_rated_kw = csv::to_double(table, row, c_pv);
        c.inverter_rated_kw = csv::to_double(table, row, c_inv);
        c.ev_port_rated_kw = csv::to_double(table, row, c_port);
        c.dc_converter_count = csv::to_int(table, row, c_nch);
        c.connection_count = csv::to_int(table, row, c_ncon);
        c.eff_conv = csv::to_double(table, row, c_eta);
        c.pv_scale = csv::to_double(table, row, c_scale);
        const std::string where = source + ":" + std::to_string(row.line) + ": ";
        for (const auto& i : validate_charger(c)) issues.push_back(where + i);
        for (const auto& other : out)
            if (other.id == c.id) issues.push_back(where + "duplicate charger id '" + c.id + "'");
        out.push_back(std::move(c));
    }
    if (!issues.empty()) throw InvalidScenario(std::move(issues));
    return out;
}

// ---------------------------------------------------------------- limits

SiteLimits load_limits(const std::string& path, double step_hours, int horizon_steps) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open limits file '" + path + "'");
    return load_limits(in, path, step_hours, horizon_steps);
}

SiteLimits load_limits(std::istream& in, const std::string& source, double step_hours, int horizon_steps) {
    const Table table = csv::read_stream(in, source);
    const auto c_start = table.require_column("start");
    const auto c_imp = table.require_column("import_cap_kw");
    const auto c_exp = table.require_column("export_cap_kw");
    if (table.rows.empty()) throw ParseError(source, 0, "no limit rows");

    struct Piece {
        double start_h, imp, exp;
    };
    std::vector<Piece> pieces;
    for (const auto& row : table.rows) {
        double start = 0.0;
        try {
            start = parse_clock_hours(row.cells[c_start]);
        } catch (const std::invalid_argument& e) {
            throw ParseError(source, row.line, e.what());
        }
        const double imp = csv::to_double(table, row, c_imp), exp = csv::to_double(table, row, c_exp);
        if (imp < 0.0 || exp < 0.0) throw ParseError(source, row.line, "network caps must be non-negative");
        if (pieces.empty() && start != 0.0) throw ParseError(source, row.line, "first limit row must start at 00:00");
        if (!pieces.empty() && start <= pieces.back().start_h)
            throw ParseError(source, row.line, "limit rows must be in increasing time order");
        pieces.push_back({start, imp, exp});
    }
    SiteLimits out;
    std::size_t k = 0;
    for (int t = 0; t < horizon_steps; ++t) {
        const double h = t * step_hours + 1e-9;
        while (k + 1 < pieces.size() && pieces[k + 1].start_h <= h) ++k;
        out.import_cap_kw.push_back(pieces[k].imp);
        out.export_cap_kw.push_back(pieces[k].exp);
    }
    return out;
}

// ---------------------------------------------------------------- bundle

namespace {

template <class T>
T json_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("scenario key '") + key + "': " + e.what());
    }
}

std::string resolve(const fs::path& dir, const std::string& name) {
    const fs::path p(name);
    return (p.is_absolute() ? p : dir / p).string();
}

ReserveMode parse_reserve_mode(const std::string& s) {
    if (s == "asymmetric") return ReserveMode::asymmetric;
    if (s == "symmetric") return ReserveMode::symmetric;
    throw Error("unknown reserve_mode '" + s + "'");
}

ReserveBoundConvention parse_bounds(const std::string& s) {
    if (s == "printed" || s == "as_printed") return ReserveBoundConvention::as_printed;
    if (s == "swapped") return ReserveBoundConvention::swapped;
    throw Error("unknown reserve_bounds '" + s + "'");
}

std::vector<double> slice(const std::vector<double>& v, std::size_t from, std::size_t n) {
    return {v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(from + n)};
}

} // namespace

ScenarioSnapshot Bundle::snapshot(int day) const {
    if (day < 0 || day >= days)
        throw Error("day " + std::to_string(day) + " is outside the bundle's " + std::to_string(days) + " days");
    ScenarioSnapshot s = base;
    const auto n = static_cast<std::size_t>(steps_per_day());
    const auto from = static_cast<std::size_t>(day) * n;
    s.market.buy_price = slice(market.buy_price, from, n);
    s.market.sell_price = slice(market.sell_price, from, n);
    s.market.regup_price = slice(market.regup_price, from, n);
    s.market.regdn_price = slice(market.regdn_price, from, n);
    s.pv.normalized_kw_per_kwp = slice(pv_normalized, from, n);
    return s;
}

Bundle load_bundle(const std::string& path, const BundleOverrides& ov) {
    fs::path file(path);
    if (fs::is_directory(file)) file /= "scenario.json";
    std::ifstream in(file);
    if (!in) throw IoError("cannot open scenario file '" + file.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(file.string(), 0, e.what());
    }
    const fs::path dir = file.parent_path();

    Bundle b;
    b.directory = dir.string();
    ScenarioSnapshot& s = b.base;
    const double step_min = ov.step_minutes.value_or(json_or(j, "step_minutes", 15.0));
    const auto per_day = whole_steps(1440.0, step_min);
    if (!(step_min > 0.0) || !per_day) throw Error("step length must divide the day");
    s.step_hours = step_min / 60.0;
    s.horizon_steps = static_cast<int>(*per_day);
    s.taper_charge = json_or(j, "taper_charge", s.taper_charge);
    s.taper_discharge = json_or(j, "taper_discharge", s.taper_discharge);
    s.wear_rate = json_or(j, "wear_rate", s.wear_rate);
    s.pv_cost = json_or(j, "pv_cost", s.pv_cost);
    s.reserve_mode = ov.reserve_mode.value_or(parse_reserve_mode(json_or<std::string>(j, "reserve_mode", "asymmetric")));
    s.reserve_bound_convention =
        ov.reserve_bounds.value_or(parse_bounds(json_or<std::string>(j, "reserve_bounds", "printed")));
    s.v2g_enabled = ov.v2g.value_or(json_or(j, "v2g", true));
    s.reserves_enabled = ov.reserves.value_or(json_or(j, "reserves", true));
    s.curtailment_enabled = ov.curtailment.value_or(json_or(j, "curtailment", true));

    auto required = [&](const char* key) {
        if (!j.contains(key)) throw Error(std::string("scenario file lacks '") + key + "'");
        return resolve(dir, j.at(key).get<std::string>());
    };
    s.chargers = load_chargers(required("chargers"));
    s.fleet = load_fleet(required("fleet"), s.step_hours, s.horizon_steps);
    s.limits = j.contains("limits") ? load_limits(required("limits"), s.step_hours, s.horizon_steps)
                                    : SiteLimits::flat(s.horizon_steps, json_or(j, "import_cap_kw", 40.0),
                                                       json_or(j, "export_cap_kw", 40.0));

    const auto unit = parse_price_unit(json_or<std::string>(j, "price_unit", "usd_per_kwh"));
    const double sell_factor = ov.sell_factor.value_or(json_or(j, "sell_factor", 0.98));
    b.market = load_market(required("market"), s.step_hours, sell_factor, unit);
    auto pv = load_pv(required("pv"), json_or(j, "pv_rated_kwp", 1.0), s.step_hours, json_or(j, "pv_uncertainty", 0.10));
    b.pv_normalized = std::move(pv.forecast.normalized_kw_per_kwp);
    s.pv.uncertainty = pv.forecast.uncertainty;
    b.warnings = std::move(pv.warnings);

    const auto n = static_cast<std::size_t>(s.horizon_steps);
    if (b.market.buy_price.size() % n != 0)
        throw Error("price file covers " + std::to_string(b.market.buy_price.size()) +
                    " steps, not a whole number of days");
    const auto market_days = b.market.buy_price.size() / n, pv_days = b.pv_normalized.size() / n;
    if (market_days != pv_days)
        b.warnings.push_back("price file covers " + std::to_string(market_days) + " days, PV file " +
                             std::to_string(pv_days) + "; using the shorter");
    b.days = static_cast<int>(std::min(market_days, pv_days));
    if (b.days == 0) throw Error("price and PV files do not cover a whole day");
    if (j.contains("overlay")) b.overlay_path = resolve(dir, j.at("overlay").get<std::string>());

    // Structural check on day 0; per-day series only differ in values.
    require_valid(b.snapshot(0));
    return b;
}

} // namespace evpv::ingest
