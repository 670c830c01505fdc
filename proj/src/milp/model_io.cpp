// SPDX-License-Identifier: Apache-2.0
#include "evpv/milp/model_io.hpp"

#include "evpv/csv.hpp"
#include "evpv/errors.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace evpv::milp {

using csv::format_number;

namespace {

char sense_code(RowSense s) {
    switch (s) {
    case RowSense::less_equal: return 'L';
    case RowSense::equal: return 'E';
    case RowSense::greater_equal: return 'G';
    }
    return '?';
}

std::string safe_name(const std::string& name) {
    if (name.empty()) return "_";
    std::string out = name;
    for (auto& ch : out) {
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') ch = '_';
    }
    return out;
}

class LineReader {
public:
    LineReader(const std::string& source, std::size_t line, const std::string& text)
        : source_(source), line_(line), in_(text) {}

    std::string word(const char* what) {
        std::string w;
        if (!(in_ >> w)) fail(std::string("missing ") + what);
        return w;
    }

    double number(const char* what) { return parse(word(what), what); }

    int integer(const char* what) {
        const auto w = word(what);
        int v = 0;
        auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
        if (ec != std::errc() || p != w.data() + w.size()) fail(std::string("bad ") + what + " '" + w + "'");
        return v;
    }

    double parse(const std::string& w, const char* what) {
        if (w == "inf") return kInfinity;
        if (w == "-inf") return -kInfinity;
        double v = 0.0;
        auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
        if (ec != std::errc() || p != w.data() + w.size()) fail(std::string("bad ") + what + " '" + w + "'");
        return v;
    }

    void expect_end() {
        std::string extra;
        if (in_ >> extra) fail("trailing text '" + extra + "'");
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(source_, line_, msg); }

private:
    const std::string& source_;
    std::size_t line_;
    std::istringstream in_;
};

} // namespace

void write_model(std::ostream& out, const MilpModel& model) {
    out << "evpv-milp 1\n";
    for (int j = 0; j < model.num_variables(); ++j) {
        const auto& v = model.variable(j);
        out << "var " << j << ' ' << (v.kind == VarKind::binary ? 'B' : 'C') << ' ' << format_number(v.lower) << ' '
            << format_number(v.upper) << ' ' << format_number(model.objective()[static_cast<std::size_t>(j)]) << ' '
            << safe_name(v.name) << '\n';
    }
    for (int i = 0; i < model.num_constraints(); ++i) {
        const auto& c = model.constraint(i);
        out << "con " << i << ' ' << sense_code(c.sense) << ' ' << format_number(c.rhs) << ' ' << c.terms.size();
        for (const auto& t : c.terms) out << ' ' << t.var << ':' << format_number(t.coef);
        out << ' ' << safe_name(c.name) << '\n';
    }
    out << "offset " << format_number(model.objective_offset()) << '\n';
}

std::string dump_model(const MilpModel& model) {
    std::ostringstream os;
    write_model(os, model);
    return os.str();
}

MilpModel read_model(std::istream& in, const std::string& source) {
    MilpModel model;
    std::string text;
    std::size_t line = 0;
    bool header = false;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (csv::trim(text).empty()) continue;
        LineReader r(source, line, text);
        const auto tag = r.word("record tag");
        if (!header) {
            if (tag != "evpv-milp" || r.integer("version") != 1) r.fail("expected 'evpv-milp 1' header");
            header = true;
            continue;
        }
        if (tag == "var") {
            if (r.integer("index") != model.num_variables()) r.fail("variable index out of sequence");
            const auto kind = r.word("kind");
            if (kind != "C" && kind != "B") r.fail("variable kind must be C or B");
            const double lo = r.number("lower");
            const double hi = r.number("upper");
            const double cost = r.number("cost");
            const auto name = r.word("name");
            r.expect_end();
            const int j = model.add_variable(name, kind == "B" ? VarKind::binary : VarKind::continuous, lo, hi);
            model.set_objective_coef(j, cost);
        } else if (tag == "con") {
            if (r.integer("index") != model.num_constraints()) r.fail("constraint index out of sequence");
            const auto s = r.word("sense");
            RowSense sense;
            if (s == "L") sense = RowSense::less_equal;
            else if (s == "E") sense = RowSense::equal;
            else if (s == "G") sense = RowSense::greater_equal;
            else r.fail("sense must be L, E or G");
            const double rhs = r.number("rhs");
            const int count = r.integer("term count");
            if (count < 0) r.fail("negative term count");
            std::vector<Term> terms;
            terms.reserve(static_cast<std::size_t>(count));
            for (int k = 0; k < count; ++k) {
                const auto w = r.word("term");
                const auto colon = w.find(':');
                if (colon == std::string::npos) r.fail("term '" + w + "' lacks ':'");
                int var = 0;
                auto [p, ec] = std::from_chars(w.data(), w.data() + colon, var);
                if (ec != std::errc() || p != w.data() + colon || var < 0 || var >= model.num_variables())
                    r.fail("term '" + w + "' references an unknown variable");
                terms.push_back({var, r.parse(w.substr(colon + 1), "coefficient")});
            }
            const auto name = r.word("name");
            r.expect_end();
            model.add_constraint(name, std::move(terms), sense, rhs);
        } else if (tag == "offset") {
            model.set_objective_offset(r.number("offset"));
            r.expect_end();
        } else {
            r.fail("unknown record '" + tag + "'");
        }
    }
    if (!header) throw ParseError(source, 0, "empty model file");
    return model;
}

} // namespace evpv::milp
