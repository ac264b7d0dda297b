#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pks/distribution.hpp"
#include "pks/errors.hpp"
#include "pks/event_space.hpp"
#include "pks/structure.hpp"
#include "pks/system.hpp"

namespace pks {

/// Shortest decimal form that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

namespace detail {

struct Token {
    std::string text;
    std::size_t column = 0; ///< 1-based
};

inline std::vector<Token> tokenize(const std::string& line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        const unsigned char ch = static_cast<unsigned char>(line[i]);
        if (std::isspace(ch)) {
            ++i;
            continue;
        }
        if (line[i] == '#') break;
        if (line[i] == ':') {
            out.push_back({":", i + 1});
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) &&
               line[i] != '#' && line[i] != ':')
            ++i;
        out.push_back({line.substr(start, i - start), start + 1});
    }
    return out;
}

inline double parse_number(const Token& tok, std::size_t line) {
    const char* begin = tok.text.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin + tok.text.size() || tok.text.empty() || !std::isfinite(v))
        throw parse_error(line, tok.column, "malformed number '" + tok.text + "'");
    return v;
}

inline int parse_arity(const Token& tok, std::size_t line) {
    const char* begin = tok.text.c_str();
    char* end = nullptr;
    const long v = std::strtol(begin, &end, 10);
    if (end != begin + tok.text.size() || tok.text.empty())
        throw parse_error(line, tok.column, "malformed arity '" + tok.text + "'");
    if (v < 2 || v > 1'000'000)
        throw parse_error(line, tok.column, "arity must be at least 2, got '" + tok.text + "'");
    return static_cast<int>(v);
}

struct PendingComponent {
    bool absolute = true;
    std::vector<std::size_t> targets, givens;
    std::vector<double> numbers;
    std::size_t line = 0;
};

} // namespace detail

/// Parses the line-based system format:
///   descriptor <name> <arity>
///   absolute <D...> : <p...>
///   conditional <Z...> given <W...> : <rows in given-state order>
/// '#' starts a comment. Descriptor lines must precede component lines;
/// declaration order fixes joint-state indexing (first declared most
/// significant). Numeric table checks go through validate(), so bad row
/// sums surface as validation errors, not parse errors.
inline ProbabilitySystem parse_system(const std::string& text, double table_tol = 1e-9) {
    std::vector<Descriptor> descriptors;
    std::vector<detail::PendingComponent> pending;
    auto find_descriptor = [&](const detail::Token& tok, std::size_t line) {
        for (std::size_t i = 0; i < descriptors.size(); ++i)
            if (descriptors[i].name == tok.text) return i;
        throw parse_error(line, tok.column, "unknown descriptor '" + tok.text + "'");
    };

    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t stop = text.find('\n', start);
        if (stop == std::string::npos) stop = text.size();
        const std::string line = text.substr(start, stop - start);
        start = stop + 1;
        ++lineno;
        auto tokens = detail::tokenize(line);
        if (tokens.empty()) {
            if (stop == text.size()) break;
            continue;
        }
        const auto& head = tokens[0];
        if (head.text == "descriptor") {
            if (!pending.empty())
                throw parse_error(lineno, head.column,
                                  "descriptor declarations must precede component lines");
            if (tokens.size() != 3)
                throw parse_error(lineno, head.column, "expected: descriptor <name> <arity>");
            for (const auto& d : descriptors)
                if (d.name == tokens[1].text)
                    throw parse_error(lineno, tokens[1].column,
                                      "duplicate descriptor '" + tokens[1].text + "'");
            descriptors.push_back({tokens[1].text, detail::parse_arity(tokens[2], lineno)});
        } else if (head.text == "absolute" || head.text == "conditional") {
            detail::PendingComponent comp;
            comp.absolute = head.text == "absolute";
            comp.line = lineno;
            std::size_t i = 1;
            bool in_givens = false;
            for (; i < tokens.size() && tokens[i].text != ":"; ++i) {
                if (tokens[i].text == "given") {
                    if (comp.absolute)
                        throw parse_error(lineno, tokens[i].column,
                                          "'given' is only valid in conditional lines");
                    if (in_givens)
                        throw parse_error(lineno, tokens[i].column, "repeated 'given'");
                    in_givens = true;
                    continue;
                }
                const std::size_t d = find_descriptor(tokens[i], lineno);
                auto& list = in_givens ? comp.givens : comp.targets;
                for (std::size_t seen : comp.targets)
                    if (seen == d)
                        throw parse_error(lineno, tokens[i].column,
                                          "descriptor '" + tokens[i].text + "' listed twice");
                for (std::size_t seen : comp.givens)
                    if (seen == d)
                        throw parse_error(lineno, tokens[i].column,
                                          "descriptor '" + tokens[i].text + "' listed twice");
                list.push_back(d);
            }
            if (comp.targets.empty())
                throw parse_error(lineno, head.column, "component lists no descriptors");
            if (!comp.absolute && !in_givens)
                throw parse_error(lineno, head.column, "conditional line is missing 'given'");
            if (!comp.absolute && comp.givens.empty())
                throw parse_error(lineno, head.column, "conditional line lists no given descriptors");
            if (i == tokens.size())
                throw parse_error(lineno, head.column, "missing ':' before the probabilities");
            for (++i; i < tokens.size(); ++i)
                comp.numbers.push_back(detail::parse_number(tokens[i], lineno));
            pending.push_back(std::move(comp));
        } else {
            throw parse_error(lineno, head.column, "unknown directive '" + head.text + "'");
        }
        if (stop == text.size()) break;
    }

    if (descriptors.empty()) throw parse_error(lineno, 1, "no descriptors declared");
    std::optional<EventSpace> parsed_space;
    try {
        parsed_space.emplace(descriptors);
    } catch (const domain_error& e) {
        throw validation_error(e.what());
    }
    const EventSpace& space = *parsed_space;
    std::vector<ComponentTable> entries;
    for (auto& comp : pending) {
        auto states_over = [&](const std::vector<std::size_t>& members) {
            std::size_t n = 1;
            for (std::size_t m : members) n *= static_cast<std::size_t>(space.arity(m));
            return n;
        };
        if (comp.absolute) {
            const std::size_t want = states_over(comp.targets);
            if (comp.numbers.size() != want)
                throw parse_error(comp.line, 1,
                                  "expected " + std::to_string(want) + " probabilities, got " +
                                      std::to_string(comp.numbers.size()));
            MarginalTable t;
            t.members = comp.targets;
            for (std::size_t m : comp.targets) t.arities.push_back(space.arity(m));
            t.probabilities = std::move(comp.numbers);
            entries.push_back({Component::absolute(comp.targets), std::move(t)});
        } else {
            const std::size_t zs = states_over(comp.targets);
            const std::size_t ws = states_over(comp.givens);
            if (comp.numbers.size() != zs * ws)
                throw parse_error(comp.line, 1,
                                  "expected " + std::to_string(zs * ws) + " probabilities (" +
                                      std::to_string(ws) + " rows of " + std::to_string(zs) +
                                      "), got " + std::to_string(comp.numbers.size()));
            ConditionalTable t;
            t.targets = comp.targets;
            t.givens = comp.givens;
            for (std::size_t m : comp.targets) t.target_arities.push_back(space.arity(m));
            for (std::size_t m : comp.givens) t.given_arities.push_back(space.arity(m));
            for (std::size_t w = 0; w < ws; ++w)
                t.rows.emplace_back(std::vector<double>(comp.numbers.begin() + w * zs,
                                                        comp.numbers.begin() + (w + 1) * zs));
            entries.push_back({Component::conditional(comp.targets, comp.givens), std::move(t)});
        }
    }

    std::optional<ProbabilitySystem> pc;
    try {
        pc.emplace(space, std::move(entries));
    } catch (const domain_error& e) {
        throw validation_error(e.what());
    }
    auto violations = validate(*pc, table_tol);
    if (!violations.empty()) {
        std::string msg;
        for (const auto& v : violations) {
            if (!msg.empty()) msg += "; ";
            msg += v.message;
        }
        throw validation_error(msg);
    }
    return std::move(*pc);
}

/// Inverse of parse_system up to formatting: shortest round-trip decimals,
/// one line per descriptor and component.
inline std::string write_system(const ProbabilitySystem& pc) {
    const EventSpace& space = pc.space();
    std::string out;
    for (std::size_t d = 0; d < space.size(); ++d)
        out += "descriptor " + space.name(d) + " " + std::to_string(space.arity(d)) + "\n";
    for (const auto& e : pc.entries()) {
        if (e.component.is_absolute()) {
            out += "absolute";
            for (std::size_t m : e.component.targets()) out += " " + space.name(m);
            out += " :";
            for (double v : e.marginal().probabilities) out += " " + format_double(v);
        } else {
            out += "conditional";
            for (std::size_t m : e.component.targets()) out += " " + space.name(m);
            out += " given";
            for (std::size_t m : e.component.givens()) out += " " + space.name(m);
            out += " :";
            for (const auto& row : e.conditional().rows)
                for (double v : *row) out += " " + format_double(v);
        }
        out += "\n";
    }
    return out;
}

/// Parses the joint-distribution format: a `joint` header, descriptor
/// lines, then `values : p0 ... p(M-1)` in joint-state index order.
inline JointDistribution parse_joint(const std::string& text, double tol = 1e-9) {
    std::vector<Descriptor> descriptors;
    std::vector<double> values;
    bool saw_header = false, saw_values = false;

    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t stop = text.find('\n', start);
        if (stop == std::string::npos) stop = text.size();
        const std::string line = text.substr(start, stop - start);
        start = stop + 1;
        ++lineno;
        auto tokens = detail::tokenize(line);
        if (!tokens.empty()) {
            const auto& head = tokens[0];
            if (!saw_header) {
                if (head.text != "joint" || tokens.size() != 1)
                    throw parse_error(lineno, head.column, "expected the 'joint' header");
                saw_header = true;
            } else if (head.text == "descriptor") {
                if (saw_values)
                    throw parse_error(lineno, head.column, "descriptor line after values");
                if (tokens.size() != 3)
                    throw parse_error(lineno, head.column, "expected: descriptor <name> <arity>");
                for (const auto& d : descriptors)
                    if (d.name == tokens[1].text)
                        throw parse_error(lineno, tokens[1].column,
                                          "duplicate descriptor '" + tokens[1].text + "'");
                descriptors.push_back({tokens[1].text, detail::parse_arity(tokens[2], lineno)});
            } else if (head.text == "values") {
                if (saw_values) throw parse_error(lineno, head.column, "repeated values line");
                if (tokens.size() < 2 || tokens[1].text != ":")
                    throw parse_error(lineno, head.column, "expected: values : <p...>");
                for (std::size_t i = 2; i < tokens.size(); ++i)
                    values.push_back(detail::parse_number(tokens[i], lineno));
                saw_values = true;
            } else {
                throw parse_error(lineno, head.column, "unknown directive '" + head.text + "'");
            }
        }
        if (stop == text.size()) break;
    }
    if (!saw_header) throw parse_error(1, 1, "expected the 'joint' header");
    if (descriptors.empty()) throw parse_error(lineno, 1, "no descriptors declared");
    if (!saw_values) throw parse_error(lineno, 1, "missing values line");
    std::optional<EventSpace> parsed_space;
    try {
        parsed_space.emplace(descriptors);
    } catch (const domain_error& e) {
        throw validation_error(e.what());
    }
    const EventSpace& space = *parsed_space;
    if (values.size() != space.joint_states())
        throw validation_error("expected " + std::to_string(space.joint_states()) +
                               " values, got " + std::to_string(values.size()));
    try {
        return JointDistribution(space, std::move(values), tol);
    } catch (const domain_error& e) {
        throw validation_error(e.what());
    }
}

inline std::string write_joint(const JointDistribution& p) {
    const EventSpace& space = p.space();
    std::string out = "joint\n";
    for (std::size_t d = 0; d < space.size(); ++d)
        out += "descriptor " + space.name(d) + " " + std::to_string(space.arity(d)) + "\n";
    out += "values :";
    for (std::size_t x = 0; x < p.size(); ++x) out += " " + format_double(p[x]);
    out += "\n";
    return out;
}

} // namespace pks
