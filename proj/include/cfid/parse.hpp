#pragma once

#include <cctype>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cfid/events.hpp"
#include "cfid/graph.hpp"

namespace cfid {

struct ParseError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
inline bool is_value_char(char c) { return is_ident_char(c) || c == '\''; }

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace detail

// One declaration per line: `A -> B`, `A <-> B`, or `node A`. '#' starts a
// comment; variables are declared implicitly by first mention.
inline CausalDiagram parse_graph(const std::string& text) {
    VarSet nodes;
    std::set<std::pair<Variable, Variable>> dir, bi;
    std::size_t lineno = 0, pos = 0;
    auto fail = [&](const std::string& msg) {
        throw ParseError("line " + std::to_string(lineno) + ": " + msg);
    };
    auto valid_name = [&](const std::string& n) {
        if (n.empty()) return false;
        if (std::isdigit(static_cast<unsigned char>(n[0]))) return false;
        for (char c : n)
            if (!detail::is_ident_char(c)) return false;
        return true;
    };
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line = line.substr(0, h);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.rfind("node ", 0) == 0 || line == "node") {
            std::string name = detail::trim(line.substr(4));
            if (!valid_name(name)) fail("bad variable name '" + name + "'");
            nodes.insert(name);
            continue;
        }
        std::string arrow;
        std::size_t at = line.find("<->");
        if (at != std::string::npos) {
            arrow = "<->";
        } else {
            at = line.find("->");
            if (at == std::string::npos) fail("expected '->', '<->', or 'node'");
            arrow = "->";
        }
        std::string a = detail::trim(line.substr(0, at));
        std::string b = detail::trim(line.substr(at + arrow.size()));
        if (!valid_name(a)) fail("bad variable name '" + a + "'");
        if (!valid_name(b)) fail("bad variable name '" + b + "'");
        nodes.insert(a);
        nodes.insert(b);
        if (arrow == "->") {
            if (!dir.insert({a, b}).second) fail("duplicate edge " + a + " -> " + b);
        } else {
            if (!bi.insert(CausalDiagram::ordered(a, b)).second)
                fail("duplicate edge " + a + " <-> " + b);
        }
    }
    return CausalDiagram(nodes, dir, bi);  // throws on cycles, naming the cycle
}

namespace detail {

struct QueryScanner {
    const std::string& s;
    std::size_t i = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("column " + std::to_string(i + 1) + ": " + msg);
    }
    void skip_ws() {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    }
    bool eat(char c) {
        skip_ws();
        if (i < s.size() && s[i] == c) {
            ++i;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!eat(c)) fail(std::string("expected '") + c + "'");
    }
    std::string ident() {
        skip_ws();
        std::size_t start = i;
        while (i < s.size() && is_ident_char(s[i])) ++i;
        if (i == start) fail("expected a variable name");
        if (std::isdigit(static_cast<unsigned char>(s[start]))) fail("variable names cannot start with a digit");
        return s.substr(start, i - start);
    }
    std::string value_token() {
        skip_ws();
        std::size_t start = i;
        while (i < s.size() && is_value_char(s[i])) ++i;
        if (i == start) fail("expected a value");
        return s.substr(start, i - start);
    }

    CfEvent event() {
        CfEvent e;
        e.var.base = ident();
        if (eat('[')) {
            do {
                Variable v = ident();
                expect('=');
                Value val = lit(value_token());
                if (e.var.sub.count(v)) fail("variable " + v + " repeated in one subscript");
                e.var.sub[v] = val;
            } while (eat(','));
            expect(']');
        }
        expect('=');
        e.value = lit(value_token());
        return e;
    }

    std::vector<CfEvent> events() {
        std::vector<CfEvent> out;
        do {
            out.push_back(event());
        } while (eat(','));
        return out;
    }
};

}  // namespace detail

// `P(Y[X=x0]=y0 | X=x1, Z[D=d0]=z0, D=d0)` — whitespace-insensitive.
inline Query parse_query(const std::string& text) {
    detail::QueryScanner sc{text};
    sc.skip_ws();
    if (!(sc.eat('P'))) sc.fail("query must start with 'P('");
    sc.expect('(');
    Query q;
    q.gamma = make_conjunction(sc.events());
    if (sc.eat('|')) q.delta = make_conjunction(sc.events());
    sc.expect(')');
    sc.skip_ws();
    if (sc.i != text.size()) sc.fail("trailing input after query");
    if (q.gamma.empty()) sc.fail("empty outcome conjunction");
    return q;
}

}  // namespace cfid
