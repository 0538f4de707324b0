#pragma once

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "cfid/graph.hpp"

namespace cfid {

// A value is an opaque token. Distinct tokens denote distinct values.
// Bound values are sum indices introduced during identification; they are
// never produced by the query parser.
struct Value {
    std::string token;
    bool bound = false;

    friend bool operator==(const Value& a, const Value& b) {
        return a.token == b.token && a.bound == b.bound;
    }
    friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }
    friend bool operator<(const Value& a, const Value& b) {
        return std::tie(a.token, a.bound) < std::tie(b.token, b.bound);
    }
};

inline Value lit(std::string token) { return Value{std::move(token), false}; }

// do(x): assignments are keyed by variable, serialized in name order.
using Intervention = std::map<Variable, Value>;

inline std::string render(const Intervention& iv) {
    std::string out;
    for (const auto& [var, val] : iv) {
        if (!out.empty()) out += ",";
        out += var + "=" + val.token;
    }
    return out;
}

// A counterfactual variable: Y under do(subscript). The base may appear in
// its own subscript (x_{x'} is a meaningful event).
struct CfVariable {
    Variable base;
    Intervention sub;

    friend bool operator==(const CfVariable& a, const CfVariable& b) {
        return a.base == b.base && a.sub == b.sub;
    }
    friend bool operator<(const CfVariable& a, const CfVariable& b) {
        if (a.base != b.base) return a.base < b.base;
        return render(a.sub) < render(b.sub);
    }
};

struct CfEvent {
    CfVariable var;
    Value value;

    friend bool operator==(const CfEvent& a, const CfEvent& b) {
        return a.var == b.var && a.value == b.value;
    }
    friend bool operator<(const CfEvent& a, const CfEvent& b) {
        if (!(a.var == b.var)) return a.var < b.var;
        return a.value < b.value;
    }
};

inline std::string render(const CfEvent& e) {
    std::string out = e.var.base;
    if (!e.var.sub.empty()) out += "[" + render(e.var.sub) + "]";
    out += "=" + e.value.token;
    return out;
}

// Conjunction of counterfactual events, kept sorted and deduplicated.
// Two events on the same counterfactual variable with different values may
// coexist; detecting the implied contradiction is the algorithms' job.
struct CfConjunction {
    std::vector<CfEvent> events;

    bool empty() const { return events.empty(); }
    std::size_t size() const { return events.size(); }

    friend bool operator==(const CfConjunction& a, const CfConjunction& b) {
        return a.events == b.events;
    }
};

inline CfConjunction canonicalize(CfConjunction c) {
    std::sort(c.events.begin(), c.events.end());
    c.events.erase(std::unique(c.events.begin(), c.events.end()), c.events.end());
    return c;
}

inline CfConjunction make_conjunction(std::vector<CfEvent> events) {
    return canonicalize(CfConjunction{std::move(events)});
}

inline std::string render(const CfConjunction& c) {
    std::string out;
    for (const auto& e : c.events) {
        if (!out.empty()) out += ", ";
        out += render(e);
    }
    return out;
}

struct Query {
    CfConjunction gamma;
    CfConjunction delta;  // empty for unconditional queries
};

inline std::string render(const Query& q) {
    std::string out = "P(" + render(q.gamma);
    if (!q.delta.empty()) out += " | " + render(q.delta);
    return out + ")";
}

// An event whose base variable appears in its own subscript is settled by
// the subscript alone: contradiction if the values differ, tautology if
// they agree. Never both.
struct SelfEvents {
    std::vector<CfEvent> contradictions;
    std::vector<CfEvent> tautologies;
};

inline SelfEvents classify_self_events(const CfConjunction& c) {
    SelfEvents out;
    for (const auto& e : c.events) {
        auto it = e.var.sub.find(e.var.base);
        if (it == e.var.sub.end()) continue;
        if (it->second == e.value)
            out.tautologies.push_back(e);
        else
            out.contradictions.push_back(e);
    }
    return out;
}

// All subscript assignments mentioned anywhere in the conjunction.
inline std::set<std::pair<Variable, Value>> sub_of(const CfConjunction& c) {
    std::set<std::pair<Variable, Value>> out;
    for (const auto& e : c.events)
        for (const auto& [var, val] : e.var.sub) out.insert({var, val});
    return out;
}

inline VarSet var_of(const CfConjunction& c) {
    VarSet out;
    for (const auto& e : c.events) out.insert(e.var.base);
    return out;
}

}  // namespace cfid
