#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfid/events.hpp"

namespace cfid {

struct BoundSym {
    std::string id;  // token of the bound Value
    Variable base;   // variable whose domain the index ranges over

    friend bool operator<(const BoundSym& a, const BoundSym& b) {
        if (a.base != b.base) return a.base < b.base;
        return a.id < b.id;
    }
    friend bool operator==(const BoundSym& a, const BoundSym& b) {
        return a.id == b.id && a.base == b.base;
    }
};

// P_x(joint): a member of the experimental family.
struct PStarTerm {
    std::map<Variable, Value> dox;
    std::map<Variable, Value> joint;
};

struct ProbExpr;
using ExprPtr = std::shared_ptr<const ProbExpr>;

struct ProbExpr {
    enum class Kind { Const, PStar, Product, Sum, Ratio };
    Kind kind = Kind::Const;

    int constant = 0;               // Const
    PStarTerm term;                 // PStar
    std::vector<ExprPtr> factors;   // Product
    std::vector<BoundSym> bound;    // Sum
    ExprPtr body;                   // Sum
    ExprPtr num, den;               // Ratio
};

inline ExprPtr make_const(int v) {
    if (v != 0 && v != 1) throw std::invalid_argument("constant must be 0 or 1");
    auto e = std::make_shared<ProbExpr>();
    e->kind = ProbExpr::Kind::Const;
    e->constant = v;
    return e;
}

inline ExprPtr make_pstar(PStarTerm t) {
    for (const auto& [v, val] : t.joint)
        if (t.dox.count(v))
            throw std::invalid_argument("variable both intervened and measured: " + v);
    if (t.joint.empty()) throw std::invalid_argument("empty joint in P* term");
    auto e = std::make_shared<ProbExpr>();
    e->kind = ProbExpr::Kind::PStar;
    e->term = std::move(t);
    return e;
}

inline ExprPtr make_product(std::vector<ExprPtr> fs) {
    auto e = std::make_shared<ProbExpr>();
    e->kind = ProbExpr::Kind::Product;
    e->factors = std::move(fs);
    return e;
}

inline ExprPtr make_sum(std::vector<BoundSym> bound, ExprPtr body) {
    if (bound.empty()) return body;
    auto e = std::make_shared<ProbExpr>();
    e->kind = ProbExpr::Kind::Sum;
    e->bound = std::move(bound);
    e->body = std::move(body);
    return e;
}

inline ExprPtr make_ratio(ExprPtr num, ExprPtr den) {
    auto e = std::make_shared<ProbExpr>();
    e->kind = ProbExpr::Kind::Ratio;
    e->num = std::move(num);
    e->den = std::move(den);
    return e;
}

// --- rendering -------------------------------------------------------------

namespace detail {

inline std::string sym_text(const Value& v, bool anon) {
    if (v.bound && anon) return "?";
    return v.token;
}

inline std::string pstar_text(const PStarTerm& t, bool anon) {
    std::string s = "P";
    if (!t.dox.empty()) {
        s += "[";
        bool first = true;
        for (const auto& [var, val] : t.dox) {
            if (!first) s += ",";
            first = false;
            s += sym_text(val, anon);
        }
        s += "]";
    }
    s += "(";
    bool first = true;
    for (const auto& [var, val] : t.joint) {
        if (!first) s += ", ";
        first = false;
        s += sym_text(val, anon);
    }
    return s + ")";
}

// anon=true erases bound-symbol identity, for name-independent sort keys.
inline std::string key_string(const ExprPtr& e, bool anon) {
    switch (e->kind) {
        case ProbExpr::Kind::Const:
            return e->constant ? "1" : "0";
        case ProbExpr::Kind::PStar: {
            std::string s = "P[";
            for (const auto& [var, val] : e->term.dox) s += var + "=" + sym_text(val, anon) + ",";
            s += "](";
            for (const auto& [var, val] : e->term.joint) s += var + "=" + sym_text(val, anon) + ",";
            return s + ")";
        }
        case ProbExpr::Kind::Product: {
            std::string s = "(";
            for (const auto& f : e->factors) s += key_string(f, anon) + "*";
            return s + ")";
        }
        case ProbExpr::Kind::Sum: {
            std::string s = "sum{";
            for (const auto& b : e->bound) s += b.base + (anon ? "" : ":" + b.id) + ",";
            return s + "}" + key_string(e->body, anon);
        }
        case ProbExpr::Kind::Ratio:
            return "(" + key_string(e->num, anon) + ")/(" + key_string(e->den, anon) + ")";
    }
    return "";
}

}  // namespace detail

inline std::string render_text(const ExprPtr& e) {
    switch (e->kind) {
        case ProbExpr::Kind::Const:
            return e->constant ? "1" : "0";
        case ProbExpr::Kind::PStar:
            return detail::pstar_text(e->term, false);
        case ProbExpr::Kind::Product: {
            std::string s;
            for (const auto& f : e->factors) {
                if (!s.empty()) s += " * ";
                bool paren = f->kind == ProbExpr::Kind::Sum || f->kind == ProbExpr::Kind::Ratio;
                s += paren ? "(" + render_text(f) + ")" : render_text(f);
            }
            return s;
        }
        case ProbExpr::Kind::Sum: {
            std::string s = "sum_{";
            bool first = true;
            for (const auto& b : e->bound) {
                if (!first) s += ",";
                first = false;
                s += b.id;
            }
            return s + "} " + render_text(e->body);
        }
        case ProbExpr::Kind::Ratio: {
            auto wrap = [](const ExprPtr& x) {
                return x->kind == ProbExpr::Kind::PStar || x->kind == ProbExpr::Kind::Const
                           ? render_text(x)
                           : "(" + render_text(x) + ")";
            };
            return wrap(e->num) + " / " + wrap(e->den);
        }
    }
    return "";
}

inline std::string render_latex(const ExprPtr& e) {
    switch (e->kind) {
        case ProbExpr::Kind::Const:
            return e->constant ? "1" : "0";
        case ProbExpr::Kind::PStar: {
            std::string s = "P";
            if (!e->term.dox.empty()) {
                s += "_{";
                bool first = true;
                for (const auto& [var, val] : e->term.dox) {
                    if (!first) s += ",";
                    first = false;
                    s += val.token;
                }
                s += "}";
            }
            s += "(";
            bool first = true;
            for (const auto& [var, val] : e->term.joint) {
                if (!first) s += ", ";
                first = false;
                s += val.token;
            }
            return s + ")";
        }
        case ProbExpr::Kind::Product: {
            std::string s;
            for (const auto& f : e->factors) {
                bool paren = f->kind == ProbExpr::Kind::Sum || f->kind == ProbExpr::Kind::Ratio;
                s += paren ? "\\left(" + render_latex(f) + "\\right)" : render_latex(f);
            }
            return s;
        }
        case ProbExpr::Kind::Sum: {
            std::string s = "\\sum_{";
            bool first = true;
            for (const auto& b : e->bound) {
                if (!first) s += ",";
                first = false;
                s += b.id;
            }
            return s + "} " + render_latex(e->body);
        }
        case ProbExpr::Kind::Ratio:
            return "\\frac{" + render_latex(e->num) + "}{" + render_latex(e->den) + "}";
    }
    return "";
}

inline nlohmann::json sym_json(const Value& v) {
    if (v.bound) return nlohmann::json{{"bound", v.token}};
    return nlohmann::json{{"lit", v.token}};
}

inline nlohmann::json render_json(const ExprPtr& e) {
    using nlohmann::json;
    switch (e->kind) {
        case ProbExpr::Kind::Const:
            return json{{"kind", "const"}, {"value", e->constant}};
        case ProbExpr::Kind::PStar: {
            json dox = json::object(), joint = json::object();
            for (const auto& [var, val] : e->term.dox) dox[var] = sym_json(val);
            for (const auto& [var, val] : e->term.joint) joint[var] = sym_json(val);
            return json{{"kind", "pstar"}, {"do", dox}, {"joint", joint}};
        }
        case ProbExpr::Kind::Product: {
            json fs = json::array();
            for (const auto& f : e->factors) fs.push_back(render_json(f));
            return json{{"kind", "product"}, {"factors", fs}};
        }
        case ProbExpr::Kind::Sum: {
            json bs = json::array();
            for (const auto& b : e->bound) bs.push_back(json{{"id", b.id}, {"base", b.base}});
            return json{{"kind", "sum"}, {"bound", bs}, {"body", render_json(e->body)}};
        }
        case ProbExpr::Kind::Ratio:
            return json{{"kind", "ratio"}, {"num", render_json(e->num)}, {"den", render_json(e->den)}};
    }
    return {};
}

inline Value parse_sym_json(const nlohmann::json& j) {
    if (j.contains("lit")) return Value{j.at("lit").get<std::string>(), false};
    if (j.contains("bound")) return Value{j.at("bound").get<std::string>(), true};
    throw std::invalid_argument("bad value symbol in expression JSON");
}

inline ExprPtr parse_expr_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "const") return make_const(j.at("value").get<int>());
    if (kind == "pstar") {
        PStarTerm t;
        for (const auto& [var, val] : j.at("do").items()) t.dox[var] = parse_sym_json(val);
        for (const auto& [var, val] : j.at("joint").items()) t.joint[var] = parse_sym_json(val);
        return make_pstar(std::move(t));
    }
    if (kind == "product") {
        std::vector<ExprPtr> fs;
        for (const auto& f : j.at("factors")) fs.push_back(parse_expr_json(f));
        return make_product(std::move(fs));
    }
    if (kind == "sum") {
        std::vector<BoundSym> bs;
        for (const auto& b : j.at("bound"))
            bs.push_back({b.at("id").get<std::string>(), b.at("base").get<std::string>()});
        return make_sum(std::move(bs), parse_expr_json(j.at("body")));
    }
    if (kind == "ratio")
        return make_ratio(parse_expr_json(j.at("num")), parse_expr_json(j.at("den")));
    throw std::invalid_argument("unknown expression kind: " + kind);
}

// --- canonicalization ------------------------------------------------------

namespace detail {

inline ExprPtr canonicalize_structure(const ExprPtr& e, bool anon_keys) {
    switch (e->kind) {
        case ProbExpr::Kind::Const:
            return e;
        case ProbExpr::Kind::PStar:
            return e;  // map keys are already sorted
        case ProbExpr::Kind::Product: {
            std::vector<ExprPtr> flat;
            bool zero = false;
            std::function<void(const ExprPtr&)> add = [&](const ExprPtr& f) {
                ExprPtr c = canonicalize_structure(f, anon_keys);
                if (c->kind == ProbExpr::Kind::Const) {
                    if (c->constant == 0) zero = true;
                    return;  // unit factors vanish
                }
                if (c->kind == ProbExpr::Kind::Product) {
                    for (const auto& g : c->factors) flat.push_back(g);
                    return;
                }
                flat.push_back(c);
            };
            for (const auto& f : e->factors) add(f);
            if (zero) return make_const(0);
            if (flat.empty()) return make_const(1);
            std::sort(flat.begin(), flat.end(), [&](const ExprPtr& a, const ExprPtr& b) {
                return key_string(a, anon_keys) < key_string(b, anon_keys);
            });
            if (flat.size() == 1) return flat[0];
            return make_product(std::move(flat));
        }
        case ProbExpr::Kind::Sum: {
            ExprPtr body = canonicalize_structure(e->body, anon_keys);
            std::vector<BoundSym> bound = e->bound;
            if (body->kind == ProbExpr::Kind::Sum) {
                bound.insert(bound.end(), body->bound.begin(), body->bound.end());
                body = body->body;
            }
            if (body->kind == ProbExpr::Kind::Const && body->constant == 0) return make_const(0);
            std::sort(bound.begin(), bound.end());
            return make_sum(std::move(bound), std::move(body));
        }
        case ProbExpr::Kind::Ratio:
            return make_ratio(canonicalize_structure(e->num, anon_keys),
                              canonicalize_structure(e->den, anon_keys));
    }
    return e;
}

inline void collect_binder_order(const ExprPtr& e, std::vector<BoundSym>& order) {
    switch (e->kind) {
        case ProbExpr::Kind::Const:
        case ProbExpr::Kind::PStar:
            return;
        case ProbExpr::Kind::Product:
            for (const auto& f : e->factors) collect_binder_order(f, order);
            return;
        case ProbExpr::Kind::Sum:
            for (const auto& b : e->bound) order.push_back(b);
            collect_binder_order(e->body, order);
            return;
        case ProbExpr::Kind::Ratio:
            collect_binder_order(e->num, order);
            collect_binder_order(e->den, order);
            return;
    }
}

inline ExprPtr rename_bound(const ExprPtr& e, const std::map<std::string, std::string>& ren) {
    auto ren_val = [&](const Value& v) {
        if (!v.bound) return v;
        auto it = ren.find(v.token);
        return it == ren.end() ? v : Value{it->second, true};
    };
    switch (e->kind) {
        case ProbExpr::Kind::Const:
            return e;
        case ProbExpr::Kind::PStar: {
            PStarTerm t;
            for (const auto& [var, val] : e->term.dox) t.dox[var] = ren_val(val);
            for (const auto& [var, val] : e->term.joint) t.joint[var] = ren_val(val);
            return make_pstar(std::move(t));
        }
        case ProbExpr::Kind::Product: {
            std::vector<ExprPtr> fs;
            for (const auto& f : e->factors) fs.push_back(rename_bound(f, ren));
            return make_product(std::move(fs));
        }
        case ProbExpr::Kind::Sum: {
            std::vector<BoundSym> bs;
            for (const auto& b : e->bound) {
                auto it = ren.find(b.id);
                bs.push_back({it == ren.end() ? b.id : it->second, b.base});
            }
            return make_sum(std::move(bs), rename_bound(e->body, ren));
        }
        case ProbExpr::Kind::Ratio:
            return make_ratio(rename_bound(e->num, ren), rename_bound(e->den, ren));
    }
    return e;
}

}  // namespace detail

// Canonical form: flattened sorted products, merged sorted binders, unit
// factors gone, binders renamed w1, w2, ... in traversal order. Idempotent.
inline ExprPtr canonicalize(const ExprPtr& e) {
    // Sort with name-independent keys first so renaming is order-stable.
    ExprPtr c = detail::canonicalize_structure(e, true);
    std::vector<BoundSym> order;
    detail::collect_binder_order(c, order);
    std::map<std::string, std::string> ren;
    int n = 0;
    for (const auto& b : order)
        if (!ren.count(b.id)) ren[b.id] = "w" + std::to_string(++n);
    c = detail::rename_bound(c, ren);
    return detail::canonicalize_structure(c, false);
}

inline bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
    return detail::key_string(canonicalize(a), false) ==
           detail::key_string(canonicalize(b), false);
}

// Substitute every occurrence of (variable, value) in P* terms.
inline ExprPtr substitute(const ExprPtr& e, const Variable& var, const Value& from,
                          const Value& to) {
    switch (e->kind) {
        case ProbExpr::Kind::Const:
            return e;
        case ProbExpr::Kind::PStar: {
            PStarTerm t = e->term;
            if (auto it = t.dox.find(var); it != t.dox.end() && it->second == from)
                it->second = to;
            if (auto it = t.joint.find(var); it != t.joint.end() && it->second == from)
                it->second = to;
            return make_pstar(std::move(t));
        }
        case ProbExpr::Kind::Product: {
            std::vector<ExprPtr> fs;
            for (const auto& f : e->factors) fs.push_back(substitute(f, var, from, to));
            return make_product(std::move(fs));
        }
        case ProbExpr::Kind::Sum:
            return make_sum(e->bound, substitute(e->body, var, from, to));
        case ProbExpr::Kind::Ratio:
            return make_ratio(substitute(e->num, var, from, to),
                              substitute(e->den, var, from, to));
    }
    return e;
}

// Well-formedness: binder hygiene (no free bound symbol, unique binder ids)
// and structural invariants. Throws on violation.
inline void validate(const ExprPtr& e, std::set<std::string> in_scope = {}) {
    switch (e->kind) {
        case ProbExpr::Kind::Const:
            if (e->constant != 0 && e->constant != 1)
                throw std::logic_error("constant outside {0,1}");
            return;
        case ProbExpr::Kind::PStar:
            for (const auto& m : {e->term.dox, e->term.joint})
                for (const auto& [var, val] : m)
                    if (val.bound && !in_scope.count(val.token))
                        throw std::logic_error("free bound symbol: " + val.token);
            if (e->term.joint.empty()) throw std::logic_error("empty P* joint");
            return;
        case ProbExpr::Kind::Product:
            if (e->factors.size() < 2) throw std::logic_error("product arity < 2");
            for (const auto& f : e->factors) {
                if (f->kind == ProbExpr::Kind::Const)
                    throw std::logic_error("constant inside product");
                validate(f, in_scope);
            }
            return;
        case ProbExpr::Kind::Sum: {
            if (e->bound.empty()) throw std::logic_error("sum binds nothing");
            for (const auto& b : e->bound)
                if (!in_scope.insert(b.id).second)
                    throw std::logic_error("shadowed binder: " + b.id);
            validate(e->body, in_scope);
            return;
        }
        case ProbExpr::Kind::Ratio:
            validate(e->num, in_scope);
            validate(e->den, in_scope);
            return;
    }
}

// --- numeric evaluation ------------------------------------------------------

struct EvalError : std::runtime_error {
    enum class Kind { MissingTable, UnboundSymbol, ZeroDenominator, UnknownValue };
    Kind kind;
    EvalError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// Joint probability table over `vars`, mixed-radix indexed by domain position
// (first variable most significant).
struct PTable {
    std::vector<Variable> vars;
    std::vector<double> p;
};

// The experimental family: a joint table per intervention. Tables may be
// materialized up front or produced on demand through `source`.
struct PStarFamily {
    std::map<Variable, std::vector<std::string>> domains;
    mutable std::map<std::string, PTable> tables;  // key: rendered intervention
    std::function<PTable(const std::map<Variable, std::string>&)> source;

    const PTable& table(const std::map<Variable, std::string>& iv) const {
        std::string key;
        for (const auto& [v, t] : iv) key += (key.empty() ? "" : ",") + v + "=" + t;
        auto it = tables.find(key);
        if (it != tables.end()) return it->second;
        if (!source)
            throw EvalError(EvalError::Kind::MissingTable,
                            "no table for intervention {" + key + "}");
        return tables.emplace(key, source(iv)).first->second;
    }

    int value_index(const Variable& v, const std::string& token) const {
        auto it = domains.find(v);
        if (it == domains.end())
            throw EvalError(EvalError::Kind::UnknownValue, "no domain for " + v);
        for (std::size_t i = 0; i < it->second.size(); ++i)
            if (it->second[i] == token) return static_cast<int>(i);
        throw EvalError(EvalError::Kind::UnknownValue,
                        "value " + token + " not in the domain of " + v);
    }
};

namespace detail {

inline std::string resolve(const Value& v, const std::map<std::string, std::string>& env) {
    if (!v.bound) return v.token;
    auto it = env.find(v.token);
    if (it == env.end())
        throw EvalError(EvalError::Kind::UnboundSymbol, "unbound sum index " + v.token);
    return it->second;
}

inline double eval_impl(const ExprPtr& e, const PStarFamily& fam,
                        std::map<std::string, std::string>& env) {
    switch (e->kind) {
        case ProbExpr::Kind::Const:
            return e->constant;
        case ProbExpr::Kind::PStar: {
            std::map<Variable, std::string> iv;
            for (const auto& [var, val] : e->term.dox) iv[var] = resolve(val, env);
            const PTable& t = fam.table(iv);
            std::vector<int> want(t.vars.size(), -1);
            for (const auto& [var, val] : e->term.joint) {
                auto it = std::find(t.vars.begin(), t.vars.end(), var);
                if (it == t.vars.end())
                    throw EvalError(EvalError::Kind::MissingTable,
                                    "table does not cover variable " + var);
                want[it - t.vars.begin()] = fam.value_index(var, resolve(val, env));
            }
            double total = 0.0;
            std::vector<std::size_t> radix(t.vars.size());
            for (std::size_t i = 0; i < t.vars.size(); ++i)
                radix[i] = fam.domains.at(t.vars[i]).size();
            for (std::size_t cell = 0; cell < t.p.size(); ++cell) {
                std::size_t rest = cell;
                bool match = true;
                for (std::size_t i = t.vars.size(); i-- > 0;) {
                    int idx = static_cast<int>(rest % radix[i]);
                    rest /= radix[i];
                    if (want[i] >= 0 && want[i] != idx) { match = false; break; }
                }
                if (match) total += t.p[cell];
            }
            return total;
        }
        case ProbExpr::Kind::Product: {
            double out = 1.0;
            for (const auto& f : e->factors) out *= eval_impl(f, fam, env);
            return out;
        }
        case ProbExpr::Kind::Sum: {
            double out = 0.0;
            std::function<void(std::size_t)> rec = [&](std::size_t i) {
                if (i == e->bound.size()) {
                    out += eval_impl(e->body, fam, env);
                    return;
                }
                const BoundSym& b = e->bound[i];
                auto dit = fam.domains.find(b.base);
                if (dit == fam.domains.end())
                    throw EvalError(EvalError::Kind::UnknownValue, "no domain for " + b.base);
                for (const auto& token : dit->second) {
                    env[b.id] = token;
                    rec(i + 1);
                }
                env.erase(b.id);
            };
            rec(0);
            return out;
        }
        case ProbExpr::Kind::Ratio: {
            double den = eval_impl(e->den, fam, env);
            if (den == 0.0)
                throw EvalError(EvalError::Kind::ZeroDenominator,
                                "conditioning event has probability zero");
            return eval_impl(e->num, fam, env) / den;
        }
    }
    return 0.0;
}

}  // namespace detail

inline double evaluate(const ExprPtr& e, const PStarFamily& fam,
                       std::map<std::string, std::string> env = {}) {
    return detail::eval_impl(e, fam, env);
}

}  // namespace cfid
