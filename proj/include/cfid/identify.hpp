#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfid/events.hpp"
#include "cfid/expr.hpp"
#include "cfid/graph.hpp"
#include "cfid/worlds.hpp"

namespace cfid {

// Certificate of non-identifiability: inside one c-component of the
// counterfactual graph, some parent variable is forced to a value while the
// same variable is simultaneously set or observed at another value.
struct ConflictWitness {
    enum class Kind { ParentSetTwice, ObservedInside };
    std::set<std::string> component;  // node names in the counterfactual graph
    Variable conflict_var;
    Value value_in_sub;
    Value conflicting_value;
    Kind kind = Kind::ParentSetTwice;
};

inline std::string render(const ConflictWitness& w) {
    std::string s = "component {";
    bool first = true;
    for (const auto& n : w.component) {
        if (!first) s += ", ";
        first = false;
        s += n;
    }
    s += "}: " + w.conflict_var + " set to " + w.value_in_sub.token + " but also ";
    s += (w.kind == ConflictWitness::Kind::ParentSetTwice) ? "set to " : "takes value ";
    return s + w.conflicting_value.token;
}

struct IdResult {
    enum class Verdict { Expression, Zero, Fail };
    Verdict verdict = Verdict::Zero;
    ExprPtr expr;  // set iff Expression
    std::optional<ConflictWitness> witness;  // set iff Fail
};

struct CondIdResult {
    enum class Verdict { Expression, Zero, Fail, Undefined };
    Verdict verdict = Verdict::Zero;
    ExprPtr expr;
    std::optional<ConflictWitness> witness;
};

// Scan every c-component of the counterfactual graph for the conflict of the
// non-identifiability criterion. Assignments to a variable X relevant to a
// component S: values of fixed parents of S-nodes, values of observed
// parents outside S, a distinct marker for each free parent outside S, and
// values/markers of X-based nodes inside S. A witness needs two distinct
// assignments, at least one from a fixed parent.
inline std::optional<ConflictWitness> conflict_witness(const CounterfactualGraph& cg) {
    enum class Src { FixedParent, OutsideLiteral, Marker, Inside };
    CausalDiagram rp = cg.random_part();
    for (const auto& comp : c_components(rp)) {
        std::map<Variable, std::vector<std::pair<Value, Src>>> asg;
        auto add = [&](const Variable& b, const Value& v, Src s) {
            for (const auto& [ov, os] : asg[b])
                if (ov == v) return;
            asg[b].push_back({v, s});
        };
        for (const auto& n : comp) {
            const CfNode& ni = cg.info.at(n);
            for (const auto& p : cg.admg.parents(n)) {
                const CfNode& pi = cg.info.at(p);
                if (pi.status == NodeStatus::Fixed) {
                    add(pi.base, *pi.value, Src::FixedParent);
                } else if (comp.count(p)) {
                    continue;  // handled as an inside node below
                } else if (pi.value) {
                    add(pi.base, *pi.value, Src::OutsideLiteral);
                } else {
                    add(pi.base, Value{"node:" + p, true}, Src::Marker);
                }
            }
            if (ni.value)
                add(ni.base, *ni.value, Src::Inside);
            else
                add(ni.base, Value{"node:" + n, true}, Src::Inside);
        }
        for (const auto& [base, lst] : asg) {
            const std::pair<Value, Src>* fixed = nullptr;
            for (const auto& e : lst)
                if (e.second == Src::FixedParent) { fixed = &e; break; }
            if (!fixed || lst.size() < 2) continue;
            for (const auto& e : lst) {
                if (e.first == fixed->first) continue;
                ConflictWitness w;
                w.component = comp;
                w.conflict_var = base;
                w.value_in_sub = fixed->first;
                w.conflicting_value = e.first;
                bool literal_conflict = e.second == Src::Inside || e.second == Src::OutsideLiteral;
                w.kind = literal_conflict ? ConflictWitness::Kind::ObservedInside
                                          : ConflictWitness::Kind::ParentSetTwice;
                return w;
            }
        }
    }
    return std::nullopt;
}

namespace detail {

struct IdFail {
    ConflictWitness witness;
};

struct IdCtx {
    int* counter;
    std::vector<std::string>* trace;
    int depth = 0;

    Value fresh() { return Value{"#" + std::to_string(++*counter), true}; }
    void log(const std::string& s) const {
        if (trace) trace->push_back(std::string(2 * depth, ' ') + s);
    }
    IdCtx deeper() const { return IdCtx{counter, trace, depth + 1}; }
};

inline ExprPtr id_star_impl(const CausalDiagram& g, const CfConjunction& gamma_in, IdCtx ctx) {
    if (ctx.depth > 100) throw std::logic_error("identification recursion too deep");
    CfConjunction gamma = canonicalize(gamma_in);

    // line 1
    if (gamma.empty()) {
        ctx.log("ID* line 1: empty conjunction, return 1");
        return make_const(1);
    }
    // lines 2-3
    SelfEvents self = classify_self_events(gamma);
    if (!self.contradictions.empty()) {
        ctx.log("ID* line 2: self-contradictory event " + render(self.contradictions.front()) +
                ", return 0");
        return make_const(0);
    }
    if (!self.tautologies.empty()) {
        std::vector<CfEvent> rest;
        std::set<CfEvent> drop(self.tautologies.begin(), self.tautologies.end());
        for (const auto& e : gamma.events)
            if (!drop.count(e)) rest.push_back(e);
        ctx.log("ID* line 3: dropping " + std::to_string(drop.size()) + " tautological event(s)");
        return id_star_impl(g, make_conjunction(std::move(rest)), ctx);
    }

    // lines 4-5
    MakeCgResult mc = make_cg(g, gamma);
    if (mc.inconsistent) {
        ctx.log("ID* line 5: counterfactual graph inconsistent, return 0");
        return make_const(0);
    }
    ctx.log("ID* line 4: counterfactual graph over {" +
            [&] {
                std::string s;
                for (const auto& n : mc.graph.admg.nodes()) s += (s.empty() ? "" : ", ") + n;
                return s;
            }() +
            "}, query " + render(mc.rewritten));

    const CounterfactualGraph& cg = mc.graph;
    CausalDiagram rp = cg.random_part();
    std::vector<VarSet> comps = c_components(rp);

    // Value of each non-fixed node: its observed value, or a fresh sum index.
    std::map<std::string, Value> val;
    std::vector<BoundSym> binders;
    for (const auto& n : rp.nodes()) {
        const CfNode& ni = cg.info.at(n);
        if (ni.value) {
            val[n] = *ni.value;
        } else {
            Value s = ctx.fresh();
            val[n] = s;
            binders.push_back({s.token, ni.base});
        }
    }

    if (comps.size() > 1 || !binders.empty()) {
        // line 6: sum over unobserved nodes of the product over c-components,
        // each component's events subscripted by its outside context.
        ctx.log("ID* line 6: " + std::to_string(comps.size()) + " c-component(s), " +
                std::to_string(binders.size()) + " summed node(s)");
        std::vector<ExprPtr> factors;
        for (const auto& comp : comps) {
            std::vector<CfEvent> events;
            for (const auto& n : comp) {
                const CfNode& ni = cg.info.at(n);
                Intervention sub = ni.subscript;  // fixed ancestors
                for (const auto& p : rp.parents(n)) {
                    if (comp.count(p)) continue;
                    const Variable& pb = cg.info.at(p).base;
                    const Value& pv = val.at(p);
                    auto it = sub.find(pb);
                    if (it != sub.end() && !(it->second == pv)) {
                        ConflictWitness w;
                        w.component = comp;
                        w.conflict_var = pb;
                        w.value_in_sub = it->second;
                        w.conflicting_value = pv;
                        w.kind = ConflictWitness::Kind::ParentSetTwice;
                        ctx.log("ID* line 6: conflicting context for " + pb + ", FAIL");
                        throw IdFail{std::move(w)};
                    }
                    sub[pb] = pv;
                }
                events.push_back(CfEvent{CfVariable{ni.base, std::move(sub)}, val.at(n)});
            }
            CfConjunction sub_gamma = make_conjunction(std::move(events));
            ctx.log("ID* line 6: recurse on " + render(sub_gamma));
            factors.push_back(id_star_impl(g, sub_gamma, ctx.deeper()));
        }
        ExprPtr body = factors.size() == 1 ? factors[0] : make_product(std::move(factors));
        return make_sum(std::move(binders), std::move(body));
    }

    // lines 7-9: a single fully-valued c-component.
    const VarSet& s_nodes = comps.front();
    std::map<Variable, std::set<Value>> in_sub, in_ev;
    for (const auto& n : s_nodes) {
        const CfNode& ni = cg.info.at(n);
        for (const auto& [b, v] : ni.subscript) {
            in_sub[b].insert(v);
            in_ev[b].insert(v);
        }
        in_ev[ni.base].insert(*ni.value);
    }
    for (const auto& [base, subs] : in_sub) {
        for (const auto& x : subs) {
            for (const auto& xp : in_ev.at(base)) {
                if (xp == x) continue;
                // line 8
                ConflictWitness w;
                w.component = s_nodes;
                w.conflict_var = base;
                w.value_in_sub = x;
                w.conflicting_value = xp;
                w.kind = subs.count(xp) ? ConflictWitness::Kind::ParentSetTwice
                                        : ConflictWitness::Kind::ObservedInside;
                ctx.log("ID* line 8: " + base + " required at both " + x.token + " and " +
                        xp.token + ", FAIL");
                throw IdFail{std::move(w)};
            }
        }
    }
    // line 9
    PStarTerm term;
    for (const auto& [base, subs] : in_sub) term.dox[base] = *subs.begin();
    for (const auto& n : s_nodes) {
        const CfNode& ni = cg.info.at(n);
        auto it = term.joint.find(ni.base);
        if (it != term.joint.end() && !(it->second == *ni.value))
            throw std::logic_error("distinct copies of " + ni.base +
                                   " with different values survived to line 9");
        term.joint[ni.base] = *ni.value;
        // A variable measured inside the component at the very value it is
        // forced to elsewhere drops out of the intervention set: observing it
        // makes the forcing a no-op (line 8 already ruled out a mismatch).
        term.dox.erase(ni.base);
    }
    ExprPtr out = make_pstar(std::move(term));
    ctx.log("ID* line 9: return " + render_text(out));
    return out;
}

}  // namespace detail

inline IdResult id_star(const CausalDiagram& g, const CfConjunction& gamma,
                        std::vector<std::string>* trace = nullptr) {
    int counter = 0;
    IdResult out;
    try {
        ExprPtr e = canonicalize(detail::id_star_impl(g, gamma, detail::IdCtx{&counter, trace}));
        if (e->kind == ProbExpr::Kind::Const && e->constant == 0) {
            out.verdict = IdResult::Verdict::Zero;
        } else {
            validate(e);
            out.verdict = IdResult::Verdict::Expression;
            out.expr = std::move(e);
        }
    } catch (const detail::IdFail& f) {
        out.verdict = IdResult::Verdict::Fail;
        out.witness = f.witness;
    }
    return out;
}

namespace detail {

// Event rewritten onto its counterfactual-graph node; tautological events
// (base fixed to its own value) are dropped and yield nullopt.
inline std::optional<std::pair<CfEvent, std::string>> rewrite_event(
    const CounterfactualGraph& cg, const CfEvent& e) {
    if (e.var.sub.count(e.var.base)) return std::nullopt;
    const std::string& node = cg.merge_map.at(pw_id(e.var.base, world_key(e.var.sub)));
    const CfNode& ni = cg.info.at(node);
    return std::make_pair(CfEvent{CfVariable{e.var.base, ni.subscript}, e.value}, node);
}

inline CondIdResult from_id(IdResult r) {
    CondIdResult out;
    switch (r.verdict) {
        case IdResult::Verdict::Expression:
            out.verdict = CondIdResult::Verdict::Expression;
            out.expr = std::move(r.expr);
            break;
        case IdResult::Verdict::Zero:
            out.verdict = CondIdResult::Verdict::Zero;
            break;
        case IdResult::Verdict::Fail:
            out.verdict = CondIdResult::Verdict::Fail;
            out.witness = std::move(r.witness);
            break;
    }
    return out;
}

inline CondIdResult idc_star_impl(const CausalDiagram& g, const CfConjunction& gamma_in,
                                  const CfConjunction& delta_in, IdCtx ctx) {
    if (ctx.depth > 100) throw std::logic_error("identification recursion too deep");
    CfConjunction gamma = canonicalize(gamma_in);
    CfConjunction delta = canonicalize(delta_in);
    if (delta.empty()) {
        ctx.log("IDC*: empty conditioning set, delegate");
        return from_id(id_star(g, gamma, ctx.trace));
    }

    // line 1
    IdResult delta_id = id_star(g, delta, nullptr);
    if (delta_id.verdict == IdResult::Verdict::Zero) {
        ctx.log("IDC* line 1: conditioning event has probability zero, UNDEFINED");
        CondIdResult out;
        out.verdict = CondIdResult::Verdict::Undefined;
        return out;
    }

    // lines 2-3
    std::vector<CfEvent> combined = gamma.events;
    combined.insert(combined.end(), delta.events.begin(), delta.events.end());
    MakeCgResult mc = make_cg(g, make_conjunction(std::move(combined)));
    if (mc.inconsistent) {
        ctx.log("IDC* line 3: joint conjunction inconsistent, return 0");
        CondIdResult out;
        out.verdict = CondIdResult::Verdict::Zero;
        return out;
    }
    // Contradictory self-subscripted events also force probability zero.
    if (!classify_self_events(gamma).contradictions.empty() ||
        !classify_self_events(delta).contradictions.empty()) {
        CondIdResult out;
        out.verdict = CondIdResult::Verdict::Zero;
        return out;
    }

    const CounterfactualGraph& cg = mc.graph;
    std::vector<std::pair<CfEvent, std::string>> gp, dp;  // rewritten γ', δ'
    for (const auto& e : delta.events)
        if (auto r = rewrite_event(cg, e)) dp.push_back(*r);
    for (const auto& e : gamma.events) {
        auto r = rewrite_event(cg, e);
        if (!r) continue;
        bool in_delta = false;
        for (const auto& d : dp)
            if (d.first == r->first) { in_delta = true; break; }
        if (!in_delta) gp.push_back(*r);
    }
    {
        // dedup after rewriting
        auto squash = [](std::vector<std::pair<CfEvent, std::string>>& v) {
            std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
                return a.first < b.first;
            });
            v.erase(std::unique(v.begin(), v.end(),
                                [](const auto& a, const auto& b) { return a.first == b.first; }),
                    v.end());
        };
        squash(gp);
        squash(dp);
    }
    if (gp.empty()) {
        ctx.log("IDC*: conjunction implied by conditioning set, return 1");
        CondIdResult out;
        out.verdict = CondIdResult::Verdict::Expression;
        out.expr = make_const(1);
        return out;
    }

    // line 4: a conditioning event d-separated from γ' (given the rest of δ')
    // once its outgoing edges are cut acts as an intervention; move it into
    // the subscripts of its descendants and recurse.
    CausalDiagram rp = cg.random_part();
    for (std::size_t ci = 0; ci < dp.size(); ++ci) {
        const auto& [dev, dnode] = dp[ci];
        VarSet z;
        for (std::size_t j = 0; j < dp.size(); ++j)
            if (j != ci) z.insert(dp[j].second);
        VarSet b;
        for (const auto& [ge, gn] : gp)
            if (gn != dnode && !z.count(gn)) b.insert(gn);
        if (!b.empty() && !d_separated(cut_outgoing(rp, {dnode}), {dnode}, b, z)) continue;

        VarSet desc = descendants(rp, {dnode});
        auto move_into = [&](const CfEvent& e, const std::string& node,
                             std::optional<CfEvent>& slot) {
            if (!desc.count(node) || node == dnode) {
                slot = e;
                return true;
            }
            CfEvent ne = e;
            auto it = ne.var.sub.find(dev.var.base);
            if (it != ne.var.sub.end() && !(it->second == dev.value)) return false;
            ne.var.sub[dev.var.base] = dev.value;
            slot = std::move(ne);
            return true;
        };
        std::vector<CfEvent> ng, nd;
        bool ok = true;
        for (const auto& [ge, gn] : gp) {
            std::optional<CfEvent> s;
            if (!move_into(ge, gn, s)) { ok = false; break; }
            ng.push_back(*s);
        }
        for (std::size_t j = 0; ok && j < dp.size(); ++j) {
            if (j == ci) continue;
            std::optional<CfEvent> s;
            if (!move_into(dp[j].first, dp[j].second, s)) { ok = false; break; }
            nd.push_back(*s);
        }
        if (!ok) continue;
        ctx.log("IDC* line 4: " + render(dev) + " separated from the outcome events; " +
                "moving it into the subscripts");
        return idc_star_impl(g, make_conjunction(std::move(ng)), make_conjunction(std::move(nd)),
                             ctx.deeper());
    }

    // line 5: P' / P'(δ)
    std::vector<CfEvent> all;
    for (const auto& [e, n] : gp) all.push_back(e);
    for (const auto& [e, n] : dp) all.push_back(e);
    CfConjunction joint = make_conjunction(std::move(all));
    ctx.log("IDC* line 5: identify joint " + render(joint) + " and normalize");
    IdResult pr = id_star(g, joint, ctx.trace);
    if (pr.verdict == IdResult::Verdict::Fail) return from_id(std::move(pr));
    if (pr.verdict == IdResult::Verdict::Zero) {
        CondIdResult out;
        out.verdict = CondIdResult::Verdict::Zero;
        return out;
    }

    // Denominator: sum the γ-only value symbols out of P'. Substitution is
    // keyed by (variable, value), so it is sound only when every occurrence
    // of that pair in P' stems from the γ event itself. If the pair also
    // shows up in a query subscript or another event, identify the original
    // δ separately instead.
    bool ambiguous = false;
    {
        std::set<std::pair<Variable, Value>> elsewhere;
        for (const auto& [v, val] : sub_of(gamma)) elsewhere.insert({v, val});
        for (const auto& [v, val] : sub_of(delta)) elsewhere.insert({v, val});
        for (const auto& [e, n] : dp) elsewhere.insert({e.var.base, e.value});
        std::set<std::pair<Variable, Value>> taken;
        for (const auto& [e, n] : gp) {
            std::pair<Variable, Value> key{e.var.base, e.value};
            if (elsewhere.count(key) || !taken.insert(key).second) ambiguous = true;
        }
    }
    ExprPtr den;
    if (!ambiguous) {
        den = pr.expr;
        std::vector<BoundSym> fresh_bound;
        for (const auto& [e, n] : gp) {
            Value s = ctx.fresh();
            den = substitute(den, e.var.base, e.value, s);
            fresh_bound.push_back({s.token, e.var.base});
        }
        den = make_sum(std::move(fresh_bound), std::move(den));
    } else {
        ctx.log("IDC* line 5: marginalization key ambiguous, identifying the "
                "conditioning event separately");
        if (delta_id.verdict == IdResult::Verdict::Fail) return from_id(std::move(delta_id));
        den = delta_id.expr;
    }

    CondIdResult out;
    out.verdict = CondIdResult::Verdict::Expression;
    out.expr = canonicalize(make_ratio(pr.expr, std::move(den)));
    validate(out.expr);
    return out;
}

}  // namespace detail

inline CondIdResult idc_star(const CausalDiagram& g, const CfConjunction& gamma,
                             const CfConjunction& delta,
                             std::vector<std::string>* trace = nullptr) {
    int counter = 0;
    try {
        return detail::idc_star_impl(g, gamma, delta, detail::IdCtx{&counter, trace});
    } catch (const detail::IdFail& f) {
        CondIdResult out;
        out.verdict = CondIdResult::Verdict::Fail;
        out.witness = f.witness;
        return out;
    }
}

inline CondIdResult identify(const CausalDiagram& g, const Query& q,
                             std::vector<std::string>* trace = nullptr) {
    return idc_star(g, q.gamma, q.delta, trace);
}

}  // namespace cfid
