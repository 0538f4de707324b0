#pragma once

#include <cassert>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cfid/events.hpp"
#include "cfid/graph.hpp"

namespace cfid {

enum class NodeStatus { Free, Fixed, Observed };

struct CfNode {
    Variable base;
    NodeStatus status = NodeStatus::Free;
    std::optional<Value> value;  // set for Fixed and Observed
    Intervention subscript;      // recomputed minimal subscript (empty for Fixed)
};

// Merged parallel-worlds graph. Node names encode base + minimal subscript,
// e.g. "Y[X=x0]"; fixed nodes are named "do:X=x0" and shared across worlds.
struct CounterfactualGraph {
    CausalDiagram admg;                        // includes fixed nodes
    std::map<std::string, CfNode> info;        // by node name
    std::map<std::string, std::string> merge_map;  // pw copy id -> node name

    VarSet nonfixed_nodes() const {
        VarSet out;
        for (const auto& [n, i] : info)
            if (i.status != NodeStatus::Fixed) out.insert(n);
        return out;
    }

    // Subgraph over non-fixed nodes, for d-separation and c-components.
    CausalDiagram random_part() const {
        VarSet keep = nonfixed_nodes();
        std::set<std::pair<Variable, Variable>> dir, bi;
        for (const auto& e : admg.directed())
            if (keep.count(e.first) && keep.count(e.second)) dir.insert(e);
        for (const auto& e : admg.bidirected())
            if (keep.count(e.first) && keep.count(e.second)) bi.insert(e);
        return CausalDiagram(keep, dir, bi);
    }
};

struct MakeCgResult {
    bool inconsistent = false;
    CounterfactualGraph graph;
    CfConjunction rewritten;
    std::map<CfEvent, std::string> event_node;  // rewritten event -> node name
};

namespace detail {

inline std::string world_key(const Intervention& iv) { return render(iv); }

inline std::string pw_id(const Variable& base, const std::string& wkey) {
    return base + "@" + wkey;
}

inline std::string fixed_id(const Variable& base, const Value& v) {
    return "do:" + base + "=" + v.token;
}

// Working state of the merge pass. Classes are tracked with union-find;
// each class keeps one chosen parent per base variable.
struct MergeState {
    std::map<std::string, std::string> uf;                    // id -> parent id
    std::map<std::string, std::map<Variable, std::string>> parent;  // rep -> base -> id
    std::map<std::string, std::optional<Value>> value;        // rep -> observed value
    std::map<std::string, std::string> min_world;             // rep -> smallest world key
    std::map<std::string, Value> fixed_val;                   // fixed id -> value
    std::map<std::string, Variable> base_of;                  // any id -> base variable

    bool is_fixed(const std::string& id) const { return fixed_val.count(id) > 0; }

    std::string find(std::string id) {
        if (is_fixed(id)) return id;
        while (uf.at(id) != id) {
            uf[id] = uf[uf[id]];
            id = uf[id];
        }
        return id;
    }

    std::optional<Value> value_of(const std::string& rep) const {
        auto f = fixed_val.find(rep);
        if (f != fixed_val.end()) return f->second;
        auto v = value.find(rep);
        return v == value.end() ? std::nullopt : v->second;
    }
};

}  // namespace detail

// One copy of the diagram per world mentioned in the conjunction (plus any
// extra worlds), all copies sharing their exogenous parents: copies of one
// base variable are pairwise bidirected, and every bidirected pair of the
// diagram is bidirected across all world combinations of non-fixed copies.
struct PwGraph {
    std::vector<Intervention> worlds;            // sorted by key; may include {}
    std::map<std::string, CfNode> nodes;         // pw id -> node (subscript = world)
    std::set<std::pair<std::string, std::string>> directed;
    std::set<std::pair<std::string, std::string>> bidirected;
    bool inconsistent = false;                   // conflicting observations on one copy
};

inline PwGraph parallel_worlds(const CausalDiagram& g, const CfConjunction& q,
                               const std::vector<Intervention>& extra_worlds = {}) {
    for (const auto& e : q.events) {
        if (!g.has_node(e.var.base))
            throw std::invalid_argument("unknown variable: " + e.var.base);
        for (const auto& [v, val] : e.var.sub)
            if (!g.has_node(v))
                throw std::invalid_argument("unknown variable in subscript: " + v);
    }

    std::map<std::string, Intervention> worlds;
    for (const auto& e : q.events) worlds[detail::world_key(e.var.sub)] = e.var.sub;
    for (const auto& w : extra_worlds) worlds[detail::world_key(w)] = w;

    PwGraph pw;
    for (const auto& [k, w] : worlds) pw.worlds.push_back(w);

    for (const auto& [wkey, w] : worlds) {
        for (const auto& v : g.nodes()) {
            auto it = w.find(v);
            CfNode n;
            n.base = v;
            if (it != w.end()) {
                n.status = NodeStatus::Fixed;
                n.value = it->second;
                pw.nodes[detail::fixed_id(v, it->second)] = n;
            } else {
                n.subscript = w;
                pw.nodes[detail::pw_id(v, wkey)] = n;
            }
        }
        for (const auto& [a, b] : g.directed()) {
            if (w.count(b)) continue;  // no edges into fixed nodes
            std::string from = w.count(a) ? detail::fixed_id(a, w.at(a)) : detail::pw_id(a, wkey);
            pw.directed.insert({from, detail::pw_id(b, wkey)});
        }
    }

    auto nonfixed = [&](const Variable& v, const Intervention& w) { return w.count(v) == 0; };
    std::vector<std::pair<std::string, Intervention>> wl(worlds.begin(), worlds.end());
    for (std::size_t i = 0; i < wl.size(); ++i) {
        for (std::size_t j = i + 1; j < wl.size(); ++j) {
            for (const auto& v : g.nodes())
                if (nonfixed(v, wl[i].second) && nonfixed(v, wl[j].second))
                    pw.bidirected.insert(CausalDiagram::ordered(
                        detail::pw_id(v, wl[i].first), detail::pw_id(v, wl[j].first)));
        }
        for (std::size_t j = 0; j < wl.size(); ++j) {
            for (const auto& [a, b] : g.bidirected())
                if (nonfixed(a, wl[i].second) && nonfixed(b, wl[j].second))
                    pw.bidirected.insert(CausalDiagram::ordered(
                        detail::pw_id(a, wl[i].first), detail::pw_id(b, wl[j].first)));
        }
    }

    // Observation labels from the conjunction. An event on a fixed node is a
    // tautology or a contradiction; contradictions surface as inconsistency.
    for (const auto& e : q.events) {
        const auto& w = e.var.sub;
        if (w.count(e.var.base)) {
            if (!(w.at(e.var.base) == e.value)) pw.inconsistent = true;
            continue;
        }
        auto& n = pw.nodes.at(detail::pw_id(e.var.base, detail::world_key(w)));
        if (n.value && !(*n.value == e.value)) pw.inconsistent = true;
        n.status = NodeStatus::Observed;
        n.value = e.value;
    }
    return pw;
}

// Merge test on two classes of the same base variable: every corresponding
// parent is either already merged or carries the same value (by intervention
// or observation).
inline bool parents_coincide(detail::MergeState& st, const CausalDiagram& g,
                           const Variable& base, const std::string& ra,
                           const std::string& rb) {
    for (const auto& p : g.parents(base)) {
        std::string pa = st.find(st.parent.at(ra).at(p));
        std::string pb = st.find(st.parent.at(rb).at(p));
        if (pa == pb) continue;
        auto va = st.value_of(pa);
        auto vb = st.value_of(pb);
        if (va && vb && *va == *vb) continue;
        return false;
    }
    return true;
}

// Full make-cg: parallel worlds, copy merging in topological order,
// conjunction rewriting with minimal subscripts, ancestral restriction.
inline MakeCgResult make_cg(const CausalDiagram& g, const CfConjunction& q_in,
                            const std::vector<Intervention>& extra_worlds = {},
                            std::vector<std::string>* log = nullptr) {
    CfConjunction q = canonicalize(q_in);
    PwGraph pw = parallel_worlds(g, q, extra_worlds);
    MakeCgResult out;
    if (pw.inconsistent) {
        if (log) log->push_back("inconsistent: conflicting values on a single node");
        out.inconsistent = true;
        return out;
    }

    detail::MergeState st;
    std::vector<std::string> wkeys;
    for (const auto& w : pw.worlds) wkeys.push_back(detail::world_key(w));
    for (const auto& [id, n] : pw.nodes) {
        st.base_of[id] = n.base;
        if (n.status == NodeStatus::Fixed) {
            st.fixed_val[id] = *n.value;
            continue;
        }
        st.uf[id] = id;
        st.min_world[id] = detail::world_key(n.subscript);
        if (n.status == NodeStatus::Observed) st.value[id] = *n.value;
        std::map<Variable, std::string> par;
        for (const auto& p : g.parents(n.base)) {
            auto it = n.subscript.find(p);
            par[p] = (it != n.subscript.end())
                         ? detail::fixed_id(p, it->second)
                         : detail::pw_id(p, detail::world_key(n.subscript));
        }
        st.parent[id] = std::move(par);
    }

    // Deterministic parent choice: a random variable beats a constant
    // of the same value (it carries the consistency information); among
    // random copies, the one from the smallest world wins.
    auto pick_parent = [&](const std::string& a, const std::string& b) {
        if (st.is_fixed(a) != st.is_fixed(b)) return st.is_fixed(a) ? b : a;
        if (st.is_fixed(a)) return std::min(a, b);
        auto wa = st.min_world.at(a), wb = st.min_world.at(b);
        if (wa != wb) return wa < wb ? a : b;
        return std::min(a, b);
    };

    for (const auto& base : topological_order(g)) {
        for (std::size_t i = 0; i < wkeys.size(); ++i) {
            for (std::size_t j = i + 1; j < wkeys.size(); ++j) {
                if (pw.worlds[i].count(base) || pw.worlds[j].count(base)) continue;
                std::string ra = st.find(detail::pw_id(base, wkeys[i]));
                std::string rb = st.find(detail::pw_id(base, wkeys[j]));
                if (ra == rb) continue;
                if (!parents_coincide(st, g, base, ra, rb)) continue;
                auto va = st.value_of(ra);
                auto vb = st.value_of(rb);
                if (va && vb && !(*va == *vb)) {
                    if (log)
                        log->push_back("inconsistent: " + base + " copies merge with values " +
                                       va->token + " vs " + vb->token);
                    out.inconsistent = true;
                    return out;
                }
                std::string keep = pick_parent(ra, rb);
                std::string drop = (keep == ra) ? rb : ra;
                st.uf[drop] = keep;
                if (!st.value_of(keep) && st.value_of(drop)) st.value[keep] = *st.value_of(drop);
                auto& pk = st.parent[keep];
                auto& pd = st.parent[drop];
                for (auto& [p, id] : pk) {
                    std::string cand = st.find(pd.at(p));
                    std::string cur = st.find(id);
                    if (cand != cur) id = pick_parent(cur, cand);
                }
                st.min_world[keep] = std::min(st.min_world[keep], st.min_world[drop]);
                if (log)
                    log->push_back("merge " + drop + " into " + keep +
                                   " (parents shared or equal-valued)");
            }
        }
    }

    // Assemble the merged graph over class representatives plus the fixed
    // nodes still referenced as parents.
    std::set<std::string> reps;
    for (const auto& [id, r] : st.uf) reps.insert(st.find(id));

    std::set<std::pair<std::string, std::string>> dir;
    std::set<std::string> fixed_used;
    for (const auto& rep : reps)
        for (const auto& [p, id] : st.parent.at(rep)) {
            std::string pr = st.find(id);
            dir.insert({pr, rep});
            if (st.is_fixed(pr)) fixed_used.insert(pr);
        }
    std::set<std::pair<std::string, std::string>> bi;
    for (const auto& [a, b] : pw.bidirected) {
        std::string ra = st.find(a), rb = st.find(b);
        if (ra != rb) bi.insert(CausalDiagram::ordered(ra, rb));
    }

    VarSet all_ids(reps.begin(), reps.end());
    all_ids.insert(fixed_used.begin(), fixed_used.end());
    CausalDiagram merged(all_ids, dir, bi);

    // Rewrite the conjunction onto representatives.
    std::map<std::string, Value> ev_value;  // rep -> value (events only)
    std::vector<std::string> ev_nodes;
    for (const auto& e : q.events) {
        if (e.var.sub.count(e.var.base)) continue;  // tautology on a fixed node
        std::string rep = st.find(detail::pw_id(e.var.base, detail::world_key(e.var.sub)));
        ev_value[rep] = *st.value_of(rep);
        ev_nodes.push_back(rep);
    }

    VarSet gamma_nodes(ev_nodes.begin(), ev_nodes.end());
    VarSet keep = ancestors(merged, gamma_nodes);

    // Minimal subscript per surviving class: its fixed ancestors.
    std::map<std::string, Intervention> subs;
    for (const auto& rep : keep) {
        if (st.is_fixed(rep)) continue;
        Intervention s;
        for (const auto& an : ancestors(merged, {rep}))
            if (st.is_fixed(an)) {
                const Variable& b = st.base_of.at(an);
                const Value& v = st.fixed_val.at(an);
                auto it = s.find(b);
                if (it != s.end() && !(it->second == v))
                    throw std::logic_error("conflicting fixed ancestors for " + rep);
                s[b] = v;
            }
        subs[rep] = std::move(s);
    }

    // Display names: base plus minimal subscript.
    std::map<std::string, std::string> name_of;
    std::set<std::string> taken;
    for (const auto& rep : keep) {
        std::string name;
        if (st.is_fixed(rep)) {
            name = st.base_of.at(rep) + "=" + st.fixed_val.at(rep).token;
        } else {
            name = st.base_of.at(rep);
            if (!subs.at(rep).empty()) name += "[" + render(subs.at(rep)) + "]";
        }
        while (!taken.insert(name).second) name += "'";
        name_of[rep] = name;
    }

    VarSet final_nodes;
    std::set<std::pair<std::string, std::string>> fdir, fbi;
    for (const auto& rep : keep) final_nodes.insert(name_of.at(rep));
    for (const auto& [a, b] : dir)
        if (keep.count(a) && keep.count(b)) fdir.insert({name_of.at(a), name_of.at(b)});
    for (const auto& [a, b] : bi)
        if (keep.count(a) && keep.count(b))
            fbi.insert(CausalDiagram::ordered(name_of.at(a), name_of.at(b)));

    out.graph.admg = CausalDiagram(final_nodes, fdir, fbi);
    for (const auto& rep : keep) {
        CfNode n;
        n.base = st.base_of.at(rep);
        if (st.is_fixed(rep)) {
            n.status = NodeStatus::Fixed;
            n.value = st.fixed_val.at(rep);
        } else {
            n.subscript = subs.at(rep);
            auto v = st.value_of(rep);
            if (ev_value.count(rep)) {
                n.status = NodeStatus::Observed;
                n.value = ev_value.at(rep);
            } else if (v) {
                n.status = NodeStatus::Observed;
                n.value = v;
            }
        }
        out.graph.info[name_of.at(rep)] = std::move(n);
    }
    for (const auto& [id, r] : st.uf) {
        std::string rep = st.find(id);
        if (keep.count(rep)) out.graph.merge_map[id] = name_of.at(rep);
    }
    for (const auto& [id, v] : st.fixed_val)
        if (keep.count(id)) out.graph.merge_map[id] = name_of.at(id);

    std::vector<CfEvent> rew;
    for (const auto& rep : ev_nodes) {
        CfEvent e{CfVariable{st.base_of.at(rep), subs.at(rep)}, ev_value.at(rep)};
        out.event_node[e] = name_of.at(rep);
        rew.push_back(std::move(e));
    }
    out.rewritten = make_conjunction(std::move(rew));
    if (log) {
        log->push_back("counterfactual graph nodes: " +
                       [&] {
                           std::string s;
                           for (const auto& n : final_nodes) s += (s.empty() ? "" : ", ") + n;
                           return s;
                       }());
        log->push_back("rewritten conjunction: " + render(out.rewritten));
    }
    return out;
}

}  // namespace cfid
