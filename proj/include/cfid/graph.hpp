#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cfid {

using Variable = std::string;
using VarSet = std::set<Variable>;

// Acyclic directed mixed graph: directed edges for functional dependence,
// bidirected edges for a shared unobserved parent.
class CausalDiagram {
public:
    CausalDiagram() = default;

    CausalDiagram(VarSet nodes,
                  std::set<std::pair<Variable, Variable>> directed,
                  std::set<std::pair<Variable, Variable>> bidirected)
        : nodes_(std::move(nodes)) {
        for (const auto& [a, b] : directed) {
            require_node(a);
            require_node(b);
            if (a == b) throw std::invalid_argument("self-loop on " + a);
            directed_.insert({a, b});
        }
        for (const auto& [a, b] : bidirected) {
            require_node(a);
            require_node(b);
            if (a == b) throw std::invalid_argument("bidirected self-loop on " + a);
            bidirected_.insert(ordered(a, b));
        }
        check_acyclic();
    }

    const VarSet& nodes() const { return nodes_; }
    const std::set<std::pair<Variable, Variable>>& directed() const { return directed_; }
    const std::set<std::pair<Variable, Variable>>& bidirected() const { return bidirected_; }

    bool has_node(const Variable& v) const { return nodes_.count(v) > 0; }
    bool has_directed(const Variable& a, const Variable& b) const {
        return directed_.count({a, b}) > 0;
    }
    bool has_bidirected(const Variable& a, const Variable& b) const {
        return bidirected_.count(ordered(a, b)) > 0;
    }

    VarSet parents(const Variable& v) const {
        VarSet out;
        for (const auto& [a, b] : directed_)
            if (b == v) out.insert(a);
        return out;
    }

    VarSet children(const Variable& v) const {
        VarSet out;
        for (const auto& [a, b] : directed_)
            if (a == v) out.insert(b);
        return out;
    }

    VarSet siblings(const Variable& v) const {
        VarSet out;
        for (const auto& [a, b] : bidirected_) {
            if (a == v) out.insert(b);
            if (b == v) out.insert(a);
        }
        return out;
    }

    static std::pair<Variable, Variable> ordered(const Variable& a, const Variable& b) {
        return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    }

private:
    void require_node(const Variable& v) const {
        if (!has_node(v)) throw std::invalid_argument("unknown variable: " + v);
    }

    void check_acyclic() const {
        // Kahn's algorithm; leftover nodes mean a directed cycle.
        std::map<Variable, int> indeg;
        for (const auto& v : nodes_) indeg[v] = 0;
        for (const auto& [a, b] : directed_) indeg[b]++;
        std::vector<Variable> queue;
        for (const auto& [v, d] : indeg)
            if (d == 0) queue.push_back(v);
        std::size_t seen = 0;
        while (!queue.empty()) {
            Variable v = queue.back();
            queue.pop_back();
            seen++;
            for (const auto& [a, b] : directed_)
                if (a == v && --indeg[b] == 0) queue.push_back(b);
        }
        if (seen != nodes_.size()) {
            std::string cyc;
            for (const auto& [v, d] : indeg)
                if (d > 0) cyc += (cyc.empty() ? "" : ", ") + v;
            throw std::invalid_argument("directed cycle among: " + cyc);
        }
    }

    VarSet nodes_;
    std::set<std::pair<Variable, Variable>> directed_;
    std::set<std::pair<Variable, Variable>> bidirected_;
};

// Reflexive ancestor set along directed edges only.
inline VarSet ancestors(const CausalDiagram& g, const VarSet& seed) {
    for (const auto& v : seed)
        if (!g.has_node(v)) throw std::invalid_argument("unknown variable: " + v);
    VarSet out = seed;
    std::vector<Variable> stack(seed.begin(), seed.end());
    while (!stack.empty()) {
        Variable v = stack.back();
        stack.pop_back();
        for (const auto& p : g.parents(v))
            if (out.insert(p).second) stack.push_back(p);
    }
    return out;
}

inline VarSet descendants(const CausalDiagram& g, const VarSet& seed) {
    for (const auto& v : seed)
        if (!g.has_node(v)) throw std::invalid_argument("unknown variable: " + v);
    VarSet out = seed;
    std::vector<Variable> stack(seed.begin(), seed.end());
    while (!stack.empty()) {
        Variable v = stack.back();
        stack.pop_back();
        for (const auto& c : g.children(v))
            if (out.insert(c).second) stack.push_back(c);
    }
    return out;
}

// Connected components of the bidirected skeleton, as a sorted partition.
inline std::vector<VarSet> c_components(const CausalDiagram& g) {
    std::vector<VarSet> blocks;
    VarSet done;
    for (const auto& start : g.nodes()) {
        if (done.count(start)) continue;
        VarSet block{start};
        std::vector<Variable> stack{start};
        while (!stack.empty()) {
            Variable v = stack.back();
            stack.pop_back();
            for (const auto& s : g.siblings(v))
                if (block.insert(s).second) stack.push_back(s);
        }
        done.insert(block.begin(), block.end());
        blocks.push_back(std::move(block));
    }
    return blocks;
}

// Copy with directed edges out of S removed. Bidirected edges stay.
inline CausalDiagram cut_outgoing(const CausalDiagram& g, const VarSet& s) {
    for (const auto& v : s)
        if (!g.has_node(v)) throw std::invalid_argument("unknown variable: " + v);
    std::set<std::pair<Variable, Variable>> dir;
    for (const auto& e : g.directed())
        if (!s.count(e.first)) dir.insert(e);
    return CausalDiagram(g.nodes(), dir, g.bidirected());
}

// Copy with directed edges into S and bidirected edges at S removed;
// an intervened node keeps no exogenous parent.
inline CausalDiagram cut_incoming(const CausalDiagram& g, const VarSet& s) {
    for (const auto& v : s)
        if (!g.has_node(v)) throw std::invalid_argument("unknown variable: " + v);
    std::set<std::pair<Variable, Variable>> dir, bi;
    for (const auto& e : g.directed())
        if (!s.count(e.second)) dir.insert(e);
    for (const auto& e : g.bidirected())
        if (!s.count(e.first) && !s.count(e.second)) bi.insert(e);
    return CausalDiagram(g.nodes(), dir, bi);
}

// Deterministic topological order: among ready nodes, smallest name first.
inline std::vector<Variable> topological_order(const CausalDiagram& g) {
    std::map<Variable, int> indeg;
    for (const auto& v : g.nodes()) indeg[v] = 0;
    for (const auto& [a, b] : g.directed()) indeg[b]++;
    std::set<Variable> ready;
    for (const auto& [v, d] : indeg)
        if (d == 0) ready.insert(v);
    std::vector<Variable> order;
    while (!ready.empty()) {
        Variable v = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(v);
        for (const auto& c : g.children(v))
            if (--indeg[c] == 0) ready.insert(c);
    }
    return order;
}

// d-separation with bidirected edges read as latent forks (arrowheads at
// both ends). Ball-passing reachability over (node, entry-mark) states.
inline bool d_separated(const CausalDiagram& g, const VarSet& a, const VarSet& b,
                        const VarSet& z) {
    for (const auto& v : a)
        if (!g.has_node(v)) throw std::invalid_argument("unknown variable: " + v);
    for (const auto& v : b)
        if (!g.has_node(v)) throw std::invalid_argument("unknown variable: " + v);
    for (const auto& v : z)
        if (!g.has_node(v)) throw std::invalid_argument("unknown variable: " + v);
    for (const auto& v : z)
        if (a.count(v) || b.count(v))
            throw std::invalid_argument("conditioning set overlaps endpoints: " + v);

    VarSet an_z = z;
    {
        // collider openness needs An(Z)
        VarSet tmp = ancestors(g, z.empty() ? VarSet{} : z);
        an_z = tmp;
    }

    // Edge ends: true = arrowhead at that endpoint.
    struct Hop { Variable to; bool arrow_at_from; bool arrow_at_to; };
    std::map<Variable, std::vector<Hop>> hops;
    for (const auto& [p, c] : g.directed()) {
        hops[p].push_back({c, false, true});
        hops[c].push_back({p, true, false});
    }
    for (const auto& [x, y] : g.bidirected()) {
        hops[x].push_back({y, true, true});
        hops[y].push_back({x, true, true});
    }

    // State: (node, entered-with-arrowhead-at-node).
    std::set<std::pair<Variable, bool>> visited;
    std::vector<std::pair<Variable, bool>> stack;
    for (const auto& s : a) {
        // leaving the source uses any edge; model as "entered via tail"
        stack.push_back({s, false});
        stack.push_back({s, true});
    }
    while (!stack.empty()) {
        auto [v, in_arrow] = stack.back();
        stack.pop_back();
        if (!visited.insert({v, in_arrow}).second) continue;
        if (b.count(v) && !a.count(v)) return false;
        for (const auto& h : hops[v]) {
            bool collider = in_arrow && h.arrow_at_from;
            bool pass;
            if (a.count(v)) {
                pass = true;  // sources emit freely
            } else if (collider) {
                pass = an_z.count(v) > 0;
            } else {
                pass = z.count(v) == 0;
            }
            if (pass && !visited.count({h.to, h.arrow_at_to}))
                stack.push_back({h.to, h.arrow_at_to});
        }
    }
    return true;
}

}  // namespace cfid
