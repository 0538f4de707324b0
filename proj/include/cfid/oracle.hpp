#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/rational.hpp>
#include <json.hpp>

#include "cfid/events.hpp"
#include "cfid/expr.hpp"
#include "cfid/graph.hpp"

namespace cfid {

using Rat = boost::rational<long long>;

constexpr long long kEnumerationBudget = 1LL << 20;

struct ExoVar {
    std::string name;
    int card = 2;
    std::vector<Rat> probs;  // card entries, sum 1
};

// Tabular mechanism: output index addressed mixed-radix by parent values then
// attached exogenous values, first coordinate most significant.
struct ScmFunction {
    std::vector<Variable> parents;
    std::vector<std::string> exo;
    std::vector<int> table;
};

struct DiscreteScm {
    CausalDiagram diagram;
    std::map<Variable, std::vector<std::string>> domains;
    std::vector<ExoVar> exo;
    std::map<Variable, ScmFunction> fn;

    long long exo_states() const {
        long long n = 1;
        for (const auto& e : exo) {
            n *= e.card;
            if (n > kEnumerationBudget)
                throw std::invalid_argument("enumeration budget exceeded: more than " +
                                            std::to_string(kEnumerationBudget) +
                                            " exogenous states");
        }
        return n;
    }

    int exo_index(const std::string& name) const {
        for (std::size_t i = 0; i < exo.size(); ++i)
            if (exo[i].name == name) return static_cast<int>(i);
        throw std::invalid_argument("unknown exogenous variable: " + name);
    }

    int value_index(const Variable& v, const std::string& token) const {
        auto it = domains.find(v);
        if (it == domains.end()) throw std::invalid_argument("no domain for " + v);
        for (std::size_t i = 0; i < it->second.size(); ++i)
            if (it->second[i] == token) return static_cast<int>(i);
        throw std::invalid_argument("value " + token + " not in the domain of " + v);
    }
};

namespace detail {

template <typename T>
T scalar_of(const Rat& r);
template <>
inline Rat scalar_of<Rat>(const Rat& r) { return r; }
template <>
inline double scalar_of<double>(const Rat& r) { return boost::rational_cast<double>(r); }

// Values of all observables at one exogenous state under do(fix).
inline void eval_submodel(const DiscreteScm& m, const std::vector<Variable>& topo,
                          const std::map<Variable, int>& fix, const std::vector<int>& u,
                          std::map<Variable, int>& out) {
    for (const auto& v : topo) {
        auto fit = fix.find(v);
        if (fit != fix.end()) {
            out[v] = fit->second;
            continue;
        }
        const ScmFunction& f = m.fn.at(v);
        std::size_t idx = 0;
        for (const auto& p : f.parents) idx = idx * m.domains.at(p).size() + out.at(p);
        for (const auto& e : f.exo) idx = idx * m.exo[m.exo_index(e)].card + u[m.exo_index(e)];
        out[v] = f.table.at(idx);
    }
}

struct ExoIter {
    const DiscreteScm& m;
    std::vector<int> u;
    bool done = false;

    explicit ExoIter(const DiscreteScm& mm) : m(mm), u(mm.exo.size(), 0) {
        m.exo_states();  // budget check
        done = false;
    }
    Rat prob() const {
        Rat p(1);
        for (std::size_t i = 0; i < u.size(); ++i) p *= m.exo[i].probs[u[i]];
        return p;
    }
    void next() {
        for (std::size_t i = u.size(); i-- > 0;) {
            if (++u[i] < m.exo[i].card) return;
            u[i] = 0;
        }
        done = true;
    }
};

}  // namespace detail

// P(γ) by full enumeration: sum P(u) over exogenous states where every event
// holds in its own submodel.
template <typename T>
T counterfactual_prob_t(const DiscreteScm& m, const CfConjunction& gamma_in) {
    CfConjunction gamma = canonicalize(gamma_in);
    std::map<std::string, std::map<Variable, int>> world_fix;
    std::vector<std::pair<std::string, std::pair<Variable, int>>> checks;
    for (const auto& e : gamma.events) {
        std::string key = render(e.var.sub);
        auto& fix = world_fix[key];
        for (const auto& [v, val] : e.var.sub) fix[v] = m.value_index(v, val.token);
        checks.push_back({key, {e.var.base, m.value_index(e.var.base, e.value.token)}});
    }
    std::vector<Variable> topo = topological_order(m.diagram);
    T total{};
    std::map<Variable, int> vals;
    for (detail::ExoIter it(m); !it.done; it.next()) {
        bool hold = true;
        for (const auto& [key, fix] : world_fix) {
            detail::eval_submodel(m, topo, fix, it.u, vals);
            for (const auto& [ck, ev] : checks) {
                if (ck != key) continue;
                if (vals.at(ev.first) != ev.second) { hold = false; break; }
            }
            if (!hold) break;
        }
        if (hold) total += detail::scalar_of<T>(it.prob());
    }
    return total;
}

inline double counterfactual_prob(const DiscreteScm& m, const CfConjunction& gamma) {
    return counterfactual_prob_t<double>(m, gamma);
}

template <typename T>
std::optional<T> conditional_counterfactual_prob_t(const DiscreteScm& m,
                                                   const CfConjunction& gamma,
                                                   const CfConjunction& delta) {
    std::vector<CfEvent> joint = gamma.events;
    joint.insert(joint.end(), delta.events.begin(), delta.events.end());
    T den = counterfactual_prob_t<T>(m, delta);
    if (den == T{}) return std::nullopt;
    return counterfactual_prob_t<T>(m, make_conjunction(std::move(joint))) / den;
}

inline std::optional<double> conditional_counterfactual_prob(const DiscreteScm& m,
                                                             const CfConjunction& gamma,
                                                             const CfConjunction& delta) {
    return conditional_counterfactual_prob_t<double>(m, gamma, delta);
}

template <typename T>
struct JointTable {
    std::vector<Variable> vars;
    std::vector<T> p;
};

// Joint distribution of the non-intervened observables under do(iv).
template <typename T>
JointTable<T> interventional_table_t(const DiscreteScm& m,
                                     const std::map<Variable, std::string>& iv) {
    std::map<Variable, int> fix;
    for (const auto& [v, t] : iv) fix[v] = m.value_index(v, t);
    JointTable<T> out;
    for (const auto& v : m.diagram.nodes())
        if (!fix.count(v)) out.vars.push_back(v);
    std::size_t cells = 1;
    for (const auto& v : out.vars) cells *= m.domains.at(v).size();
    out.p.assign(cells, T{});
    std::vector<Variable> topo = topological_order(m.diagram);
    std::map<Variable, int> vals;
    for (detail::ExoIter it(m); !it.done; it.next()) {
        detail::eval_submodel(m, topo, fix, it.u, vals);
        std::size_t idx = 0;
        for (const auto& v : out.vars) idx = idx * m.domains.at(v).size() + vals.at(v);
        out.p[idx] += detail::scalar_of<T>(it.prob());
    }
    return out;
}

inline PTable interventional_table(const DiscreteScm& m,
                                   const std::map<Variable, std::string>& iv) {
    JointTable<double> t = interventional_table_t<double>(m, iv);
    return PTable{std::move(t.vars), std::move(t.p)};
}

// Lazy view of P₊: tables are enumerated when first requested.
inline PStarFamily family_view(const DiscreteScm& m) {
    PStarFamily fam;
    fam.domains = m.domains;
    fam.source = [m](const std::map<Variable, std::string>& iv) {
        return interventional_table(m, iv);
    };
    return fam;
}

// Materialize every table over interventions on subsets up to `up_to`
// variables (-1: all subsets), in canonical order.
inline PStarFamily interventional_family(const DiscreteScm& m, int up_to = -1) {
    PStarFamily fam = family_view(m);
    std::vector<Variable> vars(m.diagram.nodes().begin(), m.diagram.nodes().end());
    std::size_t n = vars.size();
    if (n > 20) throw std::invalid_argument("too many variables to materialize the family");
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<Variable> sub;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) sub.push_back(vars[i]);
        if (up_to >= 0 && sub.size() > static_cast<std::size_t>(up_to)) continue;
        std::vector<std::size_t> pos(sub.size(), 0);
        bool more = true;
        while (more) {
            std::map<Variable, std::string> iv;
            for (std::size_t i = 0; i < sub.size(); ++i)
                iv[sub[i]] = m.domains.at(sub[i])[pos[i]];
            fam.table(iv);
            more = false;
            for (std::size_t i = sub.size(); i-- > 0;) {
                if (++pos[i] < m.domains.at(sub[i]).size()) { more = true; break; }
                pos[i] = 0;
            }
        }
    }
    return fam;
}

// --- parity counterexample pair ---------------------------------------------

struct ParityFixture {
    DiscreteScm m1, m2;
    CfConjunction query;
};

// Two binary models on X→Y, X→Z with the bidirected chain Y↔W1↔…↔Wk↔Z.
// Every variable is the parity of its inputs; in the second model Y and Z
// ignore X. The models induce identical experimental families yet disagree
// on P(y_x, w1..wk, z_{x'}). With `positive`, Y also flips with probability
// 1/256 so every experimental table is strictly positive.
inline ParityFixture parity_pair(int k, bool positive = false) {
    if (k < 0) throw std::invalid_argument("k must be nonnegative");
    VarSet nodes{"X", "Y", "Z"};
    std::vector<Variable> ws;
    for (int i = 1; i <= k; ++i) {
        ws.push_back("W" + std::to_string(i));
        nodes.insert(ws.back());
    }
    std::set<std::pair<Variable, Variable>> dir{{"X", "Y"}, {"X", "Z"}};
    std::set<std::pair<Variable, Variable>> bi;
    std::vector<Variable> chain{"Y"};
    chain.insert(chain.end(), ws.begin(), ws.end());
    chain.push_back("Z");
    for (std::size_t i = 0; i + 1 < chain.size(); ++i)
        bi.insert(CausalDiagram::ordered(chain[i], chain[i + 1]));
    CausalDiagram g(nodes, dir, bi);

    DiscreteScm base;
    base.diagram = g;
    for (const auto& v : g.nodes()) base.domains[v] = {"0", "1"};
    base.exo.push_back({"uX", 2, {Rat(1, 2), Rat(1, 2)}});
    std::vector<std::string> edge_exo;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        edge_exo.push_back("uE" + std::to_string(i));
        base.exo.push_back({edge_exo.back(), 2, {Rat(1, 2), Rat(1, 2)}});
    }
    if (positive) base.exo.push_back({"uF", 2, {Rat(255, 256), Rat(1, 256)}});

    auto parity_table = [](int inputs) {
        std::vector<int> t(1u << inputs);
        for (std::size_t i = 0; i < t.size(); ++i) {
            int bits = 0;
            for (int b = 0; b < inputs; ++b) bits ^= (i >> b) & 1;
            t[i] = bits;
        }
        return t;
    };

    base.fn["X"] = {{}, {"uX"}, {0, 1}};
    for (int i = 1; i <= k; ++i)
        base.fn[ws[i - 1]] = {{},
                              {edge_exo[i - 1], edge_exo[i]},
                              parity_table(2)};

    DiscreteScm m1 = base, m2 = base;
    std::vector<std::string> y_exo{edge_exo.front()};
    if (positive) y_exo.push_back("uF");
    m1.fn["Y"] = {{"X"}, y_exo, parity_table(1 + static_cast<int>(y_exo.size()))};
    m1.fn["Z"] = {{"X"}, {edge_exo.back()}, parity_table(2)};
    // In the second model Y and Z have X as a graph parent but ignore it.
    {
        std::vector<int> ty = parity_table(1 + static_cast<int>(y_exo.size()));
        for (std::size_t i = 0; i < ty.size(); ++i) {
            // zero out the X input (most significant coordinate)
            std::size_t half = ty.size() / 2;
            if (i >= half) ty[i] = ty[i - half];
        }
        m2.fn["Y"] = {{"X"}, y_exo, ty};
        std::vector<int> tz = parity_table(2);
        tz[2] = tz[0];
        tz[3] = tz[1];
        m2.fn["Z"] = {{"X"}, {edge_exo.back()}, tz};
    }

    std::vector<CfEvent> ev;
    ev.push_back({CfVariable{"Y", Intervention{{"X", lit("1")}}}, lit("1")});
    for (const auto& w : ws) ev.push_back({CfVariable{w, {}}, lit("0")});
    ev.push_back({CfVariable{"Z", Intervention{{"X", lit("0")}}}, lit("0")});
    return ParityFixture{std::move(m1), std::move(m2), make_conjunction(std::move(ev))};
}

// --- random models ------------------------------------------------------------

// Seeded generator: one exogenous variable per node (cardinality = domain
// size) and one binary one per bidirected edge; probability tables from
// integers 1..16 normalized, function tables uniform.
inline DiscreteScm random_scm(const CausalDiagram& g, std::uint64_t seed,
                              const std::map<Variable, int>& domain_sizes = {}) {
    std::mt19937_64 rng(seed);
    DiscreteScm m;
    m.diagram = g;
    for (const auto& v : g.nodes()) {
        auto it = domain_sizes.find(v);
        int d = it == domain_sizes.end() ? 2 : it->second;
        if (d < 2) throw std::invalid_argument("domain size < 2 for " + v);
        std::string stem = v;
        for (auto& c : stem) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        std::vector<std::string> dom;
        for (int i = 0; i < d; ++i) dom.push_back(stem + std::to_string(i));
        m.domains[v] = std::move(dom);
    }
    auto random_probs = [&](int card) {
        std::vector<long long> w(card);
        long long total = 0;
        for (auto& x : w) {
            x = 1 + static_cast<long long>(rng() % 16);
            total += x;
        }
        std::vector<Rat> p;
        for (auto x : w) p.push_back(Rat(x, total));
        return p;
    };
    std::map<Variable, std::vector<std::string>> attached;
    for (const auto& v : g.nodes()) {
        int card = static_cast<int>(m.domains[v].size());
        m.exo.push_back({"u:" + v, card, random_probs(card)});
        attached[v].push_back("u:" + v);
    }
    for (const auto& [a, b] : g.bidirected()) {
        std::string name = "u:" + a + "<->" + b;
        m.exo.push_back({name, 2, random_probs(2)});
        attached[a].push_back(name);
        attached[b].push_back(name);
    }
    m.exo_states();  // budget check before building tables
    for (const auto& v : g.nodes()) {
        ScmFunction f;
        VarSet ps = g.parents(v);
        f.parents.assign(ps.begin(), ps.end());
        f.exo = attached[v];
        std::size_t rows = 1;
        for (const auto& p : f.parents) rows *= m.domains.at(p).size();
        for (const auto& e : f.exo) rows *= m.exo[m.exo_index(e)].card;
        int card = static_cast<int>(m.domains[v].size());
        f.table.resize(rows);
        for (auto& cell : f.table) cell = static_cast<int>(rng() % card);
        m.fn[v] = std::move(f);
    }
    return m;
}

// --- serialization ------------------------------------------------------------

inline std::string rat_string(const Rat& r) {
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline Rat parse_rat(const std::string& s) {
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return Rat(std::stoll(s), 1);
        return Rat(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
    } catch (const std::exception&) {
        throw std::invalid_argument("bad rational: " + s);
    }
}

inline nlohmann::json scm_to_json(const DiscreteScm& m) {
    using nlohmann::json;
    json g;
    g["nodes"] = json::array();
    for (const auto& v : m.diagram.nodes()) g["nodes"].push_back(v);
    g["directed"] = json::array();
    for (const auto& [a, b] : m.diagram.directed()) g["directed"].push_back({a, b});
    g["bidirected"] = json::array();
    for (const auto& [a, b] : m.diagram.bidirected()) g["bidirected"].push_back({a, b});
    json exo = json::array();
    for (const auto& e : m.exo) {
        json probs = json::array();
        for (const auto& p : e.probs) probs.push_back(rat_string(p));
        exo.push_back({{"name", e.name}, {"card", e.card}, {"probs", probs}});
    }
    json fns = json::object();
    for (const auto& [v, f] : m.fn)
        fns[v] = {{"parents", f.parents}, {"exo", f.exo}, {"table", f.table}};
    return json{{"graph", g}, {"domains", m.domains}, {"exogenous", exo}, {"functions", fns}};
}

inline DiscreteScm scm_from_json(const nlohmann::json& j) {
    DiscreteScm m;
    VarSet nodes;
    std::set<std::pair<Variable, Variable>> dir, bi;
    for (const auto& v : j.at("graph").at("nodes")) nodes.insert(v.get<std::string>());
    for (const auto& e : j.at("graph").at("directed"))
        dir.insert({e.at(0).get<std::string>(), e.at(1).get<std::string>()});
    for (const auto& e : j.at("graph").at("bidirected"))
        bi.insert({e.at(0).get<std::string>(), e.at(1).get<std::string>()});
    m.diagram = CausalDiagram(nodes, dir, bi);
    for (const auto& [v, dom] : j.at("domains").items())
        m.domains[v] = dom.get<std::vector<std::string>>();
    for (const auto& e : j.at("exogenous")) {
        ExoVar x;
        x.name = e.at("name").get<std::string>();
        x.card = e.at("card").get<int>();
        for (const auto& p : e.at("probs")) x.probs.push_back(parse_rat(p.get<std::string>()));
        if (static_cast<int>(x.probs.size()) != x.card)
            throw std::invalid_argument("probability table size mismatch for " + x.name);
        Rat sum(0);
        for (const auto& p : x.probs) sum += p;
        if (sum != Rat(1))
            throw std::invalid_argument("probabilities of " + x.name + " do not sum to 1");
        m.exo.push_back(std::move(x));
    }
    for (const auto& [v, f] : j.at("functions").items()) {
        ScmFunction fn;
        fn.parents = f.at("parents").get<std::vector<Variable>>();
        fn.exo = f.at("exo").get<std::vector<std::string>>();
        fn.table = f.at("table").get<std::vector<int>>();
        m.fn[v] = std::move(fn);
    }
    return m;
}

}  // namespace cfid
