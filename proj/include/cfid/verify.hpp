#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cfid/events.hpp"
#include "cfid/expr.hpp"
#include "cfid/graph.hpp"
#include "cfid/identify.hpp"
#include "cfid/oracle.hpp"
#include "cfid/worlds.hpp"

namespace cfid {

constexpr double kTolerance = 1e-9;

struct VerifyOptions {
    int models = 20;
    std::uint64_t seed = 1;
    int max_events = 3;
    int triple_stride = 23;       // keep every n-th 3-event conjunction
    int conditional_stride = 7;   // keep every n-th (γ|δ) pair
    bool conditionals = true;
    std::map<Variable, int> domain_sizes;  // default 2 per variable
};

struct VerifyIssue {
    std::uint64_t seed = 0;
    std::string query;
    std::string detail;
    nlohmann::json model;
};

struct VerifyReport {
    int models = 0;
    long long queries = 0;
    long long identified = 0;
    long long zeros = 0;
    long long fails = 0;
    long long undefined = 0;
    long long skipped = 0;
    std::vector<VerifyIssue> issues;

    bool ok() const { return issues.empty(); }

    std::string summary() const {
        std::string s = "models=" + std::to_string(models) +
                        " queries=" + std::to_string(queries) +
                        " identified=" + std::to_string(identified) +
                        " zero=" + std::to_string(zeros) + " fail=" + std::to_string(fails) +
                        " undefined=" + std::to_string(undefined) +
                        " skipped=" + std::to_string(skipped) +
                        " issues=" + std::to_string(issues.size());
        return s;
    }
};

namespace detail {

inline int world_count(const std::vector<CfEvent>& events) {
    std::set<std::string> keys;
    for (const auto& e : events) keys.insert(render(e.var.sub));
    return static_cast<int>(keys.size());
}

}  // namespace detail

// Deterministic query pool: events over the actual world and every
// single-variable intervention world, with the first two domain values;
// conjunctions of up to `max_events` events spanning at most two worlds.
inline std::vector<CfConjunction> enumerate_queries(
    const CausalDiagram& g, const std::map<Variable, std::vector<std::string>>& domains,
    int max_events, int triple_stride) {
    std::vector<Intervention> worlds{{}};
    for (const auto& v : g.nodes()) worlds.push_back({{v, lit(domains.at(v).at(1))}});
    std::vector<CfEvent> pool;
    for (const auto& w : worlds)
        for (const auto& v : g.nodes()) {
            if (w.count(v)) continue;  // self-subscripts exercised in unit tests
            for (int t = 0; t < 2; ++t)
                pool.push_back(CfEvent{CfVariable{v, w}, lit(domains.at(v).at(t))});
        }

    std::vector<CfConjunction> out;
    for (const auto& e : pool) out.push_back(make_conjunction({e}));
    if (max_events >= 2) {
        for (std::size_t i = 0; i < pool.size(); ++i)
            for (std::size_t j = i + 1; j < pool.size(); ++j) {
                std::vector<CfEvent> ev{pool[i], pool[j]};
                if (detail::world_count(ev) <= 2) out.push_back(make_conjunction(std::move(ev)));
            }
    }
    if (max_events >= 3) {
        long long counter = 0;
        for (std::size_t i = 0; i < pool.size(); ++i)
            for (std::size_t j = i + 1; j < pool.size(); ++j)
                for (std::size_t k = j + 1; k < pool.size(); ++k) {
                    std::vector<CfEvent> ev{pool[i], pool[j], pool[k]};
                    if (detail::world_count(ev) > 2) continue;
                    if (counter++ % triple_stride != 0) continue;
                    out.push_back(make_conjunction(std::move(ev)));
                }
    }
    return out;
}

// Identification soundness sweep on one graph: for seeded random models,
// every identified expression must match full enumeration, every zero must
// be an exact oracle zero, and every failure must carry a conflict witness
// present in the top-level counterfactual graph.
inline VerifyReport verify_graph(const CausalDiagram& g, const VerifyOptions& opt) {
    VerifyReport rep;
    std::map<Variable, int> sizes = opt.domain_sizes;
    for (const auto& v : g.nodes())
        if (!sizes.count(v)) sizes[v] = 2;

    for (int mi = 0; mi < opt.models; ++mi) {
        std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(mi);
        DiscreteScm m;
        try {
            m = random_scm(g, seed, sizes);
            m.exo_states();
        } catch (const std::invalid_argument&) {
            rep.skipped++;
            continue;
        }
        rep.models++;
        PStarFamily fam = family_view(m);
        std::vector<CfConjunction> queries =
            enumerate_queries(g, m.domains, opt.max_events, opt.triple_stride);

        auto report = [&](const CfConjunction& gamma, const std::string& detail) {
            VerifyIssue issue;
            issue.seed = seed;
            issue.query = "P(" + render(gamma) + ")";
            issue.detail = detail;
            issue.model = scm_to_json(m);
            rep.issues.push_back(std::move(issue));
        };

        for (const auto& gamma : queries) {
            rep.queries++;
            IdResult r = id_star(g, gamma);
            double truth = counterfactual_prob(m, gamma);
            if (r.verdict == IdResult::Verdict::Expression) {
                rep.identified++;
                double got;
                try {
                    got = evaluate(r.expr, fam);
                } catch (const EvalError& e) {
                    report(gamma, std::string("evaluation error: ") + e.what());
                    continue;
                }
                if (std::abs(got - truth) > kTolerance)
                    report(gamma, "expression value " + std::to_string(got) +
                                      " != oracle " + std::to_string(truth) + " (" +
                                      render_text(r.expr) + ")");
                MakeCgResult mc = make_cg(g, gamma);
                if (!mc.inconsistent && conflict_witness(mc.graph))
                    report(gamma, "identified but a non-identifiability witness exists");
            } else if (r.verdict == IdResult::Verdict::Zero) {
                rep.zeros++;
                if (truth != 0.0)
                    report(gamma, "zero verdict but oracle probability " + std::to_string(truth));
            } else {
                rep.fails++;
                if (!r.witness) {
                    report(gamma, "failure without witness");
                    continue;
                }
                MakeCgResult mc = make_cg(g, gamma);
                if (mc.inconsistent) {
                    report(gamma, "failed on an inconsistent conjunction");
                } else if (!conflict_witness(mc.graph)) {
                    report(gamma, "failed but no witness in the counterfactual graph");
                }
            }
        }

        if (opt.conditionals) {
            std::vector<CfConjunction> singles =
                enumerate_queries(g, m.domains, 1, opt.triple_stride);
            long long counter = 0;
            for (const auto& ga : singles)
                for (const auto& de : singles) {
                    if (ga.events == de.events) continue;
                    if (counter++ % opt.conditional_stride != 0) continue;
                    rep.queries++;
                    CondIdResult r = idc_star(g, ga, de);
                    auto truth = conditional_counterfactual_prob(m, ga, de);
                    std::string qtext = "P(" + render(ga) + " | " + render(de) + ")";
                    auto report2 = [&](const std::string& d) {
                        VerifyIssue issue;
                        issue.seed = seed;
                        issue.query = qtext;
                        issue.detail = d;
                        issue.model = scm_to_json(m);
                        rep.issues.push_back(std::move(issue));
                    };
                    switch (r.verdict) {
                        case CondIdResult::Verdict::Expression: {
                            rep.identified++;
                            try {
                                double got = evaluate(r.expr, fam);
                                // With an oracle-zero conditioning event the
                                // conditional is undefined; the algorithm may
                                // still return its interventional extension.
                                if (truth && std::abs(got - *truth) > kTolerance)
                                    report2("value " + std::to_string(got) + " != oracle " +
                                            std::to_string(*truth) + " (" +
                                            render_text(r.expr) + ")");
                            } catch (const EvalError& e) {
                                if (e.kind != EvalError::Kind::ZeroDenominator || truth)
                                    report2(std::string("evaluation error: ") + e.what());
                            }
                            break;
                        }
                        case CondIdResult::Verdict::Zero: {
                            rep.zeros++;
                            std::vector<CfEvent> j = ga.events;
                            j.insert(j.end(), de.events.begin(), de.events.end());
                            double pj = counterfactual_prob(m, make_conjunction(std::move(j)));
                            if (pj != 0.0)
                                report2("zero verdict but joint probability " + std::to_string(pj));
                            break;
                        }
                        case CondIdResult::Verdict::Fail:
                            rep.fails++;
                            if (!r.witness) report2("failure without witness");
                            break;
                        case CondIdResult::Verdict::Undefined: {
                            rep.undefined++;
                            double pd = counterfactual_prob(m, de);
                            if (pd != 0.0)
                                report2("undefined but conditioning probability " +
                                        std::to_string(pd));
                            break;
                        }
                    }
                }
        }
    }
    return rep;
}

// Interventional factorization: the post-intervention joint is the product
// of the c-factors of the graph without the intervened variable.
inline bool factorization_holds(const DiscreteScm& m, std::string* why = nullptr) {
    const CausalDiagram& g = m.diagram;
    for (const auto& x : g.nodes()) {
        VarSet rest;
        for (const auto& v : g.nodes())
            if (v != x) rest.insert(v);
        // subgraph without X
        std::set<std::pair<Variable, Variable>> dir, bi;
        for (const auto& e : g.directed())
            if (e.first != x && e.second != x) dir.insert(e);
        for (const auto& e : g.bidirected())
            if (e.first != x && e.second != x) bi.insert(e);
        CausalDiagram gx(rest, dir, bi);
        std::vector<VarSet> comps = c_components(gx);

        for (const auto& xval : m.domains.at(x)) {
            JointTable<double> lhs = interventional_table_t<double>(m, {{x, xval}});
            std::vector<std::size_t> radix;
            for (const auto& v : lhs.vars) radix.push_back(m.domains.at(v).size());
            for (std::size_t cell = 0; cell < lhs.p.size(); ++cell) {
                std::map<Variable, std::string> assign{{x, xval}};
                std::size_t restc = cell;
                for (std::size_t i = lhs.vars.size(); i-- > 0;) {
                    assign[lhs.vars[i]] = m.domains.at(lhs.vars[i])[restc % radix[i]];
                    restc /= radix[i];
                }
                double rhs = 1.0;
                for (const auto& comp : comps) {
                    std::map<Variable, std::string> iv;
                    for (const auto& [v, t] : assign)
                        if (!comp.count(v)) iv[v] = t;
                    JointTable<double> ft = interventional_table_t<double>(m, iv);
                    std::size_t idx = 0;
                    for (const auto& v : ft.vars) {
                        idx = idx * m.domains.at(v).size();
                        const auto& dom = m.domains.at(v);
                        idx += std::find(dom.begin(), dom.end(), assign.at(v)) - dom.begin();
                    }
                    rhs *= ft.p[idx];
                }
                if (std::abs(lhs.p[cell] - rhs) > kTolerance) {
                    if (why)
                        *why = "do(" + x + "=" + xval + ") cell " + std::to_string(cell) +
                               ": " + std::to_string(lhs.p[cell]) + " != " + std::to_string(rhs);
                    return false;
                }
            }
        }
    }
    return true;
}

// Every d-separated pair of singletons (given conditioning sets of size ≤ 2)
// must be conditionally independent in the enumerated observational joint.
inline bool d_separation_sound(const DiscreteScm& m, std::string* why = nullptr) {
    const CausalDiagram& g = m.diagram;
    JointTable<double> joint = interventional_table_t<double>(m, {});
    auto marginal = [&](const std::map<Variable, std::string>& fix) {
        double total = 0.0;
        std::vector<std::size_t> radix;
        for (const auto& v : joint.vars) radix.push_back(m.domains.at(v).size());
        for (std::size_t cell = 0; cell < joint.p.size(); ++cell) {
            std::size_t rest = cell;
            bool match = true;
            for (std::size_t i = joint.vars.size(); i-- > 0;) {
                std::string tok = m.domains.at(joint.vars[i])[rest % radix[i]];
                rest /= radix[i];
                auto it = fix.find(joint.vars[i]);
                if (it != fix.end() && it->second != tok) { match = false; break; }
            }
            if (match) total += joint.p[cell];
        }
        return total;
    };

    std::vector<Variable> vars(g.nodes().begin(), g.nodes().end());
    std::vector<VarSet> zsets{{}};
    for (std::size_t i = 0; i < vars.size(); ++i) {
        zsets.push_back({vars[i]});
        for (std::size_t j = i + 1; j < vars.size(); ++j) zsets.push_back({vars[i], vars[j]});
    }
    for (std::size_t i = 0; i < vars.size(); ++i)
        for (std::size_t j = i + 1; j < vars.size(); ++j)
            for (const auto& z : zsets) {
                if (z.count(vars[i]) || z.count(vars[j])) continue;
                if (!d_separated(g, {vars[i]}, {vars[j]}, z)) continue;
                // check every stratum
                std::vector<Variable> zv(z.begin(), z.end());
                std::vector<std::size_t> zpos(zv.size(), 0);
                bool more = true;
                while (more) {
                    std::map<Variable, std::string> zfix;
                    for (std::size_t t = 0; t < zv.size(); ++t)
                        zfix[zv[t]] = m.domains.at(zv[t])[zpos[t]];
                    double pz = marginal(zfix);
                    if (pz > 0) {
                        for (const auto& a : m.domains.at(vars[i]))
                            for (const auto& b : m.domains.at(vars[j])) {
                                auto fab = zfix;
                                fab[vars[i]] = a;
                                fab[vars[j]] = b;
                                auto fa = zfix;
                                fa[vars[i]] = a;
                                auto fb = zfix;
                                fb[vars[j]] = b;
                                double lhs = marginal(fab) / pz;
                                double rhs = (marginal(fa) / pz) * (marginal(fb) / pz);
                                if (std::abs(lhs - rhs) > kTolerance) {
                                    if (why)
                                        *why = vars[i] + " _||_ " + vars[j] +
                                               " given stratum fails: " + std::to_string(lhs) +
                                               " vs " + std::to_string(rhs);
                                    return false;
                                }
                            }
                    }
                    more = false;
                    for (std::size_t t = zv.size(); t-- > 0;) {
                        if (++zpos[t] < m.domains.at(zv[t]).size()) { more = true; break; }
                        zpos[t] = 0;
                    }
                }
            }
    return true;
}

// The built-in graph fixtures used by the sweep and the test suite.
inline const std::vector<std::pair<std::string, std::string>>& fixture_graphs() {
    static const std::vector<std::pair<std::string, std::string>> fixtures = {
        {"frontdoor_chain",
         "# treatment, mediator, outcome chain with confounded endpoints\n"
         "X -> W\nW -> Y\nZ -> Y\nD -> Z\nX <-> Y\n"},
        {"single_edge", "X -> Y\n"},
        {"bow", "X -> Y\nX <-> Y\n"},
        {"chain_confounded", "A -> B\nB -> C\nA <-> C\n"},
        {"diamond",
         "X -> Y\nX -> Z\nY <-> Z\nZ -> Y\n"},
    };
    return fixtures;
}

}  // namespace cfid
