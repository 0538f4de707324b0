#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "cfid/identify.hpp"
#include "cfid/oracle.hpp"
#include "cfid/parse.hpp"

using namespace cfid;

namespace {

Value bsym(const std::string& id) { return Value{id, true}; }

const CausalDiagram& frontdoor() {
    static CausalDiagram g =
        parse_graph("X -> W\nW -> Y\nZ -> Y\nD -> Z\nX <-> Y\n");
    return g;
}

CondIdResult run(const CausalDiagram& g, const std::string& query) {
    return identify(g, parse_query(query));
}

}  // namespace

TEST_CASE("single intervention in a Markovian chain") {
    CausalDiagram g = parse_graph("X -> Y\n");
    CondIdResult r = run(g, "P(Y[X=x0]=y0)");
    REQUIRE(r.verdict == CondIdResult::Verdict::Expression);
    CHECK(render_text(r.expr) == "P[x0](y0)");
}

TEST_CASE("tautological and contradictory self-events") {
    CausalDiagram g = parse_graph("X -> Y\n");
    CondIdResult taut = run(g, "P(X[X=x0]=x0)");
    REQUIRE(taut.verdict == CondIdResult::Verdict::Expression);
    CHECK(render_text(taut.expr) == "1");
    CHECK(run(g, "P(X[X=x0]=x1)").verdict == CondIdResult::Verdict::Zero);
    CHECK(run(g, "P(Y[X=x0]=y0, X[X=x0]=x1)").verdict == CondIdResult::Verdict::Zero);
}

TEST_CASE("probability of necessity-style joint events fail on a single edge") {
    CausalDiagram g = parse_graph("X -> Y\n");
    // Both forms of the classic unidentifiable pair.
    for (const std::string q : {"P(Y[X=x0]=y0, Y[X=x1]=y1)", "P(Y[X=x0]=y0, Y=y1, X=x1)"}) {
        CondIdResult r = run(g, q);
        INFO(q);
        REQUIRE(r.verdict == CondIdResult::Verdict::Fail);
        REQUIRE(r.witness.has_value());
        CHECK(r.witness->conflict_var == "X");
        std::set<std::string> vals{r.witness->value_in_sub.token,
                                   r.witness->conflicting_value.token};
        CHECK(vals == std::set<std::string>{"x0", "x1"});
    }
}

TEST_CASE("failure witness points at an inconsistently assigned parent") {
    CausalDiagram g = parse_graph("X -> Y\n");
    CondIdResult r = run(g, "P(Y[X=x0]=y0, Y[X=x1]=y1)");
    REQUIRE(r.verdict == CondIdResult::Verdict::Fail);
    // The witness conflict must be reproducible from the counterfactual graph.
    MakeCgResult mc = make_cg(g, parse_query("P(Y[X=x0]=y0, Y[X=x1]=y1)").gamma);
    auto w = conflict_witness(mc.graph);
    REQUIRE(w.has_value());
    CHECK(w->component == r.witness->component);
    CHECK(w->kind == ConflictWitness::Kind::ParentSetTwice);
}

TEST_CASE("the observed-inside witness form") {
    // Under confounding, X and its intervened-upon child share a component,
    // so observing X=x1 clashes with the fixed parent value x0.
    CausalDiagram bow = parse_graph("X -> Y\nX <-> Y\n");
    CondIdResult r = run(bow, "P(Y[X=x0]=y0, X=x1)");
    REQUIRE(r.verdict == CondIdResult::Verdict::Fail);
    CHECK(r.witness->conflict_var == "X");
    CHECK(r.witness->kind == ConflictWitness::Kind::ObservedInside);

    // Without the confounding the same query factorizes and is identified.
    CausalDiagram g = parse_graph("X -> Y\n");
    CondIdResult ok = run(g, "P(Y[X=x0]=y0, X=x1)");
    REQUIRE(ok.verdict == CondIdResult::Verdict::Expression);
    CHECK(render_text(ok.expr) == "P[x0](y0) * P(x1)");
}

TEST_CASE("worked conditional example identifies to the expected ratio") {
    CondIdResult r = run(frontdoor(), "P(Y[X=x0]=y0 | X=x1, Z[D=d0]=z0, D=d0)");
    REQUIRE(r.verdict == CondIdResult::Verdict::Expression);

    // sum_w P_{z,w}(y, x') P_x(w), divided by its Y-marginal.
    ExprPtr num = make_sum(
        {{"w", "W"}},
        make_product(
            {make_pstar({{{"Z", lit("z0")}, {"W", bsym("w")}},
                         {{"Y", lit("y0")}, {"X", lit("x1")}}}),
             make_pstar({{{"X", lit("x0")}}, {{"W", bsym("w")}}})}));
    ExprPtr den = make_sum(
        {{"w", "W"}, {"y", "Y"}},
        make_product(
            {make_pstar({{{"Z", lit("z0")}, {"W", bsym("w")}},
                         {{"Y", bsym("y")}, {"X", lit("x1")}}}),
             make_pstar({{{"X", lit("x0")}}, {{"W", bsym("w")}}})}));
    ExprPtr expected = make_ratio(num, den);
    CHECK(structurally_equal(r.expr, expected));
    CHECK(render_text(r.expr) ==
          "(sum_{w1} P[w1,z0](x1, y0) * P[x0](w1)) / "
          "(sum_{w1,w2} P[w1,z0](x1, w2) * P[x0](w1))");
}

TEST_CASE("effect of treatment on the treated in a Markovian chain") {
    CausalDiagram g = parse_graph("X -> Y\n");
    CondIdResult r = run(g, "P(Y[X=x0]=y0 | X=x1)");
    REQUIRE(r.verdict == CondIdResult::Verdict::Expression);
    // Without confounding the conditioning drops away.
    CHECK(render_text(r.expr) == "P[x0](y0)");
}

TEST_CASE("effect of treatment on the treated fails under confounding") {
    CausalDiagram bow = parse_graph("X -> Y\nX <-> Y\n");
    CondIdResult r = run(bow, "P(Y[X=x0]=y0 | X=x1)");
    CHECK(r.verdict == CondIdResult::Verdict::Fail);
    CHECK(r.witness.has_value());
}

TEST_CASE("conditioning on an impossible event is undefined") {
    CausalDiagram g = parse_graph("X -> Y\n");
    CHECK(run(g, "P(Y=y0 | X=x0, X=x1)").verdict == CondIdResult::Verdict::Undefined);
    CHECK(run(g, "P(Y=y0 | X[X=x1]=x0)").verdict == CondIdResult::Verdict::Undefined);
}

TEST_CASE("outcome conjunction implied false is zero, not undefined") {
    CausalDiagram g = parse_graph("X -> Y\n");
    CHECK(run(g, "P(X=x0, X=x1)").verdict == CondIdResult::Verdict::Zero);
    CHECK(run(g, "P(X=x0 | Y=y0)").verdict != CondIdResult::Verdict::Undefined);
}

TEST_CASE("gamma contained in delta reduces to certainty") {
    CausalDiagram g = parse_graph("X -> Y\n");
    CondIdResult r = run(g, "P(Y=y0 | Y=y0, X=x0)");
    REQUIRE(r.verdict == CondIdResult::Verdict::Expression);
    // Numerator and denominator coincide; value is 1 wherever defined.
    DiscreteScm m = random_scm(g, 2);
    PStarFamily fam = family_view(m);
    CHECK_THAT(evaluate(r.expr, fam), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("identified conditional expressions match the oracle") {
    struct Case {
        std::string graph, query;
    };
    for (const Case& c : {
             Case{"X -> Y\n", "P(Y[X=x0]=y0 | X=x1)"},
             Case{"X -> W\nW -> Y\nZ -> Y\nD -> Z\nX <-> Y\n",
                  "P(Y[X=x0]=y0 | X=x1, Z[D=d0]=z0, D=d0)"},
             Case{"A -> B\nB -> C\nA <-> C\n", "P(C[B=b0]=c0)"},
             Case{"A -> B\nB -> C\nA <-> C\n", "P(C[A=a1]=c1 | A=a0)"},
         }) {
        CausalDiagram g = parse_graph(c.graph);
        Query q = parse_query(c.query);
        CondIdResult r = identify(g, q);
        INFO(c.query);
        REQUIRE(r.verdict == CondIdResult::Verdict::Expression);
        for (std::uint64_t seed : {11u, 12u, 13u}) {
            DiscreteScm m = random_scm(g, seed);
            auto truth = conditional_counterfactual_prob(m, q.gamma, q.delta);
            if (!truth) continue;
            PStarFamily fam = family_view(m);
            CHECK_THAT(evaluate(r.expr, fam),
                       Catch::Matchers::WithinAbs(*truth, 1e-9));
        }
    }
}

TEST_CASE("identification is deterministic across calls") {
    const std::string q = "P(Y[X=x0]=y0 | X=x1, Z[D=d0]=z0, D=d0)";
    std::vector<std::string> t1, t2;
    CondIdResult a = identify(frontdoor(), parse_query(q), &t1);
    CondIdResult b = identify(frontdoor(), parse_query(q), &t2);
    CHECK(render_text(a.expr) == render_text(b.expr));
    CHECK(render_json(a.expr) == render_json(b.expr));
    CHECK(t1 == t2);
    CHECK_FALSE(t1.empty());
}

TEST_CASE("trace narrates the recursion") {
    std::vector<std::string> trace;
    identify(frontdoor(), parse_query("P(Y[X=x0]=y0 | X=x1, Z[D=d0]=z0, D=d0)"), &trace);
    bool mentions_components = false;
    for (const auto& line : trace)
        if (line.find("component") != std::string::npos) mentions_components = true;
    CHECK(mentions_components);
}
