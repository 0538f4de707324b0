#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cfid/expr.hpp"
#include "cfid/oracle.hpp"
#include "cfid/parse.hpp"

using namespace cfid;

namespace {

Value bsym(const std::string& id) { return Value{id, true}; }

// sum_{w} P[x0](y0, w) * P(w) with bound symbol named `w`.
ExprPtr adjustment(const std::string& w) {
    ExprPtr a = make_pstar({{{"X", lit("x0")}}, {{"Y", lit("y0")}, {"W", bsym(w)}}});
    ExprPtr b = make_pstar({{}, {{"W", bsym(w)}}});
    return make_sum({{w, "W"}}, make_product({a, b}));
}

}  // namespace

TEST_CASE("construction guards") {
    CHECK_THROWS_AS(make_const(2), std::invalid_argument);
    CHECK_THROWS_AS(make_pstar({{{"X", lit("x0")}}, {{"X", lit("x0")}}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_pstar({{{"X", lit("x0")}}, {}}), std::invalid_argument);
    // Summing over nothing is the body itself.
    CHECK(make_sum({}, make_const(1))->kind == ProbExpr::Kind::Const);
}

TEST_CASE("text rendering") {
    CHECK(render_text(adjustment("w1")) == "sum_{w1} P[x0](w1, y0) * P(w1)");
    CHECK(render_text(make_const(1)) == "1");
    CHECK(render_text(make_ratio(make_const(1), adjustment("w1"))) ==
          "1 / (sum_{w1} P[x0](w1, y0) * P(w1))");
}

TEST_CASE("canonicalize renames binders deterministically and is idempotent") {
    ExprPtr a = canonicalize(adjustment("zebra"));
    ExprPtr b = canonicalize(adjustment("w1"));
    CHECK(render_text(a) == render_text(b));
    CHECK(render_text(canonicalize(a)) == render_text(a));
    CHECK(a->bound.at(0).id == "w1");
}

TEST_CASE("structural equality is insensitive to binder names and factor order") {
    CHECK(structurally_equal(adjustment("u"), adjustment("v")));
    ExprPtr a = make_pstar({{}, {{"X", lit("x0")}}});
    ExprPtr b = make_pstar({{}, {{"Y", lit("y0")}}});
    CHECK(structurally_equal(make_product({a, b}), make_product({b, a})));
    CHECK_FALSE(structurally_equal(a, b));
    CHECK_FALSE(structurally_equal(adjustment("u"),
                                   make_ratio(adjustment("u"), make_const(1))));
}

TEST_CASE("JSON round trip") {
    for (const ExprPtr& e :
         {adjustment("w1"), make_const(0), make_const(1),
          make_ratio(adjustment("w1"), make_pstar({{}, {{"X", lit("x1")}}}))}) {
        ExprPtr back = parse_expr_json(render_json(e));
        CHECK(structurally_equal(e, back));
        CHECK(render_json(back) == render_json(e));
    }
    CHECK_THROWS_AS(parse_expr_json(nlohmann::json{{"kind", "mystery"}}),
                    std::invalid_argument);
}

TEST_CASE("validate rejects unbound and shadowed symbols") {
    CHECK_NOTHROW(validate(adjustment("w1")));
    // Free bound-symbol without an enclosing sum.
    ExprPtr dangling = make_pstar({{}, {{"W", bsym("w1")}}});
    CHECK_THROWS_AS(validate(dangling), std::logic_error);
    // The same binder twice on the nesting path.
    ExprPtr shadow = make_sum({{"w1", "W"}}, make_sum({{"w1", "W"}}, dangling));
    CHECK_THROWS_AS(validate(shadow), std::logic_error);
}

TEST_CASE("substitute replaces a value in both intervention and joint slots") {
    ExprPtr e = make_pstar({{{"X", lit("x0")}}, {{"Y", lit("y0")}, {"X2", lit("x0")}}});
    ExprPtr s = substitute(e, "X", lit("x0"), bsym("w1"));
    CHECK(s->term.dox.at("X") == bsym("w1"));
    // Only the named variable changes, not other variables with equal tokens.
    CHECK(s->term.joint.at("X2") == lit("x0"));
}

TEST_CASE("evaluation matches hand-computed probabilities") {
    // X -> Y with explicit tables: P(X=x1)=0.3; Y copies X with prob 0.8.
    CausalDiagram g = parse_graph("X -> Y\n");
    DiscreteScm m;
    m.diagram = g;
    m.domains = {{"X", {"x0", "x1"}}, {"Y", {"y0", "y1"}}};
    m.exo = {{"uX", 2, {Rat(7, 10), Rat(3, 10)}}, {"uY", 2, {Rat(4, 5), Rat(1, 5)}}};
    m.fn["X"] = {{}, {"uX"}, {0, 1}};
    // Table index = parent value * 2 + exo value; exo=1 flips.
    m.fn["Y"] = {{"X"}, {"uY"}, {0, 1, 1, 0}};
    PStarFamily fam = family_view(m);

    ExprPtr px1 = make_pstar({{}, {{"X", lit("x1")}}});
    CHECK_THAT(evaluate(px1, fam), Catch::Matchers::WithinAbs(0.3, 1e-12));

    ExprPtr pydox = make_pstar({{{"X", lit("x0")}}, {{"Y", lit("y1")}}});
    CHECK_THAT(evaluate(pydox, fam), Catch::Matchers::WithinAbs(0.2, 1e-12));

    // sum_w P(w) * P[x0](y1) integrates the binder out: still 0.2.
    ExprPtr summed = make_sum(
        {{"w1", "X"}},
        make_product({make_pstar({{}, {{"X", bsym("w1")}}}),
                      make_pstar({{{"X", lit("x0")}}, {{"Y", lit("y1")}}})}));
    CHECK_THAT(evaluate(summed, fam), Catch::Matchers::WithinAbs(0.2, 1e-12));

    // Conditioning by ratio: P(Y=y1 | X=x1) = P(x1,y1)/P(x1) = 0.8.
    ExprPtr joint = make_pstar({{}, {{"X", lit("x1")}, {"Y", lit("y1")}}});
    CHECK_THAT(evaluate(make_ratio(joint, px1), fam),
               Catch::Matchers::WithinAbs(0.8, 1e-12));
}

TEST_CASE("evaluation matches the enumeration oracle on random models") {
    CausalDiagram g = parse_graph("X -> W\nW -> Y\nX <-> Y\n");
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        DiscreteScm m = random_scm(g, seed);
        PStarFamily fam = family_view(m);
        for (const auto& xv : m.domains.at("X"))
            for (const auto& yv : m.domains.at("Y")) {
                ExprPtr e = make_pstar({{{"X", lit(xv)}}, {{"Y", lit(yv)}}});
                CfConjunction q = make_conjunction(
                    {CfEvent{CfVariable{"Y", {{"X", lit(xv)}}}, lit(yv)}});
                CHECK_THAT(evaluate(e, fam),
                           Catch::Matchers::WithinAbs(counterfactual_prob(m, q), 1e-12));
            }
    }
}

TEST_CASE("evaluation errors are classified") {
    CausalDiagram g = parse_graph("X -> Y\n");
    DiscreteScm m = random_scm(g, 5);
    PStarFamily fam = family_view(m);
    ExprPtr unbound = make_pstar({{}, {{"X", bsym("w9")}}});
    CHECK_THROWS_AS(evaluate(unbound, fam), EvalError);
    try {
        evaluate(unbound, fam);
    } catch (const EvalError& e) {
        CHECK(e.kind == EvalError::Kind::UnboundSymbol);
    }
    ExprPtr bad_value = make_pstar({{}, {{"X", lit("nope")}}});
    CHECK_THROWS_AS(evaluate(bad_value, fam), EvalError);
    ExprPtr zero_den = make_ratio(make_const(1), make_const(0));
    try {
        evaluate(zero_den, fam);
        FAIL("expected a zero-denominator error");
    } catch (const EvalError& e) {
        CHECK(e.kind == EvalError::Kind::ZeroDenominator);
    }
}
