#include <catch2/catch_amalgamated.hpp>

#include "cfid/parse.hpp"
#include "cfid/verify.hpp"

using namespace cfid;

TEST_CASE("query enumeration covers every single event") {
    CausalDiagram g = parse_graph("X -> Y\n");
    DiscreteScm m = random_scm(g, 1);
    auto queries = enumerate_queries(g, m.domains, 1, 23);
    std::set<std::string> seen;
    for (const auto& q : queries) seen.insert(render(q));
    // Actual world and one intervened world per other variable, two values.
    CHECK(seen.count("X=x0") == 1);
    CHECK(seen.count("X=x1") == 1);
    CHECK(seen.count("Y[X=x1]=y0") == 1);
    CHECK(seen.count("X[Y=y1]=x0") == 1);
    // Self-subscripted events are excluded from enumeration.
    CHECK(seen.count("X[X=x1]=x0") == 0);
}

TEST_CASE("pair enumeration stays within two worlds") {
    CausalDiagram g = parse_graph("X -> W\nW -> Y\nX <-> Y\n");
    DiscreteScm m = random_scm(g, 1);
    for (const auto& q : enumerate_queries(g, m.domains, 3, 23)) {
        std::set<std::string> worlds;
        for (const auto& e : q.events) worlds.insert(render(e.var.sub));
        CHECK(worlds.size() <= 2);
        CHECK(q.size() <= 3);
    }
}

TEST_CASE("identification sweep is clean on small fixtures") {
    for (const std::string text : {"X -> Y\n", "X -> Y\nX <-> Y\n"}) {
        CausalDiagram g = parse_graph(text);
        VerifyOptions opt;
        opt.models = 3;
        opt.seed = 7;
        VerifyReport rep = verify_graph(g, opt);
        INFO(rep.summary());
        for (const auto& i : rep.issues) INFO(i.query << ": " << i.detail);
        CHECK(rep.ok());
        CHECK(rep.queries > 0);
        CHECK(rep.identified > 0);
    }
}

TEST_CASE("interventional factorization holds on random models") {
    for (const auto& [name, text] : fixture_graphs()) {
        CausalDiagram g = parse_graph(text);
        std::string why;
        DiscreteScm m = random_scm(g, 51);
        INFO(name << ": " << why);
        CHECK(factorization_holds(m, &why));
    }
}

TEST_CASE("d-separation implies conditional independence on random models") {
    for (const auto& [name, text] : fixture_graphs()) {
        CausalDiagram g = parse_graph(text);
        std::string why;
        DiscreteScm m = random_scm(g, 52);
        INFO(name << ": " << why);
        CHECK(d_separation_sound(m, &why));
    }
}

TEST_CASE("fixture list matches the shipped graph files") {
    CHECK(fixture_graphs().size() == 5);
    for (const auto& [name, text] : fixture_graphs()) CHECK_NOTHROW(parse_graph(text));
}
