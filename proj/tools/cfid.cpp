// cfid: identify counterfactual queries over an ADMG, or check them against
// a brute-force discrete structural model.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfid/identify.hpp"
#include "cfid/oracle.hpp"
#include "cfid/parse.hpp"
#include "cfid/verify.hpp"
#include "cfid/worlds.hpp"

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json witness_json(const cfid::ConflictWitness& w) {
    json comp = json::array();
    for (const auto& n : w.component) comp.push_back(n);
    return json{{"component", comp},
                {"variable", w.conflict_var},
                {"value_in_subscript", w.value_in_sub.token},
                {"conflicting_value", w.conflicting_value.token},
                {"kind", w.kind == cfid::ConflictWitness::Kind::ParentSetTwice
                             ? "parent_set_twice"
                             : "observed_inside"}};
}

// Verdict Zero is split for reporting: zero by inconsistency of the joint
// conjunction versus zero by a self-contradictory event.
std::string zero_flavor(const cfid::CausalDiagram& g, const cfid::Query& q) {
    std::vector<cfid::CfEvent> all = q.gamma.events;
    all.insert(all.end(), q.delta.events.begin(), q.delta.events.end());
    cfid::CfConjunction joint = cfid::make_conjunction(std::move(all));
    if (!cfid::classify_self_events(joint).contradictions.empty()) return "inconsistent-zero";
    if (cfid::make_cg(g, joint).inconsistent) return "inconsistent-zero";
    return "zero";
}

int run_identify(const std::string& graph_path, const std::string& query_text,
                 const std::string& format, bool explain, bool as_json) {
    cfid::CausalDiagram g = cfid::parse_graph(read_file(graph_path));
    cfid::Query q = cfid::parse_query(query_text);
    std::vector<std::string> trace;
    cfid::CondIdResult r = cfid::identify(g, q, explain ? &trace : nullptr);

    json rep;
    rep["query"] = cfid::render(q);
    int exit_code = 0;
    switch (r.verdict) {
        case cfid::CondIdResult::Verdict::Expression:
            rep["verdict"] = "identified";
            rep["expression"] = {{"text", cfid::render_text(r.expr)},
                                 {"latex", cfid::render_latex(r.expr)},
                                 {"json", cfid::render_json(r.expr)}};
            break;
        case cfid::CondIdResult::Verdict::Zero:
            rep["verdict"] = zero_flavor(g, q);
            break;
        case cfid::CondIdResult::Verdict::Fail:
            rep["verdict"] = "fail";
            rep["witness"] = witness_json(*r.witness);
            exit_code = 2;
            break;
        case cfid::CondIdResult::Verdict::Undefined:
            rep["verdict"] = "undefined";
            exit_code = 3;
            break;
    }
    if (explain) rep["trace"] = trace;

    if (as_json) {
        std::cout << rep.dump(2) << "\n";
        return exit_code;
    }
    std::cout << rep["query"].get<std::string>() << ": " << rep["verdict"].get<std::string>()
              << "\n";
    if (r.verdict == cfid::CondIdResult::Verdict::Expression) {
        if (format == "latex")
            std::cout << cfid::render_latex(r.expr) << "\n";
        else if (format == "json")
            std::cout << cfid::render_json(r.expr).dump(2) << "\n";
        else
            std::cout << cfid::render_text(r.expr) << "\n";
    }
    if (r.witness) std::cout << "witness: " << cfid::render(*r.witness) << "\n";
    for (const auto& line : trace) std::cout << "  " << line << "\n";
    return exit_code;
}

int run_explain(const std::string& graph_path, const std::string& query_text) {
    cfid::CausalDiagram g = cfid::parse_graph(read_file(graph_path));
    cfid::Query q = cfid::parse_query(query_text);
    std::vector<cfid::CfEvent> all = q.gamma.events;
    all.insert(all.end(), q.delta.events.begin(), q.delta.events.end());
    cfid::CfConjunction joint = cfid::make_conjunction(std::move(all));

    cfid::PwGraph pw = cfid::parallel_worlds(g, joint);
    std::cout << "# parallel worlds graph\n";
    for (const auto& [id, n] : pw.nodes) {
        std::cout << "node " << id;
        if (n.status == cfid::NodeStatus::Fixed)
            std::cout << " = " << n.value->token << " [fixed]";
        else if (n.status == cfid::NodeStatus::Observed)
            std::cout << " = " << n.value->token << " [observed]";
        std::cout << "\n";
    }
    for (const auto& [a, b] : pw.directed) std::cout << a << " -> " << b << "\n";
    for (const auto& [a, b] : pw.bidirected) std::cout << a << " <-> " << b << "\n";

    std::vector<std::string> log;
    cfid::MakeCgResult mc = cfid::make_cg(g, joint, {}, &log);
    std::cout << "\n# merge log\n";
    for (const auto& line : log) std::cout << line << "\n";
    if (mc.inconsistent) {
        std::cout << "\nresult: INCONSISTENT (probability 0)\n";
        return 0;
    }
    std::cout << "\n# counterfactual graph\n";
    for (const auto& name : mc.graph.admg.nodes()) {
        const cfid::CfNode& n = mc.graph.info.at(name);
        std::cout << "node " << name;
        if (n.status == cfid::NodeStatus::Fixed)
            std::cout << " = " << n.value->token << " [fixed]";
        else if (n.status == cfid::NodeStatus::Observed)
            std::cout << " = " << n.value->token << " [observed]";
        std::cout << "\n";
    }
    for (const auto& [a, b] : mc.graph.admg.directed()) std::cout << a << " -> " << b << "\n";
    for (const auto& [a, b] : mc.graph.admg.bidirected()) std::cout << a << " <-> " << b << "\n";
    std::cout << "rewritten: " << cfid::render(mc.rewritten) << "\n";

    std::cout << "\n# identification trace\n";
    std::vector<std::string> trace;
    cfid::CondIdResult r = cfid::identify(g, q, &trace);
    for (const auto& line : trace) std::cout << line << "\n";
    switch (r.verdict) {
        case cfid::CondIdResult::Verdict::Expression:
            std::cout << "\nresult: " << cfid::render_text(r.expr) << "\n";
            break;
        case cfid::CondIdResult::Verdict::Zero:
            std::cout << "\nresult: 0\n";
            break;
        case cfid::CondIdResult::Verdict::Fail:
            std::cout << "\nresult: FAIL, " << cfid::render(*r.witness) << "\n";
            return 2;
        case cfid::CondIdResult::Verdict::Undefined:
            std::cout << "\nresult: UNDEFINED\n";
            return 3;
    }
    return 0;
}

int run_oracle(const std::string& model_path, const std::string& query_text, bool exact) {
    cfid::DiscreteScm m = cfid::scm_from_json(json::parse(read_file(model_path)));
    cfid::Query q = cfid::parse_query(query_text);
    std::set<std::string> worlds;
    for (const auto& e : q.gamma.events) worlds.insert(cfid::render(e.var.sub));
    for (const auto& e : q.delta.events) worlds.insert(cfid::render(e.var.sub));
    std::cout << "worlds:";
    for (const auto& w : worlds) std::cout << " {" << (w.empty() ? "actual" : w) << "}";
    std::cout << "\n";
    if (q.delta.empty()) {
        if (exact)
            std::cout << cfid::counterfactual_prob_t<cfid::Rat>(m, q.gamma) << "\n";
        else
            std::cout << cfid::counterfactual_prob(m, q.gamma) << "\n";
        return 0;
    }
    if (exact) {
        auto p = cfid::conditional_counterfactual_prob_t<cfid::Rat>(m, q.gamma, q.delta);
        if (!p) {
            std::cout << "undefined (conditioning event has probability zero)\n";
            return 3;
        }
        std::cout << *p << "\n";
    } else {
        auto p = cfid::conditional_counterfactual_prob(m, q.gamma, q.delta);
        if (!p) {
            std::cout << "undefined (conditioning event has probability zero)\n";
            return 3;
        }
        std::cout << *p << "\n";
    }
    return 0;
}

int run_verify(const std::string& graph_path, int models, std::uint64_t seed, int max_events,
               bool conditionals, const std::string& dump_dir, bool as_json) {
    cfid::CausalDiagram g = cfid::parse_graph(read_file(graph_path));
    cfid::VerifyOptions opt;
    opt.models = models;
    opt.seed = seed;
    opt.max_events = max_events;
    opt.conditionals = conditionals;
    cfid::VerifyReport rep = cfid::verify_graph(g, opt);
    if (as_json) {
        json j{{"summary", rep.summary()},
               {"models", rep.models},
               {"queries", rep.queries},
               {"identified", rep.identified},
               {"zero", rep.zeros},
               {"fail", rep.fails},
               {"undefined", rep.undefined},
               {"skipped", rep.skipped},
               {"issues", json::array()}};
        for (const auto& i : rep.issues)
            j["issues"].push_back({{"seed", i.seed}, {"query", i.query}, {"detail", i.detail}});
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << rep.summary() << "\n";
        for (const auto& i : rep.issues)
            std::cout << "issue: seed=" << i.seed << " " << i.query << ": " << i.detail << "\n";
    }
    if (!dump_dir.empty()) {
        int n = 0;
        for (const auto& i : rep.issues) {
            json j{{"seed", i.seed}, {"query", i.query}, {"detail", i.detail},
                   {"model", i.model}};
            std::ofstream out(dump_dir + "/failure-" + std::to_string(n++) + ".json");
            out << j.dump(2) << "\n";
        }
    }
    return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"counterfactual identification over causal diagrams"};
    app.require_subcommand(1);

    std::string graph_path, query_text, model_path, format = "text", dump_dir;
    bool explain = false, as_json = false, exact = false, no_conditionals = false;
    int models = 20, max_events = 3;
    std::uint64_t seed = 1;

    auto* cid = app.add_subcommand("identify", "identify a query against a graph");
    cid->add_option("--graph", graph_path, "graph file")->required();
    cid->add_option("--query", query_text, "query, e.g. P(Y[X=x0]=y0 | X=x1)")->required();
    cid->add_option("--format", format, "text|latex|json")
        ->check(CLI::IsMember({"text", "latex", "json"}));
    cid->add_flag("--explain", explain, "append construction and recursion trace");
    cid->add_flag("--json", as_json, "emit a JSON run report");

    auto* cex = app.add_subcommand("explain", "show the construction step by step");
    cex->add_option("--graph", graph_path, "graph file")->required();
    cex->add_option("--query", query_text, "query")->required();

    auto* cor = app.add_subcommand("oracle", "evaluate a query on an explicit model");
    cor->add_option("--model", model_path, "model JSON file")->required();
    cor->add_option("--query", query_text, "query")->required();
    cor->add_flag("--exact", exact, "print an exact rational");

    auto* cve = app.add_subcommand("verify", "cross-check identification against enumeration");
    cve->add_option("--graph", graph_path, "graph file")->required();
    cve->add_option("--models", models, "number of random models");
    cve->add_option("--seed", seed, "base seed");
    cve->add_option("--max-events", max_events, "events per conjunction (1-3)");
    cve->add_flag("--no-conditionals", no_conditionals, "skip conditional queries");
    cve->add_option("--dump-failures", dump_dir, "directory for failing fixtures");
    cve->add_flag("--json", as_json, "emit a JSON summary");

    CLI11_PARSE(app, argc, argv);
    try {
        if (cid->parsed()) return run_identify(graph_path, query_text, format, explain, as_json);
        if (cex->parsed()) return run_explain(graph_path, query_text);
        if (cor->parsed()) return run_oracle(model_path, query_text, exact);
        if (cve->parsed())
            return run_verify(graph_path, models, seed, max_events, !no_conditionals, dump_dir,
                              as_json);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
