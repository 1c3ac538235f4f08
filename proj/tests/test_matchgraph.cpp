#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "wildreid/catalog.hpp"
#include "wildreid/matchgraph.hpp"

using namespace wildreid;
namespace fs = std::filesystem;

namespace {

ImageRecord rec(std::string id, std::string indiv,
                Orientation o = Orientation::left) {
  ImageRecord r;
  r.image_id = std::move(id);
  r.individual_id = std::move(indiv);
  r.date = parse_date("2020-01-01");
  r.orientation = o;
  r.image_path = r.image_id + ".png";
  return r;
}

VerificationDecision edge(std::string a, std::string b, bool accepted = true) {
  VerificationDecision d;
  if (b < a) std::swap(a, b);
  d.image_a = std::move(a);
  d.image_b = std::move(b);
  d.accepted = accepted;
  d.cond_T = 10;
  d.cond_T_tilde = 2;
  d.n_correspondences = 10;
  d.residual = 1;
  return d;
}

std::size_t component_of(const MatchGraph& g, const std::string& id) {
  return g.component_id[g.node_index.at(id)];
}

// Identity propagation recomputed from scratch: BFS component membership,
// then the one-identity rule. Used as the brute-force cross-check.
std::map<std::string, Prediction> brute_force(
    const std::vector<VerificationDecision>& decisions, const Split& split,
    const Catalog& catalog) {
  std::map<std::string, std::set<std::string>> adj;
  for (const auto& d : decisions) {
    if (!d.accepted) continue;
    adj[d.image_a].insert(d.image_b);
    adj[d.image_b].insert(d.image_a);
  }
  std::map<std::string, Prediction> out;
  for (const auto& q : split.query_ids) {
    std::set<std::string> seen = {q};
    std::vector<std::string> frontier = {q};
    while (!frontier.empty()) {
      std::vector<std::string> next;
      for (const auto& n : frontier)
        for (const auto& m : adj[n])
          if (seen.insert(m).second) next.push_back(m);
      frontier = std::move(next);
    }
    std::set<std::string> identities;
    for (const auto& n : seen)
      if (split.reference_ids.count(n))
        identities.insert(catalog.record(n).individual_id);
    Prediction p;
    if (identities.size() == 1) {
      p.status = Prediction::predicted;
      p.individual_id = *identities.begin();
    } else {
      p.status = identities.empty() ? Prediction::no_prediction : Prediction::conflict;
    }
    out[q] = p;
  }
  return out;
}

}  // namespace

TEST_CASE("no accepted decisions: every node is its own component") {
  const Catalog c = Catalog::from_records(
      {rec("a", "A"), rec("b", "A"), rec("c", "B")});
  const MatchGraph g = build_match_graph({edge("a", "b", false)}, c);
  CHECK(g.nodes.size() == 3);
  CHECK(g.edges.empty());
  CHECK(g.n_components == 3);
  const auto members = g.component_members();
  CHECK(members.size() == 3);
  for (const auto& m : members) CHECK(m.size() == 1);
}

TEST_CASE("transitivity: edges (a,b) and (b,c) form one component") {
  const Catalog c = Catalog::from_records(
      {rec("a", "A"), rec("b", "A"), rec("c", "A"), rec("d", "B")});
  const MatchGraph g = build_match_graph({edge("a", "b"), edge("b", "c")}, c);
  CHECK(g.n_components == 2);
  CHECK(component_of(g, "a") == component_of(g, "c"));
  CHECK(component_of(g, "a") != component_of(g, "d"));
}

TEST_CASE("a six-pose chain with five accepted pairs is one component") {
  std::vector<ImageRecord> records;
  std::vector<VerificationDecision> decisions;
  const Orientation poses[6] = {Orientation::left,      Orientation::top_left,
                                Orientation::top,       Orientation::top_right,
                                Orientation::right,     Orientation::front};
  for (int i = 0; i < 6; ++i)
    records.push_back(rec("p" + std::to_string(i), "A", poses[i]));
  for (int i = 0; i < 5; ++i)
    decisions.push_back(edge("p" + std::to_string(i), "p" + std::to_string(i + 1)));
  const MatchGraph g =
      build_match_graph(decisions, Catalog::from_records(records));
  CHECK(g.n_components == 1);
  CHECK(g.edges.size() == 5);
}

TEST_CASE("decisions naming unknown images are rejected") {
  const Catalog c = Catalog::from_records({rec("a", "A")});
  CHECK_THROWS_AS(build_match_graph({edge("a", "ghost")}, c), GraphError);
}

TEST_CASE("duplicate decisions produce a single edge") {
  const Catalog c = Catalog::from_records({rec("a", "A"), rec("b", "A")});
  const MatchGraph g = build_match_graph({edge("a", "b"), edge("b", "a")}, c);
  CHECK(g.edges.size() == 1);
}

namespace {

// Two-identity toy graph: 10 reference and 10 query images. The "blue"
// identity has 4 query images connected to its reference block, "orange" has
// 2 connected and 4 isolated query images.
struct ToyGraph {
  Catalog catalog;
  Split split;
  std::vector<VerificationDecision> decisions;
};

ToyGraph toy_graph() {
  std::vector<ImageRecord> records;
  Split split;
  for (int i = 0; i < 5; ++i) {
    records.push_back(rec("blue_r" + std::to_string(i), "blue"));
    records.push_back(rec("orange_r" + std::to_string(i), "orange"));
    split.reference_ids.insert("blue_r" + std::to_string(i));
    split.reference_ids.insert("orange_r" + std::to_string(i));
  }
  for (int i = 0; i < 4; ++i) {
    records.push_back(rec("blue_q" + std::to_string(i), "blue"));
    split.query_ids.insert("blue_q" + std::to_string(i));
  }
  for (int i = 0; i < 6; ++i) {
    records.push_back(rec("orange_q" + std::to_string(i), "orange"));
    split.query_ids.insert("orange_q" + std::to_string(i));
  }

  std::vector<VerificationDecision> decisions;
  // Blue: chain the 4 query images into the reference block.
  decisions.push_back(edge("blue_r0", "blue_q0"));
  decisions.push_back(edge("blue_q0", "blue_q1"));
  decisions.push_back(edge("blue_r2", "blue_q2"));
  decisions.push_back(edge("blue_r3", "blue_q3"));
  // Orange: 2 connected, 4 isolated.
  decisions.push_back(edge("orange_r1", "orange_q0"));
  decisions.push_back(edge("orange_q0", "orange_q1"));
  // Some reference-reference evidence merging.
  decisions.push_back(edge("blue_r0", "blue_r1"));
  decisions.push_back(edge("orange_r0", "orange_r1"));

  return {Catalog::from_records(std::move(records)), std::move(split),
          std::move(decisions)};
}

}  // namespace

TEST_CASE("toy two-identity graph: 4 + 2 predictions, 4 no_predictions") {
  const ToyGraph t = toy_graph();
  const MatchGraph g = build_match_graph(t.decisions, t.catalog);
  const PredictionSet p = propagate_identities(g, t.split, t.catalog);

  int blue = 0, orange = 0, none = 0;
  for (const auto& [q, pred] : p.by_query) {
    if (pred.status == Prediction::predicted) {
      if (pred.individual_id == "blue") ++blue;
      if (pred.individual_id == "orange") ++orange;
    } else {
      ++none;
    }
  }
  CHECK(p.by_query.size() == 10);
  CHECK(blue == 4);
  CHECK(orange == 2);
  CHECK(none == 4);
  CHECK(p.conflicts.empty());
  CHECK(p.reference_conflicts.empty());
}

TEST_CASE("conflicting reference identities yield no_prediction plus diagnostics") {
  const Catalog c = Catalog::from_records(
      {rec("rx", "X"), rec("ry", "Y"), rec("q", "X")});
  Split split;
  split.reference_ids = {"rx", "ry"};
  split.query_ids = {"q"};
  const MatchGraph g =
      build_match_graph({edge("rx", "q"), edge("ry", "q")}, c);
  const PredictionSet p = propagate_identities(g, split, c);
  REQUIRE(p.by_query.count("q"));
  CHECK(p.by_query.at("q").status == Prediction::conflict);
  REQUIRE(p.conflicts.size() == 1);
  CHECK(p.conflicts[0].identities == std::set<std::string>{"X", "Y"});
  CHECK(p.conflicts[0].query_images == std::vector<std::string>{"q"});
}

TEST_CASE("reference-only label conflicts are reported separately") {
  const Catalog c = Catalog::from_records(
      {rec("rx", "X"), rec("ry", "Y"), rec("q", "X")});
  Split split;
  split.reference_ids = {"rx", "ry"};
  split.query_ids = {"q"};
  const MatchGraph g = build_match_graph({edge("rx", "ry")}, c);
  const PredictionSet p = propagate_identities(g, split, c);
  CHECK(p.by_query.at("q").status == Prediction::no_prediction);
  CHECK(p.conflicts.empty());
  REQUIRE(p.reference_conflicts.size() == 1);
  CHECK(p.reference_conflicts[0].identities == std::set<std::string>{"X", "Y"});
}

TEST_CASE("max_hops limits propagation depth") {
  // q1 is one hop from the reference, q2 two hops, q3 three hops.
  const Catalog c = Catalog::from_records(
      {rec("r", "A"), rec("q1", "A"), rec("q2", "A"), rec("q3", "A")});
  Split split;
  split.reference_ids = {"r"};
  split.query_ids = {"q1", "q2", "q3"};
  const MatchGraph g = build_match_graph(
      {edge("r", "q1"), edge("q1", "q2"), edge("q2", "q3")}, c);

  const PredictionSet all = propagate_identities(g, split, c);
  CHECK(all.by_query.at("q3").status == Prediction::predicted);

  const PredictionSet two = propagate_identities(g, split, c, 2);
  CHECK(two.by_query.at("q1").status == Prediction::predicted);
  CHECK(two.by_query.at("q2").status == Prediction::predicted);
  CHECK(two.by_query.at("q3").status == Prediction::no_prediction);
}

TEST_CASE("left and right profiles connect only through intermediate poses") {
  // Left-view and right-view images never match directly; top-view images
  // bridge them. Removing the bridges must disconnect the two sides.
  std::vector<ImageRecord> records = {
      rec("L0", "A", Orientation::left),  rec("L1", "A", Orientation::left),
      rec("T0", "A", Orientation::top),   rec("T1", "A", Orientation::top),
      rec("R0", "A", Orientation::right), rec("R1", "A", Orientation::right),
  };
  const Catalog c = Catalog::from_records(records);
  const std::vector<VerificationDecision> with_bridge = {
      edge("L0", "L1"), edge("L1", "T0"), edge("T0", "T1"),
      edge("T1", "R0"), edge("R0", "R1")};

  const MatchGraph g1 = build_match_graph(with_bridge, c);
  CHECK(component_of(g1, "L0") == component_of(g1, "R1"));

  std::vector<VerificationDecision> without_bridge;
  for (const auto& d : with_bridge)
    if (d.image_a[0] != 'T' && d.image_b[0] != 'T') without_bridge.push_back(d);
  const MatchGraph g2 = build_match_graph(without_bridge, c);
  CHECK(component_of(g2, "L0") != component_of(g2, "R1"));

  Split split;
  split.reference_ids = {"L0", "L1"};
  split.query_ids = {"R0", "R1"};
  CHECK(propagate_identities(g1, split, c).by_query.at("R1").status ==
        Prediction::predicted);
  CHECK(propagate_identities(g2, split, c).by_query.at("R1").status ==
        Prediction::no_prediction);
}

TEST_CASE("random graphs: propagation matches brute force; edges are monotone") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> n_images(4, 20);
    const int n = n_images(rng);
    std::vector<ImageRecord> records;
    Split split;
    std::uniform_int_distribution<int> n_ident(1, 4);
    const int k = n_ident(rng);
    for (int i = 0; i < n; ++i) {
      const std::string id = "img" + std::to_string(i);
      records.push_back(rec(id, "ind" + std::to_string(i % k)));
      (i % 3 == 0 ? split.reference_ids : split.query_ids).insert(id);
    }
    const Catalog c = Catalog::from_records(records);

    std::uniform_int_distribution<int> pick(0, n - 1);
    std::uniform_int_distribution<int> n_edges(0, 2 * n);
    std::vector<VerificationDecision> decisions;
    const int m = n_edges(rng);
    for (int e = 0; e < m; ++e) {
      const int a = pick(rng), b = pick(rng);
      if (a == b) continue;
      decisions.push_back(
          edge("img" + std::to_string(a), "img" + std::to_string(b)));
    }

    const MatchGraph g = build_match_graph(decisions, c);
    const PredictionSet p = propagate_identities(g, split, c);
    const auto expected = brute_force(decisions, split, c);
    REQUIRE(p.by_query.size() == expected.size());
    for (const auto& [q, pred] : p.by_query) {
      CHECK(pred.status == expected.at(q).status);
      CHECK(pred.individual_id == expected.at(q).individual_id);
    }

    // Monotonicity: one more edge never turns a predicted image into
    // no_prediction (conflict is allowed).
    if (n >= 2) {
      auto more = decisions;
      more.push_back(edge("img0", "img" + std::to_string(n - 1)));
      const PredictionSet p2 =
          propagate_identities(build_match_graph(more, c), split, c);
      for (const auto& [q, pred] : p.by_query) {
        if (pred.status == Prediction::predicted) {
          const auto& after = p2.by_query.at(q);
          CHECK((after.status == Prediction::predicted ||
                 after.status == Prediction::conflict));
        }
      }
    }
  }
}

TEST_CASE("graph exports: edge list and component summary") {
  const fs::path dir = fs::temp_directory_path() / "wildreid-test-matchgraph";
  fs::create_directories(dir);
  const ToyGraph t = toy_graph();
  const MatchGraph g = build_match_graph(t.decisions, t.catalog);

  const std::string edges_path = (dir / "edges.txt").string();
  save_edge_list(g, edges_path);
  std::ifstream in(edges_path);
  std::string a, b;
  std::size_t n_lines = 0;
  while (in >> a >> b) {
    CHECK(t.catalog.contains(a));
    CHECK(t.catalog.contains(b));
    ++n_lines;
  }
  CHECK(n_lines == g.edges.size());

  const std::string summary_path = (dir / "components.csv").string();
  save_component_summary(g, t.split, t.catalog, summary_path);
  std::ifstream sum(summary_path);
  std::string header;
  std::getline(sum, header);
  CHECK(header == "component_id,size,n_reference,n_query,identities");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(sum, line))
    if (!line.empty()) ++rows;
  CHECK(rows == g.n_components);
}
