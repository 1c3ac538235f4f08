#include "wildreid/matchgraph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>

namespace wildreid {

std::vector<std::vector<std::size_t>> MatchGraph::component_members() const {
  std::vector<std::vector<std::size_t>> out(n_components);
  for (std::size_t i = 0; i < nodes.size(); ++i) out[component_id[i]].push_back(i);
  return out;
}

MatchGraph build_match_graph(const std::vector<VerificationDecision>& decisions,
                             const Catalog& catalog) {
  MatchGraph g;
  g.nodes.reserve(catalog.size());
  for (const auto& r : catalog.records()) g.nodes.push_back(r.image_id);
  std::sort(g.nodes.begin(), g.nodes.end());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) g.node_index[g.nodes[i]] = i;

  UnionFind uf(g.nodes.size());
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& d : decisions) {
    if (!d.accepted) continue;
    auto ia = g.node_index.find(d.image_a);
    auto ib = g.node_index.find(d.image_b);
    if (ia == g.node_index.end())
      throw GraphError("decision names unknown image '" + d.image_a + "'");
    if (ib == g.node_index.end())
      throw GraphError("decision names unknown image '" + d.image_b + "'");
    auto e = std::minmax(ia->second, ib->second);
    if (e.first == e.second) continue;  // self edge carries no information
    if (!seen.insert(e).second) continue;
    g.edges.push_back(e);
    uf.unite(e.first, e.second);
  }

  // Dense component ids in order of first node appearance.
  g.component_id.assign(g.nodes.size(), std::numeric_limits<std::size_t>::max());
  std::map<std::size_t, std::size_t> remap;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    std::size_t root = uf.find(i);
    auto [it, fresh] = remap.emplace(root, remap.size());
    g.component_id[i] = it->second;
  }
  g.n_components = remap.size();
  return g;
}

namespace {

// Reference identities reachable within max_hops of each node (only needed
// when a hop limit is configured; unlimited propagation uses components).
std::set<std::string> identities_within_hops(
    const MatchGraph& g, const std::vector<std::vector<std::size_t>>& adj,
    std::size_t start, std::size_t max_hops,
    const std::vector<const std::string*>& ref_identity) {
  std::set<std::string> found;
  std::vector<std::size_t> dist(g.nodes.size(), std::numeric_limits<std::size_t>::max());
  std::deque<std::size_t> queue{start};
  dist[start] = 0;
  while (!queue.empty()) {
    std::size_t u = queue.front();
    queue.pop_front();
    if (ref_identity[u]) found.insert(*ref_identity[u]);
    if (dist[u] == max_hops) continue;
    for (std::size_t v : adj[u])
      if (dist[v] > dist[u] + 1) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
  }
  return found;
}

}  // namespace

PredictionSet propagate_identities(const MatchGraph& graph, const Split& split,
                                   const Catalog& catalog,
                                   std::optional<std::size_t> max_hops) {
  for (const auto* side : {&split.reference_ids, &split.query_ids})
    for (const auto& id : *side)
      if (!graph.node_index.count(id))
        throw GraphError("split image '" + id + "' missing from graph");

  const std::size_t n = graph.nodes.size();
  std::vector<const std::string*> ref_identity(n, nullptr);
  std::vector<char> is_query(n, 0);
  for (const auto& id : split.reference_ids) {
    const auto& r = catalog.record(id);
    if (r.has_identity())
      ref_identity[graph.node_index.at(id)] = &r.individual_id;
  }
  for (const auto& id : split.query_ids) is_query[graph.node_index.at(id)] = 1;

  // Per-component reference identity sets.
  std::vector<std::set<std::string>> comp_identities(graph.n_components);
  for (std::size_t i = 0; i < n; ++i)
    if (ref_identity[i]) comp_identities[graph.component_id[i]].insert(*ref_identity[i]);

  std::vector<std::vector<std::size_t>> adj;
  if (max_hops) {
    adj.resize(n);
    for (const auto& [a, b] : graph.edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  }

  PredictionSet ps;
  std::map<std::size_t, ComponentConflict> conflicts;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_query[i]) continue;
    std::set<std::string> ids =
        max_hops ? identities_within_hops(graph, adj, i, *max_hops, ref_identity)
                 : comp_identities[graph.component_id[i]];
    Prediction p;
    if (ids.size() == 1) {
      p.status = Prediction::predicted;
      p.individual_id = *ids.begin();
    } else if (ids.size() >= 2) {
      p.status = Prediction::conflict;
      auto& c = conflicts[graph.component_id[i]];
      c.component = graph.component_id[i];
      c.identities = ids;
      c.query_images.push_back(graph.nodes[i]);
    }
    ps.by_query.emplace(graph.nodes[i], std::move(p));
  }
  for (auto& [comp, c] : conflicts) ps.conflicts.push_back(std::move(c));

  // Components whose reference images already disagree: label-noise signal.
  for (std::size_t comp = 0; comp < graph.n_components; ++comp) {
    if (comp_identities[comp].size() < 2) continue;
    if (conflicts.count(comp)) continue;
    ComponentConflict c;
    c.component = comp;
    c.identities = comp_identities[comp];
    ps.reference_conflicts.push_back(std::move(c));
  }
  return ps;
}

void save_edge_list(const MatchGraph& graph, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw GraphError("cannot write edge list '" + path + "'");
  for (const auto& [a, b] : graph.edges)
    out << graph.nodes[a] << ' ' << graph.nodes[b] << '\n';
}

void save_component_summary(const MatchGraph& graph, const Split& split,
                            const Catalog& catalog, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw GraphError("cannot write component summary '" + path + "'");
  out << "component_id,size,n_reference,n_query,identities\n";
  auto members = graph.component_members();
  for (std::size_t comp = 0; comp < members.size(); ++comp) {
    std::size_t n_ref = 0, n_query = 0;
    std::set<std::string> identities;
    for (std::size_t i : members[comp]) {
      const auto& id = graph.nodes[i];
      if (split.reference_ids.count(id)) ++n_ref;
      if (split.query_ids.count(id)) ++n_query;
      const auto& r = catalog.record(id);
      if (r.has_identity()) identities.insert(r.individual_id);
    }
    out << comp << ',' << members[comp].size() << ',' << n_ref << ',' << n_query << ',';
    bool first = true;
    for (const auto& id : identities) {
      if (!first) out << ';';
      out << id;
      first = false;
    }
    out << '\n';
  }
}

}  // namespace wildreid
