#pragma once

#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wildreid/catalog.hpp"
#include "wildreid/geomverify.hpp"
#include "wildreid/splitgen.hpp"

namespace wildreid {

/// Disjoint-set forest with union by size and path compression.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
  }

  std::size_t find(std::size_t x) {
    std::size_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      std::size_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

  bool connected(std::size_t a, std::size_t b) { return find(a) == find(b); }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

/// Undirected image-match graph: one node per catalog image, one edge per
/// accepted pair decision.
struct MatchGraph {
  std::vector<std::string> nodes;                   // sorted image ids
  std::map<std::string, std::size_t> node_index;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::size_t> component_id;            // per node, dense 0..k-1
  std::size_t n_components = 0;

  std::vector<std::vector<std::size_t>> component_members() const;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

MatchGraph build_match_graph(const std::vector<VerificationDecision>& decisions,
                             const Catalog& catalog);

struct Prediction {
  enum Status { predicted, no_prediction, conflict } status = no_prediction;
  std::string individual_id;  // set when status == predicted
};

struct ComponentConflict {
  std::size_t component = 0;
  std::set<std::string> identities;  // >= 2 reference identities
  std::vector<std::string> query_images;
};

struct PredictionSet {
  std::map<std::string, Prediction> by_query;
  std::vector<ComponentConflict> conflicts;
  // Reference-only conflicts point at inconsistent labels rather than at a
  // query ambiguity; reported separately.
  std::vector<ComponentConflict> reference_conflicts;
};

/// Propagates identities from reference to query images through connected
/// components: exactly one reference identity in the component -> predict it;
/// none -> no_prediction; two or more -> no_prediction plus a conflict
/// diagnostic. `max_hops`, when set, limits reachability to that many edges.
PredictionSet propagate_identities(const MatchGraph& graph, const Split& split,
                                   const Catalog& catalog,
                                   std::optional<std::size_t> max_hops = {});

// Exports: whitespace-separated edge list, and a per-component summary CSV
// `component_id,size,n_reference,n_query,identities` (identities ;-joined).
void save_edge_list(const MatchGraph& graph, const std::string& path);
void save_component_summary(const MatchGraph& graph, const Split& split,
                            const Catalog& catalog, const std::string& path);

}  // namespace wildreid
