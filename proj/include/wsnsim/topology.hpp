#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsnsim/frame.hpp"
#include "wsnsim/rng.hpp"

namespace wsn {

struct Link {
  NodeId src = kNoNode;
  NodeId dst = kNoNode;
  double prr = 0.0;       // per-frame reception probability
  SimTime prop_delay = 0;
};

enum class GeneratorKind { Grid, RandomGeometric };

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::RandomGeometric;
  std::uint32_t nodes = 35;
  std::uint64_t seed = 42;
  // random_geometric: office-floor layout
  double area_w = 60.0;
  double area_h = 20.0;
  double full_prr_radius = 10.0;  // PRR 1 inside
  double zero_prr_radius = 20.0;  // PRR falls linearly to 0 here
  // grid: unit spacing, PRR 1 within radius
  double grid_radius = 1.0;
};

struct TopologySpec {
  std::optional<std::vector<Link>> links;
  std::optional<GeneratorSpec> generator;
};

class TopologyError : public std::runtime_error {
 public:
  explicit TopologyError(const std::string& what) : std::runtime_error(what) {}
};

class Topology {
 public:
  void add_node(NodeId n) { nodes_.insert(n); }

  void add_link(const Link& l) {
    if (l.prr < 0.0 || l.prr > 1.0)
      throw TopologyError("link " + std::to_string(l.src) + "->" +
                          std::to_string(l.dst) + ": prr outside [0,1]");
    nodes_.insert(l.src);
    nodes_.insert(l.dst);
    out_[l.src].push_back(l);
  }

  const std::set<NodeId>& nodes() const { return nodes_; }
  std::size_t node_count() const { return nodes_.size(); }

  const std::vector<Link>& out_links(NodeId n) const {
    static const std::vector<Link> empty;
    auto it = out_.find(n);
    return it == out_.end() ? empty : it->second;
  }

  double prr(NodeId src, NodeId dst) const {
    for (const auto& l : out_links(src))
      if (l.dst == dst) return l.prr;
    return 0.0;
  }

  bool audible(NodeId src, NodeId dst) const { return prr(src, dst) > 0.0; }

  // Every node must have a prr>0 path toward the sink.
  std::vector<NodeId> sink_unreachable() const {
    std::set<NodeId> reached{kSink};
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& [src, links] : out_) {
        if (reached.count(src)) continue;
        for (const auto& l : links) {
          if (l.prr > 0.0 && reached.count(l.dst)) {
            reached.insert(src);
            grew = true;
            break;
          }
        }
      }
    }
    std::vector<NodeId> missing;
    for (NodeId n : nodes_)
      if (!reached.count(n)) missing.push_back(n);
    return missing;
  }

  void sort_links() {
    for (auto& [src, links] : out_)
      std::sort(links.begin(), links.end(),
                [](const Link& a, const Link& b) { return a.dst < b.dst; });
  }

 private:
  std::set<NodeId> nodes_;
  std::map<NodeId, std::vector<Link>> out_;
};

namespace detail {

inline Topology generate_grid(const GeneratorSpec& g) {
  Topology topo;
  std::uint32_t side =
      static_cast<std::uint32_t>(std::ceil(std::sqrt(double(g.nodes))));
  std::vector<std::pair<double, double>> pos;
  for (std::uint32_t i = 0; i < g.nodes; ++i)
    pos.emplace_back(double(i % side), double(i / side));
  for (NodeId a = 0; a < g.nodes; ++a) {
    topo.add_node(a);
    for (NodeId b = 0; b < g.nodes; ++b) {
      if (a == b) continue;
      double dx = pos[a].first - pos[b].first;
      double dy = pos[a].second - pos[b].second;
      if (std::hypot(dx, dy) <= g.grid_radius + 1e-9)
        topo.add_link(Link{a, b, 1.0, 0});
    }
  }
  return topo;
}

inline Topology generate_random_geometric(const GeneratorSpec& g) {
  Rng rng(g.seed, kTopologyStream);
  std::vector<std::pair<double, double>> pos(g.nodes);
  // Sink sits near the left wall; the rest of the floor is uniform.
  pos[0] = {g.area_w * 0.08, g.area_h * 0.5};
  for (std::uint32_t i = 1; i < g.nodes; ++i)
    pos[i] = {rng.uniform() * g.area_w, rng.uniform() * g.area_h};
  Topology topo;
  for (NodeId a = 0; a < g.nodes; ++a) {
    topo.add_node(a);
    for (NodeId b = 0; b < g.nodes; ++b) {
      if (a == b) continue;
      double d = std::hypot(pos[a].first - pos[b].first,
                            pos[a].second - pos[b].second);
      double prr;
      if (d <= g.full_prr_radius) prr = 1.0;
      else if (d >= g.zero_prr_radius) prr = 0.0;
      else
        prr = (g.zero_prr_radius - d) /
              (g.zero_prr_radius - g.full_prr_radius);
      if (prr > 0.0) topo.add_link(Link{a, b, prr, 0});
    }
  }
  return topo;
}

}  // namespace detail

inline Topology load_topology(const TopologySpec& spec) {
  Topology topo;
  if (spec.links) {
    for (const auto& l : *spec.links) topo.add_link(l);
    topo.add_node(kSink);
  } else if (spec.generator) {
    const auto& g = *spec.generator;
    if (g.nodes < 2) throw TopologyError("generator: need at least 2 nodes");
    topo = g.kind == GeneratorKind::Grid ? detail::generate_grid(g)
                                         : detail::generate_random_geometric(g);
  } else {
    throw TopologyError("topology: neither links nor generator given");
  }
  if (!topo.nodes().count(kSink))
    throw TopologyError("topology: sink (node 0) missing");
  auto missing = topo.sink_unreachable();
  if (!missing.empty()) {
    std::string names;
    for (NodeId n : missing) names += " " + std::to_string(n);
    throw TopologyError("topology: nodes unreachable from sink:" + names);
  }
  topo.sort_links();
  return topo;
}

}  // namespace wsn
