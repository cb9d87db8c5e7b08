#include "t4c/types.hpp"

#include <stdexcept>
#include <string_view>

namespace t4c {

const Node& RoadGraph::node(NodeId id) const {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw std::out_of_range("unknown node " + std::to_string(id));
    return it->second;
}

Node& RoadGraph::node(NodeId id) {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw std::out_of_range("unknown node " + std::to_string(id));
    return it->second;
}

std::optional<std::size_t> RoadGraph::find_edge(NodeId u, NodeId v) const {
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (edges[i].u == u && edges[i].v == v) return i;
    }
    return std::nullopt;
}

NodeId RoadGraph::next_node_id() const {
    return nodes.empty() ? 0 : nodes.rbegin()->first + 1;
}

double RoadGraph::total_length_m() const {
    double total = 0.0;
    for (const auto& e : edges) total += e.length_m;
    return total;
}

int importance_for_highway(const std::string& highway_class) {
    std::string_view cls = highway_class;
    if (cls.ends_with("_link")) cls.remove_suffix(5);
    if (cls == "motorway") return 5;
    if (cls == "trunk") return 4;
    if (cls == "primary") return 3;
    if (cls == "secondary") return 2;
    if (cls == "tertiary") return 1;
    return 0;
}

}  // namespace t4c
