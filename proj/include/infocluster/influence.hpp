#pragma once

#include <cctype>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "infocluster/infotransfer.hpp"
#include "json.hpp"

namespace infocluster {

inline constexpr double kDefaultSentinel = 1e6;

/// exp(-|T| / beta) for nonzero T, `sentinel` for T = 0.
inline double influence_distance(double transfer, double beta = 1.0,
                                 double sentinel = kDefaultSentinel) {
  if (!(beta > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "influence_distance: beta must be positive");
  }
  const double magnitude = std::abs(transfer);
  if (magnitude > 0.0) return std::exp(-magnitude / beta);
  return sentinel;
}

/// Directed graph over transfer-matrix groups. dist(i, j) is the influence
/// distance from node i to node j; `sentinel` marks an absent edge and fills
/// the diagonal.
struct InfluenceGraph {
  std::vector<std::string> nodes;
  Matrix dist;
  /// Transfer behind each edge after thresholding (0 where no edge).
  Matrix transfer;
  double beta = 1.0;
  double zero_threshold = 0.0;
  double sentinel = kDefaultSentinel;

  Index size() const { return static_cast<Index>(nodes.size()); }
  bool has_edge(Index i, Index j) const { return i != j && dist(i, j) != sentinel; }
};

struct GraphOptions {
  double beta = 1.0;
  double zero_threshold = 0.0;
  double sentinel = kDefaultSentinel;
};

/// Entries with |T| < zero_threshold become absent edges; the rest map
/// through influence_distance.
inline InfluenceGraph build_influence_graph(const TransferMatrix& tm,
                                            const GraphOptions& opts = {}) {
  if (!(opts.beta > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "build_influence_graph: beta must be positive");
  }
  if (opts.zero_threshold < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "build_influence_graph: zero_threshold must be nonnegative");
  }
  const Index g = tm.size();
  InfluenceGraph graph;
  graph.beta = opts.beta;
  graph.zero_threshold = opts.zero_threshold;
  graph.sentinel = opts.sentinel;
  graph.dist = Matrix::Constant(g, g, opts.sentinel);
  graph.transfer = Matrix::Zero(g, g);
  for (const auto& grp : tm.groups) graph.nodes.push_back(grp.label);
  for (Index i = 0; i < g; ++i) {
    for (Index j = 0; j < g; ++j) {
      if (i == j) continue;
      if (!tm.ok(i, j)) {
        throw Error(ErrorCode::kNumericalDomain,
                    "build_influence_graph: transfer " + tm.groups[i].label + " -> " +
                        tm.groups[j].label + " is missing (" + tm.errors[i][j] + ")");
      }
      const double t = tm.values(i, j);
      if (std::abs(t) < opts.zero_threshold) continue;
      graph.transfer(i, j) = t;
      graph.dist(i, j) = influence_distance(t, opts.beta, opts.sentinel);
    }
  }
  return graph;
}

enum class GraphFormat { kDot, kEdgeCsv, kStructured };

inline GraphFormat parse_graph_format(const std::string& name) {
  if (name == "dot") return GraphFormat::kDot;
  if (name == "edge-csv") return GraphFormat::kEdgeCsv;
  if (name == "structured") return GraphFormat::kStructured;
  throw Error(ErrorCode::kUnknownFormat, "unknown graph format '" + name + "'");
}

namespace detail {

inline bool is_plain_identifier(const std::string& s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  }
  return true;
}

inline std::string dot_id(const std::string& s) {
  if (is_plain_identifier(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline nlohmann::json to_json(const InfluenceGraph& g) {
  nlohmann::json dist = nlohmann::json::array();
  nlohmann::json transfer = nlohmann::json::array();
  for (Index i = 0; i < g.size(); ++i) {
    nlohmann::json drow = nlohmann::json::array();
    nlohmann::json trow = nlohmann::json::array();
    for (Index j = 0; j < g.size(); ++j) {
      drow.push_back(g.dist(i, j));
      trow.push_back(g.transfer(i, j));
    }
    dist.push_back(std::move(drow));
    transfer.push_back(std::move(trow));
  }
  return {{"kind", "influence_graph"},
          {"nodes", g.nodes},
          {"beta", g.beta},
          {"zero_threshold", g.zero_threshold},
          {"sentinel", g.sentinel},
          {"distance", std::move(dist)},
          {"transfer", std::move(transfer)}};
}

inline InfluenceGraph influence_graph_from_json(const nlohmann::json& j) {
  try {
    InfluenceGraph g;
    g.nodes = j.at("nodes").get<std::vector<std::string>>();
    g.beta = j.at("beta").get<double>();
    g.zero_threshold = j.at("zero_threshold").get<double>();
    g.sentinel = j.at("sentinel").get<double>();
    const auto n = g.size();
    g.dist.resize(n, n);
    g.transfer.resize(n, n);
    const auto& d = j.at("distance");
    const auto& t = j.at("transfer");
    if (static_cast<Index>(d.size()) != n || static_cast<Index>(t.size()) != n) {
      throw Error(ErrorCode::kParse, "influence graph: matrix size does not match nodes");
    }
    for (Index r = 0; r < n; ++r) {
      if (static_cast<Index>(d[r].size()) != n || static_cast<Index>(t[r].size()) != n) {
        throw Error(ErrorCode::kParse, "influence graph: ragged matrix row");
      }
      for (Index c = 0; c < n; ++c) {
        g.dist(r, c) = d[r][c].get<double>();
        g.transfer(r, c) = t[r][c].get<double>();
      }
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("influence graph: ") + e.what());
  }
}

/// dot: directed graph, absent edges omitted. edge-csv: src,dst,distance,transfer.
/// structured: JSON document readable by import_graph.
inline std::string export_graph(const InfluenceGraph& g, GraphFormat format) {
  std::ostringstream os;
  switch (format) {
    case GraphFormat::kDot: {
      os << "digraph influence {\n";
      for (const auto& node : g.nodes) os << "  " << detail::dot_id(node) << ";\n";
      os << std::fixed << std::setprecision(4);
      for (Index i = 0; i < g.size(); ++i) {
        for (Index j = 0; j < g.size(); ++j) {
          if (!g.has_edge(i, j)) continue;
          os << "  " << detail::dot_id(g.nodes[i]) << " -> " << detail::dot_id(g.nodes[j])
             << " [label=\"" << g.dist(i, j) << "\", weight=" << g.dist(i, j) << "];\n";
        }
      }
      os << "}\n";
      break;
    }
    case GraphFormat::kEdgeCsv: {
      os << "src,dst,distance,transfer\n" << std::setprecision(17);
      for (Index i = 0; i < g.size(); ++i) {
        for (Index j = 0; j < g.size(); ++j) {
          if (!g.has_edge(i, j)) continue;
          os << g.nodes[i] << ',' << g.nodes[j] << ',' << g.dist(i, j) << ','
             << g.transfer(i, j) << '\n';
        }
      }
      break;
    }
    case GraphFormat::kStructured:
      os << to_json(g).dump(2) << '\n';
      break;
  }
  return os.str();
}

inline InfluenceGraph import_graph(const std::string& structured) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(structured);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("influence graph: ") + e.what());
  }
  return influence_graph_from_json(j);
}

}  // namespace infocluster
