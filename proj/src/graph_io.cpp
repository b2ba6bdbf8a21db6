#include <fstream>
#include <set>
#include <sstream>

#include "gmn/errors.hpp"
#include "gmn/graph.hpp"

namespace gmn {

namespace {

using nlohmann::json;

Matrix matrix_from_json(const json& rows, const char* what) {
    if (!rows.is_array()) throw ValidationError(std::string(what) + " must be an array of arrays");
    if (rows.empty()) return {};
    const auto width = rows.front().size();
    Matrix m(rows.size(), width);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (!r.is_array() || r.size() != width) {
            throw ValidationError(std::string(what) + " row " + std::to_string(i) + " has inconsistent width");
        }
        for (std::size_t j = 0; j < width; ++j) {
            if (!r[j].is_number()) throw ValidationError(std::string(what) + " entries must be numbers");
            m(i, j) = r[j].get<double>();
        }
    }
    return m;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

// Lists that contain some pair in both directions are read as directed
// listings of an undirected graph and must then be fully symmetric.
std::vector<Edge> symmetrize(const std::vector<Edge>& raw) {
    std::set<Edge> directed(raw.begin(), raw.end());
    bool any_reverse = false;
    for (auto [u, v] : raw) {
        if (u != v && directed.count({v, u})) {
            any_reverse = true;
            break;
        }
    }
    if (!any_reverse) return raw;
    std::vector<Edge> out;
    for (auto [u, v] : directed) {
        if (!directed.count({v, u})) {
            throw ValidationError("asymmetric edge list: (" + std::to_string(u) + ", " + std::to_string(v) +
                                  ") has no reverse");
        }
        if (u <= v) out.emplace_back(u, v);
    }
    return out;
}

std::vector<Edge> edges_from_json(const json& arr, std::size_t n) {
    if (!arr.is_array()) throw ValidationError("\"edges\" must be an array");
    std::vector<Edge> edges;
    edges.reserve(arr.size());
    for (const auto& e : arr) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
            throw ValidationError("each edge must be a pair of integers");
        }
        const auto u = e[0].get<long long>();
        const auto v = e[1].get<long long>();
        if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n) {
            throw ValidationError("edge (" + std::to_string(u) + ", " + std::to_string(v) + ") out of range for " +
                                  std::to_string(n) + " nodes");
        }
        edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
    return edges;
}

} // namespace

Graph graph_from_json(const json& doc) {
    static const std::set<std::string> known{"num_nodes", "edges", "node_features", "edge_features",
                                             "labels", "graph_label", "self_loops"};
    if (!doc.is_object()) throw ValidationError("graph JSON must be an object");
    for (const auto& [key, _] : doc.items()) {
        if (!known.count(key)) throw ValidationError("unknown graph key \"" + key + "\"");
    }
    if (!doc.contains("num_nodes") || !doc["num_nodes"].is_number_integer() || doc["num_nodes"].get<long long>() < 0) {
        throw ValidationError("\"num_nodes\" must be a non-negative integer");
    }
    const auto n = doc["num_nodes"].get<std::size_t>();
    auto edges = symmetrize(edges_from_json(doc.value("edges", json::array()), n));
    Matrix x = doc.contains("node_features") ? matrix_from_json(doc["node_features"], "node_features") : Matrix{};
    Matrix ef = doc.contains("edge_features") ? matrix_from_json(doc["edge_features"], "edge_features") : Matrix{};
    Graph g(n, std::move(edges), std::move(x), std::move(ef), doc.value("self_loops", false));
    if (doc.contains("labels")) {
        const auto& l = doc["labels"];
        if (l.is_number()) {
            g.set_graph_label(l.get<double>());
        } else if (l.is_array()) {
            std::vector<double> labels;
            for (const auto& v : l) {
                if (!v.is_number()) throw ValidationError("labels must be numbers");
                labels.push_back(v.get<double>());
            }
            g.set_node_labels(std::move(labels));
        } else {
            throw ValidationError("\"labels\" must be a number or an array of numbers");
        }
    }
    if (doc.contains("graph_label")) {
        if (!doc["graph_label"].is_number()) throw ValidationError("\"graph_label\" must be a number");
        g.set_graph_label(doc["graph_label"].get<double>());
    }
    return g;
}

json graph_to_json(const Graph& g) {
    json doc;
    doc["num_nodes"] = g.num_nodes();
    json edges = json::array();
    for (auto [u, v] : g.edges()) edges.push_back({u, v});
    doc["edges"] = std::move(edges);
    doc["node_features"] = matrix_to_json(g.node_features());
    if (g.has_edge_features()) doc["edge_features"] = matrix_to_json(g.edge_features());
    if (g.node_labels()) doc["labels"] = *g.node_labels();
    if (g.graph_label()) doc["graph_label"] = *g.graph_label();
    if (g.allows_self_loops()) doc["self_loops"] = true;
    return doc;
}

Graph parse_edgelist(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<Edge> raw;
    std::size_t n = 0;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        long long u = 0, v = 0;
        if (!(ls >> u)) continue;
        std::string rest;
        if (!(ls >> v) || (ls >> rest) || u < 0 || v < 0) {
            throw ValidationError("edgelist line " + std::to_string(lineno) + ": expected \"u v\"");
        }
        raw.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
        n = std::max<std::size_t>(n, static_cast<std::size_t>(std::max(u, v)) + 1);
    }
    return Graph(n, symmetrize(raw));
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

} // namespace

Graph load_graph(const std::filesystem::path& path, GraphFormat format) {
    if (format == GraphFormat::edgelist) return parse_edgelist(read_file(path));
    return graph_from_json(parse_json(path));
}

std::vector<Graph> load_dataset(const std::filesystem::path& path) {
    auto doc = parse_json(path);
    std::vector<Graph> out;
    if (doc.is_object() && doc.contains("graphs")) {
        if (doc.size() != 1) throw ValidationError("dataset object must only contain \"graphs\"");
        for (const auto& g : doc["graphs"]) out.push_back(graph_from_json(g));
    } else {
        out.push_back(graph_from_json(doc));
    }
    return out;
}

} // namespace gmn
