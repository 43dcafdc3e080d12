#include "fdia/grid.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "fdia/error.hpp"

namespace fdia::grid {

const char* to_string(BusKind kind) noexcept {
    switch (kind) {
        case BusKind::slack: return "slack";
        case BusKind::pv: return "pv";
        case BusKind::pq: return "pq";
    }
    return "pq";
}

BusKind bus_kind_from_string(const std::string& text) {
    if (text == "slack") return BusKind::slack;
    if (text == "pv") return BusKind::pv;
    if (text == "pq") return BusKind::pq;
    throw ValidationError("unknown bus kind '" + text + "'");
}

void validate(const Grid& grid) {
    const std::size_t n = grid.size();
    if (!(grid.base_mva > 0.0) || !std::isfinite(grid.base_mva)) {
        throw ValidationError("base_mva must be positive");
    }
    if (n == 0) {
        throw ValidationError("grid has no buses");
    }
    std::size_t slack_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Bus& bus = grid.buses[i];
        if (bus.kind == BusKind::slack) {
            ++slack_count;
            if (i != grid.slack_index) {
                throw ValidationError("bus " + bus.label + " is slack but slack_index is " +
                                      std::to_string(grid.slack_index));
            }
        }
        if (!(bus.v_init > 0.0) || !std::isfinite(bus.v_init)) {
            throw ValidationError("bus " + bus.label + " has non-positive initial voltage");
        }
    }
    if (slack_count != 1) {
        throw ValidationError("expected exactly one slack bus, found " + std::to_string(slack_count));
    }
    for (std::size_t k = 0; k < grid.branches.size(); ++k) {
        const Branch& br = grid.branches[k];
        const std::string name = "branch " + std::to_string(k);
        if (br.from >= n || br.to >= n) {
            throw ValidationError(name + " references a bus outside 0.." + std::to_string(n - 1));
        }
        if (br.from == br.to) {
            throw ValidationError(name + " connects bus " + grid.buses[br.from].label + " to itself");
        }
        if (!(br.tap > 0.0)) {
            throw ValidationError(name + " has non-positive tap ratio");
        }
        if (br.in_service && br.r == 0.0 && br.x == 0.0) {
            throw DegenerateBranchError(name + " (" + grid.buses[br.from].label + "-" +
                                        grid.buses[br.to].label + ") has zero impedance");
        }
    }
    std::vector<int> gens_at(n, 0);
    for (std::size_t k = 0; k < grid.gens.size(); ++k) {
        const Gen& gen = grid.gens[k];
        if (gen.bus >= n) {
            throw ValidationError("generator " + std::to_string(k) + " references a missing bus");
        }
        if (gen.in_service) {
            ++gens_at[gen.bus];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (grid.buses[i].kind != BusKind::pq && gens_at[i] == 0) {
            throw ValidationError(std::string(to_string(grid.buses[i].kind)) + " bus " +
                                  grid.buses[i].label + " has no in-service generator");
        }
    }
}

BranchAdmittance branch_admittance(const Branch& br) {
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex charging(0.0, br.b_charging / 2.0);
    const Complex ratio = std::polar(br.tap, br.shift);
    BranchAdmittance a;
    a.ytt = ys + charging;
    a.yff = a.ytt / (br.tap * br.tap);
    a.yft = -ys / std::conj(ratio);
    a.ytf = -ys / ratio;
    return a;
}

AdmittanceMatrix build_ybus(const Grid& grid) {
    validate(grid);
    const std::size_t n = grid.size();
    std::vector<Triplet<Complex>> entries;
    entries.reserve(n + 4 * grid.branches.size());
    for (std::size_t i = 0; i < n; ++i) {
        entries.push_back({i, i, Complex(grid.buses[i].g_shunt, grid.buses[i].b_shunt)});
    }
    for (const Branch& br : grid.branches) {
        if (!br.in_service) {
            continue;
        }
        const BranchAdmittance a = branch_admittance(br);
        entries.push_back({br.from, br.from, a.yff});
        entries.push_back({br.to, br.to, a.ytt});
        entries.push_back({br.from, br.to, a.yft});
        entries.push_back({br.to, br.from, a.ytf});
    }
    return AdmittanceMatrix{CsrMatrix<Complex>::from_triplets(n, std::move(entries))};
}

WeightedGraph WeightedGraph::from_edges(std::size_t n, const std::vector<WeightedEdge>& edges) {
    std::vector<Triplet<double>> entries;
    entries.reserve(2 * edges.size());
    for (const auto& e : edges) {
        if (e.a >= n || e.b >= n) {
            throw DimensionError("edge endpoint out of range");
        }
        if (e.a == e.b) {
            throw ValidationError("self-loop on vertex " + std::to_string(e.a));
        }
        if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
            throw ValidationError("edge weight must be finite and nonnegative");
        }
        entries.push_back({e.a, e.b, e.weight});
        entries.push_back({e.b, e.a, e.weight});
    }
    WeightedGraph g;
    g.weights_ = CsrMatrix<double>::from_triplets(n, std::move(entries));
    g.degrees_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        g.weights_.for_each_in_row(i, [&](std::size_t, double w) { g.degrees_[i] += w; });
    }
    return g;
}

std::vector<std::size_t> component_labels(const WeightedGraph& graph) {
    const std::size_t n = graph.size();
    constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
    std::vector<std::size_t> label(n, unvisited);
    std::vector<std::size_t> stack;
    std::size_t next = 0;
    for (std::size_t start = 0; start < n; ++start) {
        if (label[start] != unvisited) {
            continue;
        }
        label[start] = next;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t v = stack.back();
            stack.pop_back();
            graph.weights().for_each_in_row(v, [&](std::size_t u, double w) {
                if (w > 0.0 && label[u] == unvisited) {
                    label[u] = next;
                    stack.push_back(u);
                }
            });
        }
        ++next;
    }
    return label;
}

std::size_t check_connectivity(const WeightedGraph& graph) {
    const auto labels = component_labels(graph);
    std::size_t count = 0;
    for (std::size_t l : labels) {
        count = std::max(count, l + 1);
    }
    return count;
}

WeightedGraph build_weighted_adjacency(const Grid& grid) {
    validate(grid);
    std::vector<WeightedEdge> edges;
    for (const Branch& br : grid.branches) {
        if (br.in_service) {
            edges.push_back({br.from, br.to, 1.0 / std::abs(Complex(br.r, br.x))});
        }
    }
    WeightedGraph graph = WeightedGraph::from_edges(grid.size(), edges);

    const auto labels = component_labels(graph);
    const std::size_t count = check_connectivity(graph);
    if (count > 1) {
        std::vector<std::vector<std::size_t>> components(count);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            components[labels[i]].push_back(i);
        }
        std::ostringstream msg;
        msg << "grid graph is disconnected into " << count << " components:";
        for (const auto& comp : components) {
            msg << " {";
            for (std::size_t k = 0; k < comp.size(); ++k) {
                msg << (k ? "," : "") << grid.buses[comp[k]].label;
            }
            msg << "}";
        }
        throw ConnectivityError(msg.str(), std::move(components));
    }
    return graph;
}

}  // namespace fdia::grid
