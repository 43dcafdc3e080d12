#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "fdia/sparse.hpp"

namespace fdia::grid {

enum class BusKind { slack, pv, pq };

const char* to_string(BusKind kind) noexcept;
BusKind bus_kind_from_string(const std::string& text);

// All electrical quantities are per-unit on the grid's base MVA, angles in radians.
struct Bus {
    std::string label;  // external identifier (bus number or JSON id)
    BusKind kind = BusKind::pq;
    double p_load = 0.0;
    double q_load = 0.0;
    double g_shunt = 0.0;
    double b_shunt = 0.0;
    double v_init = 1.0;
    double theta_init = 0.0;

    bool operator==(const Bus&) const = default;
};

struct Branch {
    std::size_t from = 0;
    std::size_t to = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charging = 0.0;  // total line charging, split half per end
    double tap = 1.0;
    double shift = 0.0;
    bool in_service = true;

    bool operator==(const Branch&) const = default;
};

struct Gen {
    std::size_t bus = 0;
    double p_gen = 0.0;
    double q_gen = 0.0;
    double v_set = 1.0;
    bool in_service = true;

    bool operator==(const Gen&) const = default;
};

struct Grid {
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Gen> gens;
    std::size_t slack_index = 0;

    std::size_t size() const noexcept { return buses.size(); }

    bool operator==(const Grid&) const = default;
};

// Throws ValidationError (or DegenerateBranchError) when a Grid invariant fails.
void validate(const Grid& grid);

using Complex = std::complex<double>;

// Two-port admittances of one branch, MATPOWER convention.
struct BranchAdmittance {
    Complex yff;
    Complex yft;
    Complex ytf;
    Complex ytt;
};

BranchAdmittance branch_admittance(const Branch& branch);

struct AdmittanceMatrix {
    CsrMatrix<Complex> y;

    std::size_t size() const noexcept { return y.size(); }
};

// Standard bus admittance matrix. The diagonal is always stored, so the
// pattern of an all-out-of-service grid is the diagonal holding zeros.
AdmittanceMatrix build_ybus(const Grid& grid);

struct WeightedEdge {
    std::size_t a;
    std::size_t b;
    double weight;
};

// Symmetric nonnegative weights with zero diagonal and cached degrees.
class WeightedGraph {
  public:
    WeightedGraph() = default;

    // Parallel edges accumulate; self-loops and negative weights are rejected.
    static WeightedGraph from_edges(std::size_t n, const std::vector<WeightedEdge>& edges);

    std::size_t size() const noexcept { return weights_.size(); }
    const CsrMatrix<double>& weights() const noexcept { return weights_; }
    const std::vector<double>& degrees() const noexcept { return degrees_; }
    double weight(std::size_t i, std::size_t j) const { return weights_.at(i, j); }

  private:
    CsrMatrix<double> weights_;
    std::vector<double> degrees_;
};

// W[i][j] = sum of |1/(r + jx)| over in-service branches joining i and j.
// Throws ConnectivityError listing the components when the graph is disconnected.
WeightedGraph build_weighted_adjacency(const Grid& grid);

// Component index per vertex, numbered in order of first appearance.
std::vector<std::size_t> component_labels(const WeightedGraph& graph);

std::size_t check_connectivity(const WeightedGraph& graph);

}  // namespace fdia::grid
