#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "fdia/error.hpp"
#include "fdia/grid.hpp"

namespace fdia::pf {

enum class LinearSolver { automatic, dense, sparse };

struct SolverOptions {
    double tol = 1e-8;
    int max_iter = 20;
    bool flat_start = true;
    LinearSolver linear_solver = LinearSolver::automatic;
    std::size_t dense_limit = 512;  // automatic picks dense LU up to this many buses
};

struct PFSolution {
    std::vector<double> v;
    std::vector<double> theta;
    int iterations = 0;
    double max_mismatch = 0.0;
};

// Newton iterations ran out. trace() holds max |mismatch| before each step.
class DivergenceError : public Error {
  public:
    DivergenceError(const std::string& message, std::vector<double> trace)
        : Error(message), trace_(std::move(trace)) {}

    const std::vector<double>& trace() const noexcept { return trace_; }

  private:
    std::vector<double> trace_;
};

class SingularJacobianError : public Error {
  public:
    using Error::Error;
};

struct Injections {
    std::vector<double> p;
    std::vector<double> q;
};

// Bus injections at the given polar state, one sparse traversal per row.
Injections compute_injections(std::span<const double> v, std::span<const double> theta,
                              const grid::AdmittanceMatrix& ybus);

// Net scheduled injection per bus: in-service generation minus load.
Injections scheduled_injections(const grid::Grid& grid);

// Polar mismatch function of the power-flow equations. Unknowns are the angles
// of PV and PQ buses followed by the magnitudes of PQ buses.
class MismatchModel {
  public:
    MismatchModel(const grid::Grid& grid, const grid::AdmittanceMatrix& ybus);

    std::size_t dimension() const noexcept { return pvpq_.size() + pq_.size(); }
    const std::vector<std::size_t>& angle_buses() const noexcept { return pvpq_; }
    const std::vector<std::size_t>& magnitude_buses() const noexcept { return pq_; }

    std::vector<double> unknowns(std::span<const double> v, std::span<const double> theta) const;
    void assign(std::span<const double> x, std::span<double> v, std::span<double> theta) const;

    // Computed minus scheduled: [dP at PV+PQ buses, dQ at PQ buses].
    std::vector<double> mismatch(std::span<const double> v, std::span<const double> theta) const;

    Eigen::SparseMatrix<double> jacobian(std::span<const double> v,
                                         std::span<const double> theta) const;

  private:
    grid::AdmittanceMatrix ybus_;
    Injections scheduled_;
    std::vector<std::size_t> pvpq_;
    std::vector<std::size_t> pq_;
};

// Starting point: flat start sets PQ magnitudes to 1 and every angle to the
// slack angle; otherwise bus v_init/theta_init are used. Generator set points
// always fix PV and slack magnitudes.
void initial_state(const grid::Grid& grid, bool flat_start, std::vector<double>& v,
                   std::vector<double>& theta);

PFSolution solve_ac_power_flow(const grid::Grid& grid, const grid::AdmittanceMatrix& ybus,
                               const SolverOptions& options = {});

struct BranchFlow {
    std::size_t branch = 0;
    double p_from = 0.0;
    double q_from = 0.0;
    double p_to = 0.0;
    double q_to = 0.0;
};

// Throws ValidationError when the branch is out of service.
BranchFlow compute_branch_flow(const PFSolution& solution, const grid::Grid& grid,
                               std::size_t branch_index);

// Flows for every in-service branch, in branch order.
std::vector<BranchFlow> compute_branch_flows(const PFSolution& solution, const grid::Grid& grid);

struct Measurements {
    std::vector<double> p_inj;
    std::vector<double> q_inj;
    std::optional<std::vector<BranchFlow>> flows;
};

Measurements measure(const PFSolution& solution, const grid::Grid& grid,
                     const grid::AdmittanceMatrix& ybus, bool with_flows = false);

}  // namespace fdia::pf
