#include "fdia/power_flow.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

namespace fdia::pf {

using grid::BusKind;
using grid::Complex;

Injections compute_injections(std::span<const double> v, std::span<const double> theta,
                              const grid::AdmittanceMatrix& ybus) {
    const std::size_t n = ybus.size();
    if (v.size() != n || theta.size() != n) {
        throw DimensionError("state vectors do not match the admittance matrix dimension");
    }
    Injections out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        double p = 0.0;
        double q = 0.0;
        ybus.y.for_each_in_row(i, [&](std::size_t j, const Complex& y) {
            const double angle = theta[i] - theta[j];
            const double c = std::cos(angle);
            const double s = std::sin(angle);
            const double vv = v[i] * v[j];
            p += vv * (y.real() * c + y.imag() * s);
            q += vv * (y.real() * s - y.imag() * c);
        });
        out.p[i] = p;
        out.q[i] = q;
    }
    return out;
}

Injections scheduled_injections(const grid::Grid& grid) {
    const std::size_t n = grid.size();
    Injections s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        s.p[i] = -grid.buses[i].p_load;
        s.q[i] = -grid.buses[i].q_load;
    }
    for (const auto& gen : grid.gens) {
        if (gen.in_service) {
            s.p[gen.bus] += gen.p_gen;
            s.q[gen.bus] += gen.q_gen;
        }
    }
    return s;
}

MismatchModel::MismatchModel(const grid::Grid& grid, const grid::AdmittanceMatrix& ybus)
    : ybus_(ybus), scheduled_(scheduled_injections(grid)) {
    if (ybus.size() != grid.size()) {
        throw DimensionError("admittance matrix does not match the grid");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.buses[i].kind != BusKind::slack) {
            pvpq_.push_back(i);
        }
        if (grid.buses[i].kind == BusKind::pq) {
            pq_.push_back(i);
        }
    }
}

std::vector<double> MismatchModel::unknowns(std::span<const double> v,
                                            std::span<const double> theta) const {
    std::vector<double> x;
    x.reserve(dimension());
    for (std::size_t i : pvpq_) x.push_back(theta[i]);
    for (std::size_t i : pq_) x.push_back(v[i]);
    return x;
}

void MismatchModel::assign(std::span<const double> x, std::span<double> v,
                           std::span<double> theta) const {
    if (x.size() != dimension()) {
        throw DimensionError("unknown vector has the wrong length");
    }
    std::size_t k = 0;
    for (std::size_t i : pvpq_) theta[i] = x[k++];
    for (std::size_t i : pq_) v[i] = x[k++];
}

std::vector<double> MismatchModel::mismatch(std::span<const double> v,
                                            std::span<const double> theta) const {
    const Injections calc = compute_injections(v, theta, ybus_);
    std::vector<double> f;
    f.reserve(dimension());
    for (std::size_t i : pvpq_) f.push_back(calc.p[i] - scheduled_.p[i]);
    for (std::size_t i : pq_) f.push_back(calc.q[i] - scheduled_.q[i]);
    return f;
}

Eigen::SparseMatrix<double> MismatchModel::jacobian(std::span<const double> v,
                                                    std::span<const double> theta) const {
    const std::size_t n = ybus_.size();
    std::vector<Complex> volt(n);
    std::vector<Complex> unit(n);
    for (std::size_t i = 0; i < n; ++i) {
        unit[i] = std::polar(1.0, theta[i]);
        volt[i] = v[i] * unit[i];
    }
    std::vector<Complex> current(n, Complex{});
    for (std::size_t i = 0; i < n; ++i) {
        ybus_.y.for_each_in_row(i, [&](std::size_t j, const Complex& y) { current[i] += y * volt[j]; });
    }

    constexpr long absent = -1;
    std::vector<long> angle_col(n, absent);
    std::vector<long> mag_col(n, absent);
    for (std::size_t k = 0; k < pvpq_.size(); ++k) angle_col[pvpq_[k]] = static_cast<long>(k);
    for (std::size_t k = 0; k < pq_.size(); ++k) {
        mag_col[pq_[k]] = static_cast<long>(pvpq_.size() + k);
    }
    std::vector<long> p_row = angle_col;  // dP rows share the angle ordering
    std::vector<long> q_row = mag_col;

    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(4 * ybus_.y.nnz());
    const Complex j_unit(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (p_row[i] == absent && q_row[i] == absent) {
            continue;
        }
        ybus_.y.for_each_in_row(i, [&](std::size_t k, const Complex& y) {
            // dS_i/dtheta_k and dS_i/d|V_k| in complex form.
            Complex ds_dangle = -j_unit * volt[i] * std::conj(y * volt[k]);
            Complex ds_dmag = volt[i] * std::conj(y * unit[k]);
            if (k == i) {
                ds_dangle += j_unit * volt[i] * std::conj(current[i]);
                ds_dmag += std::conj(current[i]) * unit[i];
            }
            if (p_row[i] != absent) {
                if (angle_col[k] != absent) entries.emplace_back(p_row[i], angle_col[k], ds_dangle.real());
                if (mag_col[k] != absent) entries.emplace_back(p_row[i], mag_col[k], ds_dmag.real());
            }
            if (q_row[i] != absent) {
                if (angle_col[k] != absent) entries.emplace_back(q_row[i], angle_col[k], ds_dangle.imag());
                if (mag_col[k] != absent) entries.emplace_back(q_row[i], mag_col[k], ds_dmag.imag());
            }
        });
    }
    const auto dim = static_cast<Eigen::Index>(dimension());
    Eigen::SparseMatrix<double> jac(dim, dim);
    jac.setFromTriplets(entries.begin(), entries.end());
    return jac;
}

void initial_state(const grid::Grid& grid, bool flat_start, std::vector<double>& v,
                   std::vector<double>& theta) {
    const std::size_t n = grid.size();
    v.assign(n, 1.0);
    theta.assign(n, grid.buses[grid.slack_index].theta_init);
    if (!flat_start) {
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = grid.buses[i].v_init;
            theta[i] = grid.buses[i].theta_init;
        }
    }
    std::vector<bool> fixed(n, false);
    for (const auto& gen : grid.gens) {
        if (gen.in_service && grid.buses[gen.bus].kind != BusKind::pq && !fixed[gen.bus]) {
            v[gen.bus] = gen.v_set;
            fixed[gen.bus] = true;
        }
    }
}

namespace {

double max_abs(const std::vector<double>& f) {
    double m = 0.0;
    for (double x : f) {
        m = std::max(m, std::abs(x));
    }
    return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
}

Eigen::VectorXd solve_linear(const Eigen::SparseMatrix<double>& jac, const Eigen::VectorXd& rhs,
                             bool dense) {
    if (dense) {
        const Eigen::MatrixXd full(jac);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(full);
        if (!(lu.rcond() > 1e-14)) {
            throw SingularJacobianError("power-flow Jacobian is singular");
        }
        return lu.solve(rhs);
    }
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(jac);
    lu.factorize(jac);
    if (lu.info() != Eigen::Success) {
        throw SingularJacobianError("power-flow Jacobian is singular: " + lu.lastErrorMessage());
    }
    Eigen::VectorXd dx = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !dx.allFinite()) {
        throw SingularJacobianError("sparse solve of the power-flow Jacobian failed");
    }
    return dx;
}

}  // namespace

PFSolution solve_ac_power_flow(const grid::Grid& grid, const grid::AdmittanceMatrix& ybus,
                               const SolverOptions& options) {
    const MismatchModel model(grid, ybus);
    PFSolution sol;
    initial_state(grid, options.flat_start, sol.v, sol.theta);

    const bool dense = options.linear_solver == LinearSolver::dense ||
                       (options.linear_solver == LinearSolver::automatic &&
                        grid.size() <= options.dense_limit);
    std::vector<double> trace;
    for (int iter = 0;; ++iter) {
        const std::vector<double> f = model.mismatch(sol.v, sol.theta);
        const double worst = max_abs(f);
        trace.push_back(worst);
        if (worst < options.tol) {
            sol.iterations = iter;
            sol.max_mismatch = worst;
            return sol;
        }
        if (iter >= options.max_iter || !std::isfinite(worst)) {
            std::ostringstream msg;
            msg << "power flow did not converge in " << options.max_iter
                << " iterations (max mismatch " << worst << " p.u.)";
            throw DivergenceError(msg.str(), std::move(trace));
        }
        const auto jac = model.jacobian(sol.v, sol.theta);
        const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
        const Eigen::VectorXd dx = solve_linear(jac, rhs, dense);
        std::vector<double> x = model.unknowns(sol.v, sol.theta);
        for (std::size_t k = 0; k < x.size(); ++k) {
            x[k] += dx[static_cast<Eigen::Index>(k)];
        }
        model.assign(x, sol.v, sol.theta);
    }
}

BranchFlow compute_branch_flow(const PFSolution& solution, const grid::Grid& grid,
                               std::size_t branch_index) {
    if (branch_index >= grid.branches.size()) {
        throw DimensionError("branch index out of range");
    }
    const grid::Branch& br = grid.branches[branch_index];
    if (!br.in_service) {
        throw ValidationError("branch " + std::to_string(branch_index) + " is out of service");
    }
    if (solution.v.size() != grid.size() || solution.theta.size() != grid.size()) {
        throw DimensionError("solution does not match the grid");
    }
    const auto a = grid::branch_admittance(br);
    const Complex vf = std::polar(solution.v[br.from], solution.theta[br.from]);
    const Complex vt = std::polar(solution.v[br.to], solution.theta[br.to]);
    const Complex sf = vf * std::conj(a.yff * vf + a.yft * vt);
    const Complex st = vt * std::conj(a.ytf * vf + a.ytt * vt);
    return BranchFlow{branch_index, sf.real(), sf.imag(), st.real(), st.imag()};
}

std::vector<BranchFlow> compute_branch_flows(const PFSolution& solution, const grid::Grid& grid) {
    std::vector<BranchFlow> flows;
    for (std::size_t k = 0; k < grid.branches.size(); ++k) {
        if (grid.branches[k].in_service) {
            flows.push_back(compute_branch_flow(solution, grid, k));
        }
    }
    return flows;
}

Measurements measure(const PFSolution& solution, const grid::Grid& grid,
                     const grid::AdmittanceMatrix& ybus, bool with_flows) {
    Injections inj = compute_injections(solution.v, solution.theta, ybus);
    Measurements m{std::move(inj.p), std::move(inj.q), std::nullopt};
    if (with_flows) {
        m.flows = compute_branch_flows(solution, grid);
    }
    return m;
}

}  // namespace fdia::pf
