#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace oracle {

using Complex = std::complex<double>;

Eigen::MatrixXd Graph::adjacency() const {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const Edge& e : edges) {
        w(e.a, e.b) += e.w;
        w(e.b, e.a) += e.w;
    }
    return w;
}

fdia::grid::WeightedGraph Graph::to_weighted() const {
    std::vector<fdia::grid::WeightedEdge> list;
    for (const Edge& e : edges) list.push_back({e.a, e.b, e.w});
    return fdia::grid::WeightedGraph::from_edges(n, list);
}

Graph random_connected_graph(std::size_t n, std::size_t extra, fdia::Rng& rng) {
    Graph g;
    g.n = n;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t parent = order[rng.below(i)];
        g.edges.push_back({order[i], parent, rng.uniform(0.2, 3.0)});
    }
    for (std::size_t k = 0; k < extra && n > 2; ++k) {
        const std::size_t a = rng.below(n);
        std::size_t b = rng.below(n - 1);
        if (b >= a) ++b;
        g.edges.push_back({a, b, rng.uniform(0.2, 3.0)});
    }
    return g;
}

Graph ring(std::size_t n) {
    Graph g;
    g.n = n;
    for (std::size_t i = 0; i < n; ++i) g.edges.push_back({i, (i + 1) % n, 1.0});
    return g;
}

std::size_t count_components(std::size_t n, const std::vector<Edge>& edges) {
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::size_t components = n;
    for (const Edge& e : edges) {
        const std::size_t ra = find(e.a), rb = find(e.b);
        if (ra != rb) {
            parent[ra] = rb;
            --components;
        }
    }
    return components;
}

std::vector<std::size_t> hop_distances(const Graph& g, std::size_t source) {
    std::vector<std::vector<std::size_t>> nbr(g.n);
    for (const Edge& e : g.edges) {
        nbr[e.a].push_back(e.b);
        nbr[e.b].push_back(e.a);
    }
    std::vector<std::size_t> dist(g.n, std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> queue{source};
    dist[source] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const std::size_t u = queue[head];
        for (std::size_t v : nbr[u]) {
            if (dist[v] == std::numeric_limits<std::size_t>::max()) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& w) {
    const Eigen::VectorXd d = w.rowwise().sum();
    const Eigen::VectorXd s = d.array().rsqrt();
    Eigen::MatrixXd l = -(s.asDiagonal() * w * s.asDiagonal());
    l.diagonal().array() += 1.0;
    return l;
}

double lambda_max(const Eigen::MatrixXd& laplacian) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(laplacian);
    return es.eigenvalues().maxCoeff();
}

std::vector<Eigen::MatrixXd> chebyshev_matrices(const Eigen::MatrixXd& laplacian, double lmax,
                                                std::size_t order) {
    const auto n = laplacian.rows();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd scaled = 2.0 / lmax * laplacian - id;
    std::vector<Eigen::MatrixXd> t;
    for (std::size_t k = 0; k < order; ++k) {
        if (k == 0) t.push_back(id);
        else if (k == 1) t.push_back(scaled);
        else t.push_back(2.0 * scaled * t[k - 1] - t[k - 2]);
    }
    return t;
}

Eigen::VectorXd spectral_filter_reference(const Eigen::MatrixXd& laplacian, double lmax,
                                          const std::vector<double>& theta, const Eigen::VectorXd& x) {
    if (laplacian.rows() > 256) {
        throw std::invalid_argument("dense spectral reference is limited to 256 vertices");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(laplacian);
    const Eigen::VectorXd lam = es.eigenvalues();
    Eigen::VectorXd g(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        const double arg = std::clamp(2.0 * lam(i) / lmax - 1.0, -1.0, 1.0);
        double sum = 0.0;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            sum += theta[k] * std::cos(static_cast<double>(k) * std::acos(arg));
        }
        g(i) = sum;
    }
    const Eigen::MatrixXd& u = es.eigenvectors();
    return u * (g.asDiagonal() * (u.transpose() * x));
}

Eigen::MatrixXcd dense_ybus(const fdia::grid::Grid& grid) {
    const auto n = static_cast<Eigen::Index>(grid.buses.size());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& br : grid.branches) {
        if (!br.in_service) continue;
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const Complex half = Complex(0.0, br.b_charging / 2.0);
        Eigen::Matrix2cd primitive;
        primitive << ys + half, -ys, -ys, ys + half;
        const Complex a = std::polar(br.tap, br.shift);
        Eigen::Matrix2cd c = Eigen::Matrix2cd::Zero();
        c(0, 0) = 1.0 / a;
        c(1, 1) = 1.0;
        const Eigen::Matrix2cd block = c.adjoint() * primitive * c;
        const Eigen::Index idx[2] = {static_cast<Eigen::Index>(br.from), static_cast<Eigen::Index>(br.to)};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) y(idx[i], idx[j]) += block(i, j);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i, i) += Complex(grid.buses[static_cast<std::size_t>(i)].g_shunt,
                           grid.buses[static_cast<std::size_t>(i)].b_shunt);
    }
    return y;
}

void dense_injections(const Eigen::MatrixXcd& y, const std::vector<double>& v,
                      const std::vector<double>& theta, std::vector<double>& p, std::vector<double>& q) {
    const auto n = y.rows();
    Eigen::VectorXcd volts(n);
    for (Eigen::Index i = 0; i < n; ++i) volts(i) = std::polar(v[static_cast<std::size_t>(i)], theta[static_cast<std::size_t>(i)]);
    const Eigen::VectorXcd s = volts.cwiseProduct((y * volts).conjugate());
    p.resize(static_cast<std::size_t>(n));
    q.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        p[static_cast<std::size_t>(i)] = s(i).real();
        q[static_cast<std::size_t>(i)] = s(i).imag();
    }
}

TwoBusSolution two_bus_grid_search(double v1, double r, double x, double b, double p2, double q2) {
    const Complex ys = 1.0 / Complex(r, x);
    const Complex y22 = ys + Complex(0.0, b / 2.0);
    const Complex y21 = -ys;
    auto cost = [&](double vm, double va) {
        const Complex v2 = std::polar(vm, va);
        const Complex s2 = v2 * std::conj(y22 * v2 + y21 * Complex(v1, 0.0));
        const double dp = s2.real() + p2;
        const double dq = s2.imag() + q2;
        return dp * dp + dq * dq;
    };
    double cv = 1.0, ca = 0.0;
    double wv = 0.3, wa = 1.0;
    constexpr int steps = 20;
    for (int round = 0; round < 60; ++round) {
        double best = std::numeric_limits<double>::infinity();
        double bv = cv, ba = ca;
        for (int i = -steps; i <= steps; ++i) {
            for (int j = -steps; j <= steps; ++j) {
                const double vm = cv + wv * i / steps;
                const double va = ca + wa * j / steps;
                const double c = cost(vm, va);
                if (c < best) {
                    best = c;
                    bv = vm;
                    ba = va;
                }
            }
        }
        cv = bv;
        ca = ba;
        wv /= 4.0;
        wa /= 4.0;
    }
    return {cv, ca};
}

std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double step) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + step;
        const double up = f(x);
        x[i] = saved - step;
        const double down = f(x);
        x[i] = saved;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

fdia::grid::Grid random_grid(std::size_t n, std::size_t extra, fdia::Rng& rng) {
    using namespace fdia::grid;
    const Graph topo = random_connected_graph(n, extra, rng);
    Grid g;
    g.base_mva = 100.0;
    for (std::size_t i = 0; i < n; ++i) {
        Bus bus;
        bus.label = std::to_string(i + 1);
        bus.kind = i == 0 ? BusKind::slack : (i % 4 == 0 ? BusKind::pv : BusKind::pq);
        if (bus.kind == BusKind::pq) {
            bus.p_load = rng.uniform(0.02, 0.15);
            bus.q_load = rng.uniform(0.0, 0.05);
        }
        g.buses.push_back(bus);
        if (bus.kind != BusKind::pq) {
            Gen gen;
            gen.bus = i;
            gen.p_gen = i == 0 ? 0.0 : rng.uniform(0.05, 0.2);
            gen.v_set = rng.uniform(1.0, 1.04);
            g.gens.push_back(gen);
        }
    }
    for (const Edge& e : topo.edges) {
        Branch br;
        br.from = e.a;
        br.to = e.b;
        br.r = rng.uniform(0.005, 0.03);
        br.x = rng.uniform(0.03, 0.12);
        br.b_charging = rng.uniform(0.0, 0.04);
        g.branches.push_back(br);
    }
    g.slack_index = 0;
    return g;
}

std::string two_bus_case_text(double pd_mw, double x) {
    std::ostringstream out;
    out.precision(17);
    out << "function mpc = two_bus\n"
        << "mpc.version = '2';\n"
        << "mpc.baseMVA = 100;\n"
        << "mpc.bus = [\n"
        << "\t1\t3\t0\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;\n"
        << "\t2\t1\t" << pd_mw << "\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;\n"
        << "];\n"
        << "mpc.gen = [\n"
        << "\t1\t0\t0\t300\t-300\t1\t100\t1\t250\t10;\n"
        << "];\n"
        << "mpc.branch = [\n"
        << "\t1\t2\t0\t" << x << "\t0\t0\t0\t0\t0\t0\t1\t-360\t360;\n"
        << "];\n";
    return out.str();
}

}  // namespace oracle
