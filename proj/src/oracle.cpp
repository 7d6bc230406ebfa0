#include <meshot/oracle.hpp>

#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include <meshot/mesh_generators.hpp>

namespace meshot {

Eigen::MatrixXd graph_distances(const TriangleMesh& mesh, DistanceMode mode)
{
    const int n = mesh.num_vertices();
    Eigen::MatrixXd D(n, n);
    if (mode == DistanceMode::Euclidean) {
        for (int u = 0; u < n; ++u) {
            for (int w = 0; w < n; ++w) {
                D(u, w) = (mesh.vertices[u] - mesh.vertices[w]).norm();
            }
        }
        return D;
    }
    std::vector<std::vector<std::pair<int, double>>> adj(n);
    for (const Face& f : mesh.faces) {
        for (int j = 0; j < 3; ++j) {
            const int a = f[j];
            const int b = f[(j + 1) % 3];
            const double len = (mesh.vertices[a] - mesh.vertices[b]).norm();
            adj[a].emplace_back(b, len);
            adj[b].emplace_back(a, len);
        }
    }
    const double inf = std::numeric_limits<double>::infinity();
    using Item = std::pair<double, int>;
    for (int src = 0; src < n; ++src) {
        Eigen::VectorXd dist = Eigen::VectorXd::Constant(n, inf);
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        dist[src] = 0.0;
        heap.emplace(0.0, src);
        while (!heap.empty()) {
            const auto [d, u] = heap.top();
            heap.pop();
            if (d > dist[u]) {
                continue;
            }
            for (const auto& [w, len] : adj[u]) {
                if (d + len < dist[w]) {
                    dist[w] = d + len;
                    heap.emplace(dist[w], w);
                }
            }
        }
        if (!std::isfinite(dist.maxCoeff())) {
            throw MeshError("mesh is disconnected");
        }
        D.row(src) = dist.transpose();
    }
    return D;
}

Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& distances)
{
    return 0.5 * distances.array().square().matrix();
}

namespace {

///
/// Transportation simplex on a balanced problem with positive supplies and
/// demands. The basis is a spanning tree of the bipartite row/column graph
/// with m + n - 1 cells, degenerate zero-flow cells included.
///
class TransportationSimplex {
public:
    TransportationSimplex(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                          const Eigen::VectorXd& b)
        : c_(cost), m_(static_cast<int>(a.size())), n_(static_cast<int>(b.size())),
          flow_(Eigen::MatrixXd::Zero(m_, n_)),
          basic_(m_, std::vector<char>(n_, 0))
    {
        northwest_corner(a, b);
    }

    Eigen::MatrixXd solve()
    {
        const double scale = std::max(1.0, c_.cwiseAbs().maxCoeff());
        for (int iter = 0; iter < 100000; ++iter) {
            compute_potentials();
            int ei = -1;
            int ej = -1;
            double best = -1e-12 * scale;
            for (int i = 0; i < m_; ++i) {
                for (int j = 0; j < n_; ++j) {
                    if (basic_[i][j]) {
                        continue;
                    }
                    const double reduced = c_(i, j) - u_[i] - v_[j];
                    if (reduced < best) {
                        best = reduced;
                        ei = i;
                        ej = j;
                    }
                }
            }
            if (ei < 0) {
                return flow_;
            }
            pivot(ei, ej);
        }
        throw std::runtime_error("transportation simplex did not terminate");
    }

private:
    void northwest_corner(Eigen::VectorXd a, Eigen::VectorXd b)
    {
        int i = 0;
        int j = 0;
        while (i < m_ && j < n_) {
            const double q = std::min(a[i], b[j]);
            flow_(i, j) = q;
            basic_[i][j] = 1;
            a[i] -= q;
            b[j] -= q;
            if (i == m_ - 1 && j == n_ - 1) {
                break;
            }
            // Move along exactly one direction so the basis stays a tree.
            if ((a[i] <= b[j] && i < m_ - 1) || j == n_ - 1) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    // Tree nodes: rows 0..m-1, columns m..m+n-1.
    std::vector<std::vector<int>> tree() const
    {
        std::vector<std::vector<int>> adj(m_ + n_);
        for (int i = 0; i < m_; ++i) {
            for (int j = 0; j < n_; ++j) {
                if (basic_[i][j]) {
                    adj[i].push_back(m_ + j);
                    adj[m_ + j].push_back(i);
                }
            }
        }
        return adj;
    }

    void compute_potentials()
    {
        const auto adj = tree();
        u_.assign(m_, 0.0);
        v_.assign(n_, 0.0);
        std::vector<char> seen(m_ + n_, 0);
        std::vector<int> stack = {0};
        seen[0] = 1;
        while (!stack.empty()) {
            const int node = stack.back();
            stack.pop_back();
            for (int next : adj[node]) {
                if (seen[next]) {
                    continue;
                }
                seen[next] = 1;
                if (node < m_) {
                    v_[next - m_] = c_(node, next - m_) - u_[node];
                } else {
                    u_[next] = c_(next, node - m_) - v_[node - m_];
                }
                stack.push_back(next);
            }
        }
    }

    void pivot(int ei, int ej)
    {
        // Path in the tree from column ej back to row ei closes the cycle.
        const auto adj = tree();
        std::vector<int> parent(m_ + n_, -2);
        std::vector<int> queue = {ei};
        parent[ei] = -1;
        for (std::size_t k = 0; k < queue.size(); ++k) {
            for (int next : adj[queue[k]]) {
                if (parent[next] == -2) {
                    parent[next] = queue[k];
                    queue.push_back(next);
                }
            }
        }
        // Cells along the cycle, starting with the entering cell (sign +).
        std::vector<std::pair<int, int>> cycle = {{ei, ej}};
        for (int node = m_ + ej; parent[node] != -1; node = parent[node]) {
            const int p = parent[node];
            cycle.push_back(node >= m_ ? std::make_pair(p, node - m_) : std::make_pair(node, p - m_));
        }
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = 0;
        for (std::size_t k = 1; k < cycle.size(); k += 2) {
            const double f = flow_(cycle[k].first, cycle[k].second);
            if (f < theta) {
                theta = f;
                leave = k;
            }
        }
        for (std::size_t k = 0; k < cycle.size(); ++k) {
            flow_(cycle[k].first, cycle[k].second) += (k % 2 == 0 ? theta : -theta);
        }
        basic_[ei][ej] = 1;
        basic_[cycle[leave].first][cycle[leave].second] = 0;
        flow_(cycle[leave].first, cycle[leave].second) = 0.0;
    }

    const Eigen::MatrixXd& c_;
    int m_;
    int n_;
    Eigen::MatrixXd flow_;
    std::vector<std::vector<char>> basic_;
    std::vector<double> u_;
    std::vector<double> v_;
};

} // namespace

TransportPlan lp_transport(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply,
                           const Eigen::VectorXd& demand)
{
    if (cost.rows() != supply.size() || cost.cols() != demand.size()) {
        throw InputError("cost matrix does not match the marginals");
    }
    if (supply.minCoeff() < 0.0 || demand.minCoeff() < 0.0) {
        throw InputError("marginals must be nonnegative");
    }
    const double total = supply.sum();
    if (!(total > 0.0) || std::abs(total - demand.sum()) > 1e-9 * total) {
        throw InputError("marginals must carry the same positive mass");
    }
    std::vector<int> rows;
    std::vector<int> cols;
    for (int i = 0; i < supply.size(); ++i) {
        if (supply[i] > 0.0) {
            rows.push_back(i);
        }
    }
    for (int j = 0; j < demand.size(); ++j) {
        if (demand[j] > 0.0) {
            cols.push_back(j);
        }
    }
    Eigen::MatrixXd c(rows.size(), cols.size());
    Eigen::VectorXd a(rows.size());
    Eigen::VectorXd b(cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        a[i] = supply[rows[i]];
        for (std::size_t j = 0; j < cols.size(); ++j) {
            c(i, j) = cost(rows[i], cols[j]);
        }
    }
    for (std::size_t j = 0; j < cols.size(); ++j) {
        b[j] = demand[cols[j]];
    }
    b *= a.sum() / b.sum();

    const Eigen::MatrixXd flow = TransportationSimplex(c, a, b).solve();
    TransportPlan out;
    out.plan = Eigen::MatrixXd::Zero(supply.size(), demand.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            out.plan(rows[i], cols[j]) = flow(i, j);
            out.value += flow(i, j) * c(i, j);
        }
    }
    return out;
}

TransportPlan lp_transport(const Eigen::MatrixXd& cost, const TriangleMesh& mesh,
                           const DensityField& mu0, const DensityField& mu1)
{
    if (mu0.size() != mesh.num_vertices() || mu1.size() != mesh.num_vertices()) {
        throw InputError("density size does not match the mesh");
    }
    return lp_transport(cost, mesh.vertex_areas.cwiseProduct(mu0.values),
                        mesh.vertex_areas.cwiseProduct(mu1.values));
}

DensityField bump_density(const TriangleMesh& mesh, const Vec3& center, double radius)
{
    Eigen::VectorXd raw(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        const double q2 = (mesh.vertices[v] - center).squaredNorm() / (radius * radius);
        raw[v] = q2 < 1.0 ? (1.0 - q2) * (1.0 - q2) : 0.0;
    }
    return normalize_density(mesh, raw);
}

std::vector<ConvergenceRow> convergence_experiment(const std::vector<int>& side_counts,
                                                   const std::vector<int>& N_values,
                                                   const ConvergenceSetup& setup)
{
    std::vector<ConvergenceRow> rows;
    for (int side : side_counts) {
        const TriangleMesh mesh = make_unit_square(side);
        const MeshOperators ops = build_operators(mesh);
        const DensityField a = bump_density(mesh, setup.start, setup.radius);
        const DensityField b = bump_density(mesh, setup.end, setup.radius);
        const DensityField mid = bump_density(mesh, 0.5 * (setup.start + setup.end), setup.radius);
        for (int N : N_values) {
            if (N % 2 == 0) {
                throw std::invalid_argument("N must be odd so that t = 1/2 is a centered time");
            }
            SolverConfig cfg = setup.solver;
            cfg.N = N;
            const GeodesicResult res = solve_geodesic(mesh, ops, a, b, cfg);
            const Eigen::VectorXd half = res.mu_curve.row(N / 2).transpose();
            ConvergenceRow row;
            row.side = side;
            row.N = N;
            row.l1_error = mesh.vertex_areas.dot((half - mid.values).cwiseAbs());
            row.iterations = res.iterations;
            row.converged = res.converged;
            rows.push_back(row);
        }
    }
    return rows;
}

} // namespace meshot
