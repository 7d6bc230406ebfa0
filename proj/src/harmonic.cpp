#include <meshot/harmonic.hpp>

#include <cmath>
#include <map>
#include <stdexcept>

#include <meshot/projection.hpp>

namespace meshot {

namespace {

void finish_domain(DomainMesh& d)
{
    const int nv = d.num_vertices();
    d.vertex_measure.assign(nv, 0.0);
    std::vector<Eigen::Vector2d> flux(nv, Eigen::Vector2d::Zero());
    for (int F = 0; F < d.num_cells(); ++F) {
        const int slots = static_cast<int>(d.cells[F].size());
        for (int j = 0; j < slots; ++j) {
            const int x = d.cells[F][j];
            d.vertex_measure[x] += d.cell_measure[F] / slots;
            flux[x] += d.cell_measure[F] * d.cell_gradients[F][j];
        }
    }
    for (int x : d.boundary) {
        d.boundary_flux.push_back(flux[x]);
    }
}

} // namespace

DomainMesh make_segment_domain(int intervals, double length)
{
    if (intervals < 1 || !(length > 0.0)) {
        throw MeshError("segment domain needs at least one interval and positive length");
    }
    DomainMesh d;
    d.dim = 1;
    const double h = length / intervals;
    for (int i = 0; i <= intervals; ++i) {
        d.points.emplace_back(i * h, 0.0);
    }
    for (int i = 0; i < intervals; ++i) {
        d.cells.push_back({i, i + 1});
        d.cell_measure.push_back(h);
        d.cell_gradients.push_back({Eigen::Vector2d(-1.0 / h, 0.0), Eigen::Vector2d(1.0 / h, 0.0)});
    }
    d.boundary = {0, intervals};
    finish_domain(d);
    return d;
}

DomainMesh make_planar_domain(std::vector<Eigen::Vector2d> points, std::vector<Face> triangles)
{
    DomainMesh d;
    d.dim = 2;
    d.points = std::move(points);
    std::map<std::pair<int, int>, int> edge_count;
    for (const Face& t : triangles) {
        for (int v : t) {
            if (v < 0 || v >= static_cast<int>(d.points.size())) {
                throw MeshError("domain triangle index out of range");
            }
        }
        const Eigen::Vector2d& a = d.points[t[0]];
        const Eigen::Vector2d& b = d.points[t[1]];
        const Eigen::Vector2d& c = d.points[t[2]];
        const double twice = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        if (std::abs(twice) < 1e-14) {
            throw MeshError("zero-area domain triangle");
        }
        const double sign = twice > 0.0 ? 1.0 : -1.0;
        std::vector<Eigen::Vector2d> grads(3);
        for (int j = 0; j < 3; ++j) {
            const Eigen::Vector2d e = d.points[t[(j + 2) % 3]] - d.points[t[(j + 1) % 3]];
            // Rotate the opposite edge inward; its length over twice the area is |grad|.
            grads[j] = sign * Eigen::Vector2d(-e.y(), e.x()) / std::abs(twice);
        }
        d.cells.push_back({t[0], t[1], t[2]});
        d.cell_measure.push_back(0.5 * std::abs(twice));
        d.cell_gradients.push_back(grads);
        for (int j = 0; j < 3; ++j) {
            const int u = t[j];
            const int w = t[(j + 1) % 3];
            ++edge_count[{std::min(u, w), std::max(u, w)}];
        }
    }
    std::vector<bool> on_boundary(d.points.size(), false);
    for (const auto& [edge, count] : edge_count) {
        if (count == 1) {
            on_boundary[edge.first] = on_boundary[edge.second] = true;
        }
    }
    for (int x = 0; x < static_cast<int>(d.points.size()); ++x) {
        if (on_boundary[x]) {
            d.boundary.push_back(x);
        }
    }
    finish_domain(d);
    return d;
}

DomainMesh make_triangle_domain(int divisions)
{
    if (divisions < 1) {
        throw MeshError("triangle domain needs at least one division");
    }
    const Eigen::Vector2d c0(0.0, 0.0);
    const Eigen::Vector2d c1(1.0, 0.0);
    const Eigen::Vector2d c2(0.5, std::sqrt(3.0) / 2.0);
    std::vector<Eigen::Vector2d> pts = {c0, c1, c2};
    std::map<std::pair<int, int>, int> index; // (i, j) lattice -> vertex
    index[{0, 0}] = 0;
    index[{divisions, 0}] = 1;
    index[{0, divisions}] = 2;
    for (int j = 0; j <= divisions; ++j) {
        for (int i = 0; i + j <= divisions; ++i) {
            if (index.count({i, j})) {
                continue;
            }
            const double a = static_cast<double>(i) / divisions;
            const double b = static_cast<double>(j) / divisions;
            pts.push_back(c0 + a * (c1 - c0) + b * (c2 - c0));
            index[{i, j}] = static_cast<int>(pts.size()) - 1;
        }
    }
    std::vector<Face> tris;
    for (int j = 0; j < divisions; ++j) {
        for (int i = 0; i + j < divisions; ++i) {
            tris.push_back({index[{i, j}], index[{i + 1, j}], index[{i, j + 1}]});
            if (i + j + 1 < divisions) {
                tris.push_back({index[{i + 1, j}], index[{i + 1, j + 1}], index[{i, j + 1}]});
            }
        }
    }
    return make_planar_domain(std::move(pts), std::move(tris));
}

namespace {

class HarmonicAdmm {
public:
    HarmonicAdmm(const DomainMesh& domain, const TriangleMesh& mesh, const MeshOperators& ops,
                  const BoundaryData& bc, const SolverConfig& cfg)
        : dom_(domain), mesh_(mesh), ops_(ops), cfg_(cfg)
    {
        cfg_.validate();
        if (cfg_.alpha != 0.0) {
            throw std::invalid_argument("congestion is not supported for harmonic maps");
        }
        if (bc.densities.size() != dom_.boundary.size()) {
            throw InputError("need one boundary density per boundary vertex");
        }
        n_ = mesh.num_vertices();
        nT_ = mesh.num_faces();
        d_ = dom_.dim;
        nF_ = dom_.num_cells();
        K_ = d_ * dom_.num_vertices();
        slots_ = d_ + 1;
        for (const DensityField& rho : bc.densities) {
            if (rho.size() != n_ || !rho.values.allFinite() || rho.values.minCoeff() < 0.0 ||
                std::abs(total_mass(mesh, rho.values) - 1.0) > 1e-9) {
                throw InputError("boundary densities must be normalized and match the target mesh");
            }
        }
        r_ = cfg.r > 0.0 ? cfg.r : 1.0 / (mesh.total_area() * mesh.total_area());

        // Boundary pairing: row (x, c) of grad J is flux_c(x) * |v| * rho_x.
        gradJ_ = TimeField::Zero(K_, n_);
        for (std::size_t b = 0; b < dom_.boundary.size(); ++b) {
            const int x = dom_.boundary[b];
            for (int c = 0; c < d_; ++c) {
                gradJ_.row(x * d_ + c) +=
                    dom_.boundary_flux[b][c] *
                    mesh.vertex_areas.cwiseProduct(bc.densities[b].values).transpose();
            }
        }
        boundary_ = bc;

        SpaceTimeOperator op;
        op.P = Eigen::MatrixXd::Zero(K_, K_);
        for (int F = 0; F < nF_; ++F) {
            const Eigen::VectorXd g = cell_divergence(F);
            op.P += dom_.cell_measure[F] * g * g.transpose();
        }
        op.Q.resize(K_);
        for (int x = 0; x < dom_.num_vertices(); ++x) {
            op.Q.segment(x * d_, d_).setConstant(3.0 * dom_.vertex_measure[x]);
        }
        op.M = ops.vertex_mass;
        op.L = ops.laplacian;
        solver_ = make_space_time_solver(op, LinearBackend::Modal);

        phi_ = TimeField::Zero(K_, n_);
        A_ = TimeField::Zero(nF_, n_);
        mu_ = initial_density(bc);
        const Eigen::Index groups = static_cast<Eigen::Index>(nF_) * slots_ * d_ * nT_;
        m_ = CopyField::Zero(3, groups * 3);
        Bsum_ = Eigen::Matrix3Xd::Zero(3, groups);
        wsum_ = Bsum_;
    }

    HarmonicResult run()
    {
        HarmonicResult res;
        int it = 0;
        for (it = 1; it <= cfg_.max_iters; ++it) {
            double primal = 0.0;
            double dual = 0.0;
            step(primal, dual);
            const double defect = ((mu_ * mesh_.vertex_areas).array() - 1.0).abs().maxCoeff();
            res.history.push_back({it, primal, dual, r_, objective(), defect});
            if (primal < cfg_.tol && dual < cfg_.tol && defect < 0.1 * cfg_.tol) {
                res.converged = true;
                break;
            }
            if (cfg_.penalty_adapt && it % cfg_.adapt_interval == 0) {
                const double next = update_penalty(r_, primal / std::max(q_norm_, 1e-300),
                                                   dual / std::max(y_norm_, 1e-300));
                wsum_ += (r_ - next) * Bsum_;
                r_ = next;
            }
        }
        res.iterations = std::min(it, cfg_.max_iters);
        res.cell_mu = mu_;
        res.phi = phi_;
        res.dual_objective = objective();
        res.energy = energy();
        res.vertex_mu = TimeField::Zero(dom_.num_vertices(), n_);
        std::vector<double> weight(dom_.num_vertices(), 0.0);
        for (int F = 0; F < nF_; ++F) {
            for (int x : dom_.cells[F]) {
                res.vertex_mu.row(x) += dom_.cell_measure[F] * mu_.row(F);
                weight[x] += dom_.cell_measure[F];
            }
        }
        for (int x = 0; x < dom_.num_vertices(); ++x) {
            res.vertex_mu.row(x) /= weight[x];
        }
        for (std::size_t b = 0; b < dom_.boundary.size(); ++b) {
            res.vertex_mu.row(dom_.boundary[b]) = boundary_.densities[b].values.transpose();
        }
        return res;
    }

private:
    /// Cell averages of the discrete harmonic extension of the boundary data
    /// (linear interpolation on a segment).
    TimeField initial_density(const BoundaryData& bc) const
    {
        const int nv = dom_.num_vertices();
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(nv, nv);
        for (int F = 0; F < nF_; ++F) {
            for (int i = 0; i < slots_; ++i) {
                for (int j = 0; j < slots_; ++j) {
                    S(dom_.cells[F][i], dom_.cells[F][j]) +=
                        dom_.cell_measure[F] *
                        dom_.cell_gradients[F][i].head(d_).dot(dom_.cell_gradients[F][j].head(d_));
                }
            }
        }
        Eigen::MatrixXd values = Eigen::MatrixXd::Zero(nv, n_);
        std::vector<bool> fixed(nv, false);
        for (std::size_t b = 0; b < dom_.boundary.size(); ++b) {
            values.row(dom_.boundary[b]) = bc.densities[b].values.transpose();
            fixed[dom_.boundary[b]] = true;
        }
        std::vector<int> free;
        for (int x = 0; x < nv; ++x) {
            if (!fixed[x]) {
                free.push_back(x);
            }
        }
        if (!free.empty()) {
            const int nf = static_cast<int>(free.size());
            Eigen::MatrixXd S_ff(nf, nf);
            Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nf, n_);
            for (int a = 0; a < nf; ++a) {
                for (int b = 0; b < nf; ++b) {
                    S_ff(a, b) = S(free[a], free[b]);
                }
                for (int x = 0; x < nv; ++x) {
                    if (fixed[x]) {
                        rhs.row(a) -= S(free[a], x) * values.row(x);
                    }
                }
            }
            const Eigen::MatrixXd interior = S_ff.ldlt().solve(rhs);
            for (int a = 0; a < nf; ++a) {
                values.row(free[a]) = interior.row(a);
            }
        }
        TimeField mu(nF_, n_);
        for (int F = 0; F < nF_; ++F) {
            mu.row(F).setZero();
            for (int x : dom_.cells[F]) {
                mu.row(F) += values.row(x) / slots_;
            }
        }
        return mu;
    }

    /// Row vector of the cell divergence over the K potential rows.
    Eigen::VectorXd cell_divergence(int F) const
    {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(K_);
        for (int j = 0; j < slots_; ++j) {
            for (int c = 0; c < d_; ++c) {
                g[dom_.cells[F][j] * d_ + c] += dom_.cell_gradients[F][j][c];
            }
        }
        return g;
    }

    Eigen::Index group(int F, int j, int c, int f) const
    {
        return ((static_cast<Eigen::Index>(F) * slots_ + j) * d_ + c) * nT_ + f;
    }

    double objective() const { return (gradJ_.array() * phi_.array()).sum(); }

    /// Divergence of phi on every cell, nF x n.
    TimeField divergence(const TimeField& phi) const
    {
        TimeField out = TimeField::Zero(nF_, n_);
        for (int F = 0; F < nF_; ++F) {
            for (int j = 0; j < slots_; ++j) {
                for (int c = 0; c < d_; ++c) {
                    out.row(F) += dom_.cell_gradients[F][j][c] * phi.row(dom_.cells[F][j] * d_ + c);
                }
            }
        }
        return out;
    }

    TimeField divergence_adjoint(const TimeField& y) const
    {
        TimeField out = TimeField::Zero(K_, n_);
        for (int F = 0; F < nF_; ++F) {
            for (int j = 0; j < slots_; ++j) {
                for (int c = 0; c < d_; ++c) {
                    out.row(dom_.cells[F][j] * d_ + c) +=
                        dom_.cell_measure[F] * dom_.cell_gradients[F][j][c] * y.row(F);
                }
            }
        }
        return out * mesh_.vertex_areas.asDiagonal();
    }

    TimeField copy_adjoint(const Eigen::Matrix3Xd& ysum) const
    {
        TimeField out = TimeField::Zero(K_, n_);
        for (int F = 0; F < nF_; ++F) {
            for (int j = 0; j < slots_; ++j) {
                for (int c = 0; c < d_; ++c) {
                    auto row = out.row(dom_.cells[F][j] * d_ + c);
                    for (int f = 0; f < nT_; ++f) {
                        const Vec3 Y = ysum.col(group(F, j, c, f));
                        const double w = dom_.cell_measure[F] * mesh_.face_areas[f] / slots_;
                        for (int k = 0; k < 3; ++k) {
                            row[mesh_.faces[f][k]] += w * ops_.hat_gradients[f][k].dot(Y);
                        }
                    }
                }
            }
        }
        return out;
    }

    void step(double& primal, double& dual)
    {
        const double r = r_;
        const Eigen::VectorXd& va = mesh_.vertex_areas;

        TimeField rhs = gradJ_ - divergence_adjoint(mu_ - r * A_) - copy_adjoint(wsum_);
        phi_ = solver_->solve(rhs / r);
        const TimeField div = divergence(phi_);
        const Eigen::MatrixXd Gk = ops_.gradient * phi_.transpose();

        const TimeField A_old = A_;
        const Eigen::Matrix3Xd Bsum_old = Bsum_;
        Bsum_.setZero();
        wsum_.setZero();
        double primal_sq = 0.0;
        double q_sq = 0.0;
        double y_sq = 0.0;
        for (int F = 0; F < nF_; ++F) {
            const double cellm = dom_.cell_measure[F];
            for (int v = 0; v < n_; ++v) {
                const double a_target = div(F, v) + mu_(F, v) / r;
                double S = 0.0;
                for (int cr = ops_.corner_offsets[v]; cr < ops_.corner_offsets[v + 1]; ++cr) {
                    const int f = ops_.corners[cr] / 3;
                    const int k = ops_.corners[cr] % 3;
                    const double cf = mesh_.face_areas[f] / (6.0 * slots_ * va[v]);
                    for (int j = 0; j < slots_; ++j) {
                        for (int c = 0; c < d_; ++c) {
                            const Eigen::Index idx = group(F, j, c, f) * 3 + k;
                            const int row = dom_.cells[F][j] * d_ + c;
                            const Vec3 b = Gk.col(row).segment<3>(3 * f) + m_.col(idx) / r;
                            S += cf * b.squaredNorm();
                        }
                    }
                }
                const double beta = paraboloid_shift(a_target, S);
                const double a_new = a_target - beta;
                primal_sq += cellm * va[v] * (a_new - div(F, v)) * (a_new - div(F, v));
                A_(F, v) = a_new;
                mu_(F, v) = r * beta;
                q_sq += cellm * va[v] * a_new * a_new;
                y_sq += cellm * va[v] * mu_(F, v) * mu_(F, v);
                const double shrink = 1.0 / (1.0 + beta / 3.0);
                for (int cr = ops_.corner_offsets[v]; cr < ops_.corner_offsets[v + 1]; ++cr) {
                    const int f = ops_.corners[cr] / 3;
                    const int k = ops_.corners[cr] % 3;
                    const double w = cellm * mesh_.face_areas[f] / slots_;
                    for (int j = 0; j < slots_; ++j) {
                        for (int c = 0; c < d_; ++c) {
                            const Eigen::Index g = group(F, j, c, f);
                            const Eigen::Index idx = g * 3 + k;
                            const int row = dom_.cells[F][j] * d_ + c;
                            const Vec3 grad = Gk.col(row).segment<3>(3 * f);
                            const Vec3 B = shrink * (grad + m_.col(idx) / r);
                            primal_sq += w * (B - grad).squaredNorm();
                            m_.col(idx) -= r * (B - grad);
                            q_sq += w * B.squaredNorm();
                            y_sq += w * m_.col(idx).squaredNorm();
                            Bsum_.col(g) += B;
                            wsum_.col(g) += m_.col(idx) - r * B;
                        }
                    }
                }
            }
        }
        primal = std::sqrt(primal_sq);
        q_norm_ = std::sqrt(q_sq);
        y_norm_ = std::sqrt(y_sq);

        const TimeField s = divergence_adjoint(A_ - A_old) + copy_adjoint(Bsum_ - Bsum_old);
        const TimeField z = solver_->solve(s);
        dual = r * std::sqrt(std::max(0.0, (s.array() * z.array()).sum()));
    }

    double energy() const
    {
        const Eigen::Matrix3Xd msum = [&] {
            Eigen::Matrix3Xd out(3, m_.cols() / 3);
            for (Eigen::Index g = 0; g < out.cols(); ++g) {
                out.col(g) = m_.col(3 * g) + m_.col(3 * g + 1) + m_.col(3 * g + 2);
            }
            return out;
        }();
        double e = 0.0;
        for (int F = 0; F < nF_; ++F) {
            const Eigen::VectorXd mu_hat = average_to_faces(mesh_, mu_.row(F).transpose());
            for (int c = 0; c < d_; ++c) {
                for (int f = 0; f < nT_; ++f) {
                    if (mu_hat[f] < 1e-8 / mesh_.face_areas[f]) {
                        continue;
                    }
                    Vec3 mhat = Vec3::Zero();
                    for (int j = 0; j < slots_; ++j) {
                        mhat += msum.col(group(F, j, c, f));
                    }
                    mhat /= slots_;
                    e += 0.5 * dom_.cell_measure[F] * mesh_.face_areas[f] * mhat.squaredNorm() /
                         mu_hat[f];
                }
            }
        }
        return e;
    }

    const DomainMesh& dom_;
    const TriangleMesh& mesh_;
    const MeshOperators& ops_;
    SolverConfig cfg_;
    BoundaryData boundary_;
    int n_ = 0, nT_ = 0, d_ = 1, nF_ = 0, K_ = 0, slots_ = 2;
    double r_ = 1.0;
    double q_norm_ = 0.0;
    double y_norm_ = 0.0;
    std::unique_ptr<SpaceTimeSolver> solver_;
    TimeField gradJ_, phi_, A_, mu_;
    CopyField m_;
    Eigen::Matrix3Xd Bsum_, wsum_;
};

} // namespace

HarmonicResult solve_harmonic(const DomainMesh& domain, const TriangleMesh& target,
                              const MeshOperators& ops, const BoundaryData& bc,
                              const SolverConfig& cfg)
{
    HarmonicAdmm admm(domain, target, ops, bc, cfg);
    return admm.run();
}

} // namespace meshot
