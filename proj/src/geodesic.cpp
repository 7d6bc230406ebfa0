#include <meshot/geodesic.hpp>

#include <cmath>
#include <stdexcept>

#include <meshot/projection.hpp>

namespace meshot {

void SolverConfig::validate() const
{
    if (N < 1) {
        throw std::invalid_argument("N must be at least 1");
    }
    if (!(tol > 0.0)) {
        throw std::invalid_argument("tolerance must be positive");
    }
    if (max_iters < 1) {
        throw std::invalid_argument("max_iters must be at least 1");
    }
    if (!(alpha >= 0.0)) {
        throw std::invalid_argument("alpha must be nonnegative");
    }
    if (adapt_interval < 1) {
        throw std::invalid_argument("adapt_interval must be at least 1");
    }
}

double GeodesicResult::gap() const
{
    return std::abs(primal_action - dual_objective) / std::max(dual_objective, 1e-12);
}

double update_penalty(double r, double primal, double dual)
{
    if (primal > 10.0 * dual) {
        return 2.0 * r;
    }
    if (dual > 10.0 * primal) {
        return 0.5 * r;
    }
    return r;
}

namespace {

inline Eigen::Index copy_index(int t, int s, int f, int j, int nT)
{
    return (static_cast<Eigen::Index>(t * 2 + s) * nT + f) * 3 + j;
}

/// Gradients of every staggered slice: column k holds G phi^k (3|T| rows).
Eigen::MatrixXd slice_gradients(const MeshOperators& ops, const TimeField& phi)
{
    return ops.gradient * phi.transpose();
}

///
/// Adjoint of the copy map, given copies already summed over the three
/// corners of each face: ysum column (t * 2 + s) * |T| + f.
///
TimeField copy_adjoint_from_sums(const TriangleMesh& mesh, const MeshOperators& ops,
                                 const Eigen::Matrix3Xd& ysum, const TimeGrid& grid)
{
    const int nT = mesh.num_faces();
    TimeField out = TimeField::Zero(grid.staggered_count(), mesh.num_vertices());
    for (int t = 0; t < grid.N; ++t) {
        for (int s = 0; s < 2; ++s) {
            auto row = out.row(t + s);
            for (int f = 0; f < nT; ++f) {
                const Vec3 Y = ysum.col(static_cast<Eigen::Index>(t * 2 + s) * nT + f);
                const double w = 0.5 * grid.tau * mesh.face_areas[f];
                for (int j = 0; j < 3; ++j) {
                    row[mesh.faces[f][j]] += w * ops.hat_gradients[f][j].dot(Y);
                }
            }
        }
    }
    return out;
}

Eigen::Matrix3Xd sum_corners(const CopyField& y)
{
    Eigen::Matrix3Xd out(3, y.cols() / 3);
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        out.col(c) = y.col(3 * c) + y.col(3 * c + 1) + y.col(3 * c + 2);
    }
    return out;
}

SpaceTimeOperator potential_operator(const MeshOperators& ops, const TimeGrid& grid,
                                     double damping, bool free_end)
{
    SpaceTimeOperator op;
    op.P = damping * derivative_gram(grid);
    if (free_end) {
        op.P(grid.N, grid.N) += 1.0;
    }
    op.Q = gradient_copy_weights(grid);
    op.M = ops.vertex_mass;
    op.L = ops.laplacian;
    return op;
}

/// Right-hand side of the potential step divided by r, given corner-summed (m - r B).
TimeField potential_rhs(const TriangleMesh& mesh, const MeshOperators& ops, const TimeGrid& grid,
                        const Eigen::VectorXd& row0, const Eigen::VectorXd& rowN,
                        const TimeField& mu, const TimeField& A, const Eigen::Matrix3Xd& wsum,
                        double r, double alpha)
{
    TimeField R = TimeField::Zero(grid.staggered_count(), mesh.num_vertices());
    R.row(0) += row0.transpose();
    R.row(grid.N) += rowN.transpose();
    const TimeField y = (mu - r * A) / (1.0 + alpha * r);
    R -= time_derivative_adjoint(grid, y) * ops.vertex_mass.asDiagonal();
    R -= copy_adjoint_from_sums(mesh, ops, wsum, grid);
    return R / r;
}

class TransportAdmm {
public:
    TransportAdmm(const TriangleMesh& mesh, const MeshOperators& ops, const SolverConfig& cfg,
                  const Eigen::VectorXd& mu0, const Eigen::VectorXd* mu1, const FreeEndpoint* end)
        : mesh_(mesh), ops_(ops), cfg_(cfg), grid_(cfg.N), mu0_(mu0), mu1_(mu1), end_(end)
    {
        cfg_.validate();
        n_ = mesh.num_vertices();
        nT_ = mesh.num_faces();
        if (mu0.size() != n_ || (mu1 && mu1->size() != n_)) {
            throw InputError("density size does not match the mesh");
        }
        r_ = cfg.r > 0.0 ? cfg.r : 1.0 / (mesh.total_area() * mesh.total_area());

        const int N = grid_.N;
        phi_ = TimeField::Zero(N + 1, n_);
        A_ = TimeField::Zero(N, n_);
        mu_ = TimeField::Zero(N, n_);
        lam_ = TimeField::Zero(N, n_);
        m_ = CopyField::Zero(3, static_cast<Eigen::Index>(N) * 2 * nT_ * 3);
        Bsum_ = Eigen::Matrix3Xd::Zero(3, static_cast<Eigen::Index>(N) * 2 * nT_);
        wsum_ = Bsum_;
        P_ = Eigen::VectorXd::Zero(n_);
        nu_ = Eigen::VectorXd::Zero(n_);
        // Start the density at the linear interpolation (or at mu0 for a free
        // endpoint), so equal endpoints are already a fixed point.
        for (int t = 0; t < N; ++t) {
            const double s = mu1 ? grid_.centered_time(t) : 0.0;
            mu_.row(t) = ((1.0 - s) * mu0 + s * (mu1 ? *mu1 : mu0)).transpose();
        }
        if (end_) {
            nu_ = mu0;
        }
        build_solver();
    }

    GeodesicResult run()
    {
        GeodesicResult res;
        res.grid = grid_;
        double primal = 0.0;
        double dual = 0.0;
        int it = 0;
        for (it = 1; it <= cfg_.max_iters; ++it) {
            step(primal, dual);
            res.history.push_back({it, primal, dual, r_, objective(), mass_defect()});
            // The operator-induced dual norm barely sees the spatially constant
            // part of the stationarity residual, which is the mass defect.
            if (primal < cfg_.tol && dual < cfg_.tol &&
                res.history.back().mass_defect < 0.1 * cfg_.tol) {
                res.converged = true;
                break;
            }
            if (cfg_.penalty_adapt && it % cfg_.adapt_interval == 0) {
                // Balancing relative residuals keeps the rule independent of the surface scale.
                const double next = update_penalty(r_, primal / std::max(q_norm_, 1e-300),
                                                   dual / std::max(y_norm_, 1e-300));
                if (next != r_) {
                    // The cached copy sums bake in the penalty.
                    wsum_ += (r_ - next) * Bsum_;
                    r_ = next;
                    if (cfg_.alpha > 0.0) {
                        build_solver();
                    }
                }
            }
        }
        res.iterations = std::min(it, cfg_.max_iters);
        res.mu_curve = mu_;
        res.phi = phi_;
        res.momentum = m_;
        res.terminal = end_ ? nu_ : *mu1_;
        res.dual_objective = objective();
        res.distance = std::sqrt(std::max(res.dual_objective, 0.0));
        res.primal_action = evaluate_action(mesh_, m_, mu_, cfg_.alpha);
        res.final_r = r_;
        return res;
    }

private:
    void build_solver()
    {
        solver_ = make_space_time_solver(
            potential_operator(ops_, grid_, 1.0 / (1.0 + cfg_.alpha * r_), end_ != nullptr),
            cfg_.backend);
    }

    double mass_defect() const
    {
        const Eigen::VectorXd mass = mu_ * mesh_.vertex_areas;
        return (mass.array() - 1.0).abs().maxCoeff();
    }

    double objective() const
    {
        const Eigen::VectorXd& w = mesh_.vertex_areas;
        double J = -w.dot(phi_.row(0).transpose().cwiseProduct(mu0_));
        if (end_) {
            J -= end_->conjugate(-phi_.row(grid_.N).transpose());
        } else {
            J += w.dot(phi_.row(grid_.N).transpose().cwiseProduct(*mu1_));
        }
        if (cfg_.alpha > 0.0) {
            J -= grid_.tau / (2.0 * cfg_.alpha) * (lam_.array().square().matrix() * w).sum();
        }
        return J;
    }

    void step(double& primal, double& dual)
    {
        const int N = grid_.N;
        const double r = r_;
        const double tau = grid_.tau;
        const Eigen::VectorXd& va = mesh_.vertex_areas;

        // Potential step.
        const Eigen::VectorXd row0 = -va.cwiseProduct(mu0_);
        const Eigen::VectorXd rowN =
            end_ ? Eigen::VectorXd(va.cwiseProduct(nu_ + r * P_)) : Eigen::VectorXd(va.cwiseProduct(*mu1_));
        phi_ = solver_->solve(
            potential_rhs(mesh_, ops_, grid_, row0, rowN, mu_, A_, wsum_, r, cfg_.alpha));

        const TimeField Dphi = time_derivative(grid_, phi_);
        const Eigen::MatrixXd Gk = slice_gradients(ops_, phi_);
        if (cfg_.alpha > 0.0) {
            lam_ = cfg_.alpha * (r * (A_ - Dphi) - mu_) / (1.0 + cfg_.alpha * r);
        }

        // Pointwise projection and dual update.
        const TimeField A_old = A_;
        const Eigen::Matrix3Xd Bsum_old = Bsum_;
        Bsum_.setZero();
        wsum_.setZero();
        double primal_sq = 0.0;
        double q_sq = 0.0;
        double y_sq = 0.0;
        for (int t = 0; t < N; ++t) {
            for (int v = 0; v < n_; ++v) {
                const double area = va[v];
                const double a_target = Dphi(t, v) + lam_(t, v) + mu_(t, v) / r;
                double S = 0.0;
                for (int c = ops_.corner_offsets[v]; c < ops_.corner_offsets[v + 1]; ++c) {
                    const int f = ops_.corners[c] / 3;
                    const int j = ops_.corners[c] % 3;
                    const double cf = mesh_.face_areas[f] / (12.0 * area);
                    for (int s = 0; s < 2; ++s) {
                        const Eigen::Index idx = copy_index(t, s, f, j, nT_);
                        const Vec3 b = Gk.col(t + s).segment<3>(3 * f) + m_.col(idx) / r;
                        S += cf * b.squaredNorm();
                    }
                }
                const double beta = paraboloid_shift(a_target, S);
                const double a_new = a_target - beta;
                const double viol = a_new - Dphi(t, v) - lam_(t, v);
                primal_sq += tau * area * viol * viol;
                A_(t, v) = a_new;
                mu_(t, v) = r * beta;
                q_sq += tau * area * a_new * a_new;
                y_sq += tau * area * mu_(t, v) * mu_(t, v);

                const double shrink = 1.0 / (1.0 + beta / 3.0);
                for (int c = ops_.corner_offsets[v]; c < ops_.corner_offsets[v + 1]; ++c) {
                    const int f = ops_.corners[c] / 3;
                    const int j = ops_.corners[c] % 3;
                    for (int s = 0; s < 2; ++s) {
                        const Eigen::Index idx = copy_index(t, s, f, j, nT_);
                        const Vec3 g = Gk.col(t + s).segment<3>(3 * f);
                        const Vec3 B = shrink * (g + m_.col(idx) / r);
                        const Vec3 gap = B - g;
                        primal_sq += 0.5 * tau * mesh_.face_areas[f] * gap.squaredNorm();
                        m_.col(idx) -= r * gap;
                        q_sq += 0.5 * tau * mesh_.face_areas[f] * B.squaredNorm();
                        y_sq += 0.5 * tau * mesh_.face_areas[f] * m_.col(idx).squaredNorm();
                        const Eigen::Index fs = static_cast<Eigen::Index>(t * 2 + s) * nT_ + f;
                        Bsum_.col(fs) += B;
                        wsum_.col(fs) += m_.col(idx) - r * B;
                    }
                }
            }
        }

        Eigen::VectorXd dP;
        if (end_) {
            const Eigen::VectorXd phiN = phi_.row(N).transpose();
            const Eigen::VectorXd density = end_->prox(nu_ - r * phiN, r);
            const Eigen::VectorXd P_new = phiN - nu_ / r + density / r;
            dP = P_new - P_;
            P_ = P_new;
            nu_ = density;
            primal_sq += va.dot((P_ - phiN).array().square().matrix());
            q_sq += va.dot(P_.array().square().matrix());
            y_sq += va.dot(nu_.array().square().matrix());
        }
        primal = std::sqrt(primal_sq);
        q_norm_ = std::sqrt(q_sq);
        y_norm_ = std::sqrt(y_sq);

        // Dual residual: r * Lambda^T (q - q_old) in the norm dual to the potential weights.
        const TimeField dA = A_ - A_old;
        TimeField s = time_derivative_adjoint(grid_, dA) * va.asDiagonal();
        s += copy_adjoint_from_sums(mesh_, ops_, Bsum_ - Bsum_old, grid_);
        if (end_) {
            s.row(N) += va.cwiseProduct(dP).transpose();
        }
        // The norm dual to phi -> |Lambda phi|, using the factored operator.
        const TimeField z = solver_->solve(s);
        double dual_sq = std::max(0.0, (s.array() * z.array()).sum());
        if (cfg_.alpha > 0.0) {
            dual_sq += tau * (dA.array().square().matrix() * va).sum();
        }
        dual = r * std::sqrt(dual_sq);
    }

    const TriangleMesh& mesh_;
    const MeshOperators& ops_;
    SolverConfig cfg_;
    TimeGrid grid_;
    Eigen::VectorXd mu0_;
    const Eigen::VectorXd* mu1_;
    const FreeEndpoint* end_;
    int n_ = 0;
    int nT_ = 0;
    double r_ = 1.0;
    double q_norm_ = 0.0;
    double y_norm_ = 0.0;
    std::unique_ptr<SpaceTimeSolver> solver_;

    TimeField phi_, A_, mu_, lam_;
    CopyField m_;
    Eigen::Matrix3Xd Bsum_, wsum_;
    Eigen::VectorXd P_, nu_;
};

void check_density(const TriangleMesh& mesh, const Eigen::VectorXd& mu, const char* name)
{
    if (mu.size() != mesh.num_vertices()) {
        throw InputError(std::string(name) + " has the wrong number of entries");
    }
    if (!mu.allFinite() || mu.minCoeff() < 0.0) {
        throw InputError(std::string(name) + " must be finite and nonnegative");
    }
    if (std::abs(total_mass(mesh, mu) - 1.0) > 1e-9) {
        throw InputError(std::string(name) + " is not normalized");
    }
}

} // namespace

GeodesicResult solve_geodesic(const TriangleMesh& mesh, const MeshOperators& ops,
                              const DensityField& mu0, const DensityField& mu1,
                              const SolverConfig& cfg)
{
    check_density(mesh, mu0.values, "initial density");
    check_density(mesh, mu1.values, "final density");
    TransportAdmm admm(mesh, ops, cfg, mu0.values, &mu1.values, nullptr);
    return admm.run();
}

GeodesicResult solve_free_endpoint(const TriangleMesh& mesh, const MeshOperators& ops,
                                   const DensityField& mu0, const FreeEndpoint& end,
                                   const SolverConfig& cfg)
{
    check_density(mesh, mu0.values, "initial density");
    if (!end.prox || !end.conjugate) {
        throw std::invalid_argument("free endpoint needs both a prox and a conjugate");
    }
    TransportAdmm admm(mesh, ops, cfg, mu0.values, nullptr, &end);
    return admm.run();
}

Eigen::Matrix3Xd face_momentum(const TriangleMesh& mesh, const CopyField& m, int N)
{
    const int nT = mesh.num_faces();
    if (m.cols() != static_cast<Eigen::Index>(N) * 2 * nT * 3) {
        throw std::invalid_argument("momentum does not match the mesh and time grid");
    }
    const Eigen::Matrix3Xd sums = sum_corners(m);
    Eigen::Matrix3Xd out(3, static_cast<Eigen::Index>(N) * nT);
    for (int t = 0; t < N; ++t) {
        for (int f = 0; f < nT; ++f) {
            out.col(static_cast<Eigen::Index>(t) * nT + f) =
                0.5 * (sums.col(static_cast<Eigen::Index>(t * 2) * nT + f) +
                       sums.col(static_cast<Eigen::Index>(t * 2 + 1) * nT + f));
        }
    }
    return out;
}

Eigen::Matrix3Xd reconstruct_velocity(const TriangleMesh& mesh, const CopyField& m,
                                      const TimeField& mu_curve, double threshold)
{
    const int N = static_cast<int>(mu_curve.rows());
    const int nT = mesh.num_faces();
    Eigen::Matrix3Xd vel = face_momentum(mesh, m, N);
    for (int t = 0; t < N; ++t) {
        const Eigen::VectorXd mu_hat = average_to_faces(mesh, mu_curve.row(t).transpose());
        for (int f = 0; f < nT; ++f) {
            auto v = vel.col(static_cast<Eigen::Index>(t) * nT + f);
            if (mu_hat[f] < threshold / mesh.face_areas[f]) {
                v.setZero();
            } else {
                v /= mu_hat[f];
            }
        }
    }
    return vel;
}

double evaluate_action(const TriangleMesh& mesh, const CopyField& m, const TimeField& mu_curve,
                       double alpha)
{
    const int N = static_cast<int>(mu_curve.rows());
    const int nT = mesh.num_faces();
    const double tau = 1.0 / N;
    const Eigen::Matrix3Xd vel = reconstruct_velocity(mesh, m, mu_curve);
    double action = 0.0;
    for (int t = 0; t < N; ++t) {
        const Eigen::VectorXd mu_hat = average_to_faces(mesh, mu_curve.row(t).transpose());
        for (int f = 0; f < nT; ++f) {
            action += 0.5 * tau * mesh.face_areas[f] * mu_hat[f] *
                      vel.col(static_cast<Eigen::Index>(t) * nT + f).squaredNorm();
        }
        if (alpha > 0.0) {
            action += 0.5 * alpha * tau *
                      mesh.vertex_areas.dot(mu_curve.row(t).transpose().array().square().matrix());
        }
    }
    return action;
}

double tangent_norm(const TriangleMesh& mesh, const MeshOperators& ops, const DensityField& mu,
                    const Eigen::VectorXd& delta_mu)
{
    const int n = mesh.num_vertices();
    if (mu.size() != n || delta_mu.size() != n) {
        throw InputError("tangent vector size does not match the mesh");
    }
    if (!(mu.values.minCoeff() > 0.0)) {
        throw InputError("base density must be strictly positive");
    }
    const double net = mesh.vertex_areas.dot(delta_mu);
    if (std::abs(net) > 1e-10 * std::max(1.0, mesh.vertex_areas.dot(delta_mu.cwiseAbs()))) {
        throw InputError("tangent vector must have zero total mass");
    }
    const Eigen::VectorXd mu_hat = average_to_faces(mesh, mu.values);
    Eigen::VectorXd weights(3 * mesh.num_faces());
    for (int f = 0; f < mesh.num_faces(); ++f) {
        weights.segment<3>(3 * f).setConstant(mesh.face_areas[f] * mu_hat[f]);
    }
    SparseMatrix Lmu = ops.gradient.transpose() * weights.asDiagonal() * ops.gradient;
    Eigen::VectorXd rhs = -mesh.vertex_areas.cwiseProduct(delta_mu);
    rhs.array() -= rhs.mean();
    SparseMatrix grounded = Lmu;
    grounded.coeffRef(0, 0) += Lmu.coeff(0, 0);
    Eigen::SimplicialLDLT<SparseMatrix> solver(grounded);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("weighted Laplacian factorization failed");
    }
    Eigen::VectorXd phi = solver.solve(rhs);
    phi.array() -= phi.mean();
    return 0.5 * phi.dot(Lmu * phi);
}

namespace admm {

void dual_update(TimeField& mu, CopyField& m, const TimeField& Dphi, const CopyField& Gphi,
                 const TimeField& A, const CopyField& B, double r)
{
    mu += r * (Dphi - A);
    m += r * (Gphi - B);
}

CopyField duplicate_gradients(const MeshOperators& ops, const TimeField& phi)
{
    const int N = static_cast<int>(phi.rows()) - 1;
    const int nT = static_cast<int>(ops.hat_gradients.size());
    const Eigen::MatrixXd Gk = slice_gradients(ops, phi);
    CopyField out(3, static_cast<Eigen::Index>(N) * 2 * nT * 3);
    for (int t = 0; t < N; ++t) {
        for (int s = 0; s < 2; ++s) {
            for (int f = 0; f < nT; ++f) {
                for (int j = 0; j < 3; ++j) {
                    out.col(copy_index(t, s, f, j, nT)) = Gk.col(t + s).segment<3>(3 * f);
                }
            }
        }
    }
    return out;
}

TimeField duplicate_gradients_adjoint(const TriangleMesh& mesh, const MeshOperators& ops,
                                      const CopyField& y, const TimeGrid& grid)
{
    return copy_adjoint_from_sums(mesh, ops, sum_corners(y), grid);
}

PotentialSystem potential_system(const TriangleMesh& mesh, const MeshOperators& ops,
                                 const TimeGrid& grid, const Eigen::VectorXd& mu0,
                                 const Eigen::VectorXd& mu1, const TimeField& mu,
                                 const CopyField& m, const TimeField& A, const CopyField& B,
                                 double r)
{
    PotentialSystem sys;
    sys.op = potential_operator(ops, grid, 1.0, false);
    const Eigen::VectorXd& va = mesh.vertex_areas;
    sys.rhs = potential_rhs(mesh, ops, grid, -va.cwiseProduct(mu0), va.cwiseProduct(mu1), mu, A,
                            sum_corners(m - r * B), r, 0.0);
    return sys;
}

} // namespace admm

} // namespace meshot
