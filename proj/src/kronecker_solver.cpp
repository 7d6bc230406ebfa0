#include <meshot/kronecker_solver.hpp>

#include <stdexcept>

namespace meshot {

TimeField SpaceTimeOperator::apply(const TimeField& X) const
{
    TimeField Y = P * X * M.asDiagonal();
    Y += Q.asDiagonal() * (X * L);
    return Y;
}

Eigen::MatrixXd derivative_gram(const TimeGrid& grid)
{
    const int K = grid.staggered_count();
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(K, K);
    for (int t = 0; t < grid.N; ++t) {
        T(t, t) += 1.0;
        T(t + 1, t + 1) += 1.0;
        T(t, t + 1) -= 1.0;
        T(t + 1, t) -= 1.0;
    }
    return T / grid.tau;
}

Eigen::VectorXd gradient_copy_weights(const TimeGrid& grid)
{
    Eigen::VectorXd w = Eigen::VectorXd::Constant(grid.staggered_count(), 3.0 * grid.tau);
    w[0] = w[grid.N] = 1.5 * grid.tau;
    return w;
}

namespace {

using Factor = Eigen::SimplicialLDLT<SparseMatrix>;

/// Generalized eigenpairs P w = lambda Q w with W^T Q W = I.
struct GeneralizedModes {
    Eigen::VectorXd lambda;
    Eigen::MatrixXd W;
    std::vector<int> null_modes;
};

GeneralizedModes modes_of(const SpaceTimeOperator& op)
{
    if (op.Q.minCoeff() <= 0.0) {
        throw std::invalid_argument("outer weights must be positive");
    }
    const Eigen::VectorXd qs = op.Q.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd S = qs.asDiagonal() * op.P * qs.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("eigen decomposition of the outer operator failed");
    }
    GeneralizedModes m;
    m.lambda = eig.eigenvalues();
    m.W = qs.asDiagonal() * eig.eigenvectors();
    const double cutoff = 1e-10 * std::max(1.0, m.lambda.cwiseAbs().maxCoeff());
    for (int k = 0; k < m.lambda.size(); ++k) {
        if (m.lambda[k] < cutoff) {
            m.lambda[k] = 0.0;
            m.null_modes.push_back(k);
        }
    }
    return m;
}

/// Removes the kernel component from X (columns of Z span ker P, Q-orthonormal).
void remove_kernel(const Eigen::MatrixXd& Z, const Eigen::VectorXd& Q, TimeField& X)
{
    for (int j = 0; j < Z.cols(); ++j) {
        const Eigen::VectorXd z = Z.col(j);
        const double coeff = (z.cwiseProduct(Q).transpose() * X).mean();
        X -= z * Eigen::RowVectorXd::Constant(X.cols(), coeff);
    }
}

/// Orthogonal projection of R onto the range, i.e. away from span(Z) x constants.
void project_rhs(const Eigen::MatrixXd& Z, TimeField& R)
{
    if (Z.cols() == 0) {
        return;
    }
    const Eigen::MatrixXd basis =
        Eigen::HouseholderQR<Eigen::MatrixXd>(Z).householderQ() * Eigen::MatrixXd::Identity(Z.rows(), Z.cols());
    const Eigen::VectorXd coeff = basis.transpose() * R.rowwise().mean();
    R -= (basis * coeff) * Eigen::RowVectorXd::Ones(R.cols());
}

class ModalSolver final : public SpaceTimeSolver {
public:
    explicit ModalSolver(const SpaceTimeOperator& op) : modes_(modes_of(op))
    {
        const int n = op.space_size();
        SparseMatrix mass(n, n);
        mass.reserve(Eigen::VectorXi::Constant(n, 1));
        for (int i = 0; i < n; ++i) {
            mass.insert(i, i) = op.M[i];
        }
        mass.makeCompressed();
        SparseMatrix grounding(n, n);
        grounding.insert(0, 0) = std::max(op.L.coeff(0, 0), 1e-12);

        kernel_.resize(modes_.W.rows(), static_cast<Eigen::Index>(modes_.null_modes.size()));
        for (std::size_t j = 0; j < modes_.null_modes.size(); ++j) {
            kernel_.col(static_cast<Eigen::Index>(j)) = modes_.W.col(modes_.null_modes[j]);
        }
        factors_.resize(modes_.lambda.size());
        for (int k = 0; k < modes_.lambda.size(); ++k) {
            // Singular modes are grounded at vertex 0; the right-hand side
            // is then made zero-sum so the grounding value is never used.
            const SparseMatrix A = modes_.lambda[k] == 0.0
                                       ? SparseMatrix(op.L + grounding)
                                       : SparseMatrix(op.L + modes_.lambda[k] * mass);
            factors_[k] = std::make_unique<Factor>(A);
            if (factors_[k]->info() != Eigen::Success) {
                throw std::runtime_error("mode factorization failed (disconnected mesh?)");
            }
        }
    }

    TimeField solve(const TimeField& rhs) const override
    {
        TimeField projected = rhs;
        project_rhs(kernel_, projected);
        const TimeField modal = modes_.W.transpose() * projected;
        TimeField psi(modal.rows(), modal.cols());
        for (int k = 0; k < modal.rows(); ++k) {
            Eigen::VectorXd b = modal.row(k).transpose();
            if (modes_.lambda[k] == 0.0) {
                b.array() -= b.mean();
                Eigen::VectorXd x = factors_[k]->solve(b);
                x.array() -= x.mean();
                psi.row(k) = x.transpose();
            } else {
                psi.row(k) = factors_[k]->solve(b).transpose();
            }
        }
        return modes_.W * psi;
    }

private:
    GeneralizedModes modes_;
    Eigen::MatrixXd kernel_;
    std::vector<std::unique_ptr<Factor>> factors_;
};

class DirectSolver final : public SpaceTimeSolver {
public:
    explicit DirectSolver(const SpaceTimeOperator& op) : op_(op)
    {
        const GeneralizedModes m = modes_of(op);
        if (m.null_modes.size() > 1) {
            throw std::invalid_argument("direct backend supports at most a one-dimensional kernel");
        }
        kernel_.resize(op.outer_size(), static_cast<Eigen::Index>(m.null_modes.size()));
        for (std::size_t j = 0; j < m.null_modes.size(); ++j) {
            kernel_.col(j) = m.W.col(m.null_modes[j]);
        }

        const int K = op.outer_size();
        const int n = op.space_size();
        std::vector<Eigen::Triplet<double>> trip;
        for (int a = 0; a < K; ++a) {
            for (int b = 0; b < K; ++b) {
                if (op.P(a, b) == 0.0) {
                    continue;
                }
                for (int i = 0; i < n; ++i) {
                    trip.emplace_back(a * n + i, b * n + i, op.P(a, b) * op.M[i]);
                }
            }
            for (int col = 0; col < op.L.outerSize(); ++col) {
                for (SparseMatrix::InnerIterator it(op.L, col); it; ++it) {
                    trip.emplace_back(a * n + it.row(), a * n + col, op.Q[a] * it.value());
                }
            }
        }
        if (kernel_.cols() == 1) {
            // Ground the entry where the kernel vector is largest.
            Eigen::Index at = 0;
            kernel_.col(0).cwiseAbs().maxCoeff(&at);
            ground_ = static_cast<int>(at) * n;
            trip.emplace_back(ground_, ground_, op.Q[at] * std::max(op.L.coeff(0, 0), 1e-12));
        }
        SparseMatrix A(K * n, K * n);
        A.setFromTriplets(trip.begin(), trip.end());
        factor_.compute(A);
        if (factor_.info() != Eigen::Success) {
            throw std::runtime_error("space-time factorization failed");
        }
    }

    TimeField solve(const TimeField& rhs) const override
    {
        TimeField R = rhs;
        project_rhs(kernel_, R);
        const Eigen::Map<const Eigen::VectorXd> b(R.data(), R.size());
        const Eigen::VectorXd x = factor_.solve(Eigen::VectorXd(b));
        TimeField X = Eigen::Map<const TimeField>(x.data(), R.rows(), R.cols());
        remove_kernel(kernel_, op_.Q, X);
        return X;
    }

private:
    SpaceTimeOperator op_;
    Eigen::MatrixXd kernel_;
    int ground_ = -1;
    Factor factor_;
};

} // namespace

std::unique_ptr<SpaceTimeSolver> make_space_time_solver(const SpaceTimeOperator& op,
                                                        LinearBackend backend)
{
    if (op.P.rows() != op.P.cols() || op.Q.size() != op.P.rows() || op.L.rows() != op.M.size()) {
        throw std::invalid_argument("space-time operator blocks have inconsistent sizes");
    }
    if (backend == LinearBackend::Direct) {
        return std::make_unique<DirectSolver>(op);
    }
    return std::make_unique<ModalSolver>(op);
}

} // namespace meshot
