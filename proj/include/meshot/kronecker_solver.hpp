#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <meshot/mesh.hpp>
#include <meshot/timegrid.hpp>

namespace meshot {

///
/// Operator X -> P X M + Q X L acting on slabs X whose rows are indexed by a
/// small "outer" set (time nodes, or domain-vertex components) and whose
/// columns are mesh vertices. P is symmetric positive semidefinite, Q is a
/// positive diagonal, M the vertex masses and L the cotan stiffness matrix.
///
struct SpaceTimeOperator {
    Eigen::MatrixXd P;
    Eigen::VectorXd Q;
    Eigen::VectorXd M;
    SparseMatrix L;

    int outer_size() const { return static_cast<int>(P.rows()); }
    int space_size() const { return static_cast<int>(M.size()); }
    TimeField apply(const TimeField& X) const;
};

enum class LinearBackend { Modal, Direct };

///
/// Solves op(X) = R. The operator kernel is (null space of P) x constants;
/// R is first projected onto the range and the returned X has no component
/// in the kernel.
///
class SpaceTimeSolver {
public:
    virtual ~SpaceTimeSolver() = default;
    virtual TimeField solve(const TimeField& rhs) const = 0;
};

/// Builds a solver for `op`; the returned object keeps its own copy of op.
std::unique_ptr<SpaceTimeSolver> make_space_time_solver(const SpaceTimeOperator& op,
                                                        LinearBackend backend);

/// Staggered-grid first-difference Gram matrix tau * D^T D, size (N+1)^2.
Eigen::MatrixXd derivative_gram(const TimeGrid& grid);

/// Number of slack copies touching each staggered node, times 1.5 tau.
Eigen::VectorXd gradient_copy_weights(const TimeGrid& grid);

} // namespace meshot
