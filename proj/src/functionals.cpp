#include <meshot/functionals.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace meshot {

namespace {

constexpr double kCapSlack = 1e-9;

} // namespace

void FlowFunctional::validate(const TriangleMesh& mesh) const
{
    if (kind == FunctionalKind::Crowd) {
        if (potential.size() != mesh.num_vertices()) {
            throw InputError("crowd potential needs one value per vertex");
        }
        if (!potential.allFinite()) {
            throw InputError("crowd potential must be finite");
        }
        if (!(cap > 0.0) || cap * mesh.total_area() < 1.0 - 1e-12) {
            throw InputError("crowd cap is below 1 / (total area); no density fits under it");
        }
    } else if (!(exponent > 1.0)) {
        throw InputError("porous exponent must exceed 1");
    }
}

FlowFunctional crowd_functional(Eigen::VectorXd potential, double cap)
{
    FlowFunctional F;
    F.kind = FunctionalKind::Crowd;
    F.potential = std::move(potential);
    F.cap = cap;
    return F;
}

FlowFunctional porous_functional(double exponent)
{
    FlowFunctional F;
    F.kind = FunctionalKind::Porous;
    F.exponent = exponent;
    return F;
}

double evaluate_functional(const FlowFunctional& F, const TriangleMesh& mesh,
                           const Eigen::VectorXd& mu)
{
    if (mu.size() != mesh.num_vertices()) {
        throw InputError("density size does not match the mesh");
    }
    if (F.kind == FunctionalKind::Crowd) {
        if (mu.maxCoeff() > F.cap + kCapSlack) {
            return std::numeric_limits<double>::infinity();
        }
        return mesh.vertex_areas.dot(F.potential.cwiseProduct(mu));
    }
    return mesh.vertex_areas.dot(mu.array().pow(F.exponent).matrix()) / (F.exponent - 1.0);
}

double functional_conjugate(const FlowFunctional& F, double c, int v, double p)
{
    if (F.kind == FunctionalKind::Crowd) {
        return F.cap * std::max(p - c * F.potential[v], 0.0);
    }
    if (p <= 0.0) {
        return 0.0;
    }
    const double m = F.exponent;
    const double k = c / (m - 1.0);
    const double x = std::pow(p / (k * m), 1.0 / (m - 1.0));
    return (1.0 - 1.0 / m) * p * x;
}

double functional_prox(const FlowFunctional& F, double c, int v, double z, double r)
{
    if (F.kind == FunctionalKind::Crowd) {
        return std::clamp(z - r * c * F.potential[v], 0.0, F.cap);
    }
    if (z <= 0.0) {
        return 0.0;
    }
    const double m = F.exponent;
    const double k = r * c * m / (m - 1.0);
    if (m == 2.0) {
        return z / (1.0 + k);
    }
    // h(x) = k x^{m-1} + x - z is increasing on [0, z] with h(0) < 0 <= h(z).
    double lo = 0.0;
    double hi = z;
    double x = z / (1.0 + k);
    for (int it = 0; it < 100; ++it) {
        const double h = k * std::pow(x, m - 1.0) + x - z;
        if (std::abs(h) <= 1e-14 * z) {
            return x;
        }
        (h > 0.0 ? hi : lo) = x;
        const double dh = k * (m - 1.0) * std::pow(x, m - 2.0) + 1.0;
        double next = x - h / dh;
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        x = next;
    }
    return x;
}

SolverConfig default_jko_config()
{
    SolverConfig cfg;
    cfg.N = 5;
    cfg.tol = 1e-3;
    return cfg;
}

namespace {

/// Restores unit mass without leaving the cap.
Eigen::VectorXd restore_mass(const FlowFunctional& F, const TriangleMesh& mesh,
                             Eigen::VectorXd mu)
{
    const double mass = total_mass(mesh, mu);
    if (mass > 1.0) {
        return mu / mass;
    }
    if (F.kind == FunctionalKind::Porous) {
        return mass > 0.0 ? Eigen::VectorXd(mu / mass) : mu;
    }
    const Eigen::VectorXd slack = (F.cap - mu.array()).max(0.0).matrix();
    const double room = total_mass(mesh, slack);
    if (room > 0.0) {
        mu += (1.0 - mass) / room * slack;
    }
    return mu;
}

} // namespace

JkoStep jko_step(const TriangleMesh& mesh, const MeshOperators& ops, const DensityField& mu_prev,
                 const FlowFunctional& F, double s, const SolverConfig& cfg)
{
    F.validate(mesh);
    if (!(s > 0.0)) {
        throw InputError("step size must be positive");
    }
    if (F.kind == FunctionalKind::Crowd && mu_prev.values.maxCoeff() > F.cap + kCapSlack) {
        throw InputError("initial density exceeds the crowd cap");
    }
    // Minimizing W^2 / (2 s) + F is the same as minimizing W^2 + 2 s F.
    const double c = 2.0 * s;
    const Eigen::VectorXd& areas = mesh.vertex_areas;
    FreeEndpoint end;
    end.prox = [&F, c](const Eigen::VectorXd& z, double r) {
        Eigen::VectorXd out(z.size());
        for (Eigen::Index v = 0; v < z.size(); ++v) {
            out[v] = functional_prox(F, c, static_cast<int>(v), z[v], r);
        }
        return out;
    };
    end.conjugate = [&F, c, &areas](const Eigen::VectorXd& p) {
        double sum = 0.0;
        for (Eigen::Index v = 0; v < p.size(); ++v) {
            sum += areas[v] * functional_conjugate(F, c, static_cast<int>(v), p[v]);
        }
        return sum;
    };

    JkoStep step;
    step.inner = solve_free_endpoint(mesh, ops, mu_prev, end, cfg);
    step.density.values = restore_mass(F, mesh, step.inner.terminal);
    step.energy = evaluate_functional(F, mesh, step.density.values);
    step.transport_cost = step.inner.primal_action;
    return step;
}

FlowTrace run_flow(const TriangleMesh& mesh, const MeshOperators& ops, const DensityField& mu0,
                   const FlowFunctional& F, double s, int steps, const SolverConfig& cfg)
{
    if (steps < 0) {
        throw InputError("step count must be nonnegative");
    }
    FlowTrace trace;
    trace.densities.push_back(mu0.values);
    trace.energies.push_back(evaluate_functional(F, mesh, mu0.values));
    DensityField current = mu0;
    for (int k = 0; k < steps; ++k) {
        JkoStep step = jko_step(mesh, ops, current, F, s, cfg);
        trace.densities.push_back(step.density.values);
        trace.energies.push_back(step.energy);
        trace.transport_costs.push_back(step.transport_cost);
        trace.inner_iterations.push_back(step.inner.iterations);
        trace.all_converged = trace.all_converged && step.inner.converged;
        current = std::move(step.density);
    }
    return trace;
}

} // namespace meshot
