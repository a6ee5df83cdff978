#include "ensdiv/ensemble_weights.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "ensdiv/error.hpp"

namespace ensdiv {

namespace {

constexpr double kBisectionRelTol = 1e-12;
constexpr int kBisectionMaxIter = 400;

Eigen::VectorXd slab_bounds(const EnsembleConfig& config, double epsilon)
{
    const auto js = constraint_exponents(config.d);
    Eigen::VectorXd bound(static_cast<Eigen::Index>(js.size()));
    const double n = static_cast<double>(config.n);
    for (std::size_t j = 0; j < js.size(); ++j)
        bound[static_cast<Eigen::Index>(j)] = epsilon * std::pow(n, static_cast<double>(js[j]) / config.d - 0.5);
    return bound;
}

// Primal active-set method for min ||w||^2 s.t. sum w = 1, |A w| <= bound,
// started from a feasible w.
Eigen::VectorXd active_set_min_norm(const Eigen::MatrixXd& a, const Eigen::VectorXd& bound, Eigen::VectorXd w)
{
    const Eigen::Index m = a.rows();
    const Eigen::Index l = a.cols();
    std::vector<int> state(static_cast<std::size_t>(m), 0);  // +1 upper, -1 lower, 0 free
    const int max_iter = 50 * static_cast<int>(m + l) + 50;

    for (int iter = 0; iter < max_iter; ++iter) {
        std::vector<Eigen::Index> active;
        for (Eigen::Index j = 0; j < m; ++j)
            if (state[static_cast<std::size_t>(j)] != 0)
                active.push_back(j);

        const auto rows = static_cast<Eigen::Index>(active.size()) + 1;
        Eigen::MatrixXd c(rows, l);
        Eigen::VectorXd rhs(rows);
        c.row(0).setOnes();
        rhs[0] = 1.0;
        for (Eigen::Index r = 1; r < rows; ++r) {
            const Eigen::Index j = active[static_cast<std::size_t>(r - 1)];
            c.row(r) = a.row(j);
            rhs[r] = state[static_cast<std::size_t>(j)] * bound[j];
        }
        const Eigen::VectorXd target = c.completeOrthogonalDecomposition().solve(rhs);
        const Eigen::VectorXd step = target - w;

        if (step.norm() <= 1e-13 * (1.0 + w.norm())) {
            // Stationary on the working set; check multiplier signs of 2w = C^T mu.
            const Eigen::VectorXd mu = c.transpose().colPivHouseholderQr().solve(2.0 * target);
            const double tol = 1e-11 * (1.0 + mu.cwiseAbs().maxCoeff());
            Eigen::Index worst = -1;
            double worst_violation = tol;
            for (Eigen::Index r = 1; r < rows; ++r) {
                const Eigen::Index j = active[static_cast<std::size_t>(r - 1)];
                const double violation = state[static_cast<std::size_t>(j)] * mu[r];
                if (violation > worst_violation) {
                    worst_violation = violation;
                    worst = j;
                }
            }
            if (worst < 0)
                return target;
            state[static_cast<std::size_t>(worst)] = 0;
            w = target;
            continue;
        }

        double t_max = 1.0;
        Eigen::Index blocking = -1;
        int blocking_side = 0;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (state[static_cast<std::size_t>(j)] != 0)
                continue;
            const double ap = a.row(j).dot(step);
            const double aw = a.row(j).dot(w);
            double t;
            int side;
            if (ap > 0.0) {
                t = (bound[j] - aw) / ap;
                side = 1;
            } else if (ap < 0.0) {
                t = (-bound[j] - aw) / ap;
                side = -1;
            } else {
                continue;
            }
            t = std::max(t, 0.0);
            if (t < t_max) {
                t_max = t;
                blocking = j;
                blocking_side = side;
            }
        }
        if (blocking < 0) {
            w = target;
        } else {
            w += t_max * step;
            state[static_cast<std::size_t>(blocking)] = blocking_side;
        }
    }
    throw ConvergenceError("active-set solver did not converge within " + std::to_string(max_iter) + " iterations");
}

} // namespace

std::string_view to_string(Method m)
{
    switch (m) {
    case Method::plain:
        return "plain";
    case Method::exact:
        return "exact";
    case Method::relaxed:
        return "relaxed";
    }
    return "unknown";
}

Method parse_method(std::string_view name)
{
    if (name == "plain")
        return Method::plain;
    if (name == "exact")
        return Method::exact;
    if (name == "relaxed")
        return Method::relaxed;
    throw ConfigError("unknown method '" + std::string(name) + "' (expected plain, exact or relaxed)");
}

void EnsembleConfig::validate() const
{
    if (d < 1)
        throw ConfigError("dimension must be at least 1");
    if (n < 1)
        throw ConfigError("sample size must be at least 1");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw ConfigError("lambda must be a positive finite number");
    if (ls.empty())
        throw ConfigError("at least one subsample fraction is required");
    for (std::size_t i = 0; i < ls.size(); ++i) {
        if (!(ls[i] > 0.0 && ls[i] <= 1.0))
            throw ConfigError("subsample fraction " + std::to_string(ls[i]) + " outside (0, 1]");
        for (std::size_t j = 0; j < i; ++j)
            if (ls[j] == ls[i])
                throw InfeasibleError("duplicate subsample fraction " + std::to_string(ls[i]));
        if (i > 0 && !(ls[i] > ls[i - 1]))
            throw ConfigError("subsample fractions must be strictly increasing");
    }
    const std::size_t needed = constraint_exponents(d).size() + 1;
    if (ls.size() < needed)
        throw InfeasibleError("d = " + std::to_string(d) + " needs at least " + std::to_string(needed)
                              + " subsample fractions, got " + std::to_string(ls.size()));
}

std::vector<int> constraint_exponents(int d)
{
    if (d < 1)
        throw ConfigError("dimension must be at least 1");
    // ceil(d/2 - 1) == (d - 1) / 2 in integer arithmetic for d >= 1
    const int upper = (d - 1) / 2;
    std::vector<int> js;
    for (int j = 2; j <= upper; ++j)
        js.push_back(j);
    return js;
}

Eigen::MatrixXd bias_constraint_matrix(const std::vector<double>& ls, int d)
{
    const auto js = constraint_exponents(d);
    Eigen::MatrixXd a(static_cast<Eigen::Index>(js.size()), static_cast<Eigen::Index>(ls.size()));
    for (std::size_t j = 0; j < js.size(); ++j)
        for (std::size_t i = 0; i < ls.size(); ++i)
            a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = std::pow(ls[i], -static_cast<double>(js[j]) / d);
    return a;
}

EnsembleWeights exact_weights(const EnsembleConfig& config)
{
    config.validate();
    const auto l = static_cast<Eigen::Index>(config.ls.size());
    EnsembleWeights out;
    out.method = Method::exact;

    const Eigen::MatrixXd bias = bias_constraint_matrix(config.ls, config.d);
    if (bias.rows() == 0) {
        out.w.assign(static_cast<std::size_t>(l), 1.0 / static_cast<double>(l));
    } else {
        Eigen::MatrixXd a(bias.rows() + 1, l);
        a.row(0).setOnes();
        a.bottomRows(bias.rows()) = bias;
        Eigen::VectorXd b = Eigen::VectorXd::Zero(a.rows());
        b[0] = 1.0;

        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
        if (cod.rank() < a.rows())
            throw InfeasibleError("bias constraint system is singular (rank " + std::to_string(cod.rank()) + " of "
                                  + std::to_string(a.rows()) + ")");
        Eigen::VectorXd w = cod.solve(b);
        // One step of iterative refinement; the rows are nearly collinear for
        // closely spaced fractions.
        w += cod.solve(b - a * w);
        out.w.assign(w.data(), w.data() + w.size());
    }
    out.epsilon = Eigen::Map<const Eigen::VectorXd>(out.w.data(), l).squaredNorm();
    return out;
}

Eigen::VectorXd min_norm_in_slab(const EnsembleConfig& config, double epsilon)
{
    if (!(epsilon >= 0.0))
        throw ConfigError("epsilon must be nonnegative");
    const EnsembleWeights w0 = exact_weights(config);
    const Eigen::Map<const Eigen::VectorXd> start(w0.w.data(), static_cast<Eigen::Index>(w0.w.size()));
    if (epsilon == 0.0)
        return start;
    return active_set_min_norm(bias_constraint_matrix(config.ls, config.d), slab_bounds(config, epsilon), start);
}

EnsembleWeights relaxed_weights(const EnsembleConfig& config)
{
    const EnsembleWeights w0 = exact_weights(config);
    const auto l = static_cast<Eigen::Index>(config.ls.size());
    EnsembleWeights out;
    out.method = Method::relaxed;

    const Eigen::MatrixXd a = bias_constraint_matrix(config.ls, config.d);
    if (a.rows() == 0) {
        // Only the sum and norm constraints remain: uniform weights, norm 1/L.
        out.w = w0.w;
        out.epsilon = 1.0 / (static_cast<double>(l) * config.lambda);
        return out;
    }

    const Eigen::Map<const Eigen::VectorXd> start(w0.w.data(), l);
    const Eigen::VectorXd unit_bounds = slab_bounds(config, 1.0);
    auto probe = [&](double eps) { return active_set_min_norm(a, eps * unit_bounds, start); };

    double lo = 0.0;
    double hi = 2.0 * w0.epsilon / std::min(config.lambda, 1.0);
    Eigen::VectorXd best = probe(hi);
    if (best.squaredNorm() > config.lambda * hi * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "relaxed program: upper bracket epsilon = " << hi << " is not feasible (||w||^2 = "
            << best.squaredNorm() << ", lambda = " << config.lambda << ")";
        throw ConvergenceError(msg.str());
    }

    int iter = 0;
    for (; iter < kBisectionMaxIter && hi - lo > kBisectionRelTol * hi; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        Eigen::VectorXd w = probe(mid);
        if (w.squaredNorm() <= config.lambda * mid) {
            hi = mid;
            best = std::move(w);
        } else {
            lo = mid;
        }
    }
    if (iter == kBisectionMaxIter) {
        std::ostringstream msg;
        msg << "relaxed program: bisection stopped with bracket [" << lo << ", " << hi << "] after " << iter
            << " iterations";
        throw ConvergenceError(msg.str());
    }

    out.w.assign(best.data(), best.data() + best.size());
    out.epsilon = hi;
    return out;
}

ConstraintReport constraint_report(const EnsembleConfig& config, const EnsembleWeights& weights)
{
    config.validate();
    if (weights.w.size() != config.ls.size())
        throw ConfigError("weight count does not match the number of subsample fractions");
    const Eigen::Map<const Eigen::VectorXd> w(weights.w.data(), static_cast<Eigen::Index>(weights.w.size()));
    const Eigen::MatrixXd a = bias_constraint_matrix(config.ls, config.d);
    const Eigen::VectorXd terms = a * w;
    const Eigen::VectorXd bounds = slab_bounds(config, weights.epsilon);

    ConstraintReport r;
    r.sum_residual = w.sum() - 1.0;
    r.exponents = constraint_exponents(config.d);
    r.bias_terms.assign(terms.data(), terms.data() + terms.size());
    r.bias_bounds.assign(bounds.data(), bounds.data() + bounds.size());
    r.norm2 = w.squaredNorm();
    r.norm_bound = config.lambda * weights.epsilon;
    return r;
}

} // namespace ensdiv
