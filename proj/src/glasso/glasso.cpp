#include "quilt/glasso/glasso.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "quilt/simd/kernels.hpp"

namespace quilt {

namespace {

double soft_threshold(double x, double lam) {
    if (x > lam) return x - lam;
    if (x < -lam) return x + lam;
    return 0.0;
}

Matrix inverse_pd(const Matrix& a, const char* who) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw NumericalError(std::string(who) + ": matrix is not positive definite");
    Matrix inv = llt.solve(Matrix::Identity(a.rows(), a.cols()));
    inv = ((inv + inv.transpose()) * 0.5).eval();
    return inv;
}

double log_det_pd(const Matrix& a, const char* who) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw NumericalError(std::string(who) + ": matrix is not positive definite");
    return 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
}

BoolMatrix banned_matrix(int p,
                         const std::optional<std::vector<std::pair<int, int>>>& pairs) {
    BoolMatrix banned = BoolMatrix::Constant(p, p, false);
    if (!pairs) return banned;
    for (const auto& [i, j] : *pairs) {
        if (i < 0 || j < 0 || i >= p || j >= p)
            throw ValidationError("zero_constraint: index out of range");
        if (i == j) throw ValidationError("zero_constraint: diagonal cannot be constrained");
        banned(i, j) = true;
        banned(j, i) = true;
    }
    return banned;
}

}  // namespace

PenaltyMatrix PenaltyMatrix::uniform(int p, double lam) {
    if (lam < 0.0) throw ValidationError("PenaltyMatrix: negative penalty");
    PenaltyMatrix out;
    out.lambda = Matrix::Constant(p, p, lam);
    out.lambda.diagonal().setZero();
    return out;
}

PenaltyMatrix PenaltyMatrix::per_pair(const BlockDesign& design, double c0) {
    if (c0 < 0.0) throw ValidationError("PenaltyMatrix: negative scale");
    const int p = design.p();
    Matrix joint_n = Matrix::Zero(p, p);
    for (int k = 0; k < design.num_blocks(); ++k) {
        const auto& v = design.block(k);
        for (std::size_t a = 0; a < v.size(); ++a)
            for (std::size_t b = a + 1; b < v.size(); ++b) {
                joint_n(v[a], v[b]) += design.sample_size(k);
                joint_n(v[b], v[a]) += design.sample_size(k);
            }
    }
    const double logp = std::log(static_cast<double>(p));
    PenaltyMatrix out;
    out.lambda = Matrix::Zero(p, p);
    double max_observed = 0.0;
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (joint_n(i, j) > 0.0) {
                const double lam = c0 * std::sqrt(logp / joint_n(i, j));
                out.lambda(i, j) = lam;
                out.lambda(j, i) = lam;
                max_observed = std::max(max_observed, lam);
            }
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (joint_n(i, j) == 0.0) {
                out.lambda(i, j) = max_observed;
                out.lambda(j, i) = max_observed;
            }
    return out;
}

void PenaltyMatrix::validate(int p) const {
    if (lambda.rows() != p || lambda.cols() != p)
        throw ValidationError("PenaltyMatrix: dimension mismatch");
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j) {
            if (lambda(i, j) != lambda(j, i))
                throw ValidationError("PenaltyMatrix: must be symmetric");
            if (lambda(i, j) < 0.0)
                throw ValidationError("PenaltyMatrix: negative penalty");
        }
}

double penalized_objective(const Matrix& sigma, const PenaltyMatrix& penalty,
                           const Matrix& theta) {
    const int p = static_cast<int>(theta.rows());
    double obj = log_det_pd(theta, "penalized_objective");
    obj -= (sigma.array() * theta.array()).sum();
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            if (i != j) obj -= penalty.lambda(i, j) * std::fabs(theta(i, j));
    return obj;
}

double kkt_residual(const Matrix& sigma, const PenaltyMatrix& penalty,
                    const Matrix& theta,
                    const std::optional<std::vector<std::pair<int, int>>>& zero_constraint,
                    double zero_tol) {
    const int p = static_cast<int>(theta.rows());
    penalty.validate(p);
    const BoolMatrix banned = banned_matrix(p, zero_constraint);
    const Matrix v = inverse_pd(theta, "kkt_residual");
    double res = 0.0;
    for (int i = 0; i < p; ++i) res = std::max(res, std::fabs(v(i, i) - sigma(i, i)));
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) {
            if (banned(i, j)) continue;
            const double diff = v(i, j) - sigma(i, j);
            const double lam = penalty.lambda(i, j);
            double r;
            if (std::fabs(theta(i, j)) <= zero_tol)
                r = std::max(0.0, std::fabs(diff) - lam);
            else
                r = std::fabs(diff - lam * (theta(i, j) > 0.0 ? 1.0 : -1.0));
            res = std::max(res, r);
        }
    }
    return res;
}

GlassoResult solve(const Matrix& sigma, const PenaltyMatrix& penalty,
                   const SolverOptions& options) {
    const int p = static_cast<int>(sigma.rows());
    if (sigma.cols() != p) throw ValidationError("solve: sigma must be square");
    if (options.tolerance <= 0.0) throw ValidationError("solve: tolerance must be positive");
    penalty.validate(p);
    Matrix s = sigma;
    for (int i = 0; i < p; ++i) {
        if (s(i, i) <= 0.0)
            throw ValidationError("solve: sigma diagonal must be positive");
        for (int j = i + 1; j < p; ++j) {
            if (std::fabs(s(i, j) - s(j, i)) > 1e-8)
                throw ValidationError("solve: sigma asymmetry beyond 1e-8");
            s(j, i) = s(i, j);
        }
    }
    const BoolMatrix banned = banned_matrix(p, options.zero_constraint);

    Matrix theta;
    if (options.theta_init != nullptr) {
        theta = *options.theta_init;
        if (theta.rows() != p || theta.cols() != p)
            throw ValidationError("solve: warm start dimension mismatch");
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                if (banned(i, j) && theta(i, j) != 0.0)
                    throw ValidationError("solve: warm start violates the zero constraint");
    } else {
        theta = Matrix::Zero(p, p);
        for (int i = 0; i < p; ++i) theta(i, i) = 1.0 / s(i, i);
    }
    Matrix w = inverse_pd(theta, "solve");

    const double inner_tol =
        std::max(1e-13, std::min(0.01 * options.tolerance, 0.1 * options.kkt_target));

    GlassoResult result;

    // Unpenalized and unconstrained: the maximizer is the plain inverse, and
    // the sweep machinery would only grind toward it.
    const bool fully_free =
        penalty.lambda.maxCoeff() == 0.0 &&
        (!options.zero_constraint || options.zero_constraint->empty());
    if (fully_free) {
        Matrix direct = inverse_pd(s, "solve");
        const double kkt = kkt_residual(s, penalty, direct, options.zero_constraint);
        if (kkt > std::max(options.kkt_target, 1e-6))
            throw NumericalError("solve: unpenalized inverse failed its KKT check", kkt);
        if (options.track_objective)
            result.objective.push_back(penalized_objective(s, penalty, direct));
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                if (i != j && std::fabs(direct(i, j)) < options.zero_snap)
                    direct(i, j) = 0.0;
        result.est.support = support_of(direct);
        result.est.theta = std::move(direct);
        result.w = s;
        result.sweeps = 1;
        result.kkt = kkt;
        return result;
    }

    Vector col_theta(p), uw(p), m(p), a(p);
    Matrix w_prev(p, p);
    double last_kkt = std::numeric_limits<double>::infinity();

    int sweep = 0;
    for (; sweep < options.max_iterations; ++sweep) {
        w_prev = w;
        for (int j = 0; j < p; ++j) {
            const double s22 = s(j, j);
            const double w22 = w(j, j);

            // Current column of theta, with its own slot held at zero so the
            // full-length vector algebra below stays valid.
            col_theta = theta.col(j);
            col_theta(j) = 0.0;
            uw.noalias() = w * col_theta;

            std::vector<int> allowed;
            bool any_penalty = false;
            for (int i = 0; i < p; ++i) {
                if (i == j || banned(i, j)) continue;
                allowed.push_back(i);
                if (penalty.lambda(i, j) > 0.0) any_penalty = true;
            }

            if (!any_penalty && !allowed.empty()) {
                // No l1 term on this column: solve the quadratic subproblem
                // directly (coordinate descent crawls on ill-conditioned
                // unpenalized systems).
                const int na = static_cast<int>(allowed.size());
                Matrix q(na, na);
                Vector rhs(na);
                for (int a = 0; a < na; ++a) {
                    const int ia = allowed[a];
                    rhs(a) = -s(ia, j);
                    for (int b = 0; b <= a; ++b) {
                        const int ib = allowed[b];
                        const double val =
                            s22 * (w(ia, ib) - w(ia, j) * w(ib, j) / w22);
                        q(a, b) = val;
                        q(b, a) = val;
                    }
                }
                Eigen::LLT<Matrix> llt(q);
                if (llt.info() != Eigen::Success)
                    throw NumericalError("solve: loss of positive definiteness",
                                         last_kkt);
                const Vector beta = llt.solve(rhs);
                col_theta.setZero();
                for (int a = 0; a < na; ++a) col_theta(allowed[a]) = beta(a);
                uw.noalias() = w * col_theta;
            } else
            // Lasso over the unconstrained off-diagonal coordinates:
            // minimize 1/2 t'Qt + s12't + sum lambda_i |t_i| with
            // Q = s22 * (W11 - w12 w12' / w22), the inverse of theta's
            // complementary principal block.
            for (int inner = 0; inner < options.inner_max_iterations; ++inner) {
                double max_delta = 0.0;
                for (int i = 0; i < p; ++i) {
                    if (i == j || banned(i, j)) continue;
                    const double wij = w(i, j);
                    const double qii = s22 * (w(i, i) - wij * wij / w22);
                    if (qii <= 1e-14)
                        throw NumericalError("solve: loss of positive definiteness",
                                             last_kkt);
                    const double qt_i = s22 * (uw(i) - wij * uw(j) / w22);
                    const double grad_rest = s(i, j) + qt_i - qii * col_theta(i);
                    const double updated = soft_threshold(-grad_rest, penalty.lambda(i, j)) / qii;
                    const double delta = updated - col_theta(i);
                    if (delta != 0.0) {
                        col_theta(i) = updated;
                        simd::axpy(delta, w.col(i).data(), uw.data(),
                                   static_cast<std::size_t>(p));
                        max_delta = std::max(max_delta, std::fabs(delta));
                    }
                }
                if (max_delta <= inner_tol) break;
            }

            // m = Theta11^{-1} theta12 over off coordinates.
            const double uwj = uw(j);
            m = uw - w.col(j) * (uwj / w22);
            m(j) = 0.0;
            const double quad = col_theta.dot(m);
            const double theta22 = 1.0 / s22 + quad;

            theta.col(j) = col_theta;
            theta.row(j) = col_theta.transpose();
            theta(j, j) = theta22;

            // Rank-two refresh of W = Theta^{-1} for the changed column.
            a = w.col(j);
            w.noalias() -= (a * a.transpose()) / w22;
            w.noalias() += s22 * (m * m.transpose());
            for (int i = 0; i < p; ++i) {
                const double wij = -s22 * m(i);
                w(i, j) = wij;
                w(j, i) = wij;
            }
            w(j, j) = s22;
        }

        w = inverse_pd(theta, "solve");
        if (options.track_objective)
            result.objective.push_back(penalized_objective(s, penalty, theta));

        const double dw = simd::max_abs_diff(w_prev.data(), w.data(),
                                             static_cast<std::size_t>(p) * p);
        if (dw < options.tolerance) {
            last_kkt = kkt_residual(s, penalty, theta, options.zero_constraint);
            if (last_kkt <= options.kkt_target) {
                ++sweep;
                break;
            }
        }
    }

    if (!(last_kkt <= options.kkt_target)) {
        last_kkt = kkt_residual(s, penalty, theta, options.zero_constraint);
        if (last_kkt > options.kkt_target) {
            std::ostringstream oss;
            oss << "solve: no convergence in " << options.max_iterations
                << " sweeps (stationarity gap " << last_kkt << ")";
            throw NumericalError(oss.str(), last_kkt);
        }
    }

    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            if (i != j && std::fabs(theta(i, j)) < options.zero_snap) theta(i, j) = 0.0;

    result.est.support = support_of(theta);
    result.est.theta = std::move(theta);
    result.w = std::move(w);
    result.sweeps = sweep;
    result.kkt = last_kkt;
    return result;
}

PrecisionEstimate population_madgq(const MaskedCorrelation& sigma_o, double tolerance) {
    SolverOptions options;
    options.max_iterations = 5000;
    options.tolerance = tolerance;
    options.kkt_target = std::max(1e-10, tolerance);
    options.zero_constraint = zero_constraint_from_mask(sigma_o.mask());
    return solve(sigma_o.values(), PenaltyMatrix::uniform(sigma_o.p(), 0.0), options).est;
}

std::vector<std::pair<int, int>> zero_constraint_from_mask(const PairMask& mask) {
    return mask.unobserved_pairs();
}

}  // namespace quilt
