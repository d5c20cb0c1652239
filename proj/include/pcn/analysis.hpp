#ifndef PCN_ANALYSIS_HPP
#define PCN_ANALYSIS_HPP

#include <cmath>
#include <limits>
#include <vector>

#include "pcn/network.hpp"
#include "pcn/relax.hpp"
#include "pcn/special.hpp"

namespace pcn {

// ---------------------------------------------------------------------------
// Linear-network equilibrium
//
// For identity activations and MSE loss the stationarity conditions of the
// energy are linear in the states:
//   (I + W_{i+1}^T W_{i+1}) s_i - W_i s_{i-1} - W_{i+1}^T s_{i+1}
//       = b_i - W_{i+1}^T b_{i+1}   (+ W_0 x at i = 0, + W_L^T y at i = L-1)
// a symmetric positive definite block-tridiagonal system, one right-hand
// side per sample.
// ---------------------------------------------------------------------------

struct BlockTridiagonalSystem {
    // diag[i] couples s_i with itself; sub[i] couples s_i with s_{i-1}
    // (sub[0] is unused); super[i] couples s_i with s_{i+1} (super[last]
    // unused). rhs[i] is state_dim(i) x batch, one column per sample.
    std::vector<Matrix<double>> diag;
    std::vector<Matrix<double>> sub;
    std::vector<Matrix<double>> super;
    std::vector<Matrix<double>> rhs;

    std::size_t num_blocks() const { return diag.size(); }

    std::size_t total_dim() const {
        std::size_t n = 0;
        for (const auto& d : diag) n += d.rows;
        return n;
    }
};

template <typename T>
void require_linear_mse(const Network<T>& net, const char* who) {
    if (!net.is_linear())
        throw ContractError(std::string(who) +
                            ": network has a nonlinear activation");
    if (net.loss != Loss::mse)
        throw ContractError(std::string(who) + ": loss must be mse");
}

inline BlockTridiagonalSystem build_equilibrium_system(
    const Network<double>& net, const Matrix<double>& x,
    const Matrix<double>& y) {
    require_linear_mse(net, "build_equilibrium_system");
    const std::size_t nh = net.num_hidden();
    BlockTridiagonalSystem sys;
    sys.diag.resize(nh);
    sys.sub.resize(nh);
    sys.super.resize(nh);
    sys.rhs.resize(nh);

    for (std::size_t i = 0; i < nh; ++i) {
        const Matrix<double>& w_next = net.layers[i + 1].weight;
        const std::size_t d = net.state_dim(i);
        sys.diag[i] = gemm_tn(w_next, w_next);
        for (std::size_t k = 0; k < d; ++k) sys.diag[i](k, k) += 1.0;
        if (i > 0) {
            sys.sub[i] = -1.0 * net.layers[i].weight;
            sys.super[i - 1] = transpose(sys.sub[i]);
        }

        // rhs_i = b_i - W_{i+1}^T b_{i+1}, plus the boundary sources.
        Matrix<double> r(d, x.rows);
        const Vector<double>& bi = net.layers[i].bias;
        const Vector<double>& bn = net.layers[i + 1].bias;
        Vector<double> base(d);
        for (std::size_t k = 0; k < d; ++k) {
            double v = bi[k];
            for (std::size_t m = 0; m < bn.size(); ++m)
                v -= w_next(m, k) * bn[m];
            base[k] = v;
        }
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t b = 0; b < x.rows; ++b) r(k, b) = base[k];
        if (i == 0) {
            // + W_0 x per sample
            Matrix<double> wx = gemm_nt(x, net.layers[0].weight);  // batch x d
            for (std::size_t b = 0; b < x.rows; ++b)
                for (std::size_t k = 0; k < d; ++k) r(k, b) += wx(b, k);
        }
        if (i + 1 == nh) {
            // + W_L^T y per sample
            Matrix<double> wy = gemm(y, net.layers.back().weight);  // batch x d
            for (std::size_t b = 0; b < y.rows; ++b)
                for (std::size_t k = 0; k < d; ++k) r(k, b) += wy(b, k);
        }
        sys.rhs[i] = std::move(r);
    }
    return sys;
}

// Block forward elimination and back substitution (block Thomas). The
// eliminated diagonal blocks stay SPD for systems arising from linear-MSE
// energies, so no block-level pivoting is needed; solves within a block
// still use partially pivoted LU.
inline std::vector<Matrix<double>> solve_block_tridiagonal(
    const BlockTridiagonalSystem& sys) {
    const std::size_t n = sys.num_blocks();
    if (n == 0) return {};
    std::vector<Matrix<double>> diag_mod(n), rhs_mod(n);
    std::vector<LuFactors<double>> factors(n);

    diag_mod[0] = sys.diag[0];
    rhs_mod[0] = sys.rhs[0];
    factors[0] = lu_factor(diag_mod[0]);
    for (std::size_t i = 1; i < n; ++i) {
        const Matrix<double> m = factors[i - 1].solve(sys.super[i - 1]);
        diag_mod[i] = sys.diag[i] - gemm(sys.sub[i], m);
        const Matrix<double> c = factors[i - 1].solve(rhs_mod[i - 1]);
        rhs_mod[i] = sys.rhs[i] - gemm(sys.sub[i], c);
        factors[i] = lu_factor(diag_mod[i]);
    }

    std::vector<Matrix<double>> sol(n);
    sol[n - 1] = factors[n - 1].solve(rhs_mod[n - 1]);
    for (std::size_t i = n - 1; i-- > 0;) {
        const Matrix<double> coupled = gemm(sys.super[i], sol[i + 1]);
        sol[i] = factors[i].solve(rhs_mod[i] - coupled);
    }
    return sol;
}

// Dense assembly of the same system; the cross-check for the block solver.
inline Matrix<double> assemble_dense_system(const BlockTridiagonalSystem& sys,
                                            Matrix<double>* rhs_out) {
    const std::size_t n = sys.num_blocks();
    std::vector<std::size_t> offset(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i)
        offset[i + 1] = offset[i] + sys.diag[i].rows;
    const std::size_t total = offset[n];

    Matrix<double> a(total, total);
    for (std::size_t i = 0; i < n; ++i) {
        const Matrix<double>& d = sys.diag[i];
        for (std::size_t r = 0; r < d.rows; ++r)
            for (std::size_t c = 0; c < d.cols; ++c)
                a(offset[i] + r, offset[i] + c) = d(r, c);
        if (i > 0) {
            const Matrix<double>& s = sys.sub[i];
            for (std::size_t r = 0; r < s.rows; ++r)
                for (std::size_t c = 0; c < s.cols; ++c)
                    a(offset[i] + r, offset[i - 1] + c) = s(r, c);
        }
        if (i + 1 < n) {
            const Matrix<double>& s = sys.super[i];
            for (std::size_t r = 0; r < s.rows; ++r)
                for (std::size_t c = 0; c < s.cols; ++c)
                    a(offset[i] + r, offset[i + 1] + c) = s(r, c);
        }
    }
    if (rhs_out) {
        const std::size_t batch = sys.rhs.front().cols;
        *rhs_out = Matrix<double>(total, batch);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < sys.rhs[i].rows; ++r)
                for (std::size_t b = 0; b < batch; ++b)
                    (*rhs_out)(offset[i] + r, b) = sys.rhs[i](r, b);
    }
    return a;
}

// Closed-form stationary states of a linear-MSE network.
inline StateConfig<double> analytic_equilibrium_linear(
    const Network<double>& net, const Matrix<double>& x,
    const Matrix<double>& y) {
    require_linear_mse(net, "analytic_equilibrium_linear");
    BlockTridiagonalSystem sys = build_equilibrium_system(net, x, y);
    std::vector<Matrix<double>> sol = solve_block_tridiagonal(sys);
    StateConfig<double> s;
    s.layers.reserve(sol.size());
    for (const auto& dim_by_batch : sol)
        s.layers.push_back(transpose(dim_by_batch));
    return s;
}

// ---------------------------------------------------------------------------
// Explicit error-to-state Jacobian
// ---------------------------------------------------------------------------

struct JacobianMatrix {
    Matrix<double> full;               // total_dim x total_dim
    std::vector<std::size_t> offsets;  // per-layer row/col starts (size L+1)
};

constexpr std::size_t kDefaultJacobianCap = 512;

// Assembles J = d(states)/d(errors) for a single sample, evaluated at the
// states reconstructed from the given errors. Block lower-triangular with
// identity diagonal blocks: block (i, j) is the product of the layer input
// Jacobians between the two states.
inline JacobianMatrix build_jacobian(const Network<double>& net,
                                     const Matrix<double>& x,
                                     const ErrorConfig<double>& e,
                                     std::size_t cap = kDefaultJacobianCap) {
    if (x.rows != 1)
        throw ContractError("build_jacobian: expects a single sample");
    const std::size_t total = net.total_state_dim();
    if (total > cap)
        throw ContractError("build_jacobian: total state dim " +
                            std::to_string(total) + " exceeds cap " +
                            std::to_string(cap));
    const std::size_t nh = net.num_hidden();

    StateConfig<double> s = errors_to_states(net, x, e);

    // Per-layer input Jacobians d f_{k+1} / d s_k = diag(act'(z)) W.
    std::vector<Matrix<double>> layer_jac(nh > 0 ? nh - 1 : 0);
    for (std::size_t k = 0; k + 1 < nh; ++k) {
        const Layer<double>& l = net.layers[k + 1];
        Matrix<double> j = l.weight;
        if (l.act != Activation::identity) {
            Matrix<double> z = layer_preactivation(l, s.layers[k]);
            for (std::size_t r = 0; r < j.rows; ++r) {
                const double g = activate_grad(l.act, z(0, r));
                for (std::size_t c = 0; c < j.cols; ++c) j(r, c) *= g;
            }
        }
        layer_jac[k] = std::move(j);
    }

    JacobianMatrix out;
    out.offsets.assign(nh + 1, 0);
    for (std::size_t i = 0; i < nh; ++i)
        out.offsets[i + 1] = out.offsets[i] + net.state_dim(i);
    out.full = Matrix<double>(total, total);

    // blocks[j] holds d s_i / d e_j for the current row i, built by the
    // recursion d s_i / d e_j = J_{i-1} * d s_{i-1} / d e_j.
    std::vector<Matrix<double>> blocks(nh);
    for (std::size_t i = 0; i < nh; ++i) {
        for (std::size_t j = 0; j < i; ++j)
            blocks[j] = gemm(layer_jac[i - 1], blocks[j]);
        blocks[i] = Matrix<double>::identity(net.state_dim(i));
        for (std::size_t j = 0; j <= i; ++j) {
            const Matrix<double>& blk = blocks[j];
            for (std::size_t r = 0; r < blk.rows; ++r)
                for (std::size_t c = 0; c < blk.cols; ++c)
                    out.full(out.offsets[i] + r, out.offsets[j] + c) =
                        blk(r, c);
        }
    }
    return out;
}

inline Vector<double> flatten_layers(const std::vector<Matrix<double>>& ms) {
    Vector<double> v;
    for (const auto& m : ms) v.insert(v.end(), m.data.begin(), m.data.end());
    return v;
}

// Max-norm residual of grad_e E = J^T grad_s E for a single sample.
inline double gradient_relation_residual(const Network<double>& net,
                                         const Matrix<double>& x,
                                         const Matrix<double>& y,
                                         const StateConfig<double>& s,
                                         std::size_t cap = 64) {
    if (x.rows != 1)
        throw ContractError("gradient_relation_residual: expects one sample");
    if (net.total_state_dim() > cap)
        throw ContractError("gradient_relation_residual: state dim " +
                            std::to_string(net.total_state_dim()) +
                            " exceeds cap " + std::to_string(cap));
    ErrorConfig<double> e = states_to_errors(net, x, s);
    JacobianMatrix jac = build_jacobian(net, x, e);

    Vector<double> gs = flatten_layers(state_grad(net, x, y, s));
    Vector<double> ge = flatten_layers(error_grad(net, x, y, e).grads);

    const std::size_t n = gs.size();
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += jac.full(i, j) * gs[i];
        worst = std::max(worst, std::fabs(ge[j] - acc));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues (cyclic Jacobi) and Hessian inertia
// ---------------------------------------------------------------------------

inline std::vector<double> symmetric_eigenvalues(Matrix<double> a,
                                                 std::size_t max_sweeps = 64) {
    if (a.rows != a.cols)
        throw DimensionError("symmetric_eigenvalues: matrix not square");
    const std::size_t n = a.rows;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-24 * (1.0 + max_abs(a))) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t =
                    (theta >= 0.0)
                        ? 1.0 / (theta + std::sqrt(1.0 + theta * theta))
                        : 1.0 / (theta - std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sgn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - sgn * akq;
                    a(k, q) = sgn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - sgn * aqk;
                    a(q, k) = sgn * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

struct InertiaSignature {
    std::size_t positive = 0;
    std::size_t negative = 0;
    std::size_t zero = 0;

    bool operator==(const InertiaSignature& o) const {
        return positive == o.positive && negative == o.negative &&
               zero == o.zero;
    }
};

inline InertiaSignature count_inertia(const std::vector<double>& eigs,
                                      double tol) {
    InertiaSignature sig;
    for (double v : eigs) {
        if (v > tol)
            ++sig.positive;
        else if (v < -tol)
            ++sig.negative;
        else
            ++sig.zero;
    }
    return sig;
}

struct HessianInertiaResult {
    InertiaSignature signature_s;
    InertiaSignature signature_e;
    bool match = false;
};

namespace detail {

// Dense Hessian of the state energy by central differences of the analytic
// state gradient. Single sample only.
inline Matrix<double> state_hessian_fd(const Network<double>& net,
                                       const Matrix<double>& x,
                                       const Matrix<double>& y,
                                       const StateConfig<double>& s,
                                       double h) {
    const std::size_t n = net.total_state_dim();
    Matrix<double> hess(n, n);
    StateConfig<double> probe = s;
    std::size_t col = 0;
    for (std::size_t li = 0; li < probe.layers.size(); ++li) {
        for (std::size_t k = 0; k < probe.layers[li].size(); ++k, ++col) {
            const double orig = probe.layers[li].data[k];
            probe.layers[li].data[k] = orig + h;
            Vector<double> gp = flatten_layers(state_grad(net, x, y, probe));
            probe.layers[li].data[k] = orig - h;
            Vector<double> gm = flatten_layers(state_grad(net, x, y, probe));
            probe.layers[li].data[k] = orig;
            for (std::size_t r = 0; r < n; ++r)
                hess(r, col) = (gp[r] - gm[r]) / (2.0 * h);
        }
    }
    // Symmetrize away the finite-difference asymmetry.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = 0.5 * (hess(i, j) + hess(j, i));
            hess(i, j) = m;
            hess(j, i) = m;
        }
    return hess;
}

}  // namespace detail

constexpr double kInertiaEigTol = 1e-7;
constexpr double kHessianFdStep = 1e-4;

// Compares the eigenvalue sign counts of the state-space Hessian and its
// congruent error-space counterpart J^T H J at a critical point.
inline HessianInertiaResult hessian_inertia_check(
    const Network<double>& net, const Matrix<double>& x,
    const Matrix<double>& y, const StateConfig<double>& s_star,
    double eig_tol = kInertiaEigTol) {
    if (x.rows != 1)
        throw ContractError("hessian_inertia_check: expects one sample");
    if (net.total_state_dim() > 64)
        throw ContractError("hessian_inertia_check: state dim above cap 64");
    if (max_abs_layers(state_grad(net, x, y, s_star)) > 1e-6)
        throw ContractError(
            "hessian_inertia_check: s_star is not a critical point");

    Matrix<double> h_s =
        detail::state_hessian_fd(net, x, y, s_star, kHessianFdStep);
    JacobianMatrix jac =
        build_jacobian(net, x, states_to_errors(net, x, s_star));
    Matrix<double> h_e = gemm(gemm_tn(jac.full, h_s), jac.full);

    HessianInertiaResult out;
    out.signature_s = count_inertia(symmetric_eigenvalues(h_s), eig_tol);
    out.signature_e = count_inertia(symmetric_eigenvalues(h_e), eig_tol);
    out.match = (out.signature_s == out.signature_e);
    return out;
}

// ---------------------------------------------------------------------------
// Signal-decay models
// ---------------------------------------------------------------------------

// Idealized top-down propagation model: L layers below the output, update
// rate lambda per step.
struct DecayModel {
    std::size_t num_layers;
    double lambda;

    void validate() const {
        if (!(lambda > 0.0 && lambda < 1.0))
            throw ConfigError("DecayModel: lambda must lie in (0, 1)");
    }
};

// Log of the modeled signal magnitude at depth i below the output after t
// steps: ln C(t, i) + i ln(lambda) + (t - i) ln(1 - lambda). Returns -inf
// when the signal cannot have arrived yet (i > t).
inline double binomial_magnitude(const DecayModel& model, std::uint64_t t,
                                 std::uint64_t i) {
    model.validate();
    if (i > t) return -std::numeric_limits<double>::infinity();
    return log_binomial(t, i) +
           static_cast<double>(i) * std::log(model.lambda) +
           static_cast<double>(t - i) * std::log1p(-model.lambda);
}

// Iterates the scalar magnitude recursion m_i <- (1-lambda) m_i +
// lambda m_{i-1} from a unit impulse at the output. Row t, column k holds
// the magnitude at depth k after t steps; each row redistributes its mass
// with weights (1-lambda) and lambda, so rows sum to one until the signal
// reaches the last layer.
inline Matrix<double> simulate_simplified_wavefront(std::size_t num_layers,
                                                    double lambda,
                                                    std::size_t steps) {
    DecayModel{num_layers, lambda}.validate();
    Matrix<double> table(steps + 1, num_layers + 1);
    table(0, 0) = 1.0;
    for (std::size_t t = 1; t <= steps; ++t) {
        for (std::size_t k = 0; k <= num_layers; ++k) {
            const double stay = (1.0 - lambda) * table(t - 1, k);
            const double inflow = (k > 0) ? lambda * table(t - 1, k - 1) : 0.0;
            table(t, k) = stay + inflow;
        }
    }
    return table;
}

// Continuous-time limit of the binomial model at total time tau: a Poisson
// profile, ln(tau^i / i!) - tau.
inline double poisson_limit(double tau, std::uint64_t i) {
    if (!(tau > 0.0)) throw ConfigError("poisson_limit: tau must be positive");
    return static_cast<double>(i) * std::log(tau) - log_factorial(i) - tau;
}

}  // namespace pcn

#endif  // PCN_ANALYSIS_HPP
