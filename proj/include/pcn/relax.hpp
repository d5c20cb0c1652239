#ifndef PCN_RELAX_HPP
#define PCN_RELAX_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "pcn/network.hpp"

namespace pcn {

// Gradient conventions in this module: energies are reported as batch means,
// but state and error gradients are per-sample (each batch row carries the
// gradient of its own sample's energy). Relaxation therefore behaves
// identically for any batch size, and the learning rate keeps the same
// meaning whether one sample or a full batch is relaxed.

constexpr double kDivergenceGuard = 1e12;

// ---------------------------------------------------------------------------
// Configuration and trace
// ---------------------------------------------------------------------------

template <typename T>
struct RelaxConfig {
    double lr = 0.1;               // state / error learning rate
    std::size_t steps = 1;         // number of SGD updates (0 records init only)
    std::size_t record_every = 1;  // trace cadence; 0 disables intermediate records
    std::optional<StateConfig<T>> reference;  // for distance tracking
    double momentum = 0.0;         // optional heavy-ball term
    double early_exit_tol = 0.0;   // stop when max |grad| drops below; 0 = off

    // ePC only: detect hyperparameters that collapse the run onto plain
    // backpropagation (single step, or a tiny lr*steps budget).
    bool guard_backprop_regime = false;

    void validate() const {
        if (!(lr > 0.0)) throw ConfigError("relax: lr must be positive");
        if (record_every == 0 && steps > 0)
            throw ConfigError("relax: record_every must be >= 1");
    }
};

struct TraceRecord {
    std::size_t step = 0;
    EnergyReport energy;
    // dist[layer][sample]: L2 distance to the reference states, present only
    // when a reference was supplied.
    std::vector<std::vector<double>> distances;
};

struct RelaxTrace {
    std::vector<TraceRecord> records;
    std::size_t steps_run = 0;
    bool early_exit = false;
    bool backprop_regime_warning = false;
};

template <typename T>
std::vector<std::vector<double>> layerwise_distances(
    const StateConfig<T>& s, const StateConfig<T>& ref) {
    std::vector<std::vector<double>> out(s.num_layers());
    for (std::size_t i = 0; i < s.num_layers(); ++i) {
        const Matrix<T>& a = s.layers[i];
        const Matrix<T>& b = ref.layers[i];
        check_same_shape(a, b, "layerwise_distances");
        out[i].resize(a.rows);
        for (std::size_t r = 0; r < a.rows; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < a.cols; ++c) {
                const double d = static_cast<double>(a(r, c)) -
                                 static_cast<double>(b(r, c));
                acc += d * d;
            }
            out[i][r] = std::sqrt(acc);
        }
    }
    return out;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// State-based formulation
// ---------------------------------------------------------------------------

// Copies each layer's prediction onto its state, so every internal energy
// starts at exactly zero.
template <typename T>
StateConfig<T> init_states_feedforward(const Network<T>& net,
                                       const Matrix<T>& x) {
    StateConfig<T> s;
    s.layers = forward(net, x).predictions;
    return s;
}

// Per-sample gradient of the energy with respect to every hidden state.
// Internal layers feel their own error minus the backpressure of the next
// layer's error; the top hidden layer feels the output loss instead.
template <typename T>
std::vector<Matrix<T>> state_grad(const Network<T>& net, const Matrix<T>& x,
                                  const Matrix<T>& y, const StateConfig<T>& s) {
    check_config_dims(net, x.rows, s.layers, "state_grad states");
    const std::size_t nh = net.num_hidden();
    const std::size_t batch = x.rows;

    std::vector<Matrix<T>> errors(nh);
    const Matrix<T>* prev = &x;
    for (std::size_t i = 0; i < nh; ++i) {
        errors[i] = s.layers[i] - layer_apply(net.layers[i], *prev);
        prev = &s.layers[i];
    }

    Matrix<T> y_hat = layer_apply(net.layers.back(), s.layers[nh - 1]);
    Matrix<T> loss_cot = loss_and_grad(net.loss, y_hat, y).grad;
    // Per-sample convention: undo the batch averaging of the loss gradient.
    const T b = static_cast<T>(batch);
    for (auto& v : loss_cot.data) v *= b;

    std::vector<Matrix<T>> g(nh);
    for (std::size_t i = 0; i < nh; ++i) {
        if (i + 1 < nh) {
            g[i] = errors[i] -
                   layer_vjp_input(net.layers[i + 1], s.layers[i],
                                   errors[i + 1]);
        } else {
            g[i] = errors[i] +
                   layer_vjp_input(net.layers.back(), s.layers[i], loss_cot);
        }
    }
    return g;
}

template <typename T>
double max_abs_layers(const std::vector<Matrix<T>>& ms) {
    double m = 0.0;
    for (const auto& mat : ms) m = std::max(m, max_abs(mat));
    return m;
}

namespace detail {

template <typename T>
void guard_divergence(const EnergyReport& rep, std::size_t step) {
    if (!(rep.total <= kDivergenceGuard) || !std::isfinite(rep.total)) {
        throw DivergenceError(
            "relaxation diverged: total energy " + std::to_string(rep.total) +
                " exceeds guard " + std::to_string(kDivergenceGuard) +
                " at step " + std::to_string(step),
            step);
    }
}

inline bool should_record(std::size_t step, std::size_t steps,
                          std::size_t every) {
    if (step == 0 || step == steps) return true;
    return every != 0 && step % every == 0;
}

}  // namespace detail

template <typename T>
struct SpcRelaxResult {
    StateConfig<T> states;
    RelaxTrace trace;
};

// Plain SGD relaxation of the states from feedforward init. All layers are
// updated synchronously from the same gradient evaluation.
template <typename T>
SpcRelaxResult<T> spc_relax(const Network<T>& net, const Matrix<T>& x,
                            const Matrix<T>& y, const RelaxConfig<T>& cfg) {
    cfg.validate();
    SpcRelaxResult<T> out;
    StateConfig<T>& s = out.states;
    s = init_states_feedforward(net, x);

    auto record = [&](std::size_t step) {
        TraceRecord rec;
        rec.step = step;
        rec.energy = energy_spc(net, x, y, s);
        if (cfg.reference)
            rec.distances = layerwise_distances(s, *cfg.reference);
        detail::guard_divergence<T>(rec.energy, step);
        out.trace.records.push_back(std::move(rec));
    };

    record(0);
    const T lr = static_cast<T>(cfg.lr);
    const T mu = static_cast<T>(cfg.momentum);
    std::vector<Matrix<T>> velocity;

    for (std::size_t t = 1; t <= cfg.steps; ++t) {
        std::vector<Matrix<T>> g = state_grad(net, x, y, s);
        if (cfg.early_exit_tol > 0.0 &&
            max_abs_layers(g) < cfg.early_exit_tol) {
            out.trace.early_exit = true;
            break;
        }
        if (mu != T(0)) {
            if (velocity.empty()) {
                velocity = g;
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    for (std::size_t k = 0; k < g[i].size(); ++k)
                        velocity[i].data[k] =
                            mu * velocity[i].data[k] + g[i].data[k];
                }
            }
            for (std::size_t i = 0; i < s.layers.size(); ++i)
                axpy(-lr, velocity[i], s.layers[i]);
        } else {
            for (std::size_t i = 0; i < s.layers.size(); ++i)
                axpy(-lr, g[i], s.layers[i]);
        }
        out.trace.steps_run = t;
        if (detail::should_record(t, cfg.steps, cfg.record_every)) {
            record(t);
        } else {
            // Cheap overflow check between records.
            for (const auto& m : s.layers) {
                if (!all_finite(m) || max_abs(m) > 2e6) {
                    record(t);  // triggers the energy guard with diagnostics
                    break;
                }
            }
        }
    }
    return out;
}

// First step at which each layer's energy exceeds the threshold; nullopt if
// it never does. Requires a trace recorded at every step.
inline std::vector<std::optional<std::size_t>> wavefront_arrival(
    const RelaxTrace& trace, double threshold) {
    if (trace.records.empty())
        throw ContractError("wavefront_arrival: empty trace");
    for (std::size_t r = 0; r < trace.records.size(); ++r) {
        if (trace.records[r].step != r)
            throw ContractError(
                "wavefront_arrival: trace must be recorded every step");
    }
    const std::size_t nl = trace.records.front().energy.layer_energies.size();
    std::vector<std::optional<std::size_t>> arrival(nl);
    for (const TraceRecord& rec : trace.records) {
        for (std::size_t i = 0; i < nl; ++i) {
            if (!arrival[i] && rec.energy.layer_energies[i] > threshold)
                arrival[i] = rec.step;
        }
    }
    return arrival;
}

// ---------------------------------------------------------------------------
// Error-based formulation
// ---------------------------------------------------------------------------

template <typename T>
ErrorConfig<T> states_to_errors(const Network<T>& net, const Matrix<T>& x,
                                const StateConfig<T>& s) {
    check_config_dims(net, x.rows, s.layers, "states_to_errors states");
    ErrorConfig<T> e;
    e.layers.reserve(net.num_hidden());
    const Matrix<T>* prev = &x;
    for (std::size_t i = 0; i < net.num_hidden(); ++i) {
        e.layers.push_back(s.layers[i] - layer_apply(net.layers[i], *prev));
        prev = &s.layers[i];
    }
    return e;
}

template <typename T>
StateConfig<T> errors_to_states(const Network<T>& net, const Matrix<T>& x,
                                const ErrorConfig<T>& e) {
    return perturbed_forward(net, x, e).states;
}

template <typename T>
struct ErrorGradResult {
    std::vector<Matrix<T>> grads;  // per-sample gradient per error layer
    StateConfig<T> states;         // states of the pass the gradient used
    Matrix<T> y_hat;
};

// One reverse sweep through the perturbed forward pass. The cotangent of the
// output loss is backpropagated through layers L..1; the cotangent arriving
// at each hidden state applies to its error directly, on top of the error's
// own quadratic term.
template <typename T>
ErrorGradResult<T> error_grad(const Network<T>& net, const Matrix<T>& x,
                              const Matrix<T>& y, const ErrorConfig<T>& e) {
    check_config_dims(net, x.rows, e.layers, "error_grad errors");
    const std::size_t nh = net.num_hidden();
    ErrorGradResult<T> out;

    PerturbedForwardResult<T> fwd = perturbed_forward(net, x, e);
    out.states = std::move(fwd.states);
    out.y_hat = std::move(fwd.y_hat);

    Matrix<T> cot = loss_and_grad(net.loss, out.y_hat, y).grad;
    const T b = static_cast<T>(x.rows);
    for (auto& v : cot.data) v *= b;

    out.grads.resize(nh);
    for (std::size_t i = nh; i-- > 0;) {
        // Layer i+1 reads state i, so its input cotangent lands there.
        cot = layer_vjp_input(net.layers[i + 1], out.states.layers[i], cot);
        out.grads[i] = cot + e.layers[i];
    }
    return out;
}

template <typename T>
struct EpcRelaxResult {
    ErrorConfig<T> errors;
    // States cached from the forward pass of the final gradient evaluation.
    // Weight gradients taken at these states make a single-step relaxation
    // reproduce loss gradients exactly; at equilibrium they coincide with a
    // fresh reconstruction from `errors`.
    StateConfig<T> states_at_last_grad;
    RelaxTrace trace;
};

// SGD relaxation over the errors, starting from zero (equivalent to the
// feedforward state init).
template <typename T>
EpcRelaxResult<T> epc_relax(const Network<T>& net, const Matrix<T>& x,
                            const Matrix<T>& y, const RelaxConfig<T>& cfg) {
    cfg.validate();
    EpcRelaxResult<T> out;
    ErrorConfig<T>& e = out.errors;
    e = zero_errors(net, x.rows);
    out.states_at_last_grad = init_states_feedforward(net, x);

    auto record = [&](std::size_t step) {
        TraceRecord rec;
        rec.step = step;
        rec.energy = energy_epc(net, x, y, e);
        if (cfg.reference) {
            StateConfig<T> s = errors_to_states(net, x, e);
            rec.distances = layerwise_distances(s, *cfg.reference);
        }
        detail::guard_divergence<T>(rec.energy, step);
        out.trace.records.push_back(std::move(rec));
    };

    record(0);
    Matrix<T> y_hat_first, y_hat_last;
    const T lr = static_cast<T>(cfg.lr);
    const T mu = static_cast<T>(cfg.momentum);
    std::vector<Matrix<T>> velocity;

    for (std::size_t t = 1; t <= cfg.steps; ++t) {
        ErrorGradResult<T> gr = error_grad(net, x, y, e);
        if (t == 1) y_hat_first = gr.y_hat;
        y_hat_last = std::move(gr.y_hat);
        out.states_at_last_grad = std::move(gr.states);
        if (cfg.early_exit_tol > 0.0 &&
            max_abs_layers(gr.grads) < cfg.early_exit_tol) {
            out.trace.early_exit = true;
            break;
        }
        if (mu != T(0)) {
            if (velocity.empty()) {
                velocity = gr.grads;
            } else {
                for (std::size_t i = 0; i < gr.grads.size(); ++i)
                    for (std::size_t k = 0; k < gr.grads[i].size(); ++k)
                        velocity[i].data[k] =
                            mu * velocity[i].data[k] + gr.grads[i].data[k];
            }
            for (std::size_t i = 0; i < e.layers.size(); ++i)
                axpy(-lr, velocity[i], e.layers[i]);
        } else {
            for (std::size_t i = 0; i < e.layers.size(); ++i)
                axpy(-lr, gr.grads[i], e.layers[i]);
        }
        out.trace.steps_run = t;
        if (detail::should_record(t, cfg.steps, cfg.record_every)) {
            record(t);
        } else {
            for (const auto& m : e.layers) {
                if (!all_finite(m) || max_abs(m) > 2e6) {
                    record(t);
                    break;
                }
            }
        }
    }

    if (cfg.guard_backprop_regime && cfg.steps > 0) {
        bool warn = (cfg.steps == 1);
        if (!warn && cfg.lr * static_cast<double>(cfg.steps) <= 0.01 &&
            y_hat_first.size() > 0) {
            const double denom = frobenius_norm(y_hat_first) + 1e-300;
            const double change =
                frobenius_norm(y_hat_last - y_hat_first) / denom;
            warn = change < 1e-3;
        }
        out.trace.backprop_regime_warning = warn;
    }
    return out;
}

}  // namespace pcn

#endif  // PCN_RELAX_HPP
