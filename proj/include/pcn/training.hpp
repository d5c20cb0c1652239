#ifndef PCN_TRAINING_HPP
#define PCN_TRAINING_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pcn/dataio.hpp"
#include "pcn/relax.hpp"

namespace pcn {

// ---------------------------------------------------------------------------
// Weight gradients
// ---------------------------------------------------------------------------

template <typename T>
struct WeightGrads {
    std::vector<Matrix<T>> weight;
    std::vector<Vector<T>> bias;

    std::size_t num_layers() const { return weight.size(); }
};

// Exact gradient of the mean output loss with respect to every parameter,
// via one reverse sweep over the feedforward pass.
template <typename T>
WeightGrads<T> backprop_grads(const Network<T>& net, const Matrix<T>& x,
                              const Matrix<T>& y) {
    const std::size_t nl = net.layers.size();
    ForwardResult<T> fwd = forward(net, x);
    Matrix<T> cot = loss_and_grad(net.loss, fwd.y_hat, y).grad;

    WeightGrads<T> g;
    g.weight.resize(nl);
    g.bias.resize(nl);
    for (std::size_t i = nl; i-- > 0;) {
        const Matrix<T>& input = (i == 0) ? x : fwd.predictions[i - 1];
        LayerVjp<T> vjp = layer_vjp(net.layers[i], input, cot);
        g.weight[i] = std::move(vjp.weight_cotangent);
        g.bias[i] = std::move(vjp.bias_cotangent);
        cot = std::move(vjp.input_cotangent);
    }
    return g;
}

// Local weight gradients of the energy at a fixed configuration: hidden
// layer i is driven purely by its own error cotangent, the output layer by
// the loss gradient at the given top state. `states` supplies the layer
// inputs (and the preactivations they imply); pass the states from the
// relaxation pass that produced `e` so that a single error update step
// reproduces loss gradients exactly.
template <typename T>
WeightGrads<T> pc_weight_grads_at(const Network<T>& net, const Matrix<T>& x,
                                  const StateConfig<T>& states,
                                  const ErrorConfig<T>& e, const Matrix<T>& y) {
    check_config_dims(net, x.rows, states.layers, "pc_weight_grads states");
    check_config_dims(net, x.rows, e.layers, "pc_weight_grads errors");
    const std::size_t nh = net.num_hidden();
    const T inv_b = T(1) / static_cast<T>(x.rows);

    WeightGrads<T> g;
    g.weight.resize(nh + 1);
    g.bias.resize(nh + 1);
    for (std::size_t i = 0; i < nh; ++i) {
        const Matrix<T>& input = (i == 0) ? x : states.layers[i - 1];
        LayerVjp<T> vjp = layer_vjp(net.layers[i], input, e.layers[i]);
        g.weight[i] = std::move(vjp.weight_cotangent);
        g.bias[i] = std::move(vjp.bias_cotangent);
        // The quadratic error term enters the energy with a minus sign on
        // the prediction, and gradients are batch means.
        for (auto& v : g.weight[i].data) v *= -inv_b;
        for (auto& v : g.bias[i]) v *= -inv_b;
    }
    Matrix<T> y_hat = layer_apply(net.layers.back(), states.layers[nh - 1]);
    Matrix<T> loss_cot = loss_and_grad(net.loss, y_hat, y).grad;
    LayerVjp<T> vjp =
        layer_vjp(net.layers.back(), states.layers[nh - 1], loss_cot);
    g.weight[nh] = std::move(vjp.weight_cotangent);
    g.bias[nh] = std::move(vjp.bias_cotangent);
    return g;
}

// Same, with the states reconstructed from the errors. Correct at (or near)
// equilibrium; mid-relaxation callers should prefer pc_weight_grads_at with
// the cached states.
template <typename T>
WeightGrads<T> pc_weight_grads(const Network<T>& net, const Matrix<T>& x,
                               const ErrorConfig<T>& e, const Matrix<T>& y) {
    return pc_weight_grads_at(net, x, errors_to_states(net, x, e), e, y);
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

enum class OptKind { sgd, adam, adamw };

inline const char* opt_name(OptKind k) {
    switch (k) {
        case OptKind::sgd: return "sgd";
        case OptKind::adam: return "adam";
        case OptKind::adamw: return "adamw";
    }
    return "?";
}

inline OptKind opt_from_name(const std::string& s) {
    if (s == "sgd") return OptKind::sgd;
    if (s == "adam") return OptKind::adam;
    if (s == "adamw") return OptKind::adamw;
    throw ConfigError("unknown optimizer: " + s);
}

template <typename T>
struct Optimizer {
    OptKind kind = OptKind::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled (adamw only)

    std::size_t step_count = 0;
    std::vector<Matrix<T>> m_w, v_w;
    std::vector<Vector<T>> m_b, v_b;

    void ensure_state(const Network<T>& net) {
        if (!m_w.empty()) return;
        for (const auto& l : net.layers) {
            m_w.emplace_back(l.weight.rows, l.weight.cols);
            v_w.emplace_back(l.weight.rows, l.weight.cols);
            m_b.emplace_back(l.bias.size(), T(0));
            v_b.emplace_back(l.bias.size(), T(0));
        }
    }

    // One update over every parameter tensor. lr_scale multiplies the base
    // rate (used by schedules); the update itself is the published rule.
    void step(Network<T>& net, const WeightGrads<T>& g, double lr_scale = 1.0) {
        if (g.num_layers() != net.layers.size())
            throw DimensionError("optimizer: gradient layer count mismatch");
        ensure_state(net);
        ++step_count;
        const double rate = lr * lr_scale;

        if (kind == OptKind::sgd) {
            for (std::size_t i = 0; i < net.layers.size(); ++i) {
                axpy(static_cast<T>(-rate), g.weight[i], net.layers[i].weight);
                for (std::size_t k = 0; k < net.layers[i].bias.size(); ++k)
                    net.layers[i].bias[k] -=
                        static_cast<T>(rate) * g.bias[i][k];
            }
            return;
        }

        const double bc1 = 1.0 - std::pow(beta1, double(step_count));
        const double bc2 = 1.0 - std::pow(beta2, double(step_count));
        auto update = [&](T& p, T& m, T& v, T grad) {
            m = static_cast<T>(beta1) * m +
                static_cast<T>(1.0 - beta1) * grad;
            v = static_cast<T>(beta2) * v +
                static_cast<T>(1.0 - beta2) * grad * grad;
            const double mhat = static_cast<double>(m) / bc1;
            const double vhat = static_cast<double>(v) / bc2;
            if (kind == OptKind::adamw && weight_decay != 0.0)
                p -= static_cast<T>(rate * weight_decay) * p;
            p -= static_cast<T>(rate * mhat / (std::sqrt(vhat) + eps));
        };
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            Layer<T>& l = net.layers[i];
            for (std::size_t k = 0; k < l.weight.size(); ++k)
                update(l.weight.data[k], m_w[i].data[k], v_w[i].data[k],
                       g.weight[i].data[k]);
            for (std::size_t k = 0; k < l.bias.size(); ++k)
                update(l.bias[k], m_b[i][k], v_b[i][k], g.bias[i][k]);
        }
    }
};

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

enum class LrSchedule { constant, warmup_cosine };

inline LrSchedule schedule_from_name(const std::string& s) {
    if (s == "constant") return LrSchedule::constant;
    if (s == "warmup_cosine") return LrSchedule::warmup_cosine;
    throw ConfigError("unknown lr schedule: " + s);
}

// Scale applied to the base rate at a given optimizer step. Warmup climbs
// linearly to 1.1x over the first tenth of training, then a cosine decays
// smoothly down to 0.1x by the final step.
inline double lr_schedule_scale(LrSchedule sched, std::size_t step,
                                std::size_t total_steps) {
    if (sched == LrSchedule::constant || total_steps == 0) return 1.0;
    const double warmup = 0.1 * static_cast<double>(total_steps);
    const double t = static_cast<double>(step);
    if (t < warmup && warmup > 0.0) return 1.0 + 0.1 * (t / warmup);
    const double span = static_cast<double>(total_steps) - warmup;
    if (span <= 0.0) return 1.1;
    const double frac = (t - warmup) / span;
    const double pi = 3.14159265358979323846;
    return 0.1 + (1.1 - 0.1) * 0.5 * (1.0 + std::cos(pi * frac));
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

enum class TrainAlgo { spc, epc, backprop };

inline const char* algo_name(TrainAlgo a) {
    switch (a) {
        case TrainAlgo::spc: return "spc";
        case TrainAlgo::epc: return "epc";
        case TrainAlgo::backprop: return "backprop";
    }
    return "?";
}

inline TrainAlgo algo_from_name(const std::string& s) {
    if (s == "spc") return TrainAlgo::spc;
    if (s == "epc") return TrainAlgo::epc;
    if (s == "backprop") return TrainAlgo::backprop;
    throw ConfigError("unknown training algorithm: " + s);
}

struct TrainConfig {
    TrainAlgo algorithm = TrainAlgo::backprop;
    double relax_lr = 0.05;       // lambda, unused for backprop
    std::size_t relax_steps = 4;  // T, unused for backprop
    double relax_momentum = 0.0;
    OptKind optimizer = OptKind::adam;
    double weight_lr = 1e-3;
    double weight_decay = 0.0;
    std::size_t epochs = 2;
    std::size_t batch_size = 64;
    std::uint64_t seed = 42;
    LrSchedule schedule = LrSchedule::constant;

    void validate() const {
        if (batch_size == 0) throw ConfigError("train: batch_size must be > 0");
        if (algorithm != TrainAlgo::backprop) {
            if (!(relax_lr > 0.0))
                throw ConfigError("train: relax lr must be positive");
            if (relax_steps == 0)
                throw ConfigError("train: relax steps must be >= 1");
        }
        if (!(weight_lr > 0.0))
            throw ConfigError("train: weight lr must be positive");
    }
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    double wall_ms = 0.0;
};

// Per-epoch metrics CSV (epoch, train_loss, val_accuracy, wall_ms).
inline void write_metrics(const std::string& path,
                          const std::vector<EpochMetrics>& rows) {
    std::vector<std::vector<std::string>> cells;
    cells.reserve(rows.size());
    for (const auto& m : rows)
        cells.push_back({std::to_string(m.epoch), csv_double(m.train_loss),
                         csv_double(m.val_accuracy), csv_double(m.wall_ms)});
    write_csv(path, {"epoch", "train_loss", "val_accuracy", "wall_ms"}, cells);
}

// Fraction of samples whose argmax output matches the label. Works for both
// losses: softmax is monotone, so CE nets are ranked by raw logits too.
template <typename T>
double evaluate(const Network<T>& net, const Dataset& ds,
                std::size_t batch_size = 256) {
    if (ds.size() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, ds.size() - start);
        Matrix<T> x(n, ds.images.cols);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < ds.images.cols; ++j)
                x(i, j) = static_cast<T>(ds.images(start + i, j));
        Matrix<T> y_hat = forward(net, x).y_hat;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < y_hat.cols; ++j)
                if (y_hat(i, j) > y_hat(i, best)) best = j;
            if (static_cast<int>(best) == ds.labels[start + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

namespace detail {

template <typename T>
void check_grads_finite(const WeightGrads<T>& g, std::size_t epoch,
                        std::size_t batch_index) {
    for (std::size_t i = 0; i < g.num_layers(); ++i) {
        if (!all_finite(g.weight[i]))
            throw NumericError("train: non-finite weight gradient in layer " +
                               std::to_string(i) + " at epoch " +
                               std::to_string(epoch) + ", batch " +
                               std::to_string(batch_index));
        for (const T& v : g.bias[i])
            if (!std::isfinite(static_cast<double>(v)))
                throw NumericError("train: non-finite bias gradient in layer " +
                                   std::to_string(i) + " at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
    }
}

}  // namespace detail

// Runs the full loop: for sPC/ePC each batch is relaxed first and the
// weights take one step from the final configuration; backprop takes its
// step directly. Metrics report the pre-update feedforward loss per epoch.
template <typename T>
std::vector<EpochMetrics> train(Network<T>& net, const Dataset& train_set,
                                const Dataset& val_set, const TrainConfig& cfg) {
    cfg.validate();
    std::vector<EpochMetrics> metrics;
    if (cfg.epochs == 0) return metrics;

    Optimizer<T> opt;
    opt.kind = cfg.optimizer;
    opt.lr = cfg.weight_lr;
    opt.weight_decay = cfg.weight_decay;

    const std::size_t batches_per_epoch =
        (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = batches_per_epoch * cfg.epochs;
    std::size_t global_step = 0;

    RelaxConfig<T> relax_cfg;
    relax_cfg.lr = cfg.relax_lr;
    relax_cfg.steps = cfg.relax_steps;
    relax_cfg.momentum = cfg.relax_momentum;
    relax_cfg.record_every = cfg.relax_steps + 1;  // endpoints only

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        BatchIterator batches(train_set, cfg.batch_size, cfg.seed, epoch);
        double loss_sum = 0.0;
        std::size_t batch_index = 0;

        while (auto b = batches.next()) {
            Matrix<T> x = cast_matrix<T>(b->images);
            Matrix<T> y = cast_matrix<T>(b->targets);

            WeightGrads<T> grads;
            if (cfg.algorithm == TrainAlgo::backprop) {
                ForwardResult<T> fwd = forward(net, x);
                LossResult<T> lr = loss_and_grad(net.loss, fwd.y_hat, y);
                loss_sum += lr.value;
                grads = backprop_grads(net, x, y);
            } else if (cfg.algorithm == TrainAlgo::epc) {
                EpcRelaxResult<T> r = epc_relax(net, x, y, relax_cfg);
                loss_sum += r.trace.records.front().energy.output_loss;
                grads = pc_weight_grads_at(net, x, r.states_at_last_grad,
                                           r.errors, y);
            } else {
                SpcRelaxResult<T> r = spc_relax(net, x, y, relax_cfg);
                loss_sum += r.trace.records.front().energy.output_loss;
                ErrorConfig<T> e = states_to_errors(net, x, r.states);
                grads = pc_weight_grads_at(net, x, r.states, e, y);
            }
            detail::check_grads_finite(grads, epoch, batch_index);
            const double scale =
                lr_schedule_scale(cfg.schedule, global_step, total_steps);
            opt.step(net, grads, scale);
            ++global_step;
            ++batch_index;
        }

        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = loss_sum / static_cast<double>(batch_index);
        em.val_accuracy = evaluate(net, val_set);
        em.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
        metrics.push_back(em);
    }
    return metrics;
}

// ---------------------------------------------------------------------------
// Gradient trajectory
// ---------------------------------------------------------------------------

struct TrajectoryPoint {
    std::size_t step = 0;
    std::vector<double> grad_norm;           // one per layer, output included
    std::vector<double> cosine_to_backprop;  // 0 when either side is zero
};

namespace detail {

template <typename T>
void trajectory_point(const WeightGrads<T>& g, const WeightGrads<T>& bp,
                      std::size_t step, std::vector<TrajectoryPoint>& out) {
    TrajectoryPoint pt;
    pt.step = step;
    for (std::size_t i = 0; i < g.num_layers(); ++i) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t k = 0; k < g.weight[i].size(); ++k) {
            const double a = static_cast<double>(g.weight[i].data[k]);
            const double b = static_cast<double>(bp.weight[i].data[k]);
            dot += a * b;
            na += a * a;
            nb += b * b;
        }
        for (std::size_t k = 0; k < g.bias[i].size(); ++k) {
            const double a = static_cast<double>(g.bias[i][k]);
            const double b = static_cast<double>(bp.bias[i][k]);
            dot += a * b;
            na += a * a;
            nb += b * b;
        }
        pt.grad_norm.push_back(std::sqrt(na));
        pt.cosine_to_backprop.push_back(
            (na > 0.0 && nb > 0.0) ? dot / std::sqrt(na * nb) : 0.0);
    }
    out.push_back(std::move(pt));
}

}  // namespace detail

// Tracks how the local weight gradients would look if the relaxation were
// stopped after each step, against the backprop gradients of the same batch.
// Step 0 is the initialization (zero errors / feedforward states).
template <typename T>
std::vector<TrajectoryPoint> gradient_trajectory(const Network<T>& net,
                                                 const Matrix<T>& x,
                                                 const Matrix<T>& y,
                                                 TrainAlgo algo, std::size_t steps,
                                                 double lambda) {
    if (algo == TrainAlgo::backprop)
        throw ConfigError("gradient_trajectory: algo must be spc or epc");
    WeightGrads<T> bp = backprop_grads(net, x, y);
    std::vector<TrajectoryPoint> out;

    if (algo == TrainAlgo::epc) {
        ErrorConfig<T> e = zero_errors(net, x.rows);
        StateConfig<T> states = init_states_feedforward(net, x);
        detail::trajectory_point(pc_weight_grads_at(net, x, states, e, y), bp,
                                 0, out);
        const T lr = static_cast<T>(lambda);
        for (std::size_t t = 1; t <= steps; ++t) {
            ErrorGradResult<T> gr = error_grad(net, x, y, e);
            states = std::move(gr.states);
            for (std::size_t i = 0; i < e.layers.size(); ++i)
                axpy(-lr, gr.grads[i], e.layers[i]);
            detail::trajectory_point(pc_weight_grads_at(net, x, states, e, y),
                                     bp, t, out);
        }
    } else {
        StateConfig<T> s = init_states_feedforward(net, x);
        auto point = [&](std::size_t t) {
            ErrorConfig<T> e = states_to_errors(net, x, s);
            detail::trajectory_point(pc_weight_grads_at(net, x, s, e, y), bp,
                                     t, out);
        };
        point(0);
        const T lr = static_cast<T>(lambda);
        for (std::size_t t = 1; t <= steps; ++t) {
            std::vector<Matrix<T>> g = state_grad(net, x, y, s);
            for (std::size_t i = 0; i < s.layers.size(); ++i)
                axpy(-lr, g[i], s.layers[i]);
            point(t);
        }
    }
    return out;
}

}  // namespace pcn

#endif  // PCN_TRAINING_HPP
