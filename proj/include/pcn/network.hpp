#ifndef PCN_NETWORK_HPP
#define PCN_NETWORK_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcn/activations.hpp"
#include "pcn/errors.hpp"
#include "pcn/matrix.hpp"

namespace pcn {

enum class Loss { mse, cross_entropy };

inline const char* loss_name(Loss l) {
    return l == Loss::mse ? "mse" : "cross_entropy";
}

inline Loss loss_from_name(const std::string& s) {
    if (s == "mse") return Loss::mse;
    if (s == "cross_entropy" || s == "ce") return Loss::cross_entropy;
    throw ConfigError("unknown loss: " + s);
}

// One affine map followed by an elementwise activation. weight is
// out_dim x in_dim, bias has out_dim entries.
template <typename T>
struct Layer {
    Matrix<T> weight;
    Vector<T> bias;
    Activation act = Activation::identity;

    std::size_t in_dim() const { return weight.cols; }
    std::size_t out_dim() const { return weight.rows; }
};

// The generative model: layers 0..L, where layers 0..L-1 predict the hidden
// states s_0..s_{L-1} and layer L produces the output prediction. Immutable
// during inference; training updates it between relaxations.
template <typename T>
struct Network {
    std::vector<Layer<T>> layers;
    Loss loss = Loss::mse;

    // Number of hidden states (one fewer than the number of layers).
    std::size_t num_hidden() const { return layers.size() - 1; }
    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }
    std::size_t state_dim(std::size_t i) const { return layers[i].out_dim(); }

    std::size_t total_state_dim() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < num_hidden(); ++i) n += state_dim(i);
        return n;
    }

    bool is_linear() const {
        for (const auto& l : layers)
            if (l.act != Activation::identity) return false;
        return true;
    }

    void validate() const {
        if (layers.size() < 2)
            throw DimensionError("network needs at least two layers");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const Layer<T>& l = layers[i];
            if (l.bias.size() != l.out_dim())
                throw DimensionError("layer " + std::to_string(i) +
                                     ": bias length " +
                                     std::to_string(l.bias.size()) +
                                     " does not match weight rows " +
                                     std::to_string(l.out_dim()));
            if (i > 0 && l.in_dim() != layers[i - 1].out_dim())
                throw DimensionError(
                    "layer " + std::to_string(i) + ": input dim " +
                    std::to_string(l.in_dim()) + " does not chain with layer " +
                    std::to_string(i - 1) + " output dim " +
                    std::to_string(layers[i - 1].out_dim()));
        }
    }
};

template <typename U, typename T>
Network<U> cast_network(const Network<T>& net) {
    Network<U> out;
    out.loss = net.loss;
    out.layers.reserve(net.layers.size());
    for (const auto& l : net.layers) {
        Layer<U> lu;
        lu.weight = cast_matrix<U>(l.weight);
        lu.bias.reserve(l.bias.size());
        for (const T& b : l.bias) lu.bias.push_back(static_cast<U>(b));
        lu.act = l.act;
        out.layers.push_back(std::move(lu));
    }
    return out;
}

// Conventional init gain for an activation (used when the caller does not
// pin one explicitly).
inline double default_init_gain(Activation a) {
    switch (a) {
        case Activation::relu:
        case Activation::leaky_relu:
        case Activation::gelu:
            return 1.41421356237309504880;
        case Activation::tanh_fn:
            return 5.0 / 3.0;
        default:
            return 1.0;
    }
}

// Builds an MLP with orthogonal weights and zero biases. dims runs from
// input to output, so dims.size() == layers + 1. The output layer is
// identity unless output_sigmoid is set (an option meant for MSE heads).
template <typename T>
Network<T> make_mlp(const std::vector<std::size_t>& dims, Activation hidden_act,
                    Loss loss, Rng& rng,
                    std::optional<double> init_gain = std::nullopt,
                    bool output_sigmoid = false) {
    if (dims.size() < 3)
        throw ConfigError("make_mlp: need at least input, one hidden, output");
    const double gain = init_gain ? *init_gain : default_init_gain(hidden_act);
    Network<T> net;
    net.loss = loss;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Layer<T> l;
        l.weight = orthogonal_init<T>(dims[i + 1], dims[i], gain, rng);
        l.bias.assign(dims[i + 1], T(0));
        const bool is_output = (i + 2 == dims.size());
        l.act = is_output
                    ? (output_sigmoid ? Activation::sigmoid : Activation::identity)
                    : hidden_act;
        net.layers.push_back(std::move(l));
    }
    net.validate();
    return net;
}

// ---------------------------------------------------------------------------
// State and error configurations (one batch matrix per hidden layer).
// ---------------------------------------------------------------------------

template <typename T>
struct StateConfig {
    std::vector<Matrix<T>> layers;

    std::size_t num_layers() const { return layers.size(); }
};

template <typename T>
struct ErrorConfig {
    std::vector<Matrix<T>> layers;

    std::size_t num_layers() const { return layers.size(); }
};

template <typename T>
ErrorConfig<T> zero_errors(const Network<T>& net, std::size_t batch) {
    ErrorConfig<T> e;
    e.layers.reserve(net.num_hidden());
    for (std::size_t i = 0; i < net.num_hidden(); ++i)
        e.layers.emplace_back(batch, net.state_dim(i));
    return e;
}

template <typename T>
void check_config_dims(const Network<T>& net, std::size_t batch,
                       const std::vector<Matrix<T>>& layers,
                       const char* what) {
    if (layers.size() != net.num_hidden())
        throw DimensionError(std::string(what) + ": has " +
                             std::to_string(layers.size()) +
                             " layers, network expects " +
                             std::to_string(net.num_hidden()));
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].rows != batch || layers[i].cols != net.state_dim(i))
            throw DimensionError(
                std::string(what) + ": layer " + std::to_string(i) +
                " is " + layers[i].shape_str() + ", expected " +
                std::to_string(batch) + "x" +
                std::to_string(net.state_dim(i)));
    }
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

// z = input W^T + b (row-broadcast bias)
template <typename T>
Matrix<T> layer_preactivation(const Layer<T>& l, const Matrix<T>& input) {
    if (input.cols != l.in_dim())
        throw DimensionError("layer: input width " +
                             std::to_string(input.cols) + " != in_dim " +
                             std::to_string(l.in_dim()));
    Matrix<T> z = gemm_nt(input, l.weight);
    for (std::size_t i = 0; i < z.rows; ++i) {
        T* zi = z.row(i);
        for (std::size_t j = 0; j < z.cols; ++j) zi[j] += l.bias[j];
    }
    return z;
}

template <typename T>
Matrix<T> layer_apply(const Layer<T>& l, const Matrix<T>& input) {
    Matrix<T> z = layer_preactivation(l, input);
    if (l.act != Activation::identity)
        for (auto& v : z.data) v = activate(l.act, v);
    return z;
}

template <typename T>
struct ForwardResult {
    std::vector<Matrix<T>> predictions;  // predicted hidden states, one per layer
    Matrix<T> y_hat;
};

// Plain feedforward pass through every layer.
template <typename T>
ForwardResult<T> forward(const Network<T>& net, const Matrix<T>& x) {
    ForwardResult<T> r;
    r.predictions.reserve(net.num_hidden());
    const Matrix<T>* prev = &x;
    for (std::size_t i = 0; i < net.num_hidden(); ++i) {
        r.predictions.push_back(layer_apply(net.layers[i], *prev));
        prev = &r.predictions.back();
    }
    r.y_hat = layer_apply(net.layers.back(), *prev);
    return r;
}

template <typename T>
struct PerturbedForwardResult {
    StateConfig<T> states;
    Matrix<T> y_hat;
};

// Feedforward pass with an additive perturbation injected after each hidden
// layer: s_i = f_i(s_{i-1}) + e_i.
template <typename T>
PerturbedForwardResult<T> perturbed_forward(const Network<T>& net,
                                            const Matrix<T>& x,
                                            const ErrorConfig<T>& e) {
    check_config_dims(net, x.rows, e.layers, "perturbed_forward errors");
    PerturbedForwardResult<T> r;
    r.states.layers.reserve(net.num_hidden());
    const Matrix<T>* prev = &x;
    for (std::size_t i = 0; i < net.num_hidden(); ++i) {
        Matrix<T> s = layer_apply(net.layers[i], *prev);
        s += e.layers[i];
        r.states.layers.push_back(std::move(s));
        prev = &r.states.layers.back();
    }
    r.y_hat = layer_apply(net.layers.back(), *prev);
    return r;
}

// ---------------------------------------------------------------------------
// Reverse-mode building block
// ---------------------------------------------------------------------------

template <typename T>
struct LayerVjp {
    Matrix<T> input_cotangent;   // batch x in_dim
    Matrix<T> weight_cotangent;  // out_dim x in_dim
    Vector<T> bias_cotangent;    // out_dim
};

// Exact reverse-mode products through activation then affine map, for the
// given input batch and output cotangent.
template <typename T>
LayerVjp<T> layer_vjp(const Layer<T>& l, const Matrix<T>& input,
                      const Matrix<T>& cotangent) {
    if (cotangent.rows != input.rows || cotangent.cols != l.out_dim())
        throw DimensionError("layer_vjp: cotangent is " +
                             cotangent.shape_str() + ", expected " +
                             std::to_string(input.rows) + "x" +
                             std::to_string(l.out_dim()));
    if (input.cols != l.in_dim())
        throw DimensionError("layer_vjp: input width " +
                             std::to_string(input.cols) + " != in_dim " +
                             std::to_string(l.in_dim()));
    Matrix<T> d;
    if (l.act == Activation::identity) {
        d = cotangent;
    } else {
        d = layer_preactivation(l, input);
        for (std::size_t i = 0; i < d.size(); ++i)
            d.data[i] = cotangent.data[i] * activate_grad(l.act, d.data[i]);
    }
    LayerVjp<T> out;
    out.input_cotangent = gemm(d, l.weight);
    out.weight_cotangent = gemm_tn(d, input);
    out.bias_cotangent.assign(l.out_dim(), T(0));
    for (std::size_t i = 0; i < d.rows; ++i) {
        const T* di = d.row(i);
        for (std::size_t j = 0; j < d.cols; ++j) out.bias_cotangent[j] += di[j];
    }
    return out;
}

// Input cotangent only; avoids the parameter products in inner loops.
template <typename T>
Matrix<T> layer_vjp_input(const Layer<T>& l, const Matrix<T>& input,
                          const Matrix<T>& cotangent) {
    if (cotangent.rows != input.rows || cotangent.cols != l.out_dim())
        throw DimensionError("layer_vjp_input: cotangent is " +
                             cotangent.shape_str() + ", expected " +
                             std::to_string(input.rows) + "x" +
                             std::to_string(l.out_dim()));
    if (input.cols != l.in_dim())
        throw DimensionError("layer_vjp_input: input width " +
                             std::to_string(input.cols) + " != in_dim " +
                             std::to_string(l.in_dim()));
    if (l.act == Activation::identity) return gemm(cotangent, l.weight);
    Matrix<T> d = layer_preactivation(l, input);
    for (std::size_t i = 0; i < d.size(); ++i)
        d.data[i] = cotangent.data[i] * activate_grad(l.act, d.data[i]);
    return gemm(d, l.weight);
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

template <typename T>
struct LossResult {
    double value;    // mean over the batch
    Matrix<T> grad;  // d(mean loss)/d y_hat
};

template <typename T>
void check_one_hot(const Matrix<T>& y) {
    for (std::size_t i = 0; i < y.rows; ++i) {
        std::size_t ones = 0;
        for (std::size_t j = 0; j < y.cols; ++j) {
            const T v = y(i, j);
            if (v == T(1))
                ++ones;
            else if (v != T(0))
                throw DataError("cross_entropy: target row " +
                                std::to_string(i) +
                                " is not one-hot (entry " +
                                std::to_string(static_cast<double>(v)) + ")");
        }
        if (ones != 1)
            throw DataError("cross_entropy: target row " + std::to_string(i) +
                            " has " + std::to_string(ones) + " ones");
    }
}

// Batch-mean loss and its gradient. MSE is 0.5 ||y_hat - y||^2 per sample;
// cross-entropy is fused softmax-CE with log-sum-exp stabilization, so its
// gradient is softmax(y_hat) - y (divided by the batch size).
template <typename T>
LossResult<T> loss_and_grad(Loss kind, const Matrix<T>& y_hat,
                            const Matrix<T>& y) {
    check_same_shape(y_hat, y, "loss_and_grad");
    const std::size_t batch = y_hat.rows;
    if (batch == 0) throw DimensionError("loss_and_grad: empty batch");
    LossResult<T> r;
    r.grad = Matrix<T>(y_hat.rows, y_hat.cols);
    const T inv_b = T(1) / static_cast<T>(batch);
    double total = 0.0;

    if (kind == Loss::mse) {
        for (std::size_t i = 0; i < y_hat.size(); ++i) {
            const T diff = y_hat.data[i] - y.data[i];
            total += 0.5 * static_cast<double>(diff) * static_cast<double>(diff);
            r.grad.data[i] = diff * inv_b;
        }
        r.value = total / static_cast<double>(batch);
        return r;
    }

    check_one_hot(y);
    for (std::size_t i = 0; i < batch; ++i) {
        const T* row = y_hat.row(i);
        T zmax = row[0];
        for (std::size_t j = 1; j < y_hat.cols; ++j)
            if (row[j] > zmax) zmax = row[j];
        T sum = T(0);
        for (std::size_t j = 0; j < y_hat.cols; ++j)
            sum += std::exp(row[j] - zmax);
        const T lse = zmax + std::log(sum);
        for (std::size_t j = 0; j < y_hat.cols; ++j) {
            const T p = std::exp(row[j] - lse);
            r.grad(i, j) = (p - y(i, j)) * inv_b;
            if (y(i, j) == T(1))
                total += static_cast<double>(lse) - static_cast<double>(row[j]);
        }
    }
    r.value = total / static_cast<double>(batch);
    return r;
}

// ---------------------------------------------------------------------------
// Energies
// ---------------------------------------------------------------------------

struct EnergyReport {
    std::vector<double> layer_energies;  // batch means, one per hidden layer
    double output_loss = 0.0;
    double total = 0.0;

    void finalize() {
        total = output_loss;
        for (double e : layer_energies) total += e;
    }
};

template <typename T>
double half_squared_mean(const Matrix<T>& m) {
    double s = 0.0;
    for (const T& v : m.data) {
        const double dv = static_cast<double>(v);
        s += dv * dv;
    }
    return 0.5 * s / static_cast<double>(m.rows);
}

// Energy of a state configuration: per-layer squared prediction errors plus
// the output loss, each averaged per sample.
template <typename T>
EnergyReport energy_spc(const Network<T>& net, const Matrix<T>& x,
                        const Matrix<T>& y, const StateConfig<T>& s) {
    check_config_dims(net, x.rows, s.layers, "energy_spc states");
    EnergyReport rep;
    rep.layer_energies.reserve(net.num_hidden());
    const Matrix<T>* prev = &x;
    for (std::size_t i = 0; i < net.num_hidden(); ++i) {
        Matrix<T> err = s.layers[i] - layer_apply(net.layers[i], *prev);
        rep.layer_energies.push_back(half_squared_mean(err));
        prev = &s.layers[i];
    }
    Matrix<T> y_hat = layer_apply(net.layers.back(), *prev);
    rep.output_loss = loss_and_grad(net.loss, y_hat, y).value;
    rep.finalize();
    return rep;
}

// Energy of an error configuration: 0.5 ||e_i||^2 per layer plus the loss at
// the perturbed forward prediction.
template <typename T>
EnergyReport energy_epc(const Network<T>& net, const Matrix<T>& x,
                        const Matrix<T>& y, const ErrorConfig<T>& e) {
    check_config_dims(net, x.rows, e.layers, "energy_epc errors");
    EnergyReport rep;
    rep.layer_energies.reserve(net.num_hidden());
    for (const auto& ei : e.layers)
        rep.layer_energies.push_back(half_squared_mean(ei));
    PerturbedForwardResult<T> fwd = perturbed_forward(net, x, e);
    rep.output_loss = loss_and_grad(net.loss, fwd.y_hat, y).value;
    rep.finalize();
    return rep;
}

}  // namespace pcn

#endif  // PCN_NETWORK_HPP
