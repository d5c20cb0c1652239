#ifndef PCN_ACTIVATIONS_HPP
#define PCN_ACTIVATIONS_HPP

#include <cmath>
#include <string>

#include "pcn/errors.hpp"

namespace pcn {

enum class Activation { identity, tanh_fn, relu, leaky_relu, gelu, sigmoid };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::tanh_fn: return "tanh";
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::gelu: return "gelu";
        case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "tanh") return Activation::tanh_fn;
    if (s == "relu") return Activation::relu;
    if (s == "leaky_relu") return Activation::leaky_relu;
    if (s == "gelu") return Activation::gelu;
    if (s == "sigmoid") return Activation::sigmoid;
    throw ConfigError("unknown activation: " + s);
}

namespace detail {
constexpr double kLeakySlope = 0.01;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace detail

// Elementwise activation. GELU is the exact Gaussian-CDF form, not the tanh
// approximation, so its analytical derivative below is consistent with it.
template <typename T>
inline T activate(Activation a, T x) {
    switch (a) {
        case Activation::identity:
            return x;
        case Activation::tanh_fn:
            return std::tanh(x);
        case Activation::relu:
            return x > T(0) ? x : T(0);
        case Activation::leaky_relu:
            return x > T(0) ? x : static_cast<T>(detail::kLeakySlope) * x;
        case Activation::gelu: {
            const T phi =
                T(0.5) * (T(1) + std::erf(x * static_cast<T>(detail::kInvSqrt2)));
            return x * phi;
        }
        case Activation::sigmoid: {
            if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
            const T e = std::exp(x);
            return e / (T(1) + e);
        }
    }
    return x;
}

// d activate / dx. ReLU's derivative at 0 is defined as 0.
template <typename T>
inline T activate_grad(Activation a, T x) {
    switch (a) {
        case Activation::identity:
            return T(1);
        case Activation::tanh_fn: {
            const T t = std::tanh(x);
            return T(1) - t * t;
        }
        case Activation::relu:
            return x > T(0) ? T(1) : T(0);
        case Activation::leaky_relu:
            return x > T(0) ? T(1) : static_cast<T>(detail::kLeakySlope);
        case Activation::gelu: {
            const T phi =
                T(0.5) * (T(1) + std::erf(x * static_cast<T>(detail::kInvSqrt2)));
            const T pdf = static_cast<T>(detail::kInvSqrt2Pi) *
                          std::exp(T(-0.5) * x * x);
            return phi + x * pdf;
        }
        case Activation::sigmoid: {
            const T s = activate(Activation::sigmoid, x);
            return s * (T(1) - s);
        }
    }
    return T(1);
}

}  // namespace pcn

#endif  // PCN_ACTIVATIONS_HPP
