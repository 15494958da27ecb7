// Small fully connected denoiser. Input is the concatenation
// [x_t, t_norm, c], output is a predicted noise vector of the same dimension
// as x_t. Hidden layers use tanh, the output layer is linear, and all
// gradients are computed analytically (reverse mode, written out by hand).
#pragma once

#include <cstdint>

#include "prefdyn/types.hpp"

namespace prefdyn::net {

struct Arch {
    std::size_t input_dim = 5;      // data_dim + 1 + cond_dim
    std::size_t hidden_width = 64;
    std::size_t hidden_layers = 2;  // 0 degenerates to one affine map
    std::size_t output_dim = 2;

    std::size_t layer_count() const { return hidden_layers + 1; }
    std::size_t layer_in(std::size_t l) const { return l == 0 ? input_dim : hidden_width; }
    std::size_t layer_out(std::size_t l) const {
        return l + 1 == layer_count() ? output_dim : hidden_width;
    }
    std::size_t cond_dim() const { return input_dim - output_dim - 1; }
    std::size_t param_count() const;
    void validate() const;
};

Arch make_arch(std::size_t data_dim, std::size_t cond_dim,
               std::size_t hidden_width, std::size_t hidden_layers);

using ParamVector = Vec;

// Weights uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
// Deterministic in (arch, seed).
ParamVector init_params(const Arch& arch, std::uint64_t seed);

Vec forward(const Arch& arch, const ParamVector& params,
            const Vec& x_t, double t_norm, const Vec& c);

// d(upstream . output)/d(params); same length as params.
ParamVector vjp(const Arch& arch, const ParamVector& params,
                const Vec& x_t, double t_norm, const Vec& c,
                const Vec& upstream);

// output_dim x param_count matrix; row i is bit-identical to vjp with
// upstream equal to the i-th basis vector.
Mat jacobian(const Arch& arch, const ParamVector& params,
             const Vec& x_t, double t_norm, const Vec& c);

}  // namespace prefdyn::net
