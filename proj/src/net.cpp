#include "prefdyn/net.hpp"

#include <cmath>
#include <stdexcept>

#include "prefdyn/kernels.hpp"
#include "prefdyn/rng.hpp"

namespace prefdyn::net {

namespace {

void check_shapes(const Arch& arch, const ParamVector& params,
                  const Vec& x_t, const Vec& c) {
    arch.validate();
    if (params.size() != arch.param_count())
        throw std::invalid_argument("net: param vector has wrong length");
    if (x_t.size() != arch.output_dim)
        throw std::invalid_argument("net: x_t has wrong dimension");
    if (c.size() != arch.cond_dim())
        throw std::invalid_argument("net: condition has wrong dimension");
}

Vec pack_input(const Arch& arch, const Vec& x_t, double t_norm, const Vec& c) {
    Vec in;
    in.reserve(arch.input_dim);
    in.insert(in.end(), x_t.begin(), x_t.end());
    in.push_back(t_norm);
    in.insert(in.end(), c.begin(), c.end());
    return in;
}

std::size_t weight_offset(const Arch& arch, std::size_t layer) {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l)
        off += arch.layer_out(l) * (arch.layer_in(l) + 1);
    return off;
}

// acts[0] is the packed input, acts[l+1] the output of layer l (post-tanh for
// hidden layers, raw affine for the last one).
std::vector<Vec> forward_trace(const Arch& arch, const ParamVector& params,
                               const Vec& input) {
    std::vector<Vec> acts;
    acts.reserve(arch.layer_count() + 1);
    acts.push_back(input);
    for (std::size_t l = 0; l < arch.layer_count(); ++l) {
        const std::size_t in = arch.layer_in(l);
        const std::size_t out = arch.layer_out(l);
        const double* w = params.data() + weight_offset(arch, l);
        const double* b = w + out * in;
        Vec z(out);
        kernels::matvec(w, acts.back().data(), z.data(), out, in);
        for (std::size_t i = 0; i < out; ++i) z[i] += b[i];
        if (l + 1 < arch.layer_count())
            for (std::size_t i = 0; i < out; ++i) z[i] = std::tanh(z[i]);
        acts.push_back(std::move(z));
    }
    return acts;
}

// Accumulates the parameter gradient of upstream . output into grad, which
// must be zero-initialized by the caller.
void backward_into(const Arch& arch, const ParamVector& params,
                   const std::vector<Vec>& acts, const Vec& upstream,
                   double* grad) {
    Vec delta = upstream;  // d(loss)/d(z_l) for the layer being processed
    for (std::size_t l = arch.layer_count(); l-- > 0;) {
        const std::size_t in = arch.layer_in(l);
        const std::size_t out = arch.layer_out(l);
        const std::size_t w_off = weight_offset(arch, l);
        const double* w = params.data() + w_off;
        kernels::rank1_acc(grad + w_off, delta.data(), acts[l].data(), out, in);
        kernels::axpy(1.0, delta.data(), grad + w_off + out * in, out);
        if (l == 0) break;
        Vec prev(in);
        kernels::matvec_t(w, delta.data(), prev.data(), out, in);
        const Vec& a = acts[l];  // tanh output of layer l-1
        for (std::size_t j = 0; j < in; ++j) prev[j] *= 1.0 - a[j] * a[j];
        delta = std::move(prev);
    }
}

}  // namespace

std::size_t Arch::param_count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l < layer_count(); ++l)
        total += layer_out(l) * (layer_in(l) + 1);
    return total;
}

void Arch::validate() const {
    if (input_dim < 1 || output_dim < 1 || hidden_width < 1)
        throw std::invalid_argument("net: dimensions must be positive");
    if (input_dim < output_dim + 1)
        throw std::invalid_argument("net: input_dim too small for [x_t, t, c] packing");
}

Arch make_arch(std::size_t data_dim, std::size_t cond_dim,
               std::size_t hidden_width, std::size_t hidden_layers) {
    Arch arch;
    arch.input_dim = data_dim + 1 + cond_dim;
    arch.hidden_width = hidden_width;
    arch.hidden_layers = hidden_layers;
    arch.output_dim = data_dim;
    arch.validate();
    return arch;
}

ParamVector init_params(const Arch& arch, std::uint64_t seed) {
    arch.validate();
    ParamVector params(arch.param_count(), 0.0);
    Rng rng(seed);
    for (std::size_t l = 0; l < arch.layer_count(); ++l) {
        const std::size_t in = arch.layer_in(l);
        const std::size_t out = arch.layer_out(l);
        const double scale = 1.0 / std::sqrt(static_cast<double>(in));
        double* w = params.data() + weight_offset(arch, l);
        for (std::size_t i = 0; i < out * in; ++i)
            w[i] = scale * (2.0 * rng.uniform01() - 1.0);
        // biases stay zero
    }
    return params;
}

Vec forward(const Arch& arch, const ParamVector& params,
            const Vec& x_t, double t_norm, const Vec& c) {
    check_shapes(arch, params, x_t, c);
    const auto acts = forward_trace(arch, params, pack_input(arch, x_t, t_norm, c));
    return acts.back();
}

ParamVector vjp(const Arch& arch, const ParamVector& params,
                const Vec& x_t, double t_norm, const Vec& c,
                const Vec& upstream) {
    check_shapes(arch, params, x_t, c);
    if (upstream.size() != arch.output_dim)
        throw std::invalid_argument("net: upstream has wrong dimension");
    const auto acts = forward_trace(arch, params, pack_input(arch, x_t, t_norm, c));
    ParamVector grad(params.size(), 0.0);
    backward_into(arch, params, acts, upstream, grad.data());
    return grad;
}

Mat jacobian(const Arch& arch, const ParamVector& params,
             const Vec& x_t, double t_norm, const Vec& c) {
    check_shapes(arch, params, x_t, c);
    const auto acts = forward_trace(arch, params, pack_input(arch, x_t, t_norm, c));
    Mat jac(arch.output_dim, params.size());
    Vec basis(arch.output_dim, 0.0);
    for (std::size_t i = 0; i < arch.output_dim; ++i) {
        basis[i] = 1.0;
        backward_into(arch, params, acts, basis, jac.row(i));
        basis[i] = 0.0;
    }
    return jac;
}

}  // namespace prefdyn::net
