#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "prefdyn/kernels.hpp"
#include "prefdyn/net.hpp"
#include "prefdyn/rng.hpp"

using namespace prefdyn;

namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

}  // namespace

TEST_CASE("param_count matches the layer shapes") {
    const auto arch = net::make_arch(2, 2, 64, 2);
    CHECK(arch.input_dim == 5);
    CHECK(arch.output_dim == 2);
    CHECK(arch.cond_dim() == 2);
    // 64x5+64, 64x64+64, 2x64+2
    CHECK(arch.param_count() == 384 + 4160 + 130);
    const auto tiny = net::make_arch(1, 0, 3, 0);
    CHECK(tiny.input_dim == 2);
    CHECK(tiny.param_count() == 1 * 2 + 1);
}

TEST_CASE("init_params is deterministic and bounded by fan-in") {
    const auto arch = net::make_arch(2, 2, 16, 1);
    const auto a = net::init_params(arch, 42);
    const auto b = net::init_params(arch, 42);
    const auto c = net::init_params(arch, 43);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a.size() == arch.param_count());
    // first layer weights bounded by 1/sqrt(5); its biases are zero
    const double bound0 = 1.0 / std::sqrt(5.0);
    for (std::size_t i = 0; i < 16 * 5; ++i) CHECK(std::abs(a[i]) < bound0);
    for (std::size_t i = 16 * 5; i < 16 * 5 + 16; ++i) CHECK(a[i] == 0.0);
}

TEST_CASE("a zero-hidden-layer net is the plain affine map") {
    // pin the scalar backend: reductions only promise tolerance agreement
    // across backends, and this oracle checks exact bits
    const auto saved = kernels::active_backend();
    REQUIRE(kernels::set_backend(kernels::Backend::scalar));
    const auto arch = net::make_arch(2, 1, 8, 0);
    REQUIRE(arch.param_count() == 2 * 4 + 2);
    net::ParamVector params(arch.param_count());
    Rng rng(7);
    for (auto& p : params) p = rng.gaussian();
    const Vec x = {0.3, -1.2};
    const Vec c = {0.8};
    const double tn = 0.44;
    const Vec in = {x[0], x[1], tn, c[0]};
    const Vec y = net::forward(arch, params, x, tn, c);
    for (std::size_t i = 0; i < 2; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < 4; ++j) acc += params[i * 4 + j] * in[j];
        CHECK(y[i] == acc + params[8 + i]);
    }
    // d(u . y)/dW_ij = u_i in_j, d/db_i = u_i
    const Vec up = {1.5, -0.25};
    const Vec grad = net::vjp(arch, params, x, tn, c, up);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 4; ++j) CHECK(grad[i * 4 + j] == up[i] * in[j]);
        CHECK(grad[8 + i] == up[i]);
    }
    kernels::set_backend(saved);
}

TEST_CASE("vjp matches central finite differences") {
    struct Spec {
        std::size_t d, c, w, l;
    };
    const Spec specs[] = {{2, 2, 8, 2}, {1, 3, 5, 1}, {3, 0, 4, 1}};
    const double h = 1e-5;
    for (std::size_t s = 0; s < 3; ++s) {
        const auto arch = net::make_arch(specs[s].d, specs[s].c, specs[s].w, specs[s].l);
        Rng rng(100 + s);
        net::ParamVector params = net::init_params(arch, 100 + s);
        const Vec x = rng.gaussian_vec(specs[s].d);
        const Vec c = rng.gaussian_vec(specs[s].c);
        const Vec up = rng.gaussian_vec(specs[s].d);
        const double tn = rng.uniform(0.0, 1.0);
        const Vec grad = net::vjp(arch, params, x, tn, c, up);
        REQUIRE(grad.size() == params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double save = params[i];
            params[i] = save + h;
            const Vec yp = net::forward(arch, params, x, tn, c);
            params[i] = save - h;
            const Vec ym = net::forward(arch, params, x, tn, c);
            params[i] = save;
            const double fd =
                (kernels::dot(yp.data(), up.data(), yp.size()) -
                 kernels::dot(ym.data(), up.data(), ym.size())) /
                (2.0 * h);
            CHECK(rel_err(grad[i], fd) < 1e-5);
        }
    }
}

TEST_CASE("jacobian rows are bitwise equal to basis-vector vjps") {
    const auto arch = net::make_arch(2, 2, 12, 2);
    const auto params = net::init_params(arch, 9);
    Rng rng(9);
    const Vec x = rng.gaussian_vec(2);
    const Vec c = rng.gaussian_vec(2);
    const double tn = 0.3;
    const Mat jac = net::jacobian(arch, params, x, tn, c);
    REQUIRE(jac.rows == 2);
    REQUIRE(jac.cols == params.size());
    for (std::size_t r = 0; r < jac.rows; ++r) {
        Vec e(2, 0.0);
        e[r] = 1.0;
        const Vec row = net::vjp(arch, params, x, tn, c, e);
        for (std::size_t j = 0; j < row.size(); ++j) CHECK(jac.at(r, j) == row[j]);
    }
}

TEST_CASE("forward output stays in the linear span at the last layer") {
    // tanh saturates hidden units to (-1, 1); the output layer is affine, so
    // scaling the last-layer weights scales the output exactly
    const auto arch = net::make_arch(2, 2, 8, 1);
    auto params = net::init_params(arch, 11);
    const Vec x = {0.5, -0.5};
    const Vec c = {0.1, 0.9};
    const Vec y1 = net::forward(arch, params, x, 0.5, c);
    const std::size_t last = 8 * 5 + 8;  // first layer weights + biases
    for (std::size_t i = last; i < params.size(); ++i) params[i] *= 2.0;
    const Vec y2 = net::forward(arch, params, x, 0.5, c);
    for (std::size_t i = 0; i < 2; ++i) CHECK(y2[i] == doctest::Approx(2.0 * y1[i]));
}

TEST_CASE("arch validation rejects impossible shapes") {
    CHECK_THROWS_AS(net::make_arch(0, 2, 8, 1).validate(), std::invalid_argument);
    auto arch = net::make_arch(2, 2, 8, 1);
    arch.hidden_width = 0;
    CHECK_THROWS_AS(arch.validate(), std::invalid_argument);
}
