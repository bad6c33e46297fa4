#include <cmath>

#include "cdpo/core/autodiff.hpp"
#include "cdpo/core/error.hpp"
#include "cdpo/core/rng.hpp"
#include "cdpo/core/types.hpp"
#include "doctest.h"

using namespace cdpo;

namespace {

template <class T>
T composite(const T& a, const T& b) {
    using std::exp;
    using std::log;
    using std::sqrt;
    using std::tanh;
    using ad::exp;
    using ad::log;
    using ad::sqrt;
    using ad::tanh;
    return a * b + exp(a) / (T(1.0) + b * b) - log(T(2.0) + a * a) + sqrt(T(3.0) + b) * tanh(a - b) +
           math::softplus(a) * math::sigmoid(b) + math::elu(a - T(0.5));
}

}  // namespace

TEST_CASE("tape gradient matches central differences") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = rng.normal();
        const double b = rng.normal();
        ad::Tape tape;
        const ad::Var va = ad::Var::input(a);
        const ad::Var vb = ad::Var::input(b);
        const ad::Var out = composite(va, vb);
        const auto& adj = tape.backward(out.index);
        const double h = 1e-6;
        const double fd_a = (composite(a + h, b) - composite(a - h, b)) / (2 * h);
        const double fd_b = (composite(a, b + h) - composite(a, b - h)) / (2 * h);
        CHECK(adj[static_cast<std::size_t>(va.index)] == doctest::Approx(fd_a).epsilon(1e-6));
        CHECK(adj[static_cast<std::size_t>(vb.index)] == doctest::Approx(fd_b).epsilon(1e-6));
        CHECK(out.val == doctest::Approx(composite(a, b)).epsilon(1e-15));
    }
}

TEST_CASE("constants stay off the tape") {
    ad::Tape tape;
    const ad::Var c(2.0);
    const ad::Var d = c * c + ad::exp(c);
    CHECK(d.index < 0);
    CHECK(tape.size() == 0);
}

TEST_CASE("scratch tape is usable through a scope and restores the previous tape") {
    ad::Tape outer;
    {
        ad::Tape::Scope scope(ad::Tape::scratch());
        CHECK(ad::Tape::active() == &ad::Tape::scratch());
    }
    CHECK(ad::Tape::active() == &outer);
}

TEST_CASE("log_sigmoid and normal_log_pdf") {
    CHECK(math::log_sigmoid(0.0) == doctest::Approx(std::log(0.5)));
    CHECK(math::log_sigmoid(-800.0) == doctest::Approx(-800.0));
    CHECK(math::normal_log_pdf(0.0, 0.0, 0.0) == doctest::Approx(-0.5 * std::log(2 * M_PI)));
}

TEST_CASE("rng streams are reproducible and derived seeds differ") {
    Rng a(42), b(42);
    for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2, 0) != derive_seed(2, 2, 0));
    CHECK(derive_seed(5, 6, 7) == derive_seed(5, 6, 7));
}

TEST_CASE("family names round trip") {
    for (Family f : {Family::CNF, Family::CGAN, Family::CVAE, Family::CDM, Family::Tabular})
        CHECK(family_from_string(to_string(f)) == f);
    CHECK_THROWS_AS(family_from_string("gp"), InvalidArgument);
}
