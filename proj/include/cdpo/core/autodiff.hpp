#pragma once

// Reverse-mode scalar automatic differentiation.
//
// A Tape records every operation between Vars created while it is active on
// the current thread. Per-sample generative heads are written as templates
// over the scalar type, so the same code runs on plain doubles (sampling,
// evaluation) and on Vars (gradient of the log-generative term).

#include <cmath>
#include <span>
#include <vector>

namespace cdpo::ad {

struct Node {
    int parent0;
    int parent1;
    double partial0;
    double partial1;
};

class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    int push(int p0, double d0, int p1, double d1) {
        nodes_.push_back({p0, p1, d0, d1});
        return static_cast<int>(nodes_.size()) - 1;
    }
    int leaf() { return push(-1, 0.0, -1, 0.0); }
    void clear() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }

    /// Adjoints of all nodes with respect to `output`.
    const std::vector<double>& backward(int output);

    static Tape* active();

    /// Thread-local tape that is not active until wrapped in a Scope.
    static Tape& scratch();

    /// Makes an existing tape the active one for the lifetime of the scope.
    class Scope {
    public:
        explicit Scope(Tape& tape);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* previous_;
    };

private:
    struct Detached {};
    explicit Tape(Detached);

    std::vector<Node> nodes_;
    std::vector<double> adjoint_;
    Tape* previous_;
    bool activated_;
};

/// A differentiable scalar. `index < 0` marks a constant that is not on the tape.
struct Var {
    double val = 0.0;
    int index = -1;

    Var() = default;
    Var(double v) : val(v) {}  // NOLINT: implicit promotion of constants
    Var(double v, int i) : val(v), index(i) {}

    static Var input(double v) { return Var(v, Tape::active()->leaf()); }
};

inline double value(double x) { return x; }
inline double value(const Var& x) { return x.val; }

namespace detail {
inline Var unary(double v, const Var& a, double da) {
    if (a.index < 0) return Var(v);
    return Var(v, Tape::active()->push(a.index, da, -1, 0.0));
}
inline Var binary(double v, const Var& a, double da, const Var& b, double db) {
    if (a.index < 0 && b.index < 0) return Var(v);
    if (a.index < 0) return Var(v, Tape::active()->push(b.index, db, -1, 0.0));
    if (b.index < 0) return Var(v, Tape::active()->push(a.index, da, -1, 0.0));
    return Var(v, Tape::active()->push(a.index, da, b.index, db));
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) { return detail::binary(a.val + b.val, a, 1.0, b, 1.0); }
inline Var operator-(const Var& a, const Var& b) { return detail::binary(a.val - b.val, a, 1.0, b, -1.0); }
inline Var operator*(const Var& a, const Var& b) { return detail::binary(a.val * b.val, a, b.val, b, a.val); }
inline Var operator/(const Var& a, const Var& b) {
    const double q = a.val / b.val;
    return detail::binary(q, a, 1.0 / b.val, b, -q / b.val);
}
inline Var operator-(const Var& a) { return detail::unary(-a.val, a, -1.0); }

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

inline bool operator<(const Var& a, const Var& b) { return a.val < b.val; }
inline bool operator>(const Var& a, const Var& b) { return a.val > b.val; }
inline bool operator<=(const Var& a, const Var& b) { return a.val <= b.val; }
inline bool operator>=(const Var& a, const Var& b) { return a.val >= b.val; }

inline Var exp(const Var& a) {
    const double e = std::exp(a.val);
    return detail::unary(e, a, e);
}
inline Var log(const Var& a) { return detail::unary(std::log(a.val), a, 1.0 / a.val); }
inline Var sqrt(const Var& a) {
    const double s = std::sqrt(a.val);
    return detail::unary(s, a, 0.5 / s);
}
inline Var tanh(const Var& a) {
    const double t = std::tanh(a.val);
    return detail::unary(t, a, 1.0 - t * t);
}
inline Var square(const Var& a) { return detail::unary(a.val * a.val, a, 2.0 * a.val); }

}  // namespace cdpo::ad

// Scalar functions shared by double and Var code paths.
namespace cdpo::math {

inline double square(double x) { return x * x; }
using ad::square;

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}
inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

inline ad::Var softplus(const ad::Var& a) { return ad::detail::unary(softplus(a.val), a, sigmoid(a.val)); }
inline ad::Var sigmoid(const ad::Var& a) {
    const double s = sigmoid(a.val);
    return ad::detail::unary(s, a, s * (1.0 - s));
}
inline ad::Var elu(const ad::Var& a) {
    return a.val > 0.0 ? ad::detail::unary(a.val, a, 1.0)
                       : ad::detail::unary(std::expm1(a.val), a, std::exp(a.val));
}

/// log(sigmoid(x)) without overflow.
template <class T>
T log_sigmoid(const T& x) { return -softplus(-x); }

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

/// Log density of N(mean, exp(log_std)^2) at x.
template <class T>
T normal_log_pdf(const T& x, const T& mean, const T& log_std) {
    using std::exp;
    using ad::exp;
    const T r = (x - mean) * exp(-log_std);
    return T(-0.5 * kLogTwoPi) - log_std - 0.5 * r * r;
}

}  // namespace cdpo::math
