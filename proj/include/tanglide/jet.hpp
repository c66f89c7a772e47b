#pragma once

// Truncated Taylor series arithmetic.
//
// A Jet<T> of order K holds the coefficients c_0..c_K of a power series in one
// formal variable t, truncated after t^K. Coefficients are themselves scalars of
// type T, so Jet<Jet<double>> is a series in t whose coefficients are first-order
// duals in a second variable. That nesting is what lets a whole Lie-derivative
// pipeline be differentiated in a direction without finite differences.
//
// Order-0 jets behave as constants: mixing an order-0 jet with an order-K jet
// yields an order-K jet.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "tanglide/error.hpp"

namespace tanglide {

template <typename T>
class Jet;

template <typename T>
struct is_jet : std::false_type {};
template <typename T>
struct is_jet<Jet<T>> : std::true_type {};
template <typename T>
inline constexpr bool is_jet_v = is_jet<T>::value;

inline double primal(double x) noexcept { return x; }

template <typename T>
double primal(const Jet<T>& x) {
    return primal(x[0]);
}

template <typename T>
class Jet {
public:
    using coefficient_type = T;

    Jet() : c_{T(0.0)} {}
    Jet(double value) : c_{T(value)} {}  // NOLINT(google-explicit-constructor)
    Jet(const T& value)                  // NOLINT(google-explicit-constructor)
        requires(!std::is_same_v<T, double>)
        : c_{value} {}
    explicit Jet(std::vector<T> coefficients) : c_(std::move(coefficients)) {
        if (c_.empty()) c_.push_back(T(0.0));
    }

    static Jet constant(const T& value, std::size_t order) {
        std::vector<T> c(order + 1, T(0.0));
        c[0] = value;
        return Jet(std::move(c));
    }

    /// value + rate * t, padded with zeros up to `order`.
    static Jet variable(const T& value, const T& rate, std::size_t order = 1) {
        Jet j = constant(value, order);
        if (order >= 1) j.c_[1] = rate;
        return j;
    }

    std::size_t order() const noexcept { return c_.size() - 1; }
    const T& operator[](std::size_t k) const { return c_[k]; }
    T& operator[](std::size_t k) { return c_[k]; }
    T coefficient(std::size_t k) const { return k < c_.size() ? c_[k] : T(0.0); }
    std::span<const T> coefficients() const noexcept { return c_; }

    friend bool operator==(const Jet&, const Jet&) = default;

    friend Jet operator+(const Jet& a) { return a; }

    friend Jet operator-(const Jet& a) {
        Jet r(a);
        for (auto& x : r.c_) x = -x;
        return r;
    }

    friend Jet operator+(const Jet& a, const Jet& b) {
        const Jet& lo = a.c_.size() >= b.c_.size() ? b : a;
        Jet r = a.c_.size() >= b.c_.size() ? a : b;
        // keep operand order for the overlapping part so c_0 is bit-identical to a_0 + b_0
        for (std::size_t k = 0; k < lo.c_.size(); ++k) r.c_[k] = a.c_[k] + b.c_[k];
        return r;
    }

    friend Jet operator-(const Jet& a, const Jet& b) {
        const std::size_t n = std::max(a.c_.size(), b.c_.size());
        std::vector<T> c(n, T(0.0));
        for (std::size_t k = 0; k < n; ++k) {
            if (k < a.c_.size() && k < b.c_.size())
                c[k] = a.c_[k] - b.c_[k];
            else if (k < a.c_.size())
                c[k] = a.c_[k];
            else
                c[k] = -b.c_[k];
        }
        return Jet(std::move(c));
    }

    friend Jet operator*(const Jet& a, const Jet& b) {
        const std::size_t na = a.c_.size();
        const std::size_t nb = b.c_.size();
        const std::size_t n = std::max(na, nb);
        std::vector<T> c(n, T(0.0));
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i_lo = k + 1 > nb ? k + 1 - nb : 0;
            const std::size_t i_hi = std::min(k, na - 1);
            if (i_lo > i_hi) continue;
            T sum = a.c_[i_lo] * b.c_[k - i_lo];
            for (std::size_t i = i_lo + 1; i <= i_hi; ++i) sum = sum + a.c_[i] * b.c_[k - i];
            c[k] = std::move(sum);
        }
        return Jet(std::move(c));
    }

    friend Jet operator*(const Jet& a, double s) {
        Jet r(a);
        for (auto& x : r.c_) x = x * s;
        return r;
    }
    friend Jet operator*(double s, const Jet& a) {
        Jet r(a);
        for (auto& x : r.c_) x = s * x;
        return r;
    }
    friend Jet operator/(const Jet& a, double s) {
        if (s == 0.0) throw DomainError("division by zero");
        Jet r(a);
        for (auto& x : r.c_) x = x / s;
        return r;
    }

    friend Jet operator/(const Jet& a, const Jet& b) {
        if (primal(b.c_[0]) == 0.0) throw DomainError("division by a jet with zero constant term");
        const std::size_t n = std::max(a.c_.size(), b.c_.size());
        std::vector<T> q(n, T(0.0));
        for (std::size_t k = 0; k < n; ++k) {
            T num = a.coefficient(k);
            for (std::size_t j = 1; j <= k && j < b.c_.size(); ++j) num = num - b.c_[j] * q[k - j];
            q[k] = num / b.c_[0];
        }
        return Jet(std::move(q));
    }

    friend Jet exp(const Jet& a) {
        using std::exp;
        const std::size_t n = a.c_.size();
        std::vector<T> e(n, T(0.0));
        e[0] = exp(a.c_[0]);
        for (std::size_t k = 1; k < n; ++k) {
            T sum = a.c_[1] * e[k - 1];
            for (std::size_t j = 2; j <= k; ++j) sum = sum + static_cast<double>(j) * a.c_[j] * e[k - j];
            e[k] = sum / static_cast<double>(k);
        }
        return Jet(std::move(e));
    }

    friend Jet log(const Jet& a) {
        using std::log;
        if (!(primal(a.c_[0]) > 0.0)) throw DomainError("log of a nonpositive value");
        const std::size_t n = a.c_.size();
        std::vector<T> l(n, T(0.0));
        l[0] = log(a.c_[0]);
        for (std::size_t k = 1; k < n; ++k) {
            T num = a.c_[k];
            for (std::size_t j = 1; j < k; ++j)
                num = num - (static_cast<double>(j) / static_cast<double>(k)) * l[j] * a.c_[k - j];
            l[k] = num / a.c_[0];
        }
        return Jet(std::move(l));
    }

    friend Jet sqrt(const Jet& a) {
        using std::sqrt;
        const double a0 = primal(a.c_[0]);
        if (a0 < 0.0) throw DomainError("sqrt of a negative value");
        if (a0 == 0.0 && a.c_.size() > 1) throw DomainError("sqrt is not differentiable at zero");
        const std::size_t n = a.c_.size();
        std::vector<T> r(n, T(0.0));
        r[0] = sqrt(a.c_[0]);
        for (std::size_t k = 1; k < n; ++k) {
            T num = a.c_[k];
            for (std::size_t j = 1; j < k; ++j) num = num - r[j] * r[k - j];
            r[k] = num / (2.0 * r[0]);
        }
        return Jet(std::move(r));
    }

    friend std::pair<Jet, Jet> sincos(const Jet& a) {
        using std::cos;
        using std::sin;
        const std::size_t n = a.c_.size();
        std::vector<T> s(n, T(0.0));
        std::vector<T> c(n, T(0.0));
        s[0] = sin(a.c_[0]);
        c[0] = cos(a.c_[0]);
        for (std::size_t k = 1; k < n; ++k) {
            T ss = a.c_[1] * c[k - 1];
            T cc = a.c_[1] * s[k - 1];
            for (std::size_t j = 2; j <= k; ++j) {
                ss = ss + static_cast<double>(j) * a.c_[j] * c[k - j];
                cc = cc + static_cast<double>(j) * a.c_[j] * s[k - j];
            }
            s[k] = ss / static_cast<double>(k);
            c[k] = -cc / static_cast<double>(k);
        }
        return {Jet(std::move(s)), Jet(std::move(c))};
    }

    friend Jet sin(const Jet& a) { return sincos(a).first; }
    friend Jet cos(const Jet& a) { return sincos(a).second; }

private:
    std::vector<T> c_;
};

/// First-order dual number.
using Dual = Jet<double>;
/// Taylor series whose coefficients are duals.
using DualJet = Jet<Jet<double>>;

/// Lifts a plain number into any scalar ring used by the evaluator.
template <typename S>
S lift(double value) {
    return S(value);
}

/// Binary exponentiation; shared by every ring so results agree exactly on c_0.
template <typename S>
S integer_power(const S& base, unsigned exponent) {
    S result = lift<S>(1.0);
    S b = base;
    bool first = true;
    while (exponent > 0) {
        if (exponent & 1u) {
            result = first ? b : result * b;
            first = false;
        }
        exponent >>= 1u;
        if (exponent > 0) b = b * b;
    }
    return result;
}

}  // namespace tanglide
