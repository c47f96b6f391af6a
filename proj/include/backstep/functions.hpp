#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"

namespace backstep {

/// One named building block of a scalar function of time or space.
struct Primitive {
    enum class Kind { Constant, Sinusoid, Polynomial, Indicator, Bump };
    Kind kind = Kind::Constant;
    double amplitude = 1.0;
    double frequency = 1.0;  ///< cycles per unit, for Sinusoid
    double phase = 0.0;      ///< radians, for Sinusoid
    std::vector<double> coefficients;  ///< c0 + c1 s + ..., for Polynomial
    double lo = 0.0, hi = 1.0;         ///< support, for Indicator and Bump

    [[nodiscard]] double operator()(double s) const {
        switch (kind) {
            case Kind::Constant:
                return amplitude;
            case Kind::Sinusoid:
                return amplitude * std::sin(2.0 * std::numbers::pi * frequency * s + phase);
            case Kind::Polynomial: {
                double acc = 0.0;
                for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * s + *it;
                return acc;
            }
            case Kind::Indicator:
                return (s >= lo && s <= hi) ? amplitude : 0.0;
            case Kind::Bump: {
                if (s <= lo || s >= hi) return 0.0;
                const double z = (s - lo) / (hi - lo);
                const double c = std::sin(std::numbers::pi * z);
                return amplitude * c * c;
            }
        }
        return 0.0;
    }

    static Primitive constant(double a) { return {Kind::Constant, a}; }
    static Primitive sinusoid(double a, double f, double ph = 0.0) { return {Kind::Sinusoid, a, f, ph}; }
    static Primitive polynomial(std::vector<double> c) {
        Primitive p;
        p.kind = Kind::Polynomial;
        p.coefficients = std::move(c);
        return p;
    }
    static Primitive indicator(double a, double l, double h) { return {Kind::Indicator, a, 1.0, 0.0, {}, l, h}; }
    static Primitive bump(double a, double l, double h) { return {Kind::Bump, a, 1.0, 0.0, {}, l, h}; }
};

[[nodiscard]] inline Primitive::Kind primitive_kind(const std::string& name) {
    if (name == "constant") return Primitive::Kind::Constant;
    if (name == "sinusoid") return Primitive::Kind::Sinusoid;
    if (name == "polynomial") return Primitive::Kind::Polynomial;
    if (name == "indicator") return Primitive::Kind::Indicator;
    if (name == "bump") return Primitive::Kind::Bump;
    throw ParameterError("unknown function primitive '" + name + "'");
}

/// Sum of primitives.
struct ScalarFunction {
    std::vector<Primitive> terms;

    [[nodiscard]] double operator()(double s) const {
        double acc = 0.0;
        for (const auto& p : terms) acc += p(s);
        return acc;
    }

    /// Largest |f| over a sampled window, used as the amplitude scale of a reference.
    [[nodiscard]] double sup_abs(double lo, double hi, int samples = 2000) const {
        double r = 0.0;
        for (int k = 0; k <= samples; ++k) r = std::max(r, std::abs((*this)(lo + (hi - lo) * k / samples)));
        return r;
    }
};

}  // namespace backstep
