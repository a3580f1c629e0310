#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "oscidelay/errors.hpp"

namespace oscidelay {

/// Which calculus a bound is computed with.
///
/// Conservative reproduces hand estimates (amplitude sums, interval
/// arithmetic on pieces, 2A/w oscillation bounds); Tight refines on a grid
/// over one common period. Conservative >= Tight >= the true value's
/// pointwise samples, always.
enum class BoundMode { Conservative, Tight };

/// One sinusoid amplitude*cos(frequency*t + phase), frequency > 0.
struct TrigTerm {
    double amplitude = 0;
    double frequency = 1;
    double phase = 0;
};

/// Structured scalar function of time on [0, inf).
///
/// Values are immutable after construction; every operation is pure, so
/// instances can be shared freely across threads. Integration is exact
/// (closed-form antiderivatives per variant), which is what the stability
/// certificates rely on.
class TimeFunction {
public:
    /// The zero function.
    TimeFunction();

    static TimeFunction constant(double c);
    /// c0 + sum of amplitude*cos(frequency*t + phase) terms.
    static TimeFunction trig(double c0, std::vector<TrigTerm> terms);
    /// Single cosine term a*cos(w*t + phase).
    static TimeFunction cosine(double amplitude, double frequency, double phase = 0.0);
    /// Single sine term a*sin(w*t + phase), stored as a phase-shifted cosine.
    static TimeFunction sine(double amplitude, double frequency, double phase = 0.0);
    /// Periodic piecewise-constant function. First breakpoint must be 0,
    /// breakpoints strictly increasing inside [0, period).
    static TimeFunction piecewise_constant(std::vector<double> breakpoints,
                                           std::vector<double> values, double period);
    /// Periodic piecewise-linear function; piece i is
    /// values[i] + slopes[i]*(t - breakpoints[i]) on [breakpoints[i], breakpoints[i+1]).
    static TimeFunction piecewise_linear(std::vector<double> breakpoints,
                                         std::vector<double> values,
                                         std::vector<double> slopes, double period);
    /// |amplitude * sin(frequency*t + phase)|. Used for delayed-argument
    /// offsets such as h0*|sin t|; integrates exactly.
    static TimeFunction abs_sine(double amplitude, double frequency, double phase = 0.0);
    static TimeFunction sum(std::vector<TimeFunction> parts);
    static TimeFunction scaled(double factor, TimeFunction inner);

    /// Pointwise value; right-limit convention at piecewise breakpoints.
    double eval(double t) const;

    /// Exact integral over [s, t], 0 <= s <= t.
    double integrate(double s, double t) const;

    /// Integral of |f| over [s, t]; subdivides at sign-change roots and
    /// integrates each signed piece exactly.
    double integrate_abs(double s, double t) const;

    /// Upper bound on sup |f| over [0, inf).
    double sup_norm(BoundMode mode) const;

    /// Lower bound on inf f over [0, inf). Negative when f changes sign.
    double inf_bound(BoundMode mode) const;

    /// Bound on sup over 0 <= s <= t of |integral of f over [s, t]|.
    /// Requires zero mean per period (or a pure trig sum with c0 = 0);
    /// throws NonZeroMeanError otherwise.
    double oscillation_bound(BoundMode mode) const;

    /// Smallest common period of all components, when one exists within
    /// tolerance. Constants report a period of 0 (any period works).
    std::optional<double> common_period() const;

    /// Long-run mean value. Well defined for every variant: trig terms
    /// average to zero, piecewise parts to mass/period, |sin| parts to 2A/pi.
    double mean() const;

    /// True when the function is constant; optionally reports the value.
    bool is_constant(double* value = nullptr) const;

    /// Times in [from, to) where some piecewise component jumps.
    /// Trig and |sin| parts contribute nothing (they are continuous).
    std::vector<double> jump_points(double from, double to) const;

    TimeFunction operator+(const TimeFunction& rhs) const;
    TimeFunction operator-(const TimeFunction& rhs) const;
    TimeFunction operator-() const;

    struct Node;
    const Node& node() const { return *node_; }

private:
    explicit TimeFunction(std::shared_ptr<const Node> node);
    std::shared_ptr<const Node> node_;
};

TimeFunction operator*(double factor, const TimeFunction& f);

/// Decomposition f = tilde + osc with tilde >= a0_floor > 0 and the
/// antiderivative of osc confined to a band of width alpha0.
struct SplitResult {
    TimeFunction tilde;
    TimeFunction osc;
    double a0_floor = 0;
    double alpha0 = 0;
};

/// How to split a coefficient into positive and oscillating parts.
struct SplitPolicy {
    enum class Kind { ConstantMean, Shift };
    Kind kind = Kind::ConstantMean;
    double lambda = 0; // Shift only

    static SplitPolicy constant_mean() { return {Kind::ConstantMean, 0}; }
    static SplitPolicy shift(double lambda) { return {Kind::Shift, lambda}; }
};

/// Splits f per the policy. ConstantMean takes tilde = mean(f) (requires the
/// mean positive); Shift applies to a two-valued square wave {mu, -beta} with
/// beta < lambda < mu, giving tilde in {mu-lambda, lambda-beta} and
/// osc = +-lambda. The mode selects the calculus used for alpha0.
SplitResult split(const TimeFunction& f, SplitPolicy policy,
                  BoundMode mode = BoundMode::Conservative);

namespace detail {

/// Sign-change roots of f inside (a, b), located by scan plus bisection.
std::vector<double> sign_roots(const TimeFunction& f, double a, double b);

/// min/max of the antiderivative F(t) = integral of f over [0, t] on
/// [0, period], F(0) = 0. Exact at piecewise breakpoints, refined at
/// interior zeros of f.
std::pair<double, double> antiderivative_extrema(const TimeFunction& f, double period);

} // namespace detail

} // namespace oscidelay
