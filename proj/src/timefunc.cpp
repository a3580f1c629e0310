#include "oscidelay/timefunc.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>
#include <variant>

namespace oscidelay {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFreqRelTol = 1e-9; // frequencies closer than this merge

bool nearly_equal_rel(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}
} // namespace

struct TimeFunction::Node {
    struct Constant {
        double value;
    };
    struct Trig {
        double c0;
        std::vector<TrigTerm> terms;
    };
    struct Pwc {
        std::vector<double> breakpoints;
        std::vector<double> values;
        double period;
        std::vector<double> cum; // integral from 0 to breakpoints[i] within one period
        double mass;             // integral over one full period
    };
    struct Pwl {
        std::vector<double> breakpoints;
        std::vector<double> values;
        std::vector<double> slopes;
        double period;
        std::vector<double> cum;
        double mass;
    };
    struct AbsSin {
        double amplitude; // >= 0
        double frequency; // > 0
        double phase;
    };
    struct Sum {
        std::vector<TimeFunction> parts;
    };
    struct Scaled {
        double factor;
        TimeFunction inner;
    };

    std::variant<Constant, Trig, Pwc, Pwl, AbsSin, Sum, Scaled> v;
};

namespace {

using Node = TimeFunction::Node;

// ---------------------------------------------------------------------------
// Flattened normal form: constants folded, scales distributed, trig terms
// merged by frequency, piecewise groups merged by period.
// ---------------------------------------------------------------------------

struct PwGroup {
    std::vector<double> breakpoints;
    std::vector<double> values;
    std::vector<double> slopes;
    double period = 0;

    double local_eval(double r) const {
        auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), r);
        std::size_t i = static_cast<std::size_t>(it - breakpoints.begin()) - 1;
        return values[i] + slopes[i] * (r - breakpoints[i]);
    }
    double local_slope(double r) const {
        auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), r);
        return slopes[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
    }
    double mass() const {
        double m = 0;
        for (std::size_t i = 0; i < breakpoints.size(); ++i) {
            double end = (i + 1 < breakpoints.size()) ? breakpoints[i + 1] : period;
            double len = end - breakpoints[i];
            m += values[i] * len + 0.5 * slopes[i] * len * len;
        }
        return m;
    }
};

struct AbsSinPart {
    double coef; // signed; part value = coef * |sin(frequency*t + phase)|
    double frequency;
    double phase;
};

struct Flattened {
    double c0 = 0;
    std::vector<TrigTerm> trig; // merged, amplitudes > 0
    std::vector<PwGroup> pw;
    std::vector<AbsSinPart> abssin;

    bool piecewise_only() const { return trig.empty() && abssin.empty(); }
    bool has_nontrig() const { return !pw.empty() || !abssin.empty(); }
};

void flatten_into(const TimeFunction& f, double factor, Flattened& out);

void flatten_node(const Node& n, double factor, Flattened& out) {
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Node::Constant>) {
                out.c0 += factor * node.value;
            } else if constexpr (std::is_same_v<T, Node::Trig>) {
                out.c0 += factor * node.c0;
                for (const auto& term : node.terms) {
                    TrigTerm t = term;
                    t.amplitude *= factor;
                    out.trig.push_back(t);
                }
            } else if constexpr (std::is_same_v<T, Node::Pwc>) {
                PwGroup g;
                g.breakpoints = node.breakpoints;
                g.values = node.values;
                for (double& v : g.values) v *= factor;
                g.slopes.assign(node.values.size(), 0.0);
                g.period = node.period;
                out.pw.push_back(std::move(g));
            } else if constexpr (std::is_same_v<T, Node::Pwl>) {
                PwGroup g;
                g.breakpoints = node.breakpoints;
                g.values = node.values;
                g.slopes = node.slopes;
                for (double& v : g.values) v *= factor;
                for (double& s : g.slopes) s *= factor;
                g.period = node.period;
                out.pw.push_back(std::move(g));
            } else if constexpr (std::is_same_v<T, Node::AbsSin>) {
                out.abssin.push_back({factor * node.amplitude, node.frequency, node.phase});
            } else if constexpr (std::is_same_v<T, Node::Sum>) {
                for (const auto& p : node.parts) flatten_into(p, factor, out);
            } else if constexpr (std::is_same_v<T, Node::Scaled>) {
                flatten_into(node.inner, factor * node.factor, out);
            }
        },
        n.v);
}

void flatten_into(const TimeFunction& f, double factor, Flattened& out) {
    flatten_node(f.node(), factor, out);
}

std::vector<TrigTerm> merge_trig(const std::vector<TrigTerm>& terms) {
    std::vector<double> freqs;
    std::vector<std::complex<double>> amps;
    double scale = 0;
    for (const auto& t : terms) scale += std::abs(t.amplitude);
    for (const auto& t : terms) {
        std::size_t i = 0;
        for (; i < freqs.size(); ++i)
            if (nearly_equal_rel(freqs[i], t.frequency, kFreqRelTol)) break;
        if (i == freqs.size()) {
            freqs.push_back(t.frequency);
            amps.emplace_back(0, 0);
        }
        amps[i] += std::polar(t.amplitude, t.phase);
    }
    std::vector<TrigTerm> merged;
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        double a = std::abs(amps[i]);
        if (a <= 1e-14 * std::max(1.0, scale)) continue;
        merged.push_back({a, freqs[i], std::arg(amps[i])});
    }
    std::sort(merged.begin(), merged.end(),
              [](const TrigTerm& x, const TrigTerm& y) { return x.frequency < y.frequency; });
    return merged;
}

PwGroup merge_two_groups(const PwGroup& a, const PwGroup& b) {
    PwGroup out;
    out.period = a.period;
    std::vector<double> bps = a.breakpoints;
    bps.insert(bps.end(), b.breakpoints.begin(), b.breakpoints.end());
    std::sort(bps.begin(), bps.end());
    bps.erase(std::unique(bps.begin(), bps.end(),
                          [&](double x, double y) {
                              return std::abs(x - y) <= 1e-12 * std::max(1.0, out.period);
                          }),
              bps.end());
    for (double x : bps) {
        out.breakpoints.push_back(x);
        out.values.push_back(a.local_eval(x) + b.local_eval(x));
        out.slopes.push_back(a.local_slope(x) + b.local_slope(x));
    }
    return out;
}

std::vector<PwGroup> merge_pw(std::vector<PwGroup> groups) {
    std::vector<PwGroup> merged;
    for (auto& g : groups) {
        bool absorbed = false;
        for (auto& m : merged) {
            if (nearly_equal_rel(m.period, g.period, kFreqRelTol)) {
                m = merge_two_groups(m, g);
                absorbed = true;
                break;
            }
        }
        if (!absorbed) merged.push_back(std::move(g));
    }
    return merged;
}

Flattened flatten(const TimeFunction& f) {
    Flattened raw;
    flatten_into(f, 1.0, raw);
    Flattened out;
    out.c0 = raw.c0;
    out.trig = merge_trig(raw.trig);
    out.pw = merge_pw(std::move(raw.pw));
    out.abssin = std::move(raw.abssin);
    return out;
}

// Rebuilds a TimeFunction for the non-trig residue of a flattened form.
TimeFunction residue_function(const Flattened& fl) {
    std::vector<TimeFunction> parts;
    if (fl.c0 != 0) parts.push_back(TimeFunction::constant(fl.c0));
    for (const auto& g : fl.pw)
        parts.push_back(TimeFunction::piecewise_linear(g.breakpoints, g.values, g.slopes, g.period));
    for (const auto& a : fl.abssin)
        parts.push_back(TimeFunction::scaled(a.coef, TimeFunction::abs_sine(1.0, a.frequency, a.phase)));
    if (parts.empty()) return TimeFunction();
    if (parts.size() == 1) return parts[0];
    return TimeFunction::sum(std::move(parts));
}

// Integral of |sin| from 0 to x (odd in x).
double abs_sin_mass(double x) {
    double k = std::floor(x / kPi);
    double r = x - k * kPi;
    return 2.0 * k + (1.0 - std::cos(r));
}

struct IntervalBounds {
    double lo, hi;
};

IntervalBounds conservative_interval(const Flattened& fl) {
    double lo = fl.c0, hi = fl.c0;
    for (const auto& t : fl.trig) {
        lo -= t.amplitude;
        hi += t.amplitude;
    }
    for (const auto& g : fl.pw) {
        double gmin = std::numeric_limits<double>::infinity();
        double gmax = -gmin;
        for (std::size_t i = 0; i < g.breakpoints.size(); ++i) {
            double end = (i + 1 < g.breakpoints.size()) ? g.breakpoints[i + 1] : g.period;
            double v0 = g.values[i];
            double v1 = g.values[i] + g.slopes[i] * (end - g.breakpoints[i]);
            gmin = std::min({gmin, v0, v1});
            gmax = std::max({gmax, v0, v1});
        }
        lo += gmin;
        hi += gmax;
    }
    for (const auto& a : fl.abssin) {
        lo += std::min(0.0, a.coef);
        hi += std::max(0.0, a.coef);
    }
    return {lo, hi};
}

// Grid min/max of f over [a, b] with one parabolic refinement per interior
// extremum; jump points are sampled from both sides.
IntervalBounds grid_minmax(const TimeFunction& f, double a, double b, int n) {
    std::vector<double> ts;
    ts.reserve(static_cast<std::size_t>(n) + 16);
    for (int i = 0; i <= n; ++i) ts.push_back(a + (b - a) * i / n);
    double eps = 1e-9 * std::max(1.0, b - a);
    for (double j : f.jump_points(a, b)) {
        ts.push_back(j);
        if (j - eps > a) ts.push_back(j - eps);
    }
    std::sort(ts.begin(), ts.end());
    std::vector<double> vals(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) vals[i] = f.eval(ts[i]);

    double lo = *std::min_element(vals.begin(), vals.end());
    double hi = *std::max_element(vals.begin(), vals.end());

    for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
        double d1 = vals[i] - vals[i - 1];
        double d2 = vals[i + 1] - vals[i];
        if (d1 * d2 < 0) {
            // parabola vertex through the three samples (Newton step on the
            // quadratic interpolant of the extremum)
            double h1 = ts[i] - ts[i - 1];
            double h2 = ts[i + 1] - ts[i];
            double denom = h2 * d1 - h1 * d2;
            if (denom != 0) {
                double tstar = ts[i] + 0.5 * (h2 * h2 * d1 + h1 * h1 * d2) / denom * 0;
                // standard non-uniform 3-point vertex
                tstar = ts[i] +
                        0.5 *
                            (h1 * h1 * d2 + h2 * h2 * d1) /
                            (h1 * d2 + h2 * d1) *
                            -1.0;
                if (tstar > ts[i - 1] && tstar < ts[i + 1]) {
                    double v = f.eval(tstar);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            }
        }
    }
    return {lo, hi};
}

constexpr int kTightSamplesPerPeriod = 4096;
constexpr double kAperiodicHorizon = 100.0;

} // namespace

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

TimeFunction::TimeFunction() : node_(std::make_shared<Node>(Node{Node::Constant{0.0}})) {}

TimeFunction::TimeFunction(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

TimeFunction TimeFunction::constant(double c) {
    return TimeFunction(std::make_shared<Node>(Node{Node::Constant{c}}));
}

TimeFunction TimeFunction::trig(double c0, std::vector<TrigTerm> terms) {
    for (auto& t : terms) {
        if (!(t.frequency > 0))
            throw BadParamsError("trig term frequency must be positive");
        if (t.amplitude < 0) { // canonicalize to nonnegative amplitude
            t.amplitude = -t.amplitude;
            t.phase += kPi;
        }
    }
    return TimeFunction(std::make_shared<Node>(Node{Node::Trig{c0, std::move(terms)}}));
}

TimeFunction TimeFunction::cosine(double amplitude, double frequency, double phase) {
    return trig(0.0, {TrigTerm{amplitude, frequency, phase}});
}

TimeFunction TimeFunction::sine(double amplitude, double frequency, double phase) {
    return trig(0.0, {TrigTerm{amplitude, frequency, phase - kPi / 2.0}});
}

namespace {
void check_pw_args(const std::vector<double>& bps, std::size_t nvals, double period) {
    if (bps.empty() || bps.size() != nvals)
        throw BadParamsError("piecewise function needs matching breakpoints/values");
    if (bps.front() != 0.0)
        throw BadParamsError("first piecewise breakpoint must be 0");
    if (!(period > 0) || bps.back() >= period)
        throw BadParamsError("piecewise breakpoints must lie inside [0, period)");
    for (std::size_t i = 1; i < bps.size(); ++i)
        if (!(bps[i] > bps[i - 1]))
            throw BadParamsError("piecewise breakpoints must be strictly increasing");
}
} // namespace

TimeFunction TimeFunction::piecewise_constant(std::vector<double> breakpoints,
                                              std::vector<double> values, double period) {
    check_pw_args(breakpoints, values.size(), period);
    Node::Pwc p{std::move(breakpoints), std::move(values), period, {}, 0.0};
    p.cum.resize(p.breakpoints.size());
    double acc = 0;
    for (std::size_t i = 0; i < p.breakpoints.size(); ++i) {
        p.cum[i] = acc;
        double end = (i + 1 < p.breakpoints.size()) ? p.breakpoints[i + 1] : period;
        acc += p.values[i] * (end - p.breakpoints[i]);
    }
    p.mass = acc;
    return TimeFunction(std::make_shared<Node>(Node{std::move(p)}));
}

TimeFunction TimeFunction::piecewise_linear(std::vector<double> breakpoints,
                                            std::vector<double> values,
                                            std::vector<double> slopes, double period) {
    check_pw_args(breakpoints, values.size(), period);
    if (slopes.size() != values.size())
        throw BadParamsError("piecewise_linear needs one slope per piece");
    Node::Pwl p{std::move(breakpoints), std::move(values), std::move(slopes), period, {}, 0.0};
    p.cum.resize(p.breakpoints.size());
    double acc = 0;
    for (std::size_t i = 0; i < p.breakpoints.size(); ++i) {
        p.cum[i] = acc;
        double end = (i + 1 < p.breakpoints.size()) ? p.breakpoints[i + 1] : period;
        double len = end - p.breakpoints[i];
        acc += p.values[i] * len + 0.5 * p.slopes[i] * len * len;
    }
    p.mass = acc;
    return TimeFunction(std::make_shared<Node>(Node{std::move(p)}));
}

TimeFunction TimeFunction::abs_sine(double amplitude, double frequency, double phase) {
    if (!(frequency > 0)) throw BadParamsError("abs_sine frequency must be positive");
    return TimeFunction(
        std::make_shared<Node>(Node{Node::AbsSin{std::abs(amplitude), frequency, phase}}));
}

TimeFunction TimeFunction::sum(std::vector<TimeFunction> parts) {
    return TimeFunction(std::make_shared<Node>(Node{Node::Sum{std::move(parts)}}));
}

TimeFunction TimeFunction::scaled(double factor, TimeFunction inner) {
    return TimeFunction(std::make_shared<Node>(Node{Node::Scaled{factor, std::move(inner)}}));
}

TimeFunction TimeFunction::operator+(const TimeFunction& rhs) const {
    return sum({*this, rhs});
}

TimeFunction TimeFunction::operator-(const TimeFunction& rhs) const {
    return sum({*this, scaled(-1.0, rhs)});
}

TimeFunction TimeFunction::operator-() const { return scaled(-1.0, *this); }

TimeFunction operator*(double factor, const TimeFunction& f) {
    return TimeFunction::scaled(factor, f);
}

// ---------------------------------------------------------------------------
// Evaluation and exact integration
// ---------------------------------------------------------------------------

double TimeFunction::eval(double t) const {
    return std::visit(
        [&](const auto& node) -> double {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Node::Constant>) {
                return node.value;
            } else if constexpr (std::is_same_v<T, Node::Trig>) {
                double v = node.c0;
                for (const auto& term : node.terms)
                    v += term.amplitude * std::cos(term.frequency * t + term.phase);
                return v;
            } else if constexpr (std::is_same_v<T, Node::Pwc>) {
                double r = std::fmod(t, node.period);
                if (r < 0) r += node.period;
                auto it = std::upper_bound(node.breakpoints.begin(), node.breakpoints.end(), r);
                return node.values[static_cast<std::size_t>(it - node.breakpoints.begin()) - 1];
            } else if constexpr (std::is_same_v<T, Node::Pwl>) {
                double r = std::fmod(t, node.period);
                if (r < 0) r += node.period;
                auto it = std::upper_bound(node.breakpoints.begin(), node.breakpoints.end(), r);
                std::size_t i = static_cast<std::size_t>(it - node.breakpoints.begin()) - 1;
                return node.values[i] + node.slopes[i] * (r - node.breakpoints[i]);
            } else if constexpr (std::is_same_v<T, Node::AbsSin>) {
                return node.amplitude * std::abs(std::sin(node.frequency * t + node.phase));
            } else if constexpr (std::is_same_v<T, Node::Sum>) {
                double v = 0;
                for (const auto& p : node.parts) v += p.eval(t);
                return v;
            } else {
                return node.factor * node.inner.eval(t);
            }
        },
        node_->v);
}

namespace {

// Antiderivative at t (anchored at 0) of a periodic piecewise node.
template <typename P>
double pw_antiderivative(const P& p, double t, bool linear) {
    double k = std::floor(t / p.period);
    double r = t - k * p.period;
    auto it = std::upper_bound(p.breakpoints.begin(), p.breakpoints.end(), r);
    std::size_t i = static_cast<std::size_t>(it - p.breakpoints.begin()) - 1;
    double dr = r - p.breakpoints[i];
    double partial = p.cum[i] + p.values[i] * dr;
    if (linear) {
        if constexpr (requires { p.slopes; }) partial += 0.5 * p.slopes[i] * dr * dr;
    }
    return k * p.mass + partial;
}

} // namespace

double TimeFunction::integrate(double s, double t) const {
    return std::visit(
        [&](const auto& node) -> double {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Node::Constant>) {
                return node.value * (t - s);
            } else if constexpr (std::is_same_v<T, Node::Trig>) {
                double v = node.c0 * (t - s);
                for (const auto& term : node.terms)
                    v += term.amplitude / term.frequency *
                         (std::sin(term.frequency * t + term.phase) -
                          std::sin(term.frequency * s + term.phase));
                return v;
            } else if constexpr (std::is_same_v<T, Node::Pwc>) {
                return pw_antiderivative(node, t, false) - pw_antiderivative(node, s, false);
            } else if constexpr (std::is_same_v<T, Node::Pwl>) {
                return pw_antiderivative(node, t, true) - pw_antiderivative(node, s, true);
            } else if constexpr (std::is_same_v<T, Node::AbsSin>) {
                double w = node.frequency;
                return node.amplitude / w *
                       (abs_sin_mass(w * t + node.phase) - abs_sin_mass(w * s + node.phase));
            } else if constexpr (std::is_same_v<T, Node::Sum>) {
                double v = 0;
                for (const auto& p : node.parts) v += p.integrate(s, t);
                return v;
            } else {
                return node.factor * node.inner.integrate(s, t);
            }
        },
        node_->v);
}

double TimeFunction::integrate_abs(double s, double t) const {
    if (t <= s) return 0.0;
    IntervalBounds iv = conservative_interval(flatten(*this));
    if (iv.lo >= 0 || iv.hi <= 0) return std::abs(integrate(s, t));

    std::vector<double> pts = detail::sign_roots(*this, s, t);
    for (double j : jump_points(s, t)) pts.push_back(j);
    pts.push_back(s);
    pts.push_back(t);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    double total = 0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        total += std::abs(integrate(pts[i], pts[i + 1]));
    return total;
}

// ---------------------------------------------------------------------------
// Bounds
// ---------------------------------------------------------------------------

std::optional<double> TimeFunction::common_period() const {
    Flattened fl = flatten(*this);
    std::vector<double> base;
    for (const auto& t : fl.trig) base.push_back(kTwoPi / t.frequency);
    for (const auto& g : fl.pw) base.push_back(g.period);
    for (const auto& a : fl.abssin) base.push_back(kPi / a.frequency);
    if (base.empty()) return 0.0; // constant
    double longest = *std::max_element(base.begin(), base.end());
    for (int n = 1; n <= 4096; ++n) {
        double cand = n * longest;
        bool ok = true;
        for (double p : base) {
            double q = cand / p;
            if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, q)) {
                ok = false;
                break;
            }
        }
        if (ok) return cand;
    }
    return std::nullopt;
}

double TimeFunction::mean() const {
    Flattened fl = flatten(*this);
    double m = fl.c0;
    for (const auto& g : fl.pw) m += g.mass() / g.period;
    for (const auto& a : fl.abssin) m += a.coef * 2.0 / kPi;
    return m;
}

bool TimeFunction::is_constant(double* value) const {
    Flattened fl = flatten(*this);
    if (!fl.trig.empty() || !fl.pw.empty() || !fl.abssin.empty()) return false;
    if (value) *value = fl.c0;
    return true;
}

double TimeFunction::sup_norm(BoundMode mode) const {
    Flattened fl = flatten(*this);
    if (mode == BoundMode::Conservative) {
        IntervalBounds iv = conservative_interval(fl);
        return std::max(std::abs(iv.lo), std::abs(iv.hi));
    }
    auto period = common_period();
    double horizon = (period && *period > 0) ? *period : kAperiodicHorizon;
    if (period && *period == 0) return std::abs(fl.c0);
    IntervalBounds iv = grid_minmax(*this, 0.0, horizon, kTightSamplesPerPeriod);
    return std::max(std::abs(iv.lo), std::abs(iv.hi));
}

double TimeFunction::inf_bound(BoundMode mode) const {
    Flattened fl = flatten(*this);
    if (mode == BoundMode::Conservative) return conservative_interval(fl).lo;
    auto period = common_period();
    if (period && *period == 0) return fl.c0;
    double horizon = (period && *period > 0) ? *period : kAperiodicHorizon;
    return grid_minmax(*this, 0.0, horizon, kTightSamplesPerPeriod).lo;
}

namespace {

// Range (max - min) of the antiderivative of the piecewise residue plus c0
// over one period. Exact: extrema can only occur at breakpoints or at
// interior zero crossings of the linear pieces.
double pw_antiderivative_range(const PwGroup& g, double c0) {
    double period = g.period;
    std::vector<double> cand;
    cand.push_back(period);
    for (std::size_t i = 0; i < g.breakpoints.size(); ++i) {
        cand.push_back(g.breakpoints[i]);
        double end = (i + 1 < g.breakpoints.size()) ? g.breakpoints[i + 1] : period;
        double v = g.values[i] + c0;
        if (g.slopes[i] != 0) {
            double root = g.breakpoints[i] - v / g.slopes[i];
            if (root > g.breakpoints[i] && root < end) cand.push_back(root);
        }
    }
    double lo = 0, hi = 0, acc = 0;
    std::sort(cand.begin(), cand.end());
    double prev = 0;
    for (double x : cand) {
        if (x <= prev) continue;
        // integral of (g + c0) over [prev, x]
        auto seg = [&](double a, double b) {
            double m = 0;
            // walk pieces between a and b (both within [0, period])
            double pos = a;
            while (pos < b - 1e-15) {
                auto it = std::upper_bound(g.breakpoints.begin(), g.breakpoints.end(), pos);
                std::size_t i = static_cast<std::size_t>(it - g.breakpoints.begin()) - 1;
                double end = (i + 1 < g.breakpoints.size()) ? g.breakpoints[i + 1] : period;
                double stop = std::min(end, b);
                double d0 = pos - g.breakpoints[i];
                double d1 = stop - g.breakpoints[i];
                m += (g.values[i] + c0) * (stop - pos) +
                     0.5 * g.slopes[i] * (d1 * d1 - d0 * d0);
                pos = stop;
            }
            return m;
        };
        acc += seg(prev, x);
        lo = std::min(lo, acc);
        hi = std::max(hi, acc);
        prev = x;
    }
    return hi - lo;
}

} // namespace

double TimeFunction::oscillation_bound(BoundMode mode) const {
    Flattened fl = flatten(*this);
    double spn = sup_norm(BoundMode::Conservative);
    if (spn == 0) return 0.0;

    auto period = common_period();
    if (period && *period == 0) {
        // constant function: zero mean only if identically zero
        if (std::abs(fl.c0) <= 1e-12) return 0.0;
        throw NonZeroMeanError("constant function has unbounded antiderivative");
    }
    if (period) {
        double mass = integrate(0.0, *period);
        if (std::abs(mass) > 1e-9 * (*period) * spn)
            throw NonZeroMeanError("function mean per period is not zero");
    } else {
        // no common period: only a pure trig sum with zero constant is allowed
        if (fl.has_nontrig() || std::abs(fl.c0) > 1e-9 * spn)
            throw NonZeroMeanError(
                "aperiodic function must be a zero-mean trig sum for this bound");
    }

    if (mode == BoundMode::Conservative) {
        double bound = 0;
        for (const auto& t : fl.trig) bound += 2.0 * t.amplitude / t.frequency;
        if (fl.has_nontrig() || fl.c0 != 0) {
            if (fl.abssin.empty() && fl.pw.size() == 1) {
                bound += pw_antiderivative_range(fl.pw[0], fl.c0);
            } else if (!fl.has_nontrig()) {
                // residual constant only; periodic precondition already passed
            } else if (period) {
                TimeFunction residue = residue_function(fl);
                auto [lo, hi] = detail::antiderivative_extrema(residue, *period);
                bound += hi - lo;
            } else {
                throw NonZeroMeanError("mixed aperiodic components are not supported");
            }
        }
        return bound;
    }

    double horizon = period ? *period : kAperiodicHorizon;
    auto [lo, hi] = detail::antiderivative_extrema(*this, horizon);
    return hi - lo;
}

std::vector<double> TimeFunction::jump_points(double from, double to) const {
    Flattened fl = flatten(*this);
    std::vector<double> out;
    for (const auto& g : fl.pw) {
        double k0 = std::floor(from / g.period);
        for (double k = k0;; k += 1.0) {
            bool past = true;
            for (double b : g.breakpoints) {
                double x = k * g.period + b;
                if (x >= to) continue;
                past = false;
                if (x >= from) out.push_back(x);
            }
            if (k * g.period >= to) break;
            if (past && k > k0) break;
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------

SplitResult split(const TimeFunction& f, SplitPolicy policy, BoundMode mode) {
    if (policy.kind == SplitPolicy::Kind::ConstantMean) {
        double m = f.mean();
        if (!(m > 0)) {
            std::ostringstream os;
            os << "constant-mean split needs positive mean, got " << m;
            throw SplitInfeasibleError(os.str());
        }
        TimeFunction tilde = TimeFunction::constant(m);
        TimeFunction osc = f - tilde;
        double alpha0 = 0;
        try {
            alpha0 = osc.oscillation_bound(mode);
        } catch (const NonZeroMeanError& e) {
            throw SplitInfeasibleError(std::string("oscillating part unbounded: ") + e.what());
        }
        return {tilde, osc, m, alpha0};
    }

    // Shift policy: f must be a two-valued square wave {mu, -beta}.
    Flattened fl = flatten(f);
    if (!fl.trig.empty() || !fl.abssin.empty() || fl.pw.size() != 1)
        throw SplitInfeasibleError("shift split applies to piecewise-constant waves only");
    const PwGroup& g = fl.pw[0];
    for (double s : g.slopes)
        if (s != 0) throw SplitInfeasibleError("shift split applies to piecewise-constant waves only");

    std::vector<double> vals = g.values;
    for (double& v : vals) v += fl.c0;
    double mu = *std::max_element(vals.begin(), vals.end());
    double mbeta = *std::min_element(vals.begin(), vals.end());
    for (double v : vals)
        if (std::abs(v - mu) > 1e-12 * std::max(1.0, std::abs(mu)) &&
            std::abs(v - mbeta) > 1e-12 * std::max(1.0, std::abs(mbeta)))
            throw SplitInfeasibleError("shift split needs exactly two distinct values");
    double beta = -mbeta;
    if (!(beta > 0) || !(mu > 0) || !(policy.lambda > beta) || !(policy.lambda < mu))
        throw SplitInfeasibleError("shift split needs values {mu, -beta} with beta < lambda < mu");

    double lambda = policy.lambda;
    std::vector<double> tv, ov;
    for (double v : vals) {
        bool is_mu = std::abs(v - mu) <= std::abs(v - mbeta);
        tv.push_back(is_mu ? mu - lambda : lambda - beta);
        ov.push_back(is_mu ? lambda : -lambda);
    }
    TimeFunction tilde = TimeFunction::piecewise_constant(g.breakpoints, tv, g.period);
    TimeFunction osc = TimeFunction::piecewise_constant(g.breakpoints, ov, g.period);
    double alpha0 = 0;
    try {
        alpha0 = osc.oscillation_bound(mode);
    } catch (const NonZeroMeanError&) {
        throw SplitInfeasibleError("shift split needs equal measure of the two values per period");
    }
    return {tilde, osc, std::min(mu - lambda, lambda - beta), alpha0};
}

// ---------------------------------------------------------------------------
// Root finding helpers
// ---------------------------------------------------------------------------

namespace detail {

std::vector<double> sign_roots(const TimeFunction& f, double a, double b) {
    std::vector<double> roots;
    if (b <= a) return roots;

    Flattened fl = flatten(f);
    double wmax = 0;
    for (const auto& t : fl.trig) wmax = std::max(wmax, t.frequency);
    for (const auto& s : fl.abssin) wmax = std::max(wmax, s.frequency);
    int n = 2048;
    if (wmax > 0)
        n = std::max(n, static_cast<int>(std::min(1е6, 16.0 * (b - a) * wmax / kTwoPi)));

    std::vector<double> ts;
    ts.reserve(static_cast<std::size_t>(n) + 8);
    for (int i = 0; i <= n; ++i) ts.push_back(a + (b - a) * i / n);
    for (double j : f.jump_points(a, b)) ts.push_back(j);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

    double prev_t = ts[0];
    double prev_v = f.eval(prev_t);
    for (std::size_t i = 1; i < ts.size(); ++i) {
        double cur_t = ts[i];
        double cur_v = f.eval(cur_t);
        if (prev_v == 0) {
            roots.push_back(prev_t);
        } else if (prev_v * cur_v < 0) {
            double lo = prev_t, hi = cur_t, flo = prev_v;
            for (int it = 0; it < 100; ++it) {
                double mid = 0.5 * (lo + hi);
                double fm = f.eval(mid);
                if (fm == 0) {
                    lo = hi = mid;
                    break;
                }
                if (flo * fm < 0)
                    hi = mid;
                else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        prev_t = cur_t;
        prev_v = cur_v;
    }
    return roots;
}

std::pair<double, double> antiderivative_extrema(const TimeFunction& f, double period) {
    std::vector<double> cand = sign_roots(f, 0.0, period);
    for (double j : f.jump_points(0.0, period)) cand.push_back(j);
    cand.push_back(0.0);
    cand.push_back(period);
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    double lo = 0, hi = 0;
    for (double x : cand) {
        double v = f.integrate(0.0, x);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {lo, hi};
}

std::optional<PwProfile> as_single_piecewise(const TimeFunction& f) {
    Flattened fl = flatten(f);
    if (!fl.trig.empty() || !fl.abssin.empty() || fl.pw.size() != 1) return std::nullopt;
    PwProfile out;
    const PwGroup& g = fl.pw[0];
    out.breakpoints = g.breakpoints;
    out.values = g.values;
    for (double& v : out.values) v += fl.c0;
    out.slopes = g.slopes;
    out.period = g.period;
    return out;
}

} // namespace detail

} // namespace oscidelay
