#pragma once

#include <charconv>
#include <cmath>
#include <functional>
#include <string>

namespace kgan {

struct ScalarMin {
    double arg;
    double value;
};

/// Golden-section search for the minimum of a unimodal function on [lo, hi].
/// Stops when the bracket is below an absolute width tolerance or after
/// max_iter shrink steps, whichever comes first.
template <typename F>
ScalarMin golden_section_min(F&& f, double lo, double hi, int max_iter = 200,
                             double width_tol = 1e-13) {
    constexpr double inv_phi = 0.6180339887498949;  // 1/phi
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    for (int it = 0; it < max_iter && (b - a) > width_tol; ++it) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    double xm = 0.5 * (a + b);
    return {xm, f(xm)};
}

template <typename F>
ScalarMin golden_section_max(F&& f, double lo, double hi, int max_iter = 200,
                             double width_tol = 1e-13) {
    auto neg = [&](double x) { return -f(x); };
    ScalarMin m = golden_section_min(neg, lo, hi, max_iter, width_tol);
    return {m.arg, -m.value};
}

/// x*log(x) extended by continuity with 0 at x = 0.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace kgan
