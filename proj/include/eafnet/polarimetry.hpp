#pragma once

// Linear-polarization optics on four-direction intensity captures.
//
// All planes are double precision and processed independently per color
// channel. Angles are in degrees unless a name says otherwise.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "eafnet/image.hpp"

namespace eafnet::polar {

// Pixels with total intensity at or below this are treated as dark: DoLP 0.
inline constexpr double kDarkS0 = 1e-12;

// Intensities behind polarizers at 0, 45, 90 and 135 degrees.
struct IntensityQuad {
    ImageD i0, i45, i90, i135;

    void validate() const
    {
        if (i0.empty()) throw std::invalid_argument("intensity quad is empty");
        for (const ImageD* p : {&i45, &i90, &i135}) {
            if (!p->same_dims(i0)) {
                throw std::invalid_argument("intensity quad dimension mismatch: " + i0.dims_string() + " vs " +
                                            p->dims_string());
            }
        }
        for (const ImageD* p : {&i0, &i45, &i90, &i135}) {
            for (double v : p->data) {
                if (!std::isfinite(v)) throw std::invalid_argument("intensity quad has non-finite value");
            }
        }
    }
};

struct StokesMap {
    ImageD s0, s1, s2;
};

struct PolarDerived {
    ImageD dolp;
    ImageD aolp_deg;
};

struct FresnelResult {
    double r_s = 0, r_p = 0, t_s = 0, t_p = 0;
    double theta_t_deg = 0;
};

// Argument order for the half-angle arctangent. `atan2_s1_s2` uses atan2(s1, s2),
// `standard` the textbook atan2(s2, s1).
enum class AolpConvention { atan2_s1_s2, standard };

inline double deg_to_rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / std::numbers::pi; }

inline double dolp_of(double s0, double s1, double s2)
{
    if (s0 <= kDarkS0) return 0.0;
    double d = std::sqrt(s1 * s1 + s2 * s2) / s0;
    return std::clamp(d, 0.0, 1.0);
}

inline double aolp_of(double s1, double s2, AolpConvention conv = AolpConvention::atan2_s1_s2)
{
    if (s1 == 0.0 && s2 == 0.0) return 0.0;
    double a = conv == AolpConvention::atan2_s1_s2 ? 0.5 * rad_to_deg(std::atan2(s1, s2))
                                             : 0.5 * rad_to_deg(std::atan2(s2, s1));
    if (a < 0.0) a += 180.0;
    if (a >= 180.0) a -= 180.0;
    return a;
}

// Value remap of a horizontally mirrored AoLP: a -> 180 - a, with 180 wrapped to 0.
inline double flip_aolp(double a)
{
    double r = 180.0 - a;
    if (r >= 180.0) r -= 180.0;
    if (r < 0.0) r += 180.0;
    return r;
}

inline StokesMap compute_stokes(const IntensityQuad& q)
{
    q.validate();
    StokesMap s{ImageD(q.i0.channels, q.i0.height, q.i0.width), ImageD(q.i0.channels, q.i0.height, q.i0.width),
                ImageD(q.i0.channels, q.i0.height, q.i0.width)};
    for (std::size_t i = 0; i < q.i0.size(); ++i) {
        s.s0.data[i] = q.i0.data[i] + q.i90.data[i];
        s.s1.data[i] = q.i0.data[i] - q.i90.data[i];
        s.s2.data[i] = q.i45.data[i] - q.i135.data[i];
    }
    return s;
}

// |(i0 + i90) - (i45 + i135)| per pixel. Reported, never enforced.
inline ImageD consistency_residual(const IntensityQuad& q)
{
    q.validate();
    ImageD r(q.i0.channels, q.i0.height, q.i0.width);
    for (std::size_t i = 0; i < r.size(); ++i) {
        r.data[i] = std::abs((q.i0.data[i] + q.i90.data[i]) - (q.i45.data[i] + q.i135.data[i]));
    }
    return r;
}

inline void check_stokes_dims(const StokesMap& s)
{
    if (s.s0.empty() || !s.s1.same_dims(s.s0) || !s.s2.same_dims(s.s0)) {
        throw std::invalid_argument("stokes planes must be non-empty with equal dims");
    }
}

inline ImageD compute_dolp(const StokesMap& s)
{
    check_stokes_dims(s);
    ImageD d(s.s0.channels, s.s0.height, s.s0.width);
    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] = dolp_of(s.s0.data[i], s.s1.data[i], s.s2.data[i]);
    return d;
}

inline ImageD compute_aolp(const StokesMap& s, AolpConvention conv = AolpConvention::atan2_s1_s2)
{
    check_stokes_dims(s);
    ImageD a(s.s0.channels, s.s0.height, s.s0.width);
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] = aolp_of(s.s1.data[i], s.s2.data[i], conv);
    return a;
}

inline PolarDerived derive(const StokesMap& s, AolpConvention conv = AolpConvention::atan2_s1_s2)
{
    return {compute_dolp(s), compute_aolp(s, conv)};
}

// Inverse of compute_stokes. Rejects states that would need negative intensity.
inline IntensityQuad synthesize_intensities(const StokesMap& s)
{
    check_stokes_dims(s);
    for (std::size_t i = 0; i < s.s0.size(); ++i) {
        double s0 = s.s0.data[i], s1 = s.s1.data[i], s2 = s.s2.data[i];
        if (!(s0 >= 0.0) || s1 * s1 + s2 * s2 > s0 * s0 * (1.0 + 1e-12)) {
            throw std::invalid_argument("stokes pixel " + std::to_string(i) +
                                        " violates s1^2 + s2^2 <= s0^2 (non-physical)");
        }
    }
    const int c = s.s0.channels, h = s.s0.height, w = s.s0.width;
    IntensityQuad q{ImageD(c, h, w), ImageD(c, h, w), ImageD(c, h, w), ImageD(c, h, w)};
    for (std::size_t i = 0; i < s.s0.size(); ++i) {
        double s0 = s.s0.data[i], s1 = s.s1.data[i], s2 = s.s2.data[i];
        q.i0.data[i] = (s0 + s1) / 2;
        q.i90.data[i] = (s0 - s1) / 2;
        q.i45.data[i] = (s0 + s2) / 2;
        q.i135.data[i] = (s0 - s2) / 2;
    }
    return q;
}

inline ImageD flip_aolp_values(const ImageD& aolp_deg)
{
    ImageD out = aolp_deg;
    for (double& v : out.data) v = flip_aolp(v);
    return out;
}

// Amplitude reflection/transmission coefficients at a planar interface,
// with the refraction angle from Snell's law.
inline FresnelResult fresnel_coefficients(double n1, double n2, double theta_i_deg)
{
    if (!(n1 > 0.0) || !(n2 > 0.0)) throw std::invalid_argument("refractive indices must be positive");
    if (!(theta_i_deg >= 0.0 && theta_i_deg < 90.0)) {
        throw std::invalid_argument("incidence angle must lie in [0, 90) degrees, got " + std::to_string(theta_i_deg));
    }
    const double ti = deg_to_rad(theta_i_deg);
    const double sin_t = n1 / n2 * std::sin(ti);
    if (sin_t > 1.0) {
        throw std::domain_error("total internal reflection: n1=" + std::to_string(n1) + " n2=" + std::to_string(n2) +
                                " theta_i=" + std::to_string(theta_i_deg));
    }
    const double tt = std::asin(sin_t);
    const double ci = std::cos(ti), ct = std::cos(tt);
    FresnelResult r;
    r.r_s = (n1 * ci - n2 * ct) / (n1 * ci + n2 * ct);
    r.t_s = 2 * n1 * ci / (n1 * ci + n2 * ct);
    r.r_p = (n2 * ci - n1 * ct) / (n2 * ci + n1 * ct);
    r.t_p = 2 * n1 * ci / (n2 * ci + n1 * ct);
    r.theta_t_deg = rad_to_deg(tt);
    return r;
}

inline double brewster_angle_deg(double n1, double n2) { return rad_to_deg(std::atan(n2 / n1)); }

// Degree of polarization of specularly reflected unpolarized light:
// (Rs - Rp) / (Rs + Rp) with power reflectances R = r^2.
inline double reflected_dolp(double n1, double n2, double theta_i_deg)
{
    auto f = fresnel_coefficients(n1, n2, theta_i_deg);
    double rs = f.r_s * f.r_s, rp = f.r_p * f.r_p;
    return rs + rp > 0 ? (rs - rp) / (rs + rp) : 0.0;
}

// Mean over color channels of each Stokes plane. Stokes components are
// additive, so this is the polarization state of the summed channels.
inline StokesMap channel_mean(const StokesMap& s)
{
    check_stokes_dims(s);
    const int c = s.s0.channels, h = s.s0.height, w = s.s0.width;
    StokesMap out{ImageD(1, h, w), ImageD(1, h, w), ImageD(1, h, w)};
    const std::size_t n = s.s0.plane_size();
    for (std::size_t i = 0; i < n; ++i) {
        double a = 0, b = 0, d = 0;
        for (int k = 0; k < c; ++k) {
            a += s.s0.data[k * n + i];
            b += s.s1.data[k * n + i];
            d += s.s2.data[k * n + i];
        }
        out.s0.data[i] = a / c;
        out.s1.data[i] = b / c;
        out.s2.data[i] = d / c;
    }
    return out;
}

}  // namespace eafnet::polar
