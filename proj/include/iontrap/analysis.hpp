#pragma once

// Equilibria, secular modes, mode angles and anharmonicity of a landscape.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "constants.hpp"
#include "errors.hpp"
#include "landscape.hpp"
#include "pseudo.hpp"
#include "text.hpp"

namespace iontrap {

namespace detail {

inline void unpack(const Jet& j, Eigen::Vector3d& g, Eigen::Matrix3d& H) {
    for (int i = 0; i < 3; ++i) {
        g(i) = j.g[i];
        for (int k = 0; k < 3; ++k) H(i, k) = j.hess(i, k);
    }
}

inline Point add(const Point& p, const Eigen::Vector3d& d) {
    return {p[0] + d(0), p[1] + d(1), p[2] + d(2)};
}

}  // namespace detail

struct MinimizeOptions {
    double force_tol = 1e-22;   // N
    double max_step = 20e-6;    // m, trust radius cap
    int max_iter = 200;
};

// Newton iteration with an eigenvalue-modified Hessian and a trust radius.
// Throws ConvergenceError on failure and NotTrappingError if the stationary
// point reached is not a strict minimum.
inline Point find_minimum(const EnergyLandscape& f, const Point& seed, MinimizeOptions opt = {}) {
    Point r = seed;
    Eigen::Vector3d g;
    Eigen::Matrix3d H;
    detail::unpack(f.energy_jet(r), g, H);
    double e = f.energy(r);
    double radius = opt.max_step;
    for (int it = 0; it < opt.max_iter; ++it) {
        if (g.norm() < opt.force_tol) break;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(H);
        const Eigen::Vector3d lam = es.eigenvalues();
        const double scale = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
        Eigen::Vector3d step = Eigen::Vector3d::Zero();
        for (int i = 0; i < 3; ++i) {
            const Eigen::Vector3d v = es.eigenvectors().col(i);
            const double li = std::max(std::abs(lam(i)), 1e-8 * scale);
            step -= (v.dot(g) / li) * v;
        }
        if (step.norm() > radius) step *= radius / step.norm();
        const Point trial = detail::add(r, step);
        double et = 0.0;
        bool ok = true;
        try {
            et = f.energy(trial);
        } catch (const BoundaryEvaluationError&) {
            ok = false;
        }
        if (ok && std::isfinite(et) && et <= e + 1e-12 * std::abs(e)) {
            r = trial;
            e = et;
            detail::unpack(f.energy_jet(r), g, H);
            radius = std::min(opt.max_step, 2.0 * radius);
        } else {
            radius *= 0.25;
            if (radius < 1e-15) break;
        }
    }
    if (!(g.norm() < opt.force_tol)) {
        // Close to rounding level: accept if a final Newton step is negligible.
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(H);
        const double lmin = es.eigenvalues().minCoeff();
        const Eigen::Vector3d step = H.colPivHouseholderQr().solve(-g);
        if (!(lmin > 0.0) || !(step.norm() < 1e-12))
            throw ConvergenceError("minimum search did not converge (|F| = " +
                                   text::format_sig(g.norm(), 3) + " N)");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(H);
    if (!(es.eigenvalues().minCoeff() > 0.0))
        throw NotTrappingError("not a trapping point: Hessian is not positive definite");
    return r;
}

enum class ModeLabel { axial, radial_in_plane, radial_out_of_plane };

inline const char* to_string(ModeLabel l) {
    switch (l) {
        case ModeLabel::axial: return "axial";
        case ModeLabel::radial_in_plane: return "radial-in-plane";
        case ModeLabel::radial_out_of_plane: return "radial-out-of-plane";
    }
    return "axial";
}

struct ModeSolution {
    Point r0{};
    // Ordered axial, radial in-plane, radial out-of-plane. Anti-confined
    // directions carry a negative frequency.
    std::array<double, 3> frequencies{};  // Hz
    std::array<Eigen::Vector3d, 3> vectors{};
    std::array<ModeLabel, 3> labels{ModeLabel::axial, ModeLabel::radial_in_plane,
                                    ModeLabel::radial_out_of_plane};
    double theta = 0.0;               // deg
    std::array<double, 3> phi{};      // deg, per mode
};

struct ModeAngles {
    double theta = 0.0;              // deg in [0, 45]
    std::array<double, 2> phi{};     // deg, radial in-plane and out-of-plane
};

inline ModeAngles mode_angles(const ModeSolution& s) {
    ModeAngles a;
    const Eigen::Vector3d& v = s.vectors[1];
    double ang = std::atan2(v(2), v(1)) * 180.0 / constants::pi;
    ang = std::fmod(ang, 90.0);
    if (ang < 0.0) ang += 90.0;
    a.theta = std::min(ang, 90.0 - ang);
    for (int k = 0; k < 2; ++k) {
        const double c = std::min(1.0, std::abs(s.vectors[k + 1](2)));
        a.phi[k] = std::asin(c) * 180.0 / constants::pi;
    }
    return a;
}

namespace detail {

// Deterministic sign: first component with |c| > 1e-12 positive.
inline Eigen::Vector3d canonical_sign(Eigen::Vector3d v) {
    for (int i = 0; i < 3; ++i) {
        if (std::abs(v(i)) > 1e-12) {
            if (v(i) < 0.0) v = -v;
            break;
        }
    }
    return v;
}

}  // namespace detail

// Modes of the Hessian at a stationary point; `force_tol` (N) is the
// stationarity precondition.
inline ModeSolution mode_solve(const EnergyLandscape& f, const Point& r0, double force_tol = 1e-18) {
    Eigen::Vector3d g;
    Eigen::Matrix3d H;
    detail::unpack(f.energy_jet(r0), g, H);
    if (!(g.norm() < force_tol))
        throw PreconditionError("mode_solve: point is not stationary (|F| = " +
                                text::format_sig(g.norm(), 3) + " N)");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(H / f.mass());
    const Eigen::Vector3d lam = es.eigenvalues();
    std::array<double, 3> freq{};
    std::array<Eigen::Vector3d, 3> vec;
    for (int i = 0; i < 3; ++i) {
        const double w = std::sqrt(std::abs(lam(i))) / (2.0 * constants::pi);
        freq[i] = lam(i) >= 0.0 ? w : -w;
        vec[i] = detail::canonical_sign(es.eigenvectors().col(i));
    }
    // Assign eigenvectors to (x, y, z) by the permutation with the largest
    // total squared overlap; ties go to ascending frequency order.
    std::array<int, 3> perm{0, 1, 2};
    std::array<int, 3> best = perm;
    double best_score = -1.0;
    do {
        double score = 0.0;
        for (int a = 0; a < 3; ++a) score += vec[perm[a]](a) * vec[perm[a]](a);
        if (score > best_score + 1e-12) {
            best_score = score;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    ModeSolution s;
    s.r0 = r0;
    for (int a = 0; a < 3; ++a) {
        s.frequencies[a] = freq[best[a]];
        s.vectors[a] = vec[best[a]];
    }
    const auto ang = mode_angles(s);
    s.theta = ang.theta;
    for (int a = 0; a < 3; ++a) {
        const double c = std::min(1.0, std::abs(s.vectors[a](2)));
        s.phi[a] = std::asin(c) * 180.0 / constants::pi;
    }
    return s;
}

// Even-quartic fit p0 + p2 s^2 + p4 s^4 over [-d, d] (41 samples) of a 1D
// profile; returns p4 d^2 / p2.
template <class Fn>
double quartic_ratio(Fn&& profile, double d, int samples = 41) {
    Eigen::MatrixXd A(samples, 3);
    Eigen::VectorXd b(samples);
    for (int i = 0; i < samples; ++i) {
        const double s = -d + 2.0 * d * i / (samples - 1);
        const double u = s / d;  // scaled for conditioning
        A(i, 0) = 1.0;
        A(i, 1) = u * u;
        A(i, 2) = u * u * u * u;
        b(i) = profile(s);
    }
    const Eigen::Vector3d c = A.colPivHouseholderQr().solve(b);
    // In scaled units p2' = p2 d^2, p4' = p4 d^4, so p4 d^2 / p2 = p4' / p2'.
    const double scale = b.cwiseAbs().maxCoeff();
    if (!(std::abs(c(1)) > 1e-9 * scale) || !std::isfinite(c(2)))
        throw DegenerateFitError("anharmonicity fit: quadratic coefficient is degenerate");
    return c(2) / c(1);
}

// Ratios of the quartic to quadratic term of the pseudopotential along x, y
// and z through r0, each fitted on [-d_k, d_k] and evaluated at d_k.
inline std::array<double, 3> anharmonicity_ratios(const PotentialModel& m, const Point& r0,
                                                  const std::array<double, 3>& offsets) {
    std::array<double, 3> out{};
    for (int k = 0; k < 3; ++k) {
        if (!(offsets[k] > 0.0)) throw ConfigError("anharmonicity offsets must be positive");
        out[k] = quartic_ratio(
            [&](double s) {
                Point p = r0;
                p[k] += s;
                return m.pseudopotential(p);
            },
            offsets[k]);
    }
    return out;
}

}  // namespace iontrap
