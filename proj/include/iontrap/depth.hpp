#pragma once

// Trap depth: the lowest barrier over all escape paths from a minimum to the
// edge of the search box, found by a widest-path (minimax) flood over a
// lazily evaluated 3D grid, followed by Newton refinement of the saddle.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "analysis.hpp"
#include "constants.hpp"
#include "errors.hpp"
#include "landscape.hpp"
#include "pseudo.hpp"

namespace iontrap {

struct Box {
    Point lo{};
    Point hi{};

    bool contains(const Point& p) const {
        for (int i = 0; i < 3; ++i)
            if (p[i] < lo[i] || p[i] > hi[i]) return false;
        return true;
    }
};

// Box spanned by the planes (minus a standoff from each conductor) and
// +-1.5 mm axially and laterally.
inline Box default_search_box(const TrapGeometry& g, double standoff = 10e-6,
                              double half_extent = 1.5e-3) {
    return {{-half_extent, -half_extent, standoff},
            {half_extent, half_extent, g.plane_separation - standoff}};
}

struct DepthOptions {
    double inner_spacing = 12e-6;   // m, within inner_radius of the minimum
    double outer_spacing = 12e-6;  // m, elsewhere
    double inner_radius = 250e-6;  // m
    // Other exit faces are still recorded while the flood level stays below
    // E0 + (1 + extra_level) * (first exit level - E0).
    double extra_level = 0.5;
    bool refine = true;
    // Flood only the yz plane through the minimum (radial depth of a
    // potential without axial confinement).
    bool radial_only = false;
    std::size_t max_nodes = 40'000'000;
};

enum class Face { x_min, x_max, y_min, y_max, z_min, z_max };

inline const char* to_string(Face f) {
    switch (f) {
        case Face::x_min: return "-x";
        case Face::x_max: return "+x";
        case Face::y_min: return "-y";
        case Face::y_max: return "+y";
        case Face::z_min: return "-z";
        case Face::z_max: return "+z";
    }
    return "";
}

struct EscapeRoute {
    Face face = Face::x_min;
    double grid_level_ev = 0.0;   // flood level at which the face was reached
    double depth_ev = 0.0;        // refined barrier relative to the minimum
    Point saddle_point{};
    bool refined = false;         // true if a first-order saddle was converged
};

struct DepthResult {
    double depth = 0.0;  // eV
    Point saddle_point{};
    Eigen::Vector3d escape_direction = Eigen::Vector3d::Zero();
    std::vector<std::pair<double, double>> barrier_profile;  // (s m, energy eV above minimum)
    std::vector<EscapeRoute> routes;  // one per exit face reached, lowest first
    std::string diagnostic;
    std::size_t evaluations = 0;
};

namespace detail {

// Axis coordinates through c: `fine` spacing within `radius` of c, `coarse`
// beyond, clamped to [lo, hi] with the end points included.
inline std::vector<double> axis_nodes(double lo, double hi, double c, double fine, double coarse,
                                      double radius) {
    std::vector<double> up{c};
    double x = c;
    while (true) {
        const double step = (x - c) < radius - 1e-12 ? fine : coarse;
        x += step;
        if (x >= hi - 0.25 * step) {
            up.push_back(hi);
            break;
        }
        up.push_back(x);
    }
    std::vector<double> down;
    x = c;
    while (true) {
        const double step = (c - x) < radius - 1e-12 ? fine : coarse;
        x -= step;
        if (x <= lo + 0.25 * step) {
            down.push_back(lo);
            break;
        }
        down.push_back(x);
    }
    std::vector<double> out(down.rbegin(), down.rend());
    out.insert(out.end(), up.begin(), up.end());
    return out;
}

struct SaddleResult {
    Point r{};
    bool converged = false;
    int negative = 0;
};

// Eigenvector following: ascend along the lowest Hessian mode, descend along
// the others, inside a trust radius.
inline SaddleResult refine_saddle(const EnergyLandscape& f, Point r, double radius,
                                  int max_iter = 60, bool planar = false) {
    SaddleResult out;
    const Point start = r;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::Vector3d g;
        Eigen::Matrix3d H;
        try {
            unpack(f.energy_jet(r), g, H);
        } catch (const BoundaryEvaluationError&) {
            return out;
        }
        if (planar) {
            // Freeze x with a stiff decoupled direction.
            const double big = 1e3 * std::max(H.cwiseAbs().maxCoeff(), 1e-300);
            H.row(0).setZero();
            H.col(0).setZero();
            H(0, 0) = big;
            g(0) = 0.0;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(H);
        const Eigen::Vector3d lam = es.eigenvalues();
        const double scale = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
        Eigen::Vector3d step = Eigen::Vector3d::Zero();
        for (int i = 0; i < 3; ++i) {
            const Eigen::Vector3d v = es.eigenvectors().col(i);
            const double li = std::max(std::abs(lam(i)), 1e-10 * scale);
            const double gi = v.dot(g);
            step += (i == 0 ? gi / li : -gi / li) * v;
        }
        const double len = step.norm();
        if (len > radius) step *= radius / len;
        r = add(r, step);
        if (len < 1e-12) {
            out.converged = true;
            out.negative = static_cast<int>((lam.array() < -1e-9 * scale).count());
            out.r = r;
            break;
        }
        const double moved = std::sqrt(std::pow(r[0] - start[0], 2) + std::pow(r[1] - start[1], 2) +
                                       std::pow(r[2] - start[2], 2));
        if (moved > 20.0 * radius) return out;
    }
    out.r = r;
    return out;
}

}  // namespace detail

inline DepthResult trap_depth(const EnergyLandscape& f, const Point& r0, const Box& box,
                              DepthOptions opt = {}) {
    if (!box.contains(r0)) throw PreconditionError("trap_depth: minimum lies outside the search box");
    const auto xs = opt.radial_only ? std::vector<double>{r0[0]}
                                    : detail::axis_nodes(box.lo[0], box.hi[0], r0[0], opt.inner_spacing,
                                                         opt.outer_spacing, opt.inner_radius);
    const auto ys = detail::axis_nodes(box.lo[1], box.hi[1], r0[1], opt.inner_spacing,
                                       opt.outer_spacing, opt.inner_radius);
    const auto zs = detail::axis_nodes(box.lo[2], box.hi[2], r0[2], opt.inner_spacing,
                                       opt.outer_spacing, opt.inner_radius);
    const std::size_t nx = xs.size(), ny = ys.size(), nz = zs.size();
    if ((nx < 3 && !opt.radial_only) || ny < 3 || nz < 3)
        throw PreconditionError("trap_depth: grid too coarse to connect the minimum to the boundary");
    const std::size_t total = nx * ny * nz;
    if (total > opt.max_nodes) throw ConfigError("trap_depth: grid exceeds the node limit");

    auto index = [&](std::size_t i, std::size_t j, std::size_t k) { return (i * ny + j) * nz + k; };
    auto coords = [&](std::size_t idx, std::size_t& i, std::size_t& j, std::size_t& k) {
        k = idx % nz;
        j = (idx / nz) % ny;
        i = idx / (nz * ny);
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> energy(total, nan);
    std::vector<double> best(total, std::numeric_limits<double>::infinity());
    std::vector<std::uint32_t> parent(total, std::numeric_limits<std::uint32_t>::max());
    std::vector<std::uint8_t> done(total, 0);
    DepthResult res;

    auto eval = [&](std::size_t idx) {
        if (std::isnan(energy[idx])) {
            std::size_t i, j, k;
            coords(idx, i, j, k);
            double e;
            try {
                e = f.scan_energy({xs[i], ys[j], zs[k]});
            } catch (const BoundaryEvaluationError&) {
                e = std::numeric_limits<double>::infinity();
            }
            energy[idx] = std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
            ++res.evaluations;
        }
        return energy[idx];
    };
    auto position = [&](std::size_t idx) {
        std::size_t i, j, k;
        coords(idx, i, j, k);
        return Point{xs[i], ys[j], zs[k]};
    };
    auto face_of = [&](std::size_t idx) -> std::optional<Face> {
        std::size_t i, j, k;
        coords(idx, i, j, k);
        if (!opt.radial_only) {
            if (i == 0) return Face::x_min;
            if (i == nx - 1) return Face::x_max;
        }
        if (j == 0) return Face::y_min;
        if (j == ny - 1) return Face::y_max;
        if (k == 0) return Face::z_min;
        if (k == nz - 1) return Face::z_max;
        return std::nullopt;
    };

    const std::size_t i0 = static_cast<std::size_t>(std::find(xs.begin(), xs.end(), r0[0]) - xs.begin());
    const std::size_t j0 = static_cast<std::size_t>(std::find(ys.begin(), ys.end(), r0[1]) - ys.begin());
    const std::size_t k0 = static_cast<std::size_t>(std::find(zs.begin(), zs.end(), r0[2]) - zs.begin());
    const std::size_t start = index(i0, j0, k0);
    const double e_start = eval(start);

    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    best[start] = e_start;
    heap.push({e_start, start});
    std::vector<std::pair<Face, std::size_t>> exits;
    std::array<bool, 6> seen{};
    double stop_level = std::numeric_limits<double>::infinity();
    while (!heap.empty()) {
        const auto [level, idx] = heap.top();
        heap.pop();
        if (done[idx]) continue;
        if (level > stop_level) break;
        done[idx] = 1;
        if (const auto face = face_of(idx)) {
            const int fi = static_cast<int>(*face);
            if (!seen[fi]) {
                seen[fi] = true;
                exits.emplace_back(*face, idx);
                if (exits.size() == 1)
                    stop_level = e_start + (1.0 + opt.extra_level) * std::max(level - e_start, 0.0);
            }
            continue;  // boundary nodes are sinks
        }
        std::size_t i, j, k;
        coords(idx, i, j, k);
        const std::array<std::array<long, 3>, 6> nb{
            {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};
        for (const auto& d : nb) {
            if (opt.radial_only && d[0] != 0) continue;
            const std::size_t n = index(static_cast<std::size_t>(static_cast<long>(i) + d[0]),
                                        static_cast<std::size_t>(static_cast<long>(j) + d[1]),
                                        static_cast<std::size_t>(static_cast<long>(k) + d[2]));
            if (done[n]) continue;
            const double cand = std::max(level, eval(n));
            if (cand < best[n]) {
                best[n] = cand;
                parent[n] = static_cast<std::uint32_t>(idx);
                heap.push({cand, n});
            }
        }
    }
    if (exits.empty())
        throw PreconditionError("trap_depth: grid too coarse to connect the minimum to the boundary");

    const double e0 = f.energy(r0);
    for (const auto& [face, exit_idx] : exits) {
        // Bottleneck: highest node on the path back to the start.
        std::vector<std::size_t> path;
        for (std::size_t n = exit_idx; ; n = parent[n]) {
            path.push_back(n);
            if (n == start) break;
        }
        std::reverse(path.begin(), path.end());
        std::size_t top = path.front();
        for (std::size_t n : path)
            if (energy[n] > energy[top]) top = n;
        EscapeRoute route;
        route.face = face;
        route.grid_level_ev = joule_to_ev(best[exit_idx] - e_start);
        route.saddle_point = position(top);
        route.depth_ev = joule_to_ev(f.energy(route.saddle_point) - e0);
        if (opt.refine && top != exit_idx) {
            const auto s = detail::refine_saddle(f, route.saddle_point, opt.outer_spacing, 60,
                                                 opt.radial_only);
            if (s.converged && s.negative == 1 && box.contains(s.r)) {
                route.saddle_point = s.r;
                route.depth_ev = joule_to_ev(f.energy(s.r) - e0);
                route.refined = true;
            }
        }
        route.depth_ev = std::max(route.depth_ev, 0.0);
        res.routes.push_back(route);

        if (res.routes.size() == 1) {
            double s_acc = 0.0;
            Point prev = position(path.front());
            for (std::size_t n : path) {
                const Point p = position(n);
                s_acc += std::sqrt(std::pow(p[0] - prev[0], 2) + std::pow(p[1] - prev[1], 2) +
                                   std::pow(p[2] - prev[2], 2));
                prev = p;
                res.barrier_profile.emplace_back(s_acc, joule_to_ev(energy[n] - e_start));
            }
            if (top == exit_idx)
                res.diagnostic = "barrier limited by the search-box boundary (no interior saddle)";
            else if (!route.refined)
                res.diagnostic = "saddle refinement did not converge; grid bottleneck reported";
        }
    }
    std::stable_sort(res.routes.begin(), res.routes.end(),
                     [](const EscapeRoute& a, const EscapeRoute& b) { return a.depth_ev < b.depth_ev; });
    const auto& lowest = res.routes.front();
    res.depth = lowest.depth_ev;
    res.saddle_point = lowest.saddle_point;
    Eigen::Vector3d dir(lowest.saddle_point[0] - r0[0], lowest.saddle_point[1] - r0[1],
                        lowest.saddle_point[2] - r0[2]);
    if (dir.norm() > 0.0) res.escape_direction = dir / dir.norm();
    if (res.depth == 0.0 && res.diagnostic.empty())
        res.diagnostic = "unbounded descent: no barrier between the minimum and the boundary";
    return res;
}

inline DepthResult trap_depth(const PotentialModel& m, const Point& r0, DepthOptions opt = {}) {
    return trap_depth(m, r0, default_search_box(m.geometry()), opt);
}

struct DirectionalBarrier {
    double barrier_ev = 0.0;  // above the minimum
    double distance = 0.0;    // m from r0 to the barrier top along the direction
    Point position{};
    int sign = 1;             // +1 or -1 along the axis
};

// Lowest barrier for escape along +-axis: along the ray r0 + s e_axis the
// energy is minimized over z (within the box) at each s; the barrier is the
// maximum of that relaxed profile before the box edge. Lower of the two
// directions is returned.
inline DirectionalBarrier directional_barrier(const EnergyLandscape& f, const Point& r0, int axis,
                                              const Box& box, double step = 6e-6) {
    const double e0 = f.energy(r0);
    DirectionalBarrier out;
    out.barrier_ev = std::numeric_limits<double>::infinity();
    const int nzs = std::max(3, static_cast<int>((box.hi[2] - box.lo[2]) / step));
    auto relaxed = [&](double s, int sign, bool exact, double& zbest) {
        Point p = r0;
        p[axis] += sign * s;
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= nzs; ++k) {
            p[2] = box.lo[2] + (box.hi[2] - box.lo[2]) * k / nzs;
            const double e = f.scan_energy(p);
            if (e < best) {
                best = e;
                zbest = p[2];
            }
        }
        if (!exact) return best;
        // Golden-section polish with the full model.
        double a = std::max(box.lo[2], zbest - step), b = std::min(box.hi[2], zbest + step);
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        auto E = [&](double z) {
            Point q = p;
            q[2] = z;
            return f.energy(q);
        };
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = E(c), fd = E(d);
        for (int it = 0; it < 40; ++it) {
            if (fc < fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = E(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = E(d);
            }
        }
        zbest = 0.5 * (a + b);
        return E(zbest);
    };
    for (int sign : {1, -1}) {
        const double limit = sign > 0 ? box.hi[axis] - r0[axis] : r0[axis] - box.lo[axis];
        const int ns = static_cast<int>(limit / step);
        double peak = -std::numeric_limits<double>::infinity();
        int peak_i = 0;
        for (int i = 0; i <= ns; ++i) {
            double zb = r0[2];
            const double e = relaxed(i * step, sign, false, zb);
            if (e > peak) {
                peak = e;
                peak_i = i;
            }
        }
        // Refine the peak with the full model on a parabola through 3 points.
        std::array<double, 3> ss{}, es{};
        std::array<double, 3> zz{};
        for (int t = 0; t < 3; ++t) {
            ss[t] = std::clamp(peak_i + t - 1, 0, ns) * step;
            es[t] = relaxed(ss[t], sign, true, zz[t]);
        }
        double s_top = ss[1], e_top = es[1], z_top = zz[1];
        const double denom = es[0] - 2.0 * es[1] + es[2];
        if (ss[0] < ss[1] && ss[1] < ss[2] && denom < 0.0) {
            const double off = 0.5 * step * (es[0] - es[2]) / denom;
            if (std::abs(off) <= step) {
                s_top = ss[1] + off;
                e_top = relaxed(s_top, sign, true, z_top);
            }
        } else {
            for (int t = 0; t < 3; ++t)
                if (es[t] > e_top) {
                    e_top = es[t];
                    s_top = ss[t];
                    z_top = zz[t];
                }
        }
        const double b = joule_to_ev(e_top - e0);
        if (b < out.barrier_ev) {
            out.barrier_ev = b;
            out.distance = s_top;
            out.sign = sign;
            out.position = r0;
            out.position[axis] += sign * s_top;
            out.position[2] = z_top;
        }
    }
    return out;
}

}  // namespace iontrap
