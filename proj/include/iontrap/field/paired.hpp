#pragma once

// Joint evaluation of a DC source list (value only) and an RF source list
// (gradient only) that share most corners, as needed by energy scans.

#include <algorithm>
#include <array>
#include <tuple>
#include <vector>

#include "../constants.hpp"
#include "../dual.hpp"
#include "basis.hpp"
#include "rectangle.hpp"

namespace iontrap::field {

struct PairedValue {
    double dc = 0.0;                // DC potential (V)
    std::array<double, 3> rf_grad{};  // gradient of the unit RF basis (1/m)
};

class PairedSources {
public:
    PairedSources() = default;

    PairedSources(const BasisPotential& dc, const BasisPotential& rf, int image_order)
        : separation_(dc.separation()), order_(image_order) {
        for (Plane p : {Plane::bottom, Plane::top}) {
            auto& out = p == Plane::bottom ? bottom_ : top_;
            for (const auto& c : dc.corners(p)) out.push_back({c.x, c.y, c.w, 0.0});
            for (const auto& c : rf.corners(p)) out.push_back({c.x, c.y, 0.0, c.w});
            std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) {
                return std::tie(a.x, a.y) < std::tie(b.x, b.y);
            });
            std::vector<Entry> merged;
            for (const auto& e : out) {
                if (!merged.empty() && merged.back().x == e.x && merged.back().y == e.y) {
                    merged.back().w_dc += e.w_dc;
                    merged.back().w_rf += e.w_rf;
                } else {
                    merged.push_back(e);
                }
            }
            out = std::move(merged);
        }
    }

    PairedValue evaluate(const Point& p) const {
        check_between_planes(separation_, p[2]);
        double dc = 0.0;
        std::array<double, 3> g{};
        auto run = [&](const std::vector<Entry>& list, double h0, double dh_dz) {
            for (const auto& e : list) {
                const double X = e.x - p[0];
                const double Y = e.y - p[1];
                Dual<double> Xd(X), Yd(Y), hd(h0);
                Xd.d[0] = -1.0;
                Yd.d[1] = -1.0;
                hd.d[2] = dh_dz;
                if (e.w_rf == 0.0) {
                    dc += e.w_dc * slab_corner(X, Y, h0, separation_, order_);
                    continue;
                }
                const Dual<double> v = slab_corner(Xd, Yd, hd, separation_, order_);
                dc += e.w_dc * v.v;
                for (int i = 0; i < 3; ++i) g[i] += e.w_rf * v.d[i];
            }
        };
        run(bottom_, p[2], 1.0);
        if (!top_.empty()) run(top_, separation_ - p[2], -1.0);
        const double k = 0.5 / constants::pi;
        return {dc * k, {g[0] * k, g[1] * k, g[2] * k}};
    }

private:
    struct Entry {
        double x, y, w_dc, w_rf;
    };

    double separation_ = 0.0;
    int order_ = 0;
    std::vector<Entry> bottom_;
    std::vector<Entry> top_;
};

}  // namespace iontrap::field
