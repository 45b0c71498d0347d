#pragma once

#include <array>
#include <cstdlib>
#include <stdexcept>
#include <vector>

namespace anderson {

// Rectangle Lambda = prod_i [0, sides[i]) in Z^d, d in {1,2,3}, free boundary.
// Sites are indexed row-major: index = sum_i coords[i] * stride[i] with
// stride[d-1] = 1. The bijection and the l1 metric are the only geometry the
// rest of the code knows about.
struct LatticeGeometry {
    int d = 1;
    std::vector<int> sides;     // d entries, each >= 1
    std::vector<long> strides;  // derived

    long volume() const {
        long v = 1;
        for (int s : sides) v *= s;
        return v;
    }

    // sum of (side - 1): the l1 diameter of the rectangle
    long diameter() const {
        long r = 0;
        for (int s : sides) r += s - 1;
        return r;
    }

    std::vector<int> coords(long index) const {
        std::vector<int> c(d);
        for (int i = 0; i < d; ++i) {
            c[i] = static_cast<int>(index / strides[i]);
            index %= strides[i];
        }
        return c;
    }

    long site_index(const std::vector<int>& c) const {
        long idx = 0;
        for (int i = 0; i < d; ++i) idx += static_cast<long>(c[i]) * strides[i];
        return idx;
    }

    bool contains(const std::vector<int>& c) const {
        for (int i = 0; i < d; ++i)
            if (c[i] < 0 || c[i] >= sides[i]) return false;
        return true;
    }

    long l1_distance(long a, long b) const {
        const auto ca = coords(a), cb = coords(b);
        long r = 0;
        for (int i = 0; i < d; ++i) r += std::abs(ca[i] - cb[i]);
        return r;
    }

    // nearest neighbors of a site inside the rectangle
    std::vector<long> neighbors(long index) const {
        std::vector<long> out;
        auto c = coords(index);
        for (int i = 0; i < d; ++i) {
            for (int step : {-1, +1}) {
                c[i] += step;
                if (contains(c)) out.push_back(site_index(c));
                c[i] -= step;
            }
        }
        return out;
    }
};

inline LatticeGeometry build_geometry(int d, std::vector<int> sides) {
    if (d < 1 || d > 3) throw std::invalid_argument("lattice dimension must be 1, 2, or 3");
    if (static_cast<int>(sides.size()) != d) throw std::invalid_argument("sides.size() != d");
    for (int s : sides)
        if (s < 1) throw std::invalid_argument("side lengths must be >= 1");
    LatticeGeometry g;
    g.d = d;
    g.sides = std::move(sides);
    g.strides.assign(d, 1);
    for (int i = d - 2; i >= 0; --i) g.strides[i] = g.strides[i + 1] * g.sides[i + 1];
    return g;
}

}  // namespace anderson
