#pragma once

#include <cstddef>
#include <vector>

namespace goldendie {

/// Dense NCHW tensor of doubles. The minimal container shared by the network
/// layers and the logit-space metrics; no views, no broadcasting.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {}

    std::size_t size() const { return v.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

    double& at(int in, int ic, int iy, int ix) {
        return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    double at(int in, int ic, int iy, int ix) const {
        return v[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    double* sample(int in) { return v.data() + static_cast<std::size_t>(in) * c * plane(); }
    const double* sample(int in) const { return v.data() + static_cast<std::size_t>(in) * c * plane(); }

    void zero() { std::fill(v.begin(), v.end(), 0.0); }
    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

} // namespace goldendie
