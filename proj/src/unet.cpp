#include "goldendie/unet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "goldendie/errors.hpp"
#include "goldendie/rng.hpp"

namespace goldendie {

namespace {

// Row-major matrix kernels. All accumulate into C.

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(int M, int N, int K, const double* __restrict A, const double* __restrict B,
             double* __restrict C) {
    for (int m = 0; m < M; ++m) {
        double* __restrict c = C + static_cast<std::size_t>(m) * N;
        const double* __restrict a = A + static_cast<std::size_t>(m) * K;
        for (int k = 0; k < K; ++k) {
            const double av = a[k];
            if (av == 0.0) continue;
            const double* __restrict b = B + static_cast<std::size_t>(k) * N;
            for (int n = 0; n < N; ++n) c[n] += av * b[n];
        }
    }
}

// C[M,N] += A[M,K] * B[N,K]^T
void gemm_nt(int M, int N, int K, const double* __restrict A, const double* __restrict B,
             double* __restrict C) {
    for (int m = 0; m < M; ++m) {
        const double* __restrict a = A + static_cast<std::size_t>(m) * K;
        double* __restrict c = C + static_cast<std::size_t>(m) * N;
        for (int n = 0; n < N; ++n) {
            const double* __restrict b = B + static_cast<std::size_t>(n) * K;
            double acc = 0.0;
            for (int k = 0; k < K; ++k) acc += a[k] * b[k];
            c[n] += acc;
        }
    }
}

// C[M,N] += A[K,M]^T * B[K,N]
void gemm_tn(int M, int N, int K, const double* __restrict A, const double* __restrict B,
             double* __restrict C) {
    for (int k = 0; k < K; ++k) {
        const double* __restrict a = A + static_cast<std::size_t>(k) * M;
        const double* __restrict b = B + static_cast<std::size_t>(k) * N;
        for (int m = 0; m < M; ++m) {
            const double av = a[m];
            if (av == 0.0) continue;
            double* __restrict c = C + static_cast<std::size_t>(m) * N;
            for (int n = 0; n < N; ++n) c[n] += av * b[n];
        }
    }
}

// col[(ci*k*k + ky*k + kx)][y*w + x] = x[ci][y+ky-pad][x+kx-pad], zero outside
void im2col(const double* x, int cin, int h, int w, int ksize, std::vector<double>& col) {
    const int pad = ksize / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    col.assign(static_cast<std::size_t>(cin) * ksize * ksize * plane, 0.0);
    std::size_t row = 0;
    for (int ci = 0; ci < cin; ++ci) {
        const double* src = x + static_cast<std::size_t>(ci) * plane;
        for (int ky = 0; ky < ksize; ++ky) {
            for (int kx = 0; kx < ksize; ++kx, ++row) {
                double* dst = col.data() + row * plane;
                const int dy = ky - pad, dx = kx - pad;
                const int y_lo = std::max(0, -dy), y_hi = std::min(h, h - dy);
                const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
                for (int y = y_lo; y < y_hi; ++y)
                    std::copy(src + static_cast<std::size_t>(y + dy) * w + (x_lo + dx),
                              src + static_cast<std::size_t>(y + dy) * w + (x_hi + dx),
                              dst + static_cast<std::size_t>(y) * w + x_lo);
            }
        }
    }
}

void col2im_add(const std::vector<double>& col, int cin, int h, int w, int ksize, double* dx) {
    const int pad = ksize / 2;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::size_t row = 0;
    for (int ci = 0; ci < cin; ++ci) {
        double* dst = dx + static_cast<std::size_t>(ci) * plane;
        for (int ky = 0; ky < ksize; ++ky) {
            for (int kx = 0; kx < ksize; ++kx, ++row) {
                const double* src = col.data() + row * plane;
                const int dy = ky - pad, dx_off = kx - pad;
                const int y_lo = std::max(0, -dy), y_hi = std::min(h, h - dy);
                const int x_lo = std::max(0, -dx_off), x_hi = std::min(w, w - dx_off);
                for (int y = y_lo; y < y_hi; ++y) {
                    double* d = dst + static_cast<std::size_t>(y + dy) * w + x_lo + dx_off;
                    const double* s = src + static_cast<std::size_t>(y) * w + x_lo;
                    for (int x = 0; x < x_hi - x_lo; ++x) d[x] += s[x];
                }
            }
        }
    }
}

void add_inplace(Tensor& a, const Tensor& b) {
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

} // namespace

// --- Conv2d -----------------------------------------------------------------

Conv2d::Conv2d(int cin_, int cout_, int ksize_) : cin(cin_), cout(cout_), ksize(ksize_) {
    w.assign(static_cast<std::size_t>(cout) * cin * ksize * ksize, 0.0);
    b.assign(cout, 0.0);
    gw.assign(w.size(), 0.0);
    gb.assign(b.size(), 0.0);
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.c != cin) throw ContractError("conv input channel mismatch");
    x_ = x;
    Tensor y(x.n, cout, x.h, x.w);
    const int K = cin * ksize * ksize;
    const auto N = static_cast<int>(x.plane());
    std::vector<double> col;
    for (int s = 0; s < x.n; ++s) {
        double* ys = y.sample(s);
        if (ksize == 1) {
            gemm_nn(cout, N, K, w.data(), x.sample(s), ys);
        } else {
            im2col(x.sample(s), cin, x.h, x.w, ksize, col);
            gemm_nn(cout, N, K, w.data(), col.data(), ys);
        }
        for (int co = 0; co < cout; ++co) {
            double* row = ys + static_cast<std::size_t>(co) * N;
            for (int i = 0; i < N; ++i) row[i] += b[co];
        }
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    Tensor dx(x_.n, cin, x_.h, x_.w);
    const int K = cin * ksize * ksize;
    const auto N = static_cast<int>(x_.plane());
    std::vector<double> col, dcol;
    for (int s = 0; s < x_.n; ++s) {
        const double* dys = dy.sample(s);
        for (int co = 0; co < cout; ++co) {
            const double* row = dys + static_cast<std::size_t>(co) * N;
            double acc = 0.0;
            for (int i = 0; i < N; ++i) acc += row[i];
            gb[co] += acc;
        }
        if (ksize == 1) {
            gemm_nt(cout, K, N, dys, x_.sample(s), gw.data());
            gemm_tn(K, N, cout, w.data(), dys, dx.sample(s));
        } else {
            im2col(x_.sample(s), cin, x_.h, x_.w, ksize, col);
            gemm_nt(cout, K, N, dys, col.data(), gw.data());
            dcol.assign(static_cast<std::size_t>(K) * N, 0.0);
            gemm_tn(K, N, cout, w.data(), dys, dcol.data());
            col2im_add(dcol, cin, x_.h, x_.w, ksize, dx.sample(s));
        }
    }
    return dx;
}

// --- BatchNorm2d ------------------------------------------------------------

BatchNorm2d::BatchNorm2d(int c_) : c(c_) {
    gamma.assign(c, 1.0);
    beta.assign(c, 0.0);
    ggamma.assign(c, 0.0);
    gbeta.assign(c, 0.0);
    run_mean.assign(c, 0.0);
    run_var.assign(c, 1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
    if (x.c != c) throw ContractError("batch norm channel mismatch");
    trained_forward_ = training;
    const std::size_t plane = x.plane();
    const std::size_t per_channel = static_cast<std::size_t>(x.n) * plane;

    xhat_ = Tensor(x.n, x.c, x.h, x.w);
    invstd_.assign(c, 0.0);
    Tensor y(x.n, x.c, x.h, x.w);

    for (int ch = 0; ch < c; ++ch) {
        double mean, var;
        if (training) {
            double sum = 0.0;
            for (int s = 0; s < x.n; ++s) {
                const double* p = x.sample(s) + static_cast<std::size_t>(ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) sum += p[i];
            }
            mean = sum / static_cast<double>(per_channel);
            double acc = 0.0;
            for (int s = 0; s < x.n; ++s) {
                const double* p = x.sample(s) + static_cast<std::size_t>(ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mean;
                    acc += d * d;
                }
            }
            var = acc / static_cast<double>(per_channel);
            run_mean[ch] = (1.0 - momentum) * run_mean[ch] + momentum * mean;
            run_var[ch] = (1.0 - momentum) * run_var[ch] + momentum * var;
        } else {
            mean = run_mean[ch];
            var = run_var[ch];
        }
        const double inv = 1.0 / std::sqrt(var + eps);
        invstd_[ch] = inv;
        for (int s = 0; s < x.n; ++s) {
            const double* p = x.sample(s) + static_cast<std::size_t>(ch) * plane;
            double* xh = xhat_.sample(s) + static_cast<std::size_t>(ch) * plane;
            double* yo = y.sample(s) + static_cast<std::size_t>(ch) * plane;
            const double g = gamma[ch], bb = beta[ch];
            for (std::size_t i = 0; i < plane; ++i) {
                xh[i] = (p[i] - mean) * inv;
                yo[i] = g * xh[i] + bb;
            }
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
    const std::size_t plane = dy.plane();
    const auto per_channel = static_cast<double>(static_cast<std::size_t>(dy.n) * plane);
    Tensor dx(dy.n, dy.c, dy.h, dy.w);

    for (int ch = 0; ch < c; ++ch) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int s = 0; s < dy.n; ++s) {
            const double* d = dy.sample(s) + static_cast<std::size_t>(ch) * plane;
            const double* xh = xhat_.sample(s) + static_cast<std::size_t>(ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += d[i];
                sum_dy_xhat += d[i] * xh[i];
            }
        }
        ggamma[ch] += sum_dy_xhat;
        gbeta[ch] += sum_dy;

        const double g_inv = gamma[ch] * invstd_[ch];
        for (int s = 0; s < dy.n; ++s) {
            const double* d = dy.sample(s) + static_cast<std::size_t>(ch) * plane;
            const double* xh = xhat_.sample(s) + static_cast<std::size_t>(ch) * plane;
            double* o = dx.sample(s) + static_cast<std::size_t>(ch) * plane;
            if (trained_forward_) {
                for (std::size_t i = 0; i < plane; ++i)
                    o[i] = g_inv * (d[i] - sum_dy / per_channel - xh[i] * sum_dy_xhat / per_channel);
            } else {
                for (std::size_t i = 0; i < plane; ++i) o[i] = g_inv * d[i];
            }
        }
    }
    return dx;
}

// --- ReLU, MaxPool2, BilinearUp2 ---------------------------------------------

Tensor ReLU::forward(const Tensor& x) {
    x_ = x;
    Tensor y = x;
    for (double& v : y.v)
        if (v < 0.0) v = 0.0;
    return y;
}

Tensor ReLU::backward(const Tensor& dy) const {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i)
        if (x_.v[i] <= 0.0) dx.v[i] = 0.0;
    return dx;
}

Tensor MaxPool2::forward(const Tensor& x) {
    if (x.h % 2 || x.w % 2) throw ContractError("max pool needs even spatial dimensions");
    n = x.n;
    c = x.c;
    in_h = x.h;
    in_w = x.w;
    Tensor y(x.n, x.c, x.h / 2, x.w / 2);
    argmax_.assign(y.size(), 0);
    std::size_t o = 0;
    for (int s = 0; s < x.n; ++s)
        for (int ch = 0; ch < x.c; ++ch) {
            const double* p = x.v.data() + (static_cast<std::size_t>(s) * x.c + ch) * x.plane();
            for (int y0 = 0; y0 < x.h; y0 += 2)
                for (int x0 = 0; x0 < x.w; x0 += 2, ++o) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::uint32_t best_i = 0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const auto i =
                                static_cast<std::uint32_t>((y0 + dy) * x.w + (x0 + dx));
                            if (p[i] > best) { // first maximum wins on ties
                                best = p[i];
                                best_i = i;
                            }
                        }
                    y.v[o] = best;
                    argmax_[o] = best_i;
                }
        }
    return y;
}

Tensor MaxPool2::backward(const Tensor& dy) const {
    Tensor dx(n, c, in_h, in_w);
    const std::size_t in_plane = static_cast<std::size_t>(in_h) * in_w;
    std::size_t o = 0;
    for (int s = 0; s < n; ++s)
        for (int ch = 0; ch < c; ++ch) {
            double* d = dx.v.data() + (static_cast<std::size_t>(s) * c + ch) * in_plane;
            const std::size_t base = o;
            for (std::size_t i = 0; i < dy.plane(); ++i) d[argmax_[base + i]] += dy.v[base + i];
            o += dy.plane();
        }
    return dx;
}

namespace {

struct LerpTap {
    int i0, i1;
    double f; // weight of i1
};

std::vector<LerpTap> up2_taps(int in_len) {
    std::vector<LerpTap> taps(static_cast<std::size_t>(in_len) * 2);
    for (int o = 0; o < in_len * 2; ++o) {
        const double src = (o + 0.5) / 2.0 - 0.5;
        const int i0 = static_cast<int>(std::floor(src));
        taps[o].f = src - i0;
        taps[o].i0 = std::clamp(i0, 0, in_len - 1);
        taps[o].i1 = std::clamp(i0 + 1, 0, in_len - 1);
    }
    return taps;
}

} // namespace

Tensor BilinearUp2::forward(const Tensor& x) {
    n = x.n;
    c = x.c;
    in_h = x.h;
    in_w = x.w;
    const auto ty = up2_taps(x.h);
    const auto tx = up2_taps(x.w);
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int s = 0; s < x.n; ++s)
        for (int ch = 0; ch < x.c; ++ch) {
            const double* p = x.v.data() + (static_cast<std::size_t>(s) * x.c + ch) * x.plane();
            double* o = y.v.data() + (static_cast<std::size_t>(s) * y.c + ch) * y.plane();
            for (int oy = 0; oy < y.h; ++oy) {
                const auto& t0 = ty[oy];
                for (int ox = 0; ox < y.w; ++ox) {
                    const auto& t1 = tx[ox];
                    const double v0 = (1 - t1.f) * p[t0.i0 * x.w + t1.i0] + t1.f * p[t0.i0 * x.w + t1.i1];
                    const double v1 = (1 - t1.f) * p[t0.i1 * x.w + t1.i0] + t1.f * p[t0.i1 * x.w + t1.i1];
                    o[oy * y.w + ox] = (1 - t0.f) * v0 + t0.f * v1;
                }
            }
        }
    return y;
}

Tensor BilinearUp2::backward(const Tensor& dy) const {
    const auto ty = up2_taps(in_h);
    const auto tx = up2_taps(in_w);
    Tensor dx(n, c, in_h, in_w);
    for (int s = 0; s < n; ++s)
        for (int ch = 0; ch < c; ++ch) {
            double* d = dx.v.data() + (static_cast<std::size_t>(s) * c + ch) * dx.plane();
            const double* g = dy.v.data() + (static_cast<std::size_t>(s) * c + ch) * dy.plane();
            for (int oy = 0; oy < dy.h; ++oy) {
                const auto& t0 = ty[oy];
                for (int ox = 0; ox < dy.w; ++ox) {
                    const auto& t1 = tx[ox];
                    const double gv = g[oy * dy.w + ox];
                    d[t0.i0 * in_w + t1.i0] += (1 - t0.f) * (1 - t1.f) * gv;
                    d[t0.i0 * in_w + t1.i1] += (1 - t0.f) * t1.f * gv;
                    d[t0.i1 * in_w + t1.i0] += t0.f * (1 - t1.f) * gv;
                    d[t0.i1 * in_w + t1.i1] += t0.f * t1.f * gv;
                }
            }
        }
    return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw ContractError("concat operands must share batch and spatial dimensions");
    Tensor y(a.n, a.c + b.c, a.h, a.w);
    const std::size_t plane = a.plane();
    for (int s = 0; s < a.n; ++s) {
        std::copy(a.sample(s), a.sample(s) + static_cast<std::size_t>(a.c) * plane, y.sample(s));
        std::copy(b.sample(s), b.sample(s) + static_cast<std::size_t>(b.c) * plane,
                  y.sample(s) + static_cast<std::size_t>(a.c) * plane);
    }
    return y;
}

void split_channels(const Tensor& d, int ca, Tensor& da, Tensor& db) {
    da = Tensor(d.n, ca, d.h, d.w);
    db = Tensor(d.n, d.c - ca, d.h, d.w);
    const std::size_t plane = d.plane();
    for (int s = 0; s < d.n; ++s) {
        std::copy(d.sample(s), d.sample(s) + static_cast<std::size_t>(ca) * plane, da.sample(s));
        std::copy(d.sample(s) + static_cast<std::size_t>(ca) * plane,
                  d.sample(s) + static_cast<std::size_t>(d.c) * plane, db.sample(s));
    }
}

// --- losses -------------------------------------------------------------

double loss_l2_tanh(const Tensor& logits, const Tensor& target_rgb, Tensor& dlogits) {
    if (!logits.same_shape(target_rgb)) throw DimensionError("regression target shape mismatch");
    dlogits = Tensor(logits.n, logits.c, logits.h, logits.w);
    const auto count = static_cast<double>(logits.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < logits.v.size(); ++i) {
        const double t = std::tanh(logits.v[i]);
        const double p = 0.5 * t + 0.5;
        const double d = p - target_rgb.v[i];
        loss += d * d;
        dlogits.v[i] = 2.0 * d / count * 0.5 * (1.0 - t * t);
    }
    return loss / count;
}

namespace {

double class_loss_grad(const Tensor& logits, const std::vector<QuantizedImage>& targets,
                       double gamma, bool focal_mode, Tensor& dlogits) {
    if (static_cast<int>(targets.size()) != logits.n)
        throw ContractError("one target per batch sample required");
    const int k_out = logits.c;
    const std::size_t plane = logits.plane();
    dlogits = Tensor(logits.n, logits.c, logits.h, logits.w);
    const double count = static_cast<double>(logits.n) * static_cast<double>(plane);
    double loss = 0.0;
    std::vector<double> prob(k_out);

    for (int s = 0; s < logits.n; ++s) {
        const auto& target = targets[s];
        if (target.height != logits.h || target.width != logits.w)
            throw DimensionError("class target does not match logit dimensions");
        const double* lp = logits.sample(s);
        double* dp = dlogits.sample(s);
        for (std::size_t p = 0; p < plane; ++p) {
            const int t = target.data[p];
            if (t >= k_out)
                throw ContractError("target class " + std::to_string(t) + " out of range");
            double mx = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < k_out; ++c) mx = std::max(mx, lp[c * plane + p]);
            double denom = 0.0;
            for (int c = 0; c < k_out; ++c) {
                prob[c] = std::exp(lp[c * plane + p] - mx);
                denom += prob[c];
            }
            for (int c = 0; c < k_out; ++c) prob[c] /= denom;
            const double pt = std::max(prob[t], 1e-300);
            const double log_pt = std::log(pt);

            double scale; // d loss_pixel / d x_j = (s_j - delta_tj) * scale
            if (!focal_mode || gamma == 0.0) {
                loss += -log_pt;
                scale = 1.0;
            } else {
                const double om = 1.0 - pt;
                loss += std::pow(om, gamma) * (-log_pt);
                scale = std::pow(om, gamma) - gamma * pt * std::pow(om, gamma - 1.0) * log_pt;
            }
            for (int c = 0; c < k_out; ++c)
                dp[c * plane + p] = (prob[c] - (c == t ? 1.0 : 0.0)) * scale / count;
        }
    }
    return loss / count;
}

} // namespace

double loss_cross_entropy(const Tensor& logits, const std::vector<QuantizedImage>& targets,
                          Tensor& dlogits) {
    return class_loss_grad(logits, targets, 0.0, false, dlogits);
}

double loss_focal(const Tensor& logits, const std::vector<QuantizedImage>& targets, double gamma,
                  Tensor& dlogits) {
    return class_loss_grad(logits, targets, gamma, true, dlogits);
}

RasterImage to_rgb(const Tensor& logits, SimMode mode, const Palette* palette) {
    if (logits.n != 1) throw ContractError("to_rgb expects a single-sample tensor");
    RasterImage img(logits.h, logits.w);
    const std::size_t plane = logits.plane();
    if (mode == SimMode::regression) {
        if (logits.c != 3) throw ContractError("regression output must have 3 channels");
        for (std::size_t p = 0; p < plane; ++p)
            for (int c = 0; c < 3; ++c)
                img.data[p * 3 + c] = 0.5 * std::tanh(logits.v[c * plane + p]) + 0.5;
    } else {
        if (!palette) throw ContractError("classification output needs a palette");
        if (logits.c > palette->size()) throw ContractError("more classes than palette entries");
        for (std::size_t p = 0; p < plane; ++p) {
            int best = 0;
            double best_v = logits.v[p];
            for (int c = 1; c < logits.c; ++c)
                if (logits.v[c * plane + p] > best_v) { // ties keep the lowest index
                    best_v = logits.v[c * plane + p];
                    best = c;
                }
            const Rgb& col = palette->centroids[best];
            for (int c = 0; c < 3; ++c) img.data[p * 3 + c] = col[c];
        }
    }
    return img;
}

// --- UNet ---------------------------------------------------------------

Tensor UNet::ConvBlock::forward(const Tensor& x, bool training) {
    return relu.forward(bn.forward(conv.forward(x), training));
}

Tensor UNet::ConvBlock::backward(const Tensor& dy) {
    return conv.backward(bn.backward(relu.backward(dy)));
}

UNet::UNet(const UNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    const auto [w0, w1, w2, w3] = cfg.widths;
    enc1a_ = {Conv2d(cfg.k_in, w0, 3), BatchNorm2d(w0), {}};
    enc1b_ = {Conv2d(w0, w0, 3), BatchNorm2d(w0), {}};
    enc2a_ = {Conv2d(w0, w1, 3), BatchNorm2d(w1), {}};
    enc2b_ = {Conv2d(w1, w1, 3), BatchNorm2d(w1), {}};
    enc3a_ = {Conv2d(w1, w2, 3), BatchNorm2d(w2), {}};
    enc3b_ = {Conv2d(w2, w2, 3), BatchNorm2d(w2), {}};
    bota_ = {Conv2d(w2, w3, 3), BatchNorm2d(w3), {}};
    botb_ = {Conv2d(w3, w3, 3), BatchNorm2d(w3), {}};
    dec3a_ = {Conv2d(w3 + w2, w2, 3), BatchNorm2d(w2), {}};
    dec3b_ = {Conv2d(w2, w2, 3), BatchNorm2d(w2), {}};
    dec2a_ = {Conv2d(w2 + w1, w1, 3), BatchNorm2d(w1), {}};
    dec2b_ = {Conv2d(w1, w1, 3), BatchNorm2d(w1), {}};
    dec1a_ = {Conv2d(w1 + w0, w0, 3), BatchNorm2d(w0), {}};
    dec1b_ = {Conv2d(w0, w0, 3), BatchNorm2d(w0), {}};
    head_ = Conv2d(w0, cfg.k_out, 1);

    Rng rng(seed);
    for (auto& p : parameters()) {
        if (p.name.ends_with(".w")) {
            // fan-in scaled uniform init; biases and norm parameters keep
            // their construction values
            const Conv2d* owner = nullptr;
            for (const auto* c :
                 {&enc1a_.conv, &enc1b_.conv, &enc2a_.conv, &enc2b_.conv, &enc3a_.conv,
                  &enc3b_.conv, &bota_.conv, &botb_.conv, &dec3a_.conv, &dec3b_.conv, &dec2a_.conv,
                  &dec2b_.conv, &dec1a_.conv, &dec1b_.conv, &head_})
                if (&c->w == p.value) owner = c;
            const double bound = 1.0 / std::sqrt(static_cast<double>(owner->cin) * owner->ksize *
                                                 owner->ksize);
            for (double& v : *p.value) v = rng.uniform(-bound, bound);
        }
    }
}

Tensor UNet::forward(const Tensor& x, bool training) {
    if (x.c != cfg_.k_in) throw ContractError("input has wrong layer count");
    if (x.h % 8 || x.w % 8)
        throw ContractError("spatial dimensions must be divisible by 8, got " +
                            std::to_string(x.w) + "x" + std::to_string(x.h));

    s1_ = enc1b_.forward(enc1a_.forward(x, training), training);
    Tensor t = pool1_.forward(s1_);
    s2_ = enc2b_.forward(enc2a_.forward(t, training), training);
    t = pool2_.forward(s2_);
    s3_ = enc3b_.forward(enc3a_.forward(t, training), training);
    t = pool3_.forward(s3_);
    t = botb_.forward(bota_.forward(t, training), training);

    t = concat_channels(up3_.forward(t), s3_);
    t = dec3b_.forward(dec3a_.forward(t, training), training);
    t = concat_channels(up2_.forward(t), s2_);
    t = dec2b_.forward(dec2a_.forward(t, training), training);
    t = concat_channels(up1_.forward(t), s1_);
    t = dec1b_.forward(dec1a_.forward(t, training), training);
    return head_.forward(t);
}

void UNet::backward(const Tensor& dlogits) {
    const auto [w0, w1, w2, w3] = cfg_.widths;
    Tensor d = head_.backward(dlogits);
    d = dec1a_.backward(dec1b_.backward(d));
    Tensor du, ds1;
    split_channels(d, w1, du, ds1);
    d = up1_.backward(du);

    d = dec2a_.backward(dec2b_.backward(d));
    Tensor ds2;
    split_channels(d, w2, du, ds2);
    d = up2_.backward(du);

    d = dec3a_.backward(dec3b_.backward(d));
    Tensor ds3;
    split_channels(d, w3, du, ds3);
    d = up3_.backward(du);

    d = bota_.backward(botb_.backward(d));
    add_inplace(ds3, pool3_.backward(d));
    d = enc3a_.backward(enc3b_.backward(ds3));
    add_inplace(ds2, pool2_.backward(d));
    d = enc2a_.backward(enc2b_.backward(ds2));
    add_inplace(ds1, pool1_.backward(d));
    enc1a_.backward(enc1b_.backward(ds1));
}

void UNet::zero_grad() {
    for (auto& p : parameters())
        if (p.grad) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

std::vector<ParamRef> UNet::parameters() {
    std::vector<ParamRef> out;
    const std::pair<std::string, ConvBlock*> blocks[] = {
        {"enc1a", &enc1a_}, {"enc1b", &enc1b_}, {"enc2a", &enc2a_}, {"enc2b", &enc2b_},
        {"enc3a", &enc3a_}, {"enc3b", &enc3b_}, {"bota", &bota_},   {"botb", &botb_},
        {"dec3a", &dec3a_}, {"dec3b", &dec3b_}, {"dec2a", &dec2a_}, {"dec2b", &dec2b_},
        {"dec1a", &dec1a_}, {"dec1b", &dec1b_},
    };
    for (const auto& [name, blk] : blocks) {
        Conv2d& cv = blk->conv;
        out.push_back({name + ".w", &cv.w, &cv.gw, {cv.cout, cv.cin, cv.ksize, cv.ksize}});
        out.push_back({name + ".b", &cv.b, &cv.gb, {cv.cout}});
        out.push_back({name + ".bn.gamma", &blk->bn.gamma, &blk->bn.ggamma, {blk->bn.c}});
        out.push_back({name + ".bn.beta", &blk->bn.beta, &blk->bn.gbeta, {blk->bn.c}});
    }
    out.push_back({"head.w", &head_.w, &head_.gw, {head_.cout, head_.cin, 1, 1}});
    out.push_back({"head.b", &head_.b, &head_.gb, {head_.cout}});
    return out;
}

std::vector<ParamRef> UNet::buffers() {
    std::vector<ParamRef> out;
    const std::pair<std::string, ConvBlock*> blocks[] = {
        {"enc1a", &enc1a_}, {"enc1b", &enc1b_}, {"enc2a", &enc2a_}, {"enc2b", &enc2b_},
        {"enc3a", &enc3a_}, {"enc3b", &enc3b_}, {"bota", &bota_},   {"botb", &botb_},
        {"dec3a", &dec3a_}, {"dec3b", &dec3b_}, {"dec2a", &dec2a_}, {"dec2b", &dec2b_},
        {"dec1a", &dec1a_}, {"dec1b", &dec1b_},
    };
    for (const auto& [name, blk] : blocks) {
        out.push_back({name + ".bn.run_mean", &blk->bn.run_mean, nullptr, {blk->bn.c}});
        out.push_back({name + ".bn.run_var", &blk->bn.run_var, nullptr, {blk->bn.c}});
    }
    return out;
}

} // namespace goldendie
