#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "goldendie/palette.hpp"
#include "goldendie/raster.hpp"
#include "goldendie/tensor.hpp"

namespace goldendie {

enum class SimMode { regression, classification };

/// Architecture description. Three encoder stages (two zero-padded 3x3
/// convolutions with batch norm and ReLU, then 2x max pooling), a bottleneck,
/// three decoder stages (2x bilinear upsampling, skip concatenation, two
/// convolutions) and a 1x1 projection to k_out channels.
struct UNetConfig {
    SimMode mode = SimMode::classification;
    int k_in = 5;
    int k_out = 64; // 3 in regression mode
    std::array<int, 4> widths = {16, 32, 64, 128};
};

// ---------------------------------------------------------------------------
// Layer primitives. Each layer keeps whatever it needs from the forward pass
// and consumes it in backward; parameter gradients accumulate until
// zero_grad.
// ---------------------------------------------------------------------------

struct Conv2d {
    int cin = 0, cout = 0, ksize = 3; // zero padding of ksize/2
    std::vector<double> w, b, gw, gb; // w laid out [cout][cin][k][k]

    Conv2d() = default;
    Conv2d(int cin_, int cout_, int ksize_);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

private:
    Tensor x_;
};

struct BatchNorm2d {
    int c = 0;
    double momentum = 0.1;
    double eps = 1e-5;
    std::vector<double> gamma, beta, ggamma, gbeta;
    std::vector<double> run_mean, run_var;

    BatchNorm2d() = default;
    explicit BatchNorm2d(int c_);

    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& dy);

private:
    Tensor xhat_;
    std::vector<double> invstd_;
    bool trained_forward_ = false;
};

struct ReLU {
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy) const;

private:
    Tensor x_;
};

struct MaxPool2 {
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy) const;

private:
    std::vector<std::uint32_t> argmax_;
    int in_h = 0, in_w = 0, n = 0, c = 0;
};

/// Parameter-free 2x bilinear upsampling (half-pixel centers, edges clamped).
struct BilinearUp2 {
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy) const;

private:
    int in_h = 0, in_w = 0, n = 0, c = 0;
};

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& d, int ca, Tensor& da, Tensor& db);

// ---------------------------------------------------------------------------
// Losses. Each returns the scalar loss and fills dlogits with the gradient of
// the mean loss with respect to the raw network output.
// ---------------------------------------------------------------------------

/// Mean squared error in RGB space after the tanh output scaling
/// p = tanh(x)/2 + 1/2.
double loss_l2_tanh(const Tensor& logits, const Tensor& target_rgb, Tensor& dlogits);

/// Mean per-pixel categorical cross entropy against class index targets.
double loss_cross_entropy(const Tensor& logits, const std::vector<QuantizedImage>& targets,
                          Tensor& dlogits);

/// Focal loss; gamma = 0 is exactly cross entropy.
double loss_focal(const Tensor& logits, const std::vector<QuantizedImage>& targets, double gamma,
                  Tensor& dlogits);

/// Maps network output to RGB: tanh scaling in regression mode, palette
/// lookup of the per-pixel argmax in classification mode (ties to the lowest
/// class index). Expects a single-sample tensor.
RasterImage to_rgb(const Tensor& logits, SimMode mode, const Palette* palette);

// ---------------------------------------------------------------------------

struct ParamRef {
    std::string name;
    std::vector<double>* value = nullptr;
    std::vector<double>* grad = nullptr; // null for running statistics
    std::vector<int> shape;
};

class UNet {
public:
    UNet(const UNetConfig& cfg, std::uint64_t seed);

    const UNetConfig& config() const { return cfg_; }

    /// Runs the network. Spatial dimensions must be divisible by 8. In
    /// training mode batch statistics drive the normalization layers and the
    /// activations needed by backward() are retained.
    Tensor forward(const Tensor& x, bool training);

    /// Backpropagates from dL/dlogits; call after forward(x, true).
    void backward(const Tensor& dlogits);

    void zero_grad();

    std::vector<ParamRef> parameters(); // trainable
    std::vector<ParamRef> buffers();    // batch-norm running statistics

private:
    struct ConvBlock {
        Conv2d conv;
        BatchNorm2d bn;
        ReLU relu;
        Tensor forward(const Tensor& x, bool training);
        Tensor backward(const Tensor& dy);
    };

    UNetConfig cfg_;
    ConvBlock enc1a_, enc1b_, enc2a_, enc2b_, enc3a_, enc3b_;
    ConvBlock bota_, botb_;
    ConvBlock dec3a_, dec3b_, dec2a_, dec2b_, dec1a_, dec1b_;
    MaxPool2 pool1_, pool2_, pool3_;
    BilinearUp2 up3_, up2_, up1_;
    Conv2d head_;

    Tensor s1_, s2_, s3_; // skip activations
    friend struct UNetIntrospect;
};

} // namespace goldendie
