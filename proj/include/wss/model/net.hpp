#pragma once

#include "wss/core/volume.hpp"
#include "wss/kernels/conv.hpp"
#include "wss/util/rng.hpp"

#include <string>
#include <vector>

namespace wss {

// Named tensor with a stable position inside Parameters; this ordering is
// what the checkpoint format serializes.
struct Tensor {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;

    int64_t size() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
};

using Parameters = std::vector<Tensor>;

enum class NormKind { kInstance, kNone };

// Encoder-decoder segmentation network. The Appendix-style configuration
// (4 stages, 32/64/128/256 filters) is expressible; the defaults are a
// desk-scale micro variant.
struct NetSpec {
    int dims = 2; // 2 or 3
    int stages = 3;
    std::vector<int> filters{8, 16, 32};
    int kernel = 3;
    std::vector<int> strides{1, 2, 2};
    NormKind norm = NormKind::kInstance;
    double dropout = 0.1;
    int classes = kNumClasses;
    int in_channels = 2;

    void validate() const;
};

// Dense activation block, layout (c, z, y, x).
struct Act {
    int c = 0, z = 0, y = 0, x = 0;
    std::vector<double> v;

    Act() = default;
    Act(int c_, int z_, int y_, int x_)
        : c(c_), z(z_), y(y_), x(x_),
          v(static_cast<size_t>(c_) * z_ * y_ * x_, 0.0) {}

    int64_t spatial() const { return static_cast<int64_t>(z) * y * x; }
    int64_t count() const { return c * spatial(); }
};

class Network {
public:
    explicit Network(const NetSpec& spec);

    const NetSpec& spec() const { return spec_; }

    // Fan-in-scaled uniform conv weights, zero biases; the head layer is
    // zero-initialized so the initial softmax is uniform.
    Parameters init_params(uint64_t seed) const;

    // Opaque per-forward state consumed by backward().
    struct Cache;

    // Returns pre-softmax scores with the input's spatial shape and
    // spec.classes channels. `dropout_rng` is consulted only when training
    // and spec.dropout > 0.
    Act forward(const Parameters& params, const Act& input, bool training, Rng* dropout_rng,
                Cache* cache) const;

    // Exact gradients w.r.t. every parameter. Gradients of a batch are the
    // sum of per-example calls.
    Parameters backward(const Parameters& params, const Cache& cache,
                        const Act& grad_scores) const;

    Parameters zero_grads() const;

    struct Cache {
        std::vector<Act> conv_in;      // input to each conv layer
        std::vector<Act> pre_norm;     // conv output
        std::vector<Act> norm_xhat;    // normalized activations
        std::vector<std::vector<double>> norm_invstd;
        std::vector<Act> pre_act;      // input to the nonlinearity
        std::vector<std::vector<uint8_t>> dropout_mask;
        std::vector<Act> stage_out;    // block outputs (post everything)
        std::vector<ConvShape> shapes;
    };

private:
    struct Block {
        std::string name;
        int in_c = 0, out_c = 0;
        int stride = 1;
        bool norm = false;
        bool head = false; // 1x1 conv, no norm/activation/dropout
    };

    ConvShape shape_for(const Block& blk, const Act& in) const;
    void block_forward(const Block& blk, size_t li, const Parameters& params, const Act& in,
                       Act& out, bool training, Rng* rng, Cache* cache) const;
    Act block_backward(const Block& blk, size_t li, const Parameters& params,
                       const Cache& cache, const Act& grad_out, Parameters& grads) const;

    NetSpec spec_;
    std::vector<Block> blocks_; // encoder stages, decoder stages, head
    std::vector<int> param_base_; // first tensor index per block
};

// Network input builders: one axial slice (2D nets) or the full volume.
Act slice_input(const IntensityVolume& volume, int z);
Act volume_input(const IntensityVolume& volume);

} // namespace wss
