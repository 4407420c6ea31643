#pragma once

namespace wss {

// Direct ND convolution with "same" zero padding; output spatial dims are
// ceil(in / stride). 2D runs as a single-slice 3D volume with kz = sz = 1.
// Layouts: in (in_c, z, y, x), weights (out_c, in_c, kz, ky, kx),
// out (out_c, oz, oy, ox).
struct ConvShape {
    int in_c = 1, out_c = 1;
    int in_z = 1, in_y = 1, in_x = 1;
    int kz = 1, ky = 3, kx = 3;
    int sz = 1, sy = 1, sx = 1;

    int out_z() const { return (in_z + sz - 1) / sz; }
    int out_y() const { return (in_y + sy - 1) / sy; }
    int out_x() const { return (in_x + sx - 1) / sx; }
    long long in_count() const { return 1LL * in_c * in_z * in_y * in_x; }
    long long out_count() const { return 1LL * out_c * out_z() * out_y() * out_x(); }
    long long weight_count() const { return 1LL * out_c * in_c * kz * ky * kx; }
};

void conv_forward(const ConvShape& s, const double* in, const double* w,
                  const double* b, double* out);

// Gradient w.r.t. the input (gather form: each input voxel sums its own
// contributions, so the result is independent of thread count).
void conv_backward_input(const ConvShape& s, const double* grad_out,
                         const double* w, double* grad_in);

// Gradients w.r.t. weights and bias; each (oc, ic) weight slice is owned by
// one iteration, accumulated in a fixed order.
void conv_backward_params(const ConvShape& s, const double* in,
                          const double* grad_out, double* grad_w, double* grad_b);

} // namespace wss
