#pragma once

#include "wss/core/ops.hpp"
#include "wss/kernels/conv.hpp"

#include <vector>

// Serial, definition-level implementations of the parallel kernels. They
// trade speed for obviousness and are what the tests and the benchmark
// compare against.
namespace wss::reference {

// All-pairs nearest-zero search, O(n^2); out-of-grid counts as zero.
std::vector<double> distance_transform_bruteforce(const BinaryMask& mask);

// Direct per-voxel neighbourhood test.
BinaryMask binary_erode_bruteforce(const BinaryMask& mask, StructuringElement element);

// Label propagation to fixpoint; components ordered like the production
// implementation, by (min z, min y, min x).
std::vector<std::vector<int64_t>> connected_components_fixpoint(const BinaryMask& mask,
                                                                Connectivity connectivity);

// Plain-loop convolution, no parallelism, no layout tricks.
void conv_forward_naive(const ConvShape& s, const double* in, const double* w,
                        const double* b, double* out);
void conv_backward_naive(const ConvShape& s, const double* in, const double* grad_out,
                         const double* w, double* grad_in, double* grad_w, double* grad_b);

// Left-to-right summation.
double sum_naive(const double* data, long long n);

} // namespace wss::reference
