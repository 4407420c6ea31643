#include "wss/model/net.hpp"

#include "wss/util/error.hpp"

#include <cmath>

namespace wss {

namespace {

constexpr double kLeakySlope = 0.01;
constexpr double kNormEps = 1e-5;

// Nearest-neighbour index map from an output position to its source.
inline int nn_src(int i, int n_in, int n_out) {
    return static_cast<int>((static_cast<int64_t>(i) * n_in) / n_out);
}

Act upsample_nearest(const Act& in, int tz, int ty, int tx) {
    Act out(in.c, tz, ty, tx);
#pragma omp parallel for collapse(2) schedule(static) if (out.count() > 16384)
    for (int c = 0; c < in.c; ++c) {
        for (int z = 0; z < tz; ++z) {
            const int sz = nn_src(z, in.z, tz);
            for (int y = 0; y < ty; ++y) {
                const int sy = nn_src(y, in.y, ty);
                const double* srow = in.v.data() + ((1LL * c * in.z + sz) * in.y + sy) * in.x;
                double* drow = out.v.data() + ((1LL * c * tz + z) * ty + y) * tx;
                for (int x = 0; x < tx; ++x) drow[x] = srow[nn_src(x, in.x, tx)];
            }
        }
    }
    return out;
}

Act upsample_nearest_backward(const Act& grad_out, int sz_, int sy_, int sx_) {
    Act grad_in(grad_out.c, sz_, sy_, sx_);
#pragma omp parallel for collapse(2) schedule(static) if (grad_in.count() > 16384)
    for (int c = 0; c < grad_out.c; ++c) {
        for (int z = 0; z < sz_; ++z) {
            // Preimage of source index i under floor(o * n_in / n_out).
            const int z0 = static_cast<int>((1LL * z * grad_out.z + sz_ - 1) / sz_);
            const int z1 = static_cast<int>((1LL * (z + 1) * grad_out.z + sz_ - 1) / sz_);
            for (int y = 0; y < sy_; ++y) {
                const int y0 = static_cast<int>((1LL * y * grad_out.y + sy_ - 1) / sy_);
                const int y1 = static_cast<int>((1LL * (y + 1) * grad_out.y + sy_ - 1) / sy_);
                double* drow = grad_in.v.data() + ((1LL * c * sz_ + z) * sy_ + y) * sx_;
                for (int x = 0; x < sx_; ++x) {
                    const int x0 = static_cast<int>((1LL * x * grad_out.x + sx_ - 1) / sx_);
                    const int x1 = static_cast<int>((1LL * (x + 1) * grad_out.x + sx_ - 1) / sx_);
                    double acc = 0.0;
                    for (int oz = z0; oz < z1; ++oz)
                        for (int oy = y0; oy < y1; ++oy) {
                            const double* grow =
                                grad_out.v.data() +
                                ((1LL * c * grad_out.z + oz) * grad_out.y + oy) * grad_out.x;
                            for (int ox = x0; ox < x1; ++ox) acc += grow[ox];
                        }
                    drow[x] = acc;
                }
            }
        }
    }
    return grad_in;
}

Act concat_channels(const Act& a, const Act& b) {
    Act out(a.c + b.c, a.z, a.y, a.x);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

} // namespace

void NetSpec::validate() const {
    require(dims == 2 || dims == 3, "net dims must be 2 or 3");
    require(stages >= 1, "need at least one stage");
    require(static_cast<int>(filters.size()) == stages, "filters length must equal stages");
    require(static_cast<int>(strides.size()) == stages, "strides length must equal stages");
    require(strides[0] == 1, "the shallowest stage must keep resolution");
    for (int f : filters) require(f >= 1, "filters must be >= 1");
    for (int s : strides) require(s >= 1, "strides must be >= 1");
    require(kernel >= 1 && kernel % 2 == 1, "kernel must be odd");
    require(classes >= 2, "need at least two classes");
    require(in_channels >= 1, "need at least one input channel");
    require(dropout >= 0.0 && dropout < 1.0, "dropout ratio out of range");
}

Network::Network(const NetSpec& spec) : spec_(spec) {
    spec_.validate();
    int prev = spec_.in_channels;
    for (int i = 0; i < spec_.stages; ++i) {
        Block b;
        b.name = "enc" + std::to_string(i);
        b.in_c = prev;
        b.out_c = spec_.filters[static_cast<size_t>(i)];
        b.stride = spec_.strides[static_cast<size_t>(i)];
        b.norm = spec_.norm == NormKind::kInstance;
        blocks_.push_back(b);
        prev = b.out_c;
    }
    for (int i = spec_.stages - 2; i >= 0; --i) {
        Block b;
        b.name = "dec" + std::to_string(i);
        b.in_c = prev + spec_.filters[static_cast<size_t>(i)];
        b.out_c = spec_.filters[static_cast<size_t>(i)];
        b.stride = 1;
        b.norm = spec_.norm == NormKind::kInstance;
        blocks_.push_back(b);
        prev = b.out_c;
    }
    Block head;
    head.name = "head";
    head.in_c = prev;
    head.out_c = spec_.classes;
    head.stride = 1;
    head.head = true;
    blocks_.push_back(head);

    int base = 0;
    for (const Block& b : blocks_) {
        param_base_.push_back(base);
        base += 2 + (b.norm ? 2 : 0);
    }
}

Parameters Network::init_params(uint64_t seed) const {
    Rng rng(seed);
    Parameters params;
    for (const Block& b : blocks_) {
        const int k = b.head ? 1 : spec_.kernel;
        const int kz = spec_.dims == 3 ? k : 1;
        Tensor w;
        w.name = b.name + ".conv.w";
        w.shape = {b.out_c, b.in_c, kz, k, k};
        w.data.assign(static_cast<size_t>(w.size()), 0.0);
        if (!b.head) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(b.in_c) * kz * k * k);
            for (double& v : w.data) v = (2.0 * rng.uniform() - 1.0) * bound;
        }
        params.push_back(std::move(w));
        Tensor bias;
        bias.name = b.name + ".conv.b";
        bias.shape = {b.out_c};
        bias.data.assign(static_cast<size_t>(b.out_c), 0.0);
        params.push_back(std::move(bias));
        if (b.norm) {
            Tensor g;
            g.name = b.name + ".norm.g";
            g.shape = {b.out_c};
            g.data.assign(static_cast<size_t>(b.out_c), 1.0);
            params.push_back(std::move(g));
            Tensor be;
            be.name = b.name + ".norm.b";
            be.shape = {b.out_c};
            be.data.assign(static_cast<size_t>(b.out_c), 0.0);
            params.push_back(std::move(be));
        }
    }
    return params;
}

Parameters Network::zero_grads() const {
    Parameters grads = init_params(0);
    for (Tensor& t : grads) std::fill(t.data.begin(), t.data.end(), 0.0);
    return grads;
}

ConvShape Network::shape_for(const Block& blk, const Act& in) const {
    ConvShape s;
    s.in_c = blk.in_c;
    s.out_c = blk.out_c;
    s.in_z = in.z;
    s.in_y = in.y;
    s.in_x = in.x;
    const int k = blk.head ? 1 : spec_.kernel;
    s.kx = s.ky = k;
    s.kz = spec_.dims == 3 ? k : 1;
    s.sx = s.sy = blk.stride;
    s.sz = spec_.dims == 3 ? blk.stride : 1;
    return s;
}

void Network::block_forward(const Block& blk, size_t li, const Parameters& params,
                            const Act& in, Act& out, bool training, Rng* rng,
                            Cache* cache) const {
    const int pb = param_base_[li];
    const ConvShape s = shape_for(blk, in);
    Act conv_out(s.out_c, s.out_z(), s.out_y(), s.out_x());
    conv_forward(s, in.v.data(), params[static_cast<size_t>(pb)].data.data(),
                 params[static_cast<size_t>(pb) + 1].data.data(), conv_out.v.data());
    if (cache) {
        cache->conv_in[li] = in;
        cache->shapes[li] = s;
        cache->pre_norm[li] = conv_out;
    }
    if (blk.head) {
        out = std::move(conv_out);
        return;
    }

    Act cur = std::move(conv_out);
    if (blk.norm) {
        const int64_t spatial = cur.spatial();
        const double* gamma = params[static_cast<size_t>(pb) + 2].data.data();
        const double* beta = params[static_cast<size_t>(pb) + 3].data.data();
        Act xhat(cur.c, cur.z, cur.y, cur.x);
        std::vector<double> invstd(static_cast<size_t>(cur.c));
#pragma omp parallel for schedule(static) if (cur.count() > 16384)
        for (int c = 0; c < cur.c; ++c) {
            const double* src = cur.v.data() + c * spatial;
            double mean = 0.0;
            for (int64_t i = 0; i < spatial; ++i) mean += src[i];
            mean /= static_cast<double>(spatial);
            double var = 0.0;
            for (int64_t i = 0; i < spatial; ++i) {
                const double d = src[i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(spatial);
            const double is = 1.0 / std::sqrt(var + kNormEps);
            invstd[static_cast<size_t>(c)] = is;
            double* xh = xhat.v.data() + c * spatial;
            double* dst = cur.v.data() + c * spatial;
            for (int64_t i = 0; i < spatial; ++i) {
                xh[i] = (src[i] - mean) * is;
                dst[i] = gamma[c] * xh[i] + beta[c];
            }
        }
        if (cache) {
            cache->norm_xhat[li] = std::move(xhat);
            cache->norm_invstd[li] = std::move(invstd);
        }
    }

    if (cache) cache->pre_act[li] = cur;
    for (double& v : cur.v) v = v > 0.0 ? v : kLeakySlope * v;

    if (training && spec_.dropout > 0.0) {
        require(rng != nullptr, "training forward needs a dropout generator");
        const double keep = 1.0 - spec_.dropout;
        std::vector<uint8_t> mask(cur.v.size());
        for (auto& m : mask) m = rng->uniform() < keep ? 1 : 0;
        const double scale = 1.0 / keep;
        for (size_t i = 0; i < cur.v.size(); ++i) cur.v[i] = mask[i] ? cur.v[i] * scale : 0.0;
        if (cache) cache->dropout_mask[li] = std::move(mask);
    }

    if (cache) cache->stage_out[li] = cur;
    out = std::move(cur);
}

Act Network::forward(const Parameters& params, const Act& input, bool training,
                     Rng* dropout_rng, Cache* cache) const {
    require(input.c == spec_.in_channels, "input channel count does not match the net spec");
    require(spec_.dims == 3 || input.z == 1, "2D nets take single-slice inputs");
    if (cache) {
        const size_t n = blocks_.size();
        cache->conv_in.assign(n, {});
        cache->pre_norm.assign(n, {});
        cache->norm_xhat.assign(n, {});
        cache->norm_invstd.assign(n, {});
        cache->pre_act.assign(n, {});
        cache->dropout_mask.assign(n, {});
        cache->stage_out.assign(n, {});
        cache->shapes.assign(n, {});
    }

    std::vector<Act> enc_out(static_cast<size_t>(spec_.stages));
    Act cur = input;
    size_t li = 0;
    for (int i = 0; i < spec_.stages; ++i, ++li) {
        Act out;
        block_forward(blocks_[li], li, params, cur, out, training, dropout_rng, cache);
        enc_out[static_cast<size_t>(i)] = out;
        cur = std::move(out);
    }
    for (int i = spec_.stages - 2; i >= 0; --i, ++li) {
        const Act& skip = enc_out[static_cast<size_t>(i)];
        Act up = upsample_nearest(cur, skip.z, skip.y, skip.x);
        Act cat = concat_channels(up, skip);
        Act out;
        block_forward(blocks_[li], li, params, cat, out, training, dropout_rng, cache);
        cur = std::move(out);
    }
    Act scores;
    block_forward(blocks_[li], li, params, cur, scores, training, dropout_rng, cache);
    return scores;
}

Act Network::block_backward(const Block& blk, size_t li, const Parameters& params,
                            const Cache& cache, const Act& grad_out,
                            Parameters& grads) const {
    const int pb = param_base_[li];
    const ConvShape& s = cache.shapes[li];
    Act g = grad_out;

    if (!blk.head) {
        if (!cache.dropout_mask[li].empty()) {
            const double scale = 1.0 / (1.0 - spec_.dropout);
            const auto& mask = cache.dropout_mask[li];
            for (size_t i = 0; i < g.v.size(); ++i) g.v[i] = mask[i] ? g.v[i] * scale : 0.0;
        }
        const Act& pre = cache.pre_act[li];
        for (size_t i = 0; i < g.v.size(); ++i)
            if (pre.v[i] <= 0.0) g.v[i] *= kLeakySlope;

        if (blk.norm) {
            const Act& xhat = cache.norm_xhat[li];
            const auto& invstd = cache.norm_invstd[li];
            const double* gamma = params[static_cast<size_t>(pb) + 2].data.data();
            double* ggamma = grads[static_cast<size_t>(pb) + 2].data.data();
            double* gbeta = grads[static_cast<size_t>(pb) + 3].data.data();
            const int64_t spatial = g.spatial();
            const double inv_n = 1.0 / static_cast<double>(spatial);
#pragma omp parallel for schedule(static) if (g.count() > 16384)
            for (int c = 0; c < g.c; ++c) {
                double* gc = g.v.data() + c * spatial;
                const double* xh = xhat.v.data() + c * spatial;
                double sum_g = 0.0, sum_gx = 0.0;
                for (int64_t i = 0; i < spatial; ++i) {
                    sum_g += gc[i];
                    sum_gx += gc[i] * xh[i];
                }
                ggamma[c] += sum_gx;
                gbeta[c] += sum_g;
                const double k1 = gamma[c] * invstd[static_cast<size_t>(c)];
                for (int64_t i = 0; i < spatial; ++i)
                    gc[i] = k1 * (gc[i] - inv_n * sum_g - xh[i] * inv_n * sum_gx);
            }
        }
    }

    // Conv backward: accumulate parameter grads, return input grads.
    const Act& conv_in = cache.conv_in[li];
    Act grad_in(conv_in.c, conv_in.z, conv_in.y, conv_in.x);
    std::vector<double> gw(static_cast<size_t>(s.weight_count()));
    std::vector<double> gb(static_cast<size_t>(s.out_c));
    conv_backward_input(s, g.v.data(), params[static_cast<size_t>(pb)].data.data(),
                        grad_in.v.data());
    conv_backward_params(s, conv_in.v.data(), g.v.data(), gw.data(), gb.data());
    auto& wt = grads[static_cast<size_t>(pb)].data;
    for (size_t i = 0; i < gw.size(); ++i) wt[i] += gw[i];
    auto& bt = grads[static_cast<size_t>(pb) + 1].data;
    for (size_t i = 0; i < gb.size(); ++i) bt[i] += gb[i];
    return grad_in;
}

namespace {

Act take_channels(const Act& a, int first, int count) {
    Act out(count, a.z, a.y, a.x);
    const int64_t spatial = a.spatial();
    std::copy(a.v.begin() + first * spatial, a.v.begin() + (first + count) * spatial,
              out.v.begin());
    return out;
}

} // namespace

Parameters Network::backward(const Parameters& params, const Cache& cache,
                             const Act& grad_scores) const {
    Parameters grads = zero_grads();
    const int S = spec_.stages;
    size_t li = blocks_.size() - 1;
    Act g = block_backward(blocks_[li], li, params, cache, grad_scores, grads);

    // Decoder blocks in reverse forward order: dec0 first. Each concat grad
    // splits into the upsampled path and the skip connection.
    std::vector<Act> skip_grad(static_cast<size_t>(S));
    for (li = blocks_.size() - 2; li >= static_cast<size_t>(S) && S > 1; --li) {
        const int i = static_cast<int>(2 * S - 2 - li); // dec index
        Act g_cat = block_backward(blocks_[li], li, params, cache, g, grads);
        const int skip_c = spec_.filters[static_cast<size_t>(i)];
        const int up_c = g_cat.c - skip_c;
        skip_grad[static_cast<size_t>(i)] = take_channels(g_cat, up_c, skip_c);
        const Act& src = cache.stage_out[li - 1];
        g = upsample_nearest_backward(take_channels(g_cat, 0, up_c), src.z, src.y, src.x);
    }

    for (int ei = S - 1; ei >= 0; --ei) {
        Act& sg = skip_grad[static_cast<size_t>(ei)];
        if (!sg.v.empty())
            for (size_t j = 0; j < g.v.size(); ++j) g.v[j] += sg.v[j];
        g = block_backward(blocks_[static_cast<size_t>(ei)], static_cast<size_t>(ei), params,
                           cache, g, grads);
    }
    return grads;
}

Act slice_input(const IntensityVolume& volume, int z) {
    const GridSpec& g = volume.grid;
    Act out(volume.num_channels(), 1, g.ny, g.nx);
    const int64_t plane = static_cast<int64_t>(g.nx) * g.ny;
    for (int c = 0; c < volume.num_channels(); ++c) {
        const double* src = volume.channels[static_cast<size_t>(c)].data() + z * plane;
        std::copy(src, src + plane, out.v.begin() + c * plane);
    }
    return out;
}

Act volume_input(const IntensityVolume& volume) {
    const GridSpec& g = volume.grid;
    Act out(volume.num_channels(), g.nz, g.ny, g.nx);
    for (int c = 0; c < volume.num_channels(); ++c)
        std::copy(volume.channels[static_cast<size_t>(c)].begin(),
                  volume.channels[static_cast<size_t>(c)].end(),
                  out.v.begin() + c * g.voxels());
    return out;
}

} // namespace wss
