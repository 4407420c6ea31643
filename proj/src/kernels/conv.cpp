#include "wss/kernels/conv.hpp"

#include <cstring>

namespace wss {

void conv_forward(const ConvShape& s, const double* in, const double* w,
                  const double* b, double* out) {
    const int oz_n = s.out_z(), oy_n = s.out_y(), ox_n = s.out_x();
    const int pz = s.kz / 2, py = s.ky / 2, px = s.kx / 2;
    const long long in_plane = 1LL * s.in_y * s.in_x;
    const long long in_ch = 1LL * s.in_z * in_plane;
    const long long k_vol = 1LL * s.kz * s.ky * s.kx;

#pragma omp parallel for collapse(2) schedule(static) if (s.out_count() > 4096)
    for (int oc = 0; oc < s.out_c; ++oc) {
        for (int oz = 0; oz < oz_n; ++oz) {
            for (int oy = 0; oy < oy_n; ++oy) {
                double* orow = out + ((1LL * oc * oz_n + oz) * oy_n + oy) * ox_n;
                for (int ox = 0; ox < ox_n; ++ox) orow[ox] = b[oc];
                for (int ic = 0; ic < s.in_c; ++ic) {
                    const double* ich = in + ic * in_ch;
                    const double* wk = w + (1LL * oc * s.in_c + ic) * k_vol;
                    for (int dz = 0; dz < s.kz; ++dz) {
                        const int iz = oz * s.sz + dz - pz;
                        if (iz < 0 || iz >= s.in_z) continue;
                        for (int dy = 0; dy < s.ky; ++dy) {
                            const int iy = oy * s.sy + dy - py;
                            if (iy < 0 || iy >= s.in_y) continue;
                            const double* irow = ich + iz * in_plane + 1LL * iy * s.in_x;
                            const double* wrow = wk + (1LL * dz * s.ky + dy) * s.kx;
                            for (int ox = 0; ox < ox_n; ++ox) {
                                const int ix0 = ox * s.sx - px;
                                double acc = 0.0;
                                for (int dx = 0; dx < s.kx; ++dx) {
                                    const int ix = ix0 + dx;
                                    if (ix >= 0 && ix < s.in_x) acc += irow[ix] * wrow[dx];
                                }
                                orow[ox] += acc;
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv_backward_input(const ConvShape& s, const double* grad_out,
                         const double* w, double* grad_in) {
    const int oz_n = s.out_z(), oy_n = s.out_y(), ox_n = s.out_x();
    const int pz = s.kz / 2, py = s.ky / 2, px = s.kx / 2;
    const long long out_plane = 1LL * oy_n * ox_n;
    const long long out_ch = 1LL * oz_n * out_plane;
    const long long k_vol = 1LL * s.kz * s.ky * s.kx;

#pragma omp parallel for collapse(2) schedule(static) if (s.in_count() > 4096)
    for (int ic = 0; ic < s.in_c; ++ic) {
        for (int iz = 0; iz < s.in_z; ++iz) {
            for (int iy = 0; iy < s.in_y; ++iy) {
                double* grow = grad_in + ((1LL * ic * s.in_z + iz) * s.in_y + iy) * s.in_x;
                for (int ix = 0; ix < s.in_x; ++ix) {
                    double acc = 0.0;
                    for (int dz = 0; dz < s.kz; ++dz) {
                        const int num_z = iz + pz - dz;
                        if (num_z < 0 || num_z % s.sz) continue;
                        const int oz = num_z / s.sz;
                        if (oz >= oz_n) continue;
                        for (int dy = 0; dy < s.ky; ++dy) {
                            const int num_y = iy + py - dy;
                            if (num_y < 0 || num_y % s.sy) continue;
                            const int oy = num_y / s.sy;
                            if (oy >= oy_n) continue;
                            for (int dx = 0; dx < s.kx; ++dx) {
                                const int num_x = ix + px - dx;
                                if (num_x < 0 || num_x % s.sx) continue;
                                const int ox = num_x / s.sx;
                                if (ox >= ox_n) continue;
                                const long long ooff = oz * out_plane + 1LL * oy * ox_n + ox;
                                const long long woff = (1LL * dz * s.ky + dy) * s.kx + dx;
                                for (int oc = 0; oc < s.out_c; ++oc) {
                                    acc += grad_out[oc * out_ch + ooff] *
                                           w[(1LL * oc * s.in_c + ic) * k_vol + woff];
                                }
                            }
                        }
                    }
                    grow[ix] = acc;
                }
            }
        }
    }
}

void conv_backward_params(const ConvShape& s, const double* in,
                          const double* grad_out, double* grad_w, double* grad_b) {
    const int oz_n = s.out_z(), oy_n = s.out_y(), ox_n = s.out_x();
    const int pz = s.kz / 2, py = s.ky / 2, px = s.kx / 2;
    const long long in_plane = 1LL * s.in_y * s.in_x;
    const long long in_ch = 1LL * s.in_z * in_plane;
    const long long out_ch = 1LL * oz_n * oy_n * ox_n;
    const long long k_vol = 1LL * s.kz * s.ky * s.kx;

#pragma omp parallel for schedule(static) if (s.out_c > 1)
    for (int oc = 0; oc < s.out_c; ++oc) {
        const double* gch = grad_out + oc * out_ch;
        double acc = 0.0;
        for (long long i = 0; i < out_ch; ++i) acc += gch[i];
        grad_b[oc] = acc;
    }

#pragma omp parallel for collapse(2) schedule(static) if (s.out_c * s.in_c > 1)
    for (int oc = 0; oc < s.out_c; ++oc) {
        for (int ic = 0; ic < s.in_c; ++ic) {
            const double* gch = grad_out + oc * out_ch;
            const double* ich = in + ic * in_ch;
            double* wk = grad_w + (1LL * oc * s.in_c + ic) * k_vol;
            for (int dz = 0; dz < s.kz; ++dz) {
                for (int dy = 0; dy < s.ky; ++dy) {
                    for (int dx = 0; dx < s.kx; ++dx) {
                        double acc = 0.0;
                        for (int oz = 0; oz < oz_n; ++oz) {
                            const int iz = oz * s.sz + dz - pz;
                            if (iz < 0 || iz >= s.in_z) continue;
                            for (int oy = 0; oy < oy_n; ++oy) {
                                const int iy = oy * s.sy + dy - py;
                                if (iy < 0 || iy >= s.in_y) continue;
                                const double* irow = ich + iz * in_plane + 1LL * iy * s.in_x;
                                const double* grow = gch + (1LL * oz * oy_n + oy) * ox_n;
                                for (int ox = 0; ox < ox_n; ++ox) {
                                    const int ix = ox * s.sx + dx - px;
                                    if (ix >= 0 && ix < s.in_x) acc += grow[ox] * irow[ix];
                                }
                            }
                        }
                        wk[(1LL * dz * s.ky + dy) * s.kx + dx] = acc;
                    }
                }
            }
        }
    }
}

} // namespace wss
