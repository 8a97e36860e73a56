#pragma once

#include <algorithm>
#include <cstdint>

// Data-parallel inner loops shared by the layers. Every loop nest is
// owner-computes: each output element is produced by exactly one thread with
// a fixed inner summation order, so results are bit-identical for any thread
// count or schedule.

namespace tev::nn::kernels {

inline constexpr int kConvBlock = 64; // channel chunk kept in registers

/// out[oy][ox][f] = bias[f] + sum over (ky,kx,c) of in[oy+ky][ox+kx][c] *
/// ker[ky][kx][c][f]; valid padding, stride 1, channel-last.
template <typename T>
void conv2d_forward(const T* in, int H, int W, int C, const T* ker, int K, int F, const T* bias, T* out) {
    const int OH = H - K + 1;
    const int OW = W - K + 1;
#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < OH; ++oy) {
        for (int f0 = 0; f0 < F; f0 += kConvBlock) {
            const int fb = std::min(kConvBlock, F - f0);
            int ox = 0;
            for (; ox + 4 <= OW; ox += 4) {
                T acc0[kConvBlock], acc1[kConvBlock], acc2[kConvBlock], acc3[kConvBlock];
                for (int f = 0; f < fb; ++f) acc0[f] = acc1[f] = acc2[f] = acc3[f] = T(0);
                for (int ky = 0; ky < K; ++ky)
                    for (int kx = 0; kx < K; ++kx) {
                        const T* ip = &in[((static_cast<size_t>(oy + ky)) * W + (ox + kx)) * C];
                        const T* kp = &ker[((static_cast<size_t>(ky) * K + kx) * C) * F + f0];
                        for (int c = 0; c < C; ++c) {
                            const T v0 = ip[c], v1 = ip[C + c], v2 = ip[2 * C + c], v3 = ip[3 * C + c];
                            const T* kr = kp + static_cast<size_t>(c) * F;
#pragma omp simd
                            for (int f = 0; f < fb; ++f) {
                                const T kv = kr[f];
                                acc0[f] += v0 * kv;
                                acc1[f] += v1 * kv;
                                acc2[f] += v2 * kv;
                                acc3[f] += v3 * kv;
                            }
                        }
                    }
                T* op = &out[(static_cast<size_t>(oy) * OW + ox) * F + f0];
                for (int f = 0; f < fb; ++f) {
                    const T bv = bias ? bias[f0 + f] : T(0);
                    op[f] = acc0[f] + bv;
                    op[F + f] = acc1[f] + bv;
                    op[2 * F + f] = acc2[f] + bv;
                    op[3 * F + f] = acc3[f] + bv;
                }
            }
            for (; ox < OW; ++ox) {
                T acc[kConvBlock];
                for (int f = 0; f < fb; ++f) acc[f] = T(0);
                for (int ky = 0; ky < K; ++ky)
                    for (int kx = 0; kx < K; ++kx) {
                        const T* ip = &in[((static_cast<size_t>(oy + ky)) * W + (ox + kx)) * C];
                        const T* kp = &ker[((static_cast<size_t>(ky) * K + kx) * C) * F + f0];
                        for (int c = 0; c < C; ++c) {
                            const T v = ip[c];
                            const T* kr = kp + static_cast<size_t>(c) * F;
#pragma omp simd
                            for (int f = 0; f < fb; ++f) acc[f] += v * kr[f];
                        }
                    }
                T* op = &out[(static_cast<size_t>(oy) * OW + ox) * F + f0];
                for (int f = 0; f < fb; ++f) op[f] = acc[f] + (bias ? bias[f0 + f] : T(0));
            }
        }
    }
}

/// dker[ky][kx][c][f] += sum over output pixels of in * dout; dbias[f] +=
/// column sums of dout. Parallel over kernel rows, which each thread owns.
template <typename T>
void conv2d_weight_grad(const T* in, int H, int W, int C, const T* dout, int K, int F, T* dker, T* dbias) {
    const int OH = H - K + 1;
    const int OW = W - K + 1;
    const int rows = K * K * C;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const int ky = r / (K * C);
        const int kx = (r / C) % K;
        const int c = r % C;
        T* kr = &dker[static_cast<size_t>(r) * F];
        for (int oy = 0; oy < OH; ++oy) {
            const T* ip = &in[((static_cast<size_t>(oy + ky)) * W + kx) * C + c];
            const T* dp = &dout[static_cast<size_t>(oy) * OW * F];
            for (int ox = 0; ox < OW; ++ox) {
                const T v = ip[static_cast<size_t>(ox) * C];
                const T* dr = dp + static_cast<size_t>(ox) * F;
#pragma omp simd
                for (int f = 0; f < F; ++f) kr[f] += v * dr[f];
            }
        }
    }
    if (dbias) {
#pragma omp parallel for schedule(static)
        for (int f = 0; f < F; ++f) {
            T acc = T(0);
            for (size_t i = 0; i < static_cast<size_t>(OH) * OW; ++i) acc += dout[i * F + f];
            dbias[f] += acc;
        }
    }
}

/// din[y][x][c] = sum over valid (ky,kx,f) of dout[y-ky][x-kx][f] *
/// ker[ky][kx][c][f]; gather form, overwrites din.
template <typename T>
void conv2d_input_grad(const T* dout, int OH, int OW, int F, const T* ker, int K, int C, T* din, int H, int W) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            T* dp = &din[(static_cast<size_t>(y) * W + x) * C];
            for (int c = 0; c < C; ++c) dp[c] = T(0);
            const int ky0 = std::max(0, y - OH + 1);
            const int ky1 = std::min(K - 1, y);
            const int kx0 = std::max(0, x - OW + 1);
            const int kx1 = std::min(K - 1, x);
            for (int ky = ky0; ky <= ky1; ++ky)
                for (int kx = kx0; kx <= kx1; ++kx) {
                    const T* dr = &dout[(static_cast<size_t>(y - ky) * OW + (x - kx)) * F];
                    const T* kp = &ker[(static_cast<size_t>(ky) * K + kx) * C * F];
                    for (int c = 0; c < C; ++c) {
                        const T* kr = kp + static_cast<size_t>(c) * F;
                        T acc = T(0);
#pragma omp simd reduction(+ : acc)
                        for (int f = 0; f < F; ++f) acc += dr[f] * kr[f];
                        dp[c] += acc;
                    }
                }
        }
    }
}

/// Non-overlapping 2x2 max; ties go to the first element in row-major order.
/// argmax codes: 0=(0,0) 1=(0,1) 2=(1,0) 3=(1,1).
template <typename T>
void maxpool2_forward(const T* in, int H, int W, int C, T* out, uint8_t* argmax) {
    const int OH = H / 2;
    const int OW = W / 2;
#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox)
            for (int c = 0; c < C; ++c) {
                const size_t base = (static_cast<size_t>(2 * oy) * W + 2 * ox) * C + c;
                T best = in[base];
                uint8_t code = 0;
                const T cands[3] = {in[base + C], in[base + static_cast<size_t>(W) * C],
                                    in[base + static_cast<size_t>(W) * C + C]};
                for (int j = 0; j < 3; ++j)
                    if (cands[j] > best) {
                        best = cands[j];
                        code = static_cast<uint8_t>(j + 1);
                    }
                const size_t oi = (static_cast<size_t>(oy) * OW + ox) * C + c;
                out[oi] = best;
                argmax[oi] = code;
            }
}

template <typename T>
void maxpool2_backward(const T* dout, int OH, int OW, int C, const uint8_t* argmax, T* din) {
    const int W = 2 * OW;
    std::fill(din, din + static_cast<size_t>(4) * OH * OW * C, T(0));
#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox)
            for (int c = 0; c < C; ++c) {
                const size_t oi = (static_cast<size_t>(oy) * OW + ox) * C + c;
                const uint8_t code = argmax[oi];
                const int dy = code >> 1;
                const int dx = code & 1;
                din[(static_cast<size_t>(2 * oy + dy) * W + (2 * ox + dx)) * C + c] = dout[oi];
            }
}

/// C[m x n] = A[m x k] * B[n x k]^T, optionally accumulating.
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int m, int n, int k, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int j0 = 0; j0 < n; j0 += 32) {
        const int jb = std::min(32, n - j0);
        for (int i = 0; i < m; ++i) {
            const T* ar = a + static_cast<size_t>(i) * k;
            int j = 0;
            for (; j + 4 <= jb; j += 4) {
                const T* b0 = b + static_cast<size_t>(j0 + j) * k;
                const T* b1 = b0 + k;
                const T* b2 = b1 + k;
                const T* b3 = b2 + k;
                T s0 = T(0), s1 = T(0), s2 = T(0), s3 = T(0);
#pragma omp simd reduction(+ : s0, s1, s2, s3)
                for (int kk = 0; kk < k; ++kk) {
                    const T av = ar[kk];
                    s0 += av * b0[kk];
                    s1 += av * b1[kk];
                    s2 += av * b2[kk];
                    s3 += av * b3[kk];
                }
                T* cr = c + static_cast<size_t>(i) * n + j0 + j;
                if (accumulate) {
                    cr[0] += s0; cr[1] += s1; cr[2] += s2; cr[3] += s3;
                } else {
                    cr[0] = s0; cr[1] = s1; cr[2] = s2; cr[3] = s3;
                }
            }
            for (; j < jb; ++j) {
                const T* br = b + static_cast<size_t>(j0 + j) * k;
                T s = T(0);
#pragma omp simd reduction(+ : s)
                for (int kk = 0; kk < k; ++kk) s += ar[kk] * br[kk];
                T* cr = c + static_cast<size_t>(i) * n + j0 + j;
                if (accumulate) *cr += s; else *cr = s;
            }
        }
    }
}

/// C[m x n] += A[k x m]^T * B[k x n]; row tiles of C are thread-owned.
template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, int m, int n, int k) {
#pragma omp parallel for schedule(static)
    for (int i0 = 0; i0 < m; i0 += 8) {
        const int ib = std::min(8, m - i0);
        for (int kk = 0; kk < k; ++kk) {
            const T* br = b + static_cast<size_t>(kk) * n;
            for (int i = 0; i < ib; ++i) {
                const T av = a[static_cast<size_t>(kk) * m + i0 + i];
                if (av == T(0)) continue;
                T* cr = c + static_cast<size_t>(i0 + i) * n;
#pragma omp simd
                for (int j = 0; j < n; ++j) cr[j] += av * br[j];
            }
        }
    }
}

/// C[m x n] = A[m x k] * B[k x n]; column blocks of C are thread-owned.
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int m, int n, int k) {
#pragma omp parallel for schedule(static)
    for (int j0 = 0; j0 < n; j0 += 4096) {
        const int jb = std::min(4096, n - j0);
        for (int i = 0; i < m; ++i) {
            T* cr = c + static_cast<size_t>(i) * n + j0;
            for (int j = 0; j < jb; ++j) cr[j] = T(0);
            const T* ar = a + static_cast<size_t>(i) * k;
            for (int kk = 0; kk < k; ++kk) {
                const T av = ar[kk];
                if (av == T(0)) continue;
                const T* br = b + static_cast<size_t>(kk) * n + j0;
#pragma omp simd
                for (int j = 0; j < jb; ++j) cr[j] += av * br[j];
            }
        }
    }
}

/// y[m] = W[m x n] * x[n] (+ y if accumulating).
template <typename T>
void gemv(const T* w, const T* x, T* y, int m, int n, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const T* wr = w + static_cast<size_t>(i) * n;
        T s = T(0);
#pragma omp simd reduction(+ : s)
        for (int j = 0; j < n; ++j) s += wr[j] * x[j];
        if (accumulate) y[i] += s; else y[i] = s;
    }
}

/// y[n] += W[m x n]^T * x[m]. Serial accumulation in row order.
template <typename T>
void gemv_t_acc(const T* w, const T* x, T* y, int m, int n) {
    for (int i = 0; i < m; ++i) {
        const T xv = x[i];
        if (xv == T(0)) continue;
        const T* wr = w + static_cast<size_t>(i) * n;
#pragma omp simd
        for (int j = 0; j < n; ++j) y[j] += xv * wr[j];
    }
}

} // namespace tev::nn::kernels
