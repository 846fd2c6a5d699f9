#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "cachecast/forecast/dataset.hpp"
#include "cachecast/rng.hpp"

#if defined(__AVX2__) && defined(__GLIBC__)
#define CACHECAST_HAVE_MVEC 1
#include <immintrin.h>
extern "C" {
__m256 _ZGVdN8v_tanhf(__m256 x);
__m256 _ZGVdN8v_expf(__m256 x);
}
#endif

namespace cachecast {

namespace detail {

// Minimal dense kernels. The inner loop runs over a contiguous dimension and
// auto-vectorizes; rows are processed four at a time so the streamed matrix
// is loaded once per row block instead of once per row. Accumulation order
// per output element matches the naive triple loop. Shapes are row-major.

// C[M x N] += A[M x K] * B[K x N]
template <typename T>
void gemm_nn(const T* __restrict a, const T* __restrict b, T* __restrict c,
             std::size_t m, std::size_t k, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + i * k;
    const T* a1 = a0 + k;
    const T* a2 = a1 + k;
    const T* a3 = a2 + k;
    T* c0 = c + i * n;
    T* c1 = c0 + n;
    T* c2 = c1 + n;
    T* c3 = c2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const T v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        c0[j] += v0 * brow[j];
        c1[j] += v1 * brow[j];
        c2[j] += v2 * brow[j];
        c3[j] += v3 * brow[j];
      }
    }
  }
  for (; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aval = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
    }
  }
}

// C[K x N] += A^T * B where A is [M x K], B is [M x N]
template <typename T>
void gemm_tn(const T* __restrict a, const T* __restrict b, T* __restrict c,
             std::size_t m, std::size_t k, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + i * k;
    const T* a1 = a0 + k;
    const T* a2 = a1 + k;
    const T* a3 = a2 + k;
    const T* b0 = b + i * n;
    const T* b1 = b0 + n;
    const T* b2 = b1 + n;
    const T* b3 = b2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const T v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
      T* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        T acc = crow[j];
        acc += v0 * b0[j];
        acc += v1 * b1[j];
        acc += v2 * b2[j];
        acc += v3 * b3[j];
        crow[j] = acc;
      }
    }
  }
  for (; i < m; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aval = arow[p];
      T* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aval * brow[j];
    }
  }
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// In-place elementwise activations. The float paths lean on glibc's
// vectorized math where available; other scalar types stay on libm.
template <typename T>
void tanh_span(T* p, std::size_t n) {
  std::size_t i = 0;
#ifdef CACHECAST_HAVE_MVEC
  if constexpr (std::is_same_v<T, float>) {
    for (; i + 8 <= n; i += 8)
      _mm256_storeu_ps(p + i, _ZGVdN8v_tanhf(_mm256_loadu_ps(p + i)));
  }
#endif
  for (; i < n; ++i) p[i] = std::tanh(p[i]);
}

template <typename T>
void sigmoid_span(T* p, std::size_t n) {
  std::size_t i = 0;
#ifdef CACHECAST_HAVE_MVEC
  if constexpr (std::is_same_v<T, float>) {
    const __m256 one = _mm256_set1_ps(1.0f);
    for (; i + 8 <= n; i += 8) {
      const __m256 v = _mm256_loadu_ps(p + i);
      const __m256 e = _ZGVdN8v_expf(_mm256_sub_ps(_mm256_setzero_ps(), v));
      _mm256_storeu_ps(p + i, _mm256_div_ps(one, _mm256_add_ps(one, e)));
    }
  }
#endif
  for (; i < n; ++i) p[i] = sigmoid(p[i]);
}

}  // namespace detail

// Gate blocks are laid out [input | forget | candidate | output] along the
// 4H axis of every weight matrix, bias and activation buffer.
template <typename T>
struct LstmParams {
  std::size_t hidden = 0;
  std::vector<T> w_x;     // [kNumFeatures x 4H]
  std::vector<T> w_h;     // [H x 4H]
  std::vector<T> b;       // [4H]
  std::vector<T> w_head;  // [H]
  T b_head = 0;
  // Bumped on every optimizer update; caches remember the value they were
  // built against so backward can reject stale ones.
  std::uint64_t revision = 0;

  std::size_t gate_width() const { return 4 * hidden; }
};

// Glorot-uniform weights, zero biases except the forget gate's (set to 1 so
// early training does not flush the cell state).
template <typename T>
LstmParams<T> init_lstm_params(std::size_t hidden, Rng& rng) {
  LstmParams<T> p;
  p.hidden = hidden;
  const std::size_t g = 4 * hidden;
  p.w_x.resize(kNumFeatures * g);
  p.w_h.resize(hidden * g);
  p.b.assign(g, T(0));
  p.w_head.resize(hidden);

  const double lim_x = std::sqrt(6.0 / double(kNumFeatures + g));
  for (auto& v : p.w_x) v = static_cast<T>(rng.uniform(-lim_x, lim_x));
  const double lim_h = std::sqrt(6.0 / double(hidden + g));
  for (auto& v : p.w_h) v = static_cast<T>(rng.uniform(-lim_h, lim_h));
  for (std::size_t j = hidden; j < 2 * hidden; ++j) p.b[j] = T(1);
  const double lim_head = std::sqrt(6.0 / double(hidden + 1));
  for (auto& v : p.w_head) v = static_cast<T>(rng.uniform(-lim_head, lim_head));
  p.b_head = T(0);
  return p;
}

// Activations recorded by a forward pass; sized for one batch and reused
// across batches. All step buffers are step-major: [step][batch][...].
template <typename T>
struct LstmCache {
  std::size_t batch = 0, steps = 0, hidden = 0;
  std::uint64_t revision = 0;
  std::vector<T> x;       // [W][B][kNumFeatures]
  std::vector<T> gates;   // [W][B][4H], post-activation
  std::vector<T> c;       // [W][B][H]
  std::vector<T> tanh_c;  // [W][B][H]
  std::vector<T> h;       // [W][B][H]
  std::vector<T> h_drop;  // [B][H], final hidden after dropout
  std::vector<T> mask;    // [B][H], empty in inference mode
  std::vector<T> pred;    // [B]

  void resize(std::size_t b, std::size_t w, std::size_t hid) {
    batch = b;
    steps = w;
    hidden = hid;
    x.resize(w * b * kNumFeatures);
    gates.resize(w * b * 4 * hid);
    c.resize(w * b * hid);
    tanh_c.resize(w * b * hid);
    h.resize(w * b * hid);
    h_drop.resize(b * hid);
    pred.resize(b);
  }
};

template <typename T>
struct LstmGrads {
  std::vector<T> w_x, w_h, b, w_head;
  T b_head = 0;
  // Kernel workspace, not a gradient: W_h transposed once per backward call
  // so the hidden-state gradient propagates through the fast row-major GEMM.
  std::vector<T> w_h_t;

  void resize_like(const LstmParams<T>& p) {
    w_x.assign(p.w_x.size(), T(0));
    w_h.assign(p.w_h.size(), T(0));
    b.assign(p.b.size(), T(0));
    w_head.assign(p.w_head.size(), T(0));
    b_head = T(0);
  }
};

// Runs the recurrence over cache.x (already filled, step-major) from zero
// initial state. cache.mask, when non-empty, holds inverted-dropout factors
// (0 or 1/(1-rate)) applied to the final hidden state only.
template <typename T>
void lstm_forward(const LstmParams<T>& params, LstmCache<T>& cache) {
  const std::size_t B = cache.batch, W = cache.steps, H = params.hidden;
  const std::size_t G = 4 * H;
  if (cache.hidden != H || cache.x.size() != W * B * kNumFeatures)
    throw ForecastError(ForecastError::Kind::ShapeMismatch,
                        "forward cache does not match parameter shapes");
  if (!cache.mask.empty() && cache.mask.size() != B * H)
    throw ForecastError(ForecastError::Kind::ShapeMismatch,
                        "dropout mask shape mismatch");
  cache.revision = params.revision;

  for (std::size_t t = 0; t < W; ++t) {
    T* g = cache.gates.data() + t * B * G;
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < G; ++j) g[i * G + j] = params.b[j];
    detail::gemm_nn(cache.x.data() + t * B * kNumFeatures, params.w_x.data(),
                    g, B, kNumFeatures, G);
    if (t > 0)
      detail::gemm_nn(cache.h.data() + (t - 1) * B * H, params.w_h.data(), g,
                      B, H, G);

    const T* c_prev = t > 0 ? cache.c.data() + (t - 1) * B * H : nullptr;
    T* c_t = cache.c.data() + t * B * H;
    T* tc_t = cache.tanh_c.data() + t * B * H;
    T* h_t = cache.h.data() + t * B * H;
    for (std::size_t i = 0; i < B; ++i) {
      T* __restrict row = g + i * G;
      detail::sigmoid_span(row, H);
      detail::sigmoid_span(row + H, H);
      detail::tanh_span(row + 2 * H, H);
      detail::sigmoid_span(row + 3 * H, H);
      T* __restrict ci = c_t + i * H;
      for (std::size_t j = 0; j < H; ++j)
        ci[j] = (c_prev ? row[H + j] * c_prev[i * H + j] : T(0)) +
                row[j] * row[2 * H + j];
      T* __restrict tci = tc_t + i * H;
      std::copy(ci, ci + H, tci);
      detail::tanh_span(tci, H);
      T* __restrict hi = h_t + i * H;
      const T* __restrict orow = row + 3 * H;
      for (std::size_t j = 0; j < H; ++j) hi[j] = orow[j] * tci[j];
    }
  }

  const T* h_last = cache.h.data() + (W - 1) * B * H;
  for (std::size_t i = 0; i < B * H; ++i)
    cache.h_drop[i] = cache.mask.empty() ? h_last[i] : h_last[i] * cache.mask[i];
  for (std::size_t i = 0; i < B; ++i) {
    T acc = params.b_head;
    const T* hrow = cache.h_drop.data() + i * H;
    for (std::size_t j = 0; j < H; ++j) acc += hrow[j] * params.w_head[j];
    cache.pred[i] = acc;
    if (!std::isfinite(static_cast<double>(acc)))
      throw ForecastError(ForecastError::Kind::NonFiniteActivation,
                          "non-finite prediction in forward pass", i);
  }
}

// Exact backpropagation through time. d_pred is dLoss/dprediction per batch
// row; gradients for every parameter are accumulated into `grads` (which is
// reset here). Input gradients are not needed and not computed.
template <typename T>
void lstm_backward(const LstmParams<T>& params, const LstmCache<T>& cache,
                   std::span<const T> d_pred, LstmGrads<T>& grads) {
  const std::size_t B = cache.batch, W = cache.steps, H = params.hidden;
  const std::size_t G = 4 * H;
  if (cache.hidden != H)
    throw ForecastError(ForecastError::Kind::ShapeMismatch,
                        "backward cache does not match parameter shapes");
  if (cache.revision != params.revision)
    throw ForecastError(ForecastError::Kind::StaleCache,
                        "cache was built against different parameter values");
  if (d_pred.size() != B)
    throw ForecastError(ForecastError::Kind::ShapeMismatch,
                        "d_pred length must equal batch size");
  grads.resize_like(params);
  grads.w_h_t.resize(G * H);
  for (std::size_t p = 0; p < H; ++p)
    for (std::size_t j = 0; j < G; ++j)
      grads.w_h_t[j * H + p] = params.w_h[p * G + j];

  std::vector<T> dh(B * H), dc(B * H, T(0)), dgate(B * G);

  for (std::size_t i = 0; i < B; ++i) {
    grads.b_head += d_pred[i];
    const T* hrow = cache.h_drop.data() + i * H;
    T* dhrow = dh.data() + i * H;
    for (std::size_t j = 0; j < H; ++j) {
      grads.w_head[j] += hrow[j] * d_pred[i];
      T v = d_pred[i] * params.w_head[j];
      if (!cache.mask.empty()) v *= cache.mask[i * H + j];
      dhrow[j] = v;
    }
  }

  for (std::size_t t = W; t-- > 0;) {
    const T* g = cache.gates.data() + t * B * G;
    const T* tc = cache.tanh_c.data() + t * B * H;
    const T* c_prev = t > 0 ? cache.c.data() + (t - 1) * B * H : nullptr;
    for (std::size_t i = 0; i < B; ++i) {
      const T* grow = g + i * G;
      T* dgrow = dgate.data() + i * G;
      for (std::size_t j = 0; j < H; ++j) {
        const T gi = grow[j], gf = grow[H + j], gg = grow[2 * H + j],
                go = grow[3 * H + j];
        const T tcv = tc[i * H + j];
        const T dhv = dh[i * H + j];
        const T dcv = dc[i * H + j] + dhv * go * (T(1) - tcv * tcv);
        const T dov = dhv * tcv;
        const T div = dcv * gg;
        const T dgv = dcv * gi;
        const T dfv = c_prev ? dcv * c_prev[i * H + j] : T(0);
        dgrow[j] = div * gi * (T(1) - gi);
        dgrow[H + j] = dfv * gf * (T(1) - gf);
        dgrow[2 * H + j] = dgv * (T(1) - gg * gg);
        dgrow[3 * H + j] = dov * go * (T(1) - go);
        dc[i * H + j] = dcv * gf;
      }
    }

    detail::gemm_tn(cache.x.data() + t * B * kNumFeatures, dgate.data(),
                    grads.w_x.data(), B, kNumFeatures, G);
    if (t > 0)
      detail::gemm_tn(cache.h.data() + (t - 1) * B * H, dgate.data(),
                      grads.w_h.data(), B, H, G);
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < G; ++j) grads.b[j] += dgate[i * G + j];
    if (t > 0) {
      std::fill(dh.begin(), dh.end(), T(0));
      detail::gemm_nn(dgate.data(), grads.w_h_t.data(), dh.data(), B, G, H);
    }
  }
}

}  // namespace cachecast
