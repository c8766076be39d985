#pragma once

// Bi-GRU-CNN binary tweet classifier: forward pass, exact backward pass,
// Adam training loop and prediction.
//
// For one sequence whose first n positions are real tokens (everything from
// the first PAD on is masked):
//
//   embedding       x[t] = E[token_t]                               [n, D]
//   dropout         (train mode only, inverted scaling)
//   conv1d + relu   c[t] = relu(b + sum_k W[:, k, :] x[t + k - (K-1)/2])
//                   with zero vectors outside [0, n)                [n, F]
//   bi-gru          forward states over t = 0..n-1 and backward
//                   states over t = n-1..0, both starting at zero   [n, H] x 2
//   max pooling     p = [max_t fwd[t], max_t bwd[t]]                [2H]
//   dropout         (train mode only)
//   dense+sigmoid   prob = sigmoid(w . p + b)
//
// Parameter shapes (V = vocabulary size):
//
//   embedding                 [V, D]
//   conv_weight               [F, K, D]     conv_bias    [F]
//   gru_{forward,backward}.
//     w_{update,reset,candidate}   [H, F]
//     u_{update,reset,candidate}   [H, H]
//     b_{update,reset,candidate}   [H]
//   dense_weight              [2H]          dense_bias   [1]
//
// GRU cell (reset gate applied before the recurrent product):
//
//   z  = sigmoid(Wz x + Uz h + bz)
//   r  = sigmoid(Wr x + Ur h + br)
//   h~ = tanh(Wc x + Uc (r * h) + bc)
//   h' = (1 - z) * h~ + z * h
//
// An all-PAD sequence has n = 0, pooled features of zero, and therefore
// probability sigmoid(dense_bias).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tweetinfo/corpus.hpp"
#include "tweetinfo/embeddings.hpp"
#include "tweetinfo/ensemble.hpp"
#include "tweetinfo/errors.hpp"
#include "tweetinfo/label.hpp"
#include "tweetinfo/metrics.hpp"
#include "tweetinfo/preprocess.hpp"

namespace tweetinfo {

struct ModelConfig {
  std::size_t max_length = kDefaultMaxLength;
  std::size_t embedding_dim = 300;
  std::size_t conv_filters = 128;
  std::size_t conv_kernel = 3;
  std::size_t gru_hidden = 64;
  double dropout = 0.2;
  double learning_rate = 1e-3;
  std::size_t epochs = 15;
  std::size_t batch_size = 32;
  std::uint64_t seed = 13;
  bool trainable_embeddings = false;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  /// learning_rate == 0 is accepted: it makes training a no-op on the
  /// parameters, which is useful for checking the loop itself.
  void validate() const {
    const auto positive = [](std::size_t v, const char* name) {
      if (v < 1) throw UsageError(std::string(name) + " must be >= 1");
    };
    positive(max_length, "max_length");
    positive(embedding_dim, "embedding_dim");
    positive(conv_filters, "conv_filters");
    positive(conv_kernel, "conv_kernel");
    positive(gru_hidden, "gru_hidden");
    positive(epochs, "epochs");
    positive(batch_size, "batch_size");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must be in [0, 1)");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw UsageError("learning_rate must be finite and >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      throw UsageError("adam betas must be in [0, 1)");
    if (!(adam_epsilon > 0.0)) throw UsageError("adam_epsilon must be > 0");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <class Scalar>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<Scalar> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims)
      : shape(std::move(dims)),
        values(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()),
               Scalar(0)) {}

  std::size_t size() const { return values.size(); }
  Scalar& operator[](std::size_t i) { return values[i]; }
  const Scalar& operator[](std::size_t i) const { return values[i]; }
  Scalar* data() { return values.data(); }
  const Scalar* data() const { return values.data(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

template <class Scalar>
struct GruWeights {
  Tensor<Scalar> w_update, u_update, b_update;
  Tensor<Scalar> w_reset, u_reset, b_reset;
  Tensor<Scalar> w_candidate, u_candidate, b_candidate;

  friend bool operator==(const GruWeights&, const GruWeights&) = default;
};

/// Every trainable tensor of the model. Also used for gradients and Adam
/// moments, which share the layout.
template <class Scalar>
struct Parameters {
  Tensor<Scalar> embedding;
  Tensor<Scalar> conv_weight;
  Tensor<Scalar> conv_bias;
  /// [0] runs forward in time, [1] backward.
  std::array<GruWeights<Scalar>, 2> gru;
  Tensor<Scalar> dense_weight;
  Tensor<Scalar> dense_bias;

  static Parameters zeros(const ModelConfig& c, std::size_t vocab_size) {
    const auto D = c.embedding_dim, F = c.conv_filters, K = c.conv_kernel, H = c.gru_hidden;
    Parameters p;
    p.embedding = Tensor<Scalar>({vocab_size, D});
    p.conv_weight = Tensor<Scalar>({F, K, D});
    p.conv_bias = Tensor<Scalar>({F});
    for (auto& g : p.gru) {
      for (auto* w : {&g.w_update, &g.w_reset, &g.w_candidate}) *w = Tensor<Scalar>({H, F});
      for (auto* u : {&g.u_update, &g.u_reset, &g.u_candidate}) *u = Tensor<Scalar>({H, H});
      for (auto* b : {&g.b_update, &g.b_reset, &g.b_candidate}) *b = Tensor<Scalar>({H});
    }
    p.dense_weight = Tensor<Scalar>({2 * H});
    p.dense_bias = Tensor<Scalar>({1});
    return p;
  }

  /// Tensors in a fixed order matching names().
  std::vector<Tensor<Scalar>*> tensors() { return collect<Tensor<Scalar>>(*this); }
  std::vector<const Tensor<Scalar>*> tensors() const { return collect<const Tensor<Scalar>>(*this); }

  static const std::vector<std::string>& names() {
    static const std::vector<std::string> n = [] {
      std::vector<std::string> out{"embedding", "conv_weight", "conv_bias"};
      for (const char* dir : {"gru_forward.", "gru_backward."}) {
        for (const char* t : {"w_update", "u_update", "b_update", "w_reset", "u_reset", "b_reset",
                              "w_candidate", "u_candidate", "b_candidate"}) {
          out.push_back(std::string(dir) + t);
        }
      }
      out.push_back("dense_weight");
      out.push_back("dense_bias");
      return out;
    }();
    return n;
  }

  friend bool operator==(const Parameters&, const Parameters&) = default;

 private:
  template <class T, class Self>
  static std::vector<T*> collect(Self& p) {
    std::vector<T*> out{&p.embedding, &p.conv_weight, &p.conv_bias};
    for (auto& g : p.gru) {
      for (T* t : {&g.w_update, &g.u_update, &g.b_update, &g.w_reset, &g.u_reset, &g.b_reset,
                   &g.w_candidate, &g.u_candidate, &g.b_candidate}) {
        out.push_back(t);
      }
    }
    out.push_back(&p.dense_weight);
    out.push_back(&p.dense_bias);
    return out;
  }
};

template <class Scalar>
struct ModelState {
  ModelConfig config;
  Vocabulary vocab;
  Parameters<Scalar> params;
  Parameters<Scalar> adam_m;
  Parameters<Scalar> adam_v;
  std::uint64_t adam_step = 0;
};

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits; identical on every
/// platform, unlike the std distributions.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class Scalar>
void glorot_uniform(Tensor<Scalar>& t, std::size_t fan_in, std::size_t fan_out,
                    std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.values) v = static_cast<Scalar>((2.0 * uniform01(rng) - 1.0) * limit);
}

template <class Scalar>
Scalar sigmoid(Scalar a) {
  return Scalar(1) / (Scalar(1) + std::exp(-a));
}

/// -log p(target | logit) for a Bernoulli with sigmoid link, computed stably.
template <class Scalar>
Scalar bce_with_logit(Scalar logit, int target) {
  const Scalar softplus =
      logit > 0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
  return softplus - static_cast<Scalar>(target) * logit;
}

template <class Scalar>
Scalar dot(const Scalar* a, const Scalar* b, std::size_t n) {
  Scalar s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline std::size_t valid_length(std::span<const TokenId> tokens) {
  const auto it = std::find(tokens.begin(), tokens.end(), kPadId);
  return static_cast<std::size_t>(it - tokens.begin());
}

}  // namespace detail

/// Fresh model: embedding rows copied from `table`, Glorot-uniform weights
/// drawn from config.seed, zero biases, zero optimizer state.
template <class Scalar>
ModelState<Scalar> initialize(const ModelConfig& config, const EmbeddingTable& table) {
  config.validate();
  if (table.dim() != config.embedding_dim) {
    throw UsageError("embedding table has dimension " + std::to_string(table.dim()) +
                     " but the model expects " + std::to_string(config.embedding_dim));
  }
  ModelState<Scalar> s;
  s.config = config;
  s.vocab = table.vocab();
  s.params = Parameters<Scalar>::zeros(config, table.size());
  s.adam_m = s.params;
  s.adam_v = s.params;

  for (std::size_t i = 0; i < table.data().size(); ++i)
    s.params.embedding[i] = static_cast<Scalar>(table.data()[i]);

  const auto D = config.embedding_dim, F = config.conv_filters, K = config.conv_kernel,
             H = config.gru_hidden;
  std::mt19937_64 rng(config.seed);
  detail::glorot_uniform(s.params.conv_weight, K * D, F, rng);
  for (auto& g : s.params.gru) {
    for (auto* w : {&g.w_update, &g.w_reset, &g.w_candidate}) detail::glorot_uniform(*w, F, H, rng);
    for (auto* u : {&g.u_update, &g.u_reset, &g.u_candidate}) detail::glorot_uniform(*u, H, H, rng);
  }
  detail::glorot_uniform(s.params.dense_weight, 2 * H, 1, rng);
  return s;
}

/// Intermediate values of one forward pass, kept for the backward pass.
template <class Scalar>
struct ForwardCache {
  struct Direction {
    std::vector<Scalar> update;     // [n, H]
    std::vector<Scalar> reset;      // [n, H]
    std::vector<Scalar> candidate;  // [n, H]
    std::vector<Scalar> hidden;     // [n, H], state after step t
  };

  std::size_t length = 0;
  std::vector<Scalar> embedded;    // [n, D], after dropout
  std::vector<Scalar> embed_mask;  // [n, D], empty without dropout
  std::vector<Scalar> conv_pre;    // [n, F]
  std::vector<Scalar> conv_out;    // [n, F]
  std::array<Direction, 2> gru;
  std::vector<Scalar> pooled;           // [2H]
  std::vector<std::size_t> argmax;      // [2H]
  std::vector<Scalar> pool_mask;        // [2H], empty without dropout
  std::vector<Scalar> features;         // [2H], after dropout
  Scalar logit = 0;
};

namespace detail {

template <class Scalar>
void check_sequence(const ModelConfig& c, std::size_t vocab_size, std::span<const TokenId> tokens) {
  if (tokens.size() != c.max_length) {
    throw DataError("sequence length " + std::to_string(tokens.size()) +
                    " does not match model max_length " + std::to_string(c.max_length));
  }
  for (const auto id : tokens) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw DataError("token index " + std::to_string(id) + " outside vocabulary of size " +
                      std::to_string(vocab_size));
    }
  }
}

template <class Scalar>
void gru_forward(const GruWeights<Scalar>& g, const std::vector<Scalar>& input, std::size_t n,
                 std::size_t F, std::size_t H, bool reverse,
                 typename ForwardCache<Scalar>::Direction& out) {
  out.update.assign(n * H, 0);
  out.reset.assign(n * H, 0);
  out.candidate.assign(n * H, 0);
  out.hidden.assign(n * H, 0);
  std::vector<Scalar> h_prev(H, 0), gated(H, 0);

  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t t = reverse ? n - 1 - s : s;
    const Scalar* x = input.data() + t * F;
    Scalar* z = out.update.data() + t * H;
    Scalar* r = out.reset.data() + t * H;
    Scalar* c = out.candidate.data() + t * H;
    Scalar* h = out.hidden.data() + t * H;

    for (std::size_t j = 0; j < H; ++j) {
      z[j] = sigmoid(g.b_update[j] + dot(g.w_update.data() + j * F, x, F) +
                     dot(g.u_update.data() + j * H, h_prev.data(), H));
      r[j] = sigmoid(g.b_reset[j] + dot(g.w_reset.data() + j * F, x, F) +
                     dot(g.u_reset.data() + j * H, h_prev.data(), H));
    }
    for (std::size_t k = 0; k < H; ++k) gated[k] = r[k] * h_prev[k];
    for (std::size_t j = 0; j < H; ++j) {
      c[j] = std::tanh(g.b_candidate[j] + dot(g.w_candidate.data() + j * F, x, F) +
                       dot(g.u_candidate.data() + j * H, gated.data(), H));
      h[j] = (Scalar(1) - z[j]) * c[j] + z[j] * h_prev[j];
    }
    std::copy(h, h + H, h_prev.begin());
  }
}

/// Back-propagates `d_hidden` ([n, H], gradient w.r.t. every emitted state)
/// through one GRU direction; accumulates into `grad` and `d_input`.
template <class Scalar>
void gru_backward(const GruWeights<Scalar>& g, GruWeights<Scalar>& grad,
                  const std::vector<Scalar>& input,
                  const typename ForwardCache<Scalar>::Direction& cache,
                  const std::vector<Scalar>& d_hidden, std::size_t n, std::size_t F,
                  std::size_t H, bool reverse, std::vector<Scalar>& d_input) {
  std::vector<Scalar> dh(H, 0), dh_prev(H), d_upd(H), d_rst(H), d_cand(H), d_gated(H), gated(H);
  const std::vector<Scalar> zeros(H, 0);

  for (std::size_t s = n; s-- > 0;) {
    const std::size_t t = reverse ? n - 1 - s : s;
    const Scalar* h_prev =
        s == 0 ? zeros.data() : cache.hidden.data() + (reverse ? t + 1 : t - 1) * H;
    const Scalar* z = cache.update.data() + t * H;
    const Scalar* r = cache.reset.data() + t * H;
    const Scalar* c = cache.candidate.data() + t * H;
    const Scalar* x = input.data() + t * F;

    for (std::size_t j = 0; j < H; ++j) {
      dh[j] += d_hidden[t * H + j];
      const Scalar dz = dh[j] * (h_prev[j] - c[j]);
      const Scalar dc = dh[j] * (Scalar(1) - z[j]);
      dh_prev[j] = dh[j] * z[j];
      d_cand[j] = dc * (Scalar(1) - c[j] * c[j]);
      d_upd[j] = dz * z[j] * (Scalar(1) - z[j]);
    }
    for (std::size_t k = 0; k < H; ++k) {
      gated[k] = r[k] * h_prev[k];
      Scalar acc = 0;
      for (std::size_t j = 0; j < H; ++j) acc += g.u_candidate[j * H + k] * d_cand[j];
      d_gated[k] = acc;
    }
    for (std::size_t k = 0; k < H; ++k) {
      d_rst[k] = d_gated[k] * h_prev[k] * r[k] * (Scalar(1) - r[k]);
      dh_prev[k] += d_gated[k] * r[k];
    }

    Scalar* dx = d_input.data() + t * F;
    for (std::size_t j = 0; j < H; ++j) {
      const Scalar du = d_upd[j], dr = d_rst[j], dc = d_cand[j];
      grad.b_update[j] += du;
      grad.b_reset[j] += dr;
      grad.b_candidate[j] += dc;
      for (std::size_t f = 0; f < F; ++f) {
        grad.w_update[j * F + f] += du * x[f];
        grad.w_reset[j * F + f] += dr * x[f];
        grad.w_candidate[j * F + f] += dc * x[f];
        dx[f] += g.w_update[j * F + f] * du + g.w_reset[j * F + f] * dr +
                 g.w_candidate[j * F + f] * dc;
      }
      for (std::size_t k = 0; k < H; ++k) {
        grad.u_update[j * H + k] += du * h_prev[k];
        grad.u_reset[j * H + k] += dr * h_prev[k];
        grad.u_candidate[j * H + k] += dc * gated[k];
        dh_prev[k] += g.u_update[j * H + k] * du + g.u_reset[j * H + k] * dr;
      }
    }
    dh.swap(dh_prev);
  }
}

}  // namespace detail

/// Logit for one encoded sequence. Dropout masks are drawn from `rng` when it
/// is non-null (train mode); with a null `rng` the pass is deterministic.
template <class Scalar>
Scalar forward_logit(const Parameters<Scalar>& p, const ModelConfig& cfg,
                     std::span<const TokenId> tokens, std::mt19937_64* rng,
                     ForwardCache<Scalar>& cache) {
  const std::size_t D = cfg.embedding_dim, F = cfg.conv_filters, K = cfg.conv_kernel,
                    H = cfg.gru_hidden;
  const std::size_t n = detail::valid_length(tokens);
  const bool drop = rng != nullptr && cfg.dropout > 0.0;
  const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - cfg.dropout));
  const auto sample_mask = [&] {
    return detail::uniform01(*rng) < cfg.dropout ? Scalar(0) : keep_scale;
  };
  cache.length = n;

  cache.embedded.assign(n * D, 0);
  cache.embed_mask.assign(drop ? n * D : 0, 0);
  for (std::size_t t = 0; t < n; ++t) {
    const Scalar* row = p.embedding.data() + static_cast<std::size_t>(tokens[t]) * D;
    for (std::size_t d = 0; d < D; ++d) {
      Scalar v = row[d];
      if (drop) {
        cache.embed_mask[t * D + d] = sample_mask();
        v *= cache.embed_mask[t * D + d];
      }
      cache.embedded[t * D + d] = v;
    }
  }

  const auto left = static_cast<std::ptrdiff_t>((K - 1) / 2);
  cache.conv_pre.assign(n * F, 0);
  cache.conv_out.assign(n * F, 0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      Scalar acc = p.conv_bias[f];
      for (std::size_t k = 0; k < K; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(t + k) - left;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
        acc += detail::dot(p.conv_weight.data() + (f * K + k) * D,
                           cache.embedded.data() + static_cast<std::size_t>(src) * D, D);
      }
      cache.conv_pre[t * F + f] = acc;
      cache.conv_out[t * F + f] = acc > 0 ? acc : Scalar(0);
    }
  }

  for (std::size_t dir = 0; dir < 2; ++dir)
    detail::gru_forward(p.gru[dir], cache.conv_out, n, F, H, dir == 1, cache.gru[dir]);

  cache.pooled.assign(2 * H, 0);
  cache.argmax.assign(2 * H, 0);
  if (n > 0) {
    for (std::size_t dir = 0; dir < 2; ++dir) {
      const auto& hidden = cache.gru[dir].hidden;
      for (std::size_t j = 0; j < H; ++j) {
        std::size_t best = 0;
        for (std::size_t t = 1; t < n; ++t)
          if (hidden[t * H + j] > hidden[best * H + j]) best = t;
        cache.pooled[dir * H + j] = hidden[best * H + j];
        cache.argmax[dir * H + j] = best;
      }
    }
  }

  cache.features = cache.pooled;
  cache.pool_mask.assign(drop ? 2 * H : 0, 0);
  if (drop) {
    for (std::size_t i = 0; i < 2 * H; ++i) {
      cache.pool_mask[i] = sample_mask();
      cache.features[i] *= cache.pool_mask[i];
    }
  }

  cache.logit = p.dense_bias[0] + detail::dot(p.dense_weight.data(), cache.features.data(), 2 * H);
  return cache.logit;
}

/// Accumulates d(objective)/d(params) into `grad` given d(objective)/d(logit)
/// for the pass recorded in `cache`. The embedding gradient is only produced
/// when embeddings are trainable.
template <class Scalar>
void backward_logit(const Parameters<Scalar>& p, const ModelConfig& cfg,
                    std::span<const TokenId> tokens, const ForwardCache<Scalar>& cache,
                    Scalar d_logit, Parameters<Scalar>& grad) {
  const std::size_t D = cfg.embedding_dim, F = cfg.conv_filters, K = cfg.conv_kernel,
                    H = cfg.gru_hidden;
  const std::size_t n = cache.length;

  grad.dense_bias[0] += d_logit;
  std::vector<Scalar> d_pooled(2 * H);
  for (std::size_t i = 0; i < 2 * H; ++i) {
    grad.dense_weight[i] += d_logit * cache.features[i];
    d_pooled[i] = d_logit * p.dense_weight[i];
    if (!cache.pool_mask.empty()) d_pooled[i] *= cache.pool_mask[i];
  }
  if (n == 0) return;

  std::vector<Scalar> d_conv_out(n * F, 0);
  std::vector<Scalar> d_hidden(n * H);
  for (std::size_t dir = 0; dir < 2; ++dir) {
    std::fill(d_hidden.begin(), d_hidden.end(), Scalar(0));
    for (std::size_t j = 0; j < H; ++j)
      d_hidden[cache.argmax[dir * H + j] * H + j] += d_pooled[dir * H + j];
    detail::gru_backward(p.gru[dir], grad.gru[dir], cache.conv_out, cache.gru[dir], d_hidden, n,
                         F, H, dir == 1, d_conv_out);
  }

  const auto left = static_cast<std::ptrdiff_t>((K - 1) / 2);
  const bool embed_grad = cfg.trainable_embeddings;
  std::vector<Scalar> d_embedded(embed_grad ? n * D : 0, 0);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      if (!(cache.conv_pre[t * F + f] > 0)) continue;
      const Scalar g = d_conv_out[t * F + f];
      grad.conv_bias[f] += g;
      for (std::size_t k = 0; k < K; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(t + k) - left;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(n)) continue;
        const auto s = static_cast<std::size_t>(src);
        Scalar* gw = grad.conv_weight.data() + (f * K + k) * D;
        const Scalar* x = cache.embedded.data() + s * D;
        for (std::size_t d = 0; d < D; ++d) gw[d] += g * x[d];
        if (embed_grad) {
          const Scalar* w = p.conv_weight.data() + (f * K + k) * D;
          for (std::size_t d = 0; d < D; ++d) d_embedded[s * D + d] += g * w[d];
        }
      }
    }
  }

  if (embed_grad) {
    for (std::size_t t = 0; t < n; ++t) {
      Scalar* row = grad.embedding.data() + static_cast<std::size_t>(tokens[t]) * D;
      for (std::size_t d = 0; d < D; ++d) {
        const Scalar m = cache.embed_mask.empty() ? Scalar(1) : cache.embed_mask[t * D + d];
        row[d] += d_embedded[t * D + d] * m;
      }
    }
  }
}

/// One probability per sequence. In train mode dropout masks come from `rng`
/// (or from a generator seeded with config.seed when `rng` is null).
template <class Scalar>
std::vector<Scalar> forward(const ModelState<Scalar>& state, std::span<const TokenSequence> batch,
                            bool train_mode, std::mt19937_64* rng = nullptr) {
  std::optional<std::mt19937_64> local;
  if (train_mode && rng == nullptr) rng = &local.emplace(state.config.seed);
  std::vector<Scalar> probs;
  probs.reserve(batch.size());
  ForwardCache<Scalar> cache;
  for (const auto& seq : batch) {
    detail::check_sequence<Scalar>(state.config, state.vocab.size(), seq.tokens);
    probs.push_back(detail::sigmoid(
        forward_logit(state.params, state.config, seq.tokens, train_mode ? rng : nullptr, cache)));
  }
  return probs;
}

/// Mean binary cross-entropy of probabilities against {0,1} targets.
template <class Scalar>
Scalar loss(std::span<const Scalar> probabilities, std::span<const int> targets) {
  if (probabilities.size() != targets.size()) {
    throw DataError("loss: " + std::to_string(probabilities.size()) + " probabilities but " +
                    std::to_string(targets.size()) + " targets");
  }
  if (probabilities.empty()) return 0;
  Scalar total = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const Scalar p = probabilities[i];
    total -= targets[i] ? std::log(p) : std::log1p(-p);
  }
  return total / static_cast<Scalar>(probabilities.size());
}

template <class Scalar>
struct BatchGradient {
  Parameters<Scalar> gradients;
  Scalar loss = 0;
  std::vector<Scalar> probabilities;
};

/// Gradient of the mean binary cross-entropy over the batch. A non-null `rng`
/// enables dropout, consuming it exactly as forward() would.
template <class Scalar>
BatchGradient<Scalar> backward(const ModelState<Scalar>& state,
                               std::span<const TokenSequence> batch, std::span<const int> targets,
                               std::mt19937_64* rng = nullptr) {
  if (batch.size() != targets.size()) {
    throw DataError("backward: " + std::to_string(batch.size()) + " sequences but " +
                    std::to_string(targets.size()) + " targets");
  }
  BatchGradient<Scalar> out;
  out.gradients = Parameters<Scalar>::zeros(state.config, state.vocab.size());
  if (batch.empty()) return out;

  const auto scale = Scalar(1) / static_cast<Scalar>(batch.size());
  ForwardCache<Scalar> cache;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& tokens = batch[i].tokens;
    detail::check_sequence<Scalar>(state.config, state.vocab.size(), tokens);
    const Scalar logit = forward_logit(state.params, state.config, tokens, rng, cache);
    const Scalar prob = detail::sigmoid(logit);
    out.probabilities.push_back(prob);
    out.loss += detail::bce_with_logit(logit, targets[i]) * scale;
    backward_logit(state.params, state.config, tokens, cache,
                   (prob - static_cast<Scalar>(targets[i])) * scale, out.gradients);
  }
  return out;
}

/// One Adam step. Frozen embeddings are skipped. Throws NumericError if any
/// parameter becomes non-finite.
template <class Scalar>
void adam_update(ModelState<Scalar>& state, const Parameters<Scalar>& grads) {
  const auto& c = state.config;
  ++state.adam_step;
  const double step = static_cast<double>(state.adam_step);
  const auto bc1 = static_cast<Scalar>(1.0 - std::pow(c.adam_beta1, step));
  const auto bc2 = static_cast<Scalar>(1.0 - std::pow(c.adam_beta2, step));
  const auto b1 = static_cast<Scalar>(c.adam_beta1), b2 = static_cast<Scalar>(c.adam_beta2);
  const auto lr = static_cast<Scalar>(c.learning_rate), eps = static_cast<Scalar>(c.adam_epsilon);

  auto params = state.params.tensors();
  auto ms = state.adam_m.tensors();
  auto vs = state.adam_v.tensors();
  const auto gs = grads.tensors();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i == 0 && !c.trainable_embeddings) continue;
    auto& p = params[i]->values;
    auto& m = ms[i]->values;
    auto& v = vs[i]->values;
    const auto& g = gs[i]->values;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (Scalar(1) - b1) * g[k];
      v[k] = b2 * v[k] + (Scalar(1) - b2) * g[k] * g[k];
      const Scalar m_hat = m[k] / bc1;
      const Scalar v_hat = v[k] / bc2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
      if (!std::isfinite(p[k])) {
        throw NumericError("parameter '" + Parameters<Scalar>::names()[i] +
                           "' became non-finite at optimizer step " +
                           std::to_string(state.adam_step));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Training and prediction

struct Example {
  TokenSequence sequence;
  Label label;
};

inline std::vector<Example> make_examples(const std::vector<Tweet>& tweets, const Vocabulary& vocab,
                                          std::size_t max_length) {
  std::vector<Example> out;
  out.reserve(tweets.size());
  for (const auto& t : tweets) {
    if (!t.label) throw DataError("tweet '" + t.id + "' has no label");
    out.push_back({encode_text(t.text, vocab, max_length), *t.label});
  }
  return out;
}

/// Every token produced by normalize + tokenize over the tweets.
inline std::unordered_set<std::string> corpus_tokens(const std::vector<Tweet>& tweets) {
  std::unordered_set<std::string> out;
  for (const auto& t : tweets)
    for (auto& tok : tokenize(normalize(t.text))) out.insert(std::move(tok));
  return out;
}

inline Label threshold_label(double probability) {
  return probability >= 0.5 ? Label::kInformative : Label::kUninformative;
}

template <class Scalar>
ConfusionMatrix confusion(const ModelState<Scalar>& state, std::span<const Example> examples) {
  ConfusionMatrix m;
  ForwardCache<Scalar> cache;
  for (const auto& e : examples) {
    detail::check_sequence<Scalar>(state.config, state.vocab.size(), e.sequence.tokens);
    const Scalar logit = forward_logit(state.params, state.config, e.sequence.tokens, nullptr, cache);
    m.add(threshold_label(static_cast<double>(detail::sigmoid(logit))), e.label);
  }
  return m;
}

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> dev_f1;
  std::optional<double> dev_accuracy;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

template <class Scalar>
struct TrainResult {
  /// Parameters from the epoch with the best dev F1 (earliest on ties), or
  /// from the last epoch when there is no dev set.
  ModelState<Scalar> state;
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
};

/// Mini-batch Adam training for config.epochs epochs. Shuffling and dropout
/// draw from one generator seeded by config.seed, so equal inputs give equal
/// traces.
template <class Scalar>
TrainResult<Scalar> train(const ModelConfig& config, const EmbeddingTable& table,
                          std::span<const Example> train_set, std::span<const Example> dev_set,
                          const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  if (train_set.empty()) throw DataError("training set is empty");
  ModelState<Scalar> state = initialize<Scalar>(config, table);
  for (const auto* set : {&train_set, &dev_set})
    for (const auto& e : *set) detail::check_sequence<Scalar>(config, state.vocab.size(), e.sequence.tokens);

  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult<Scalar> result;
  double best_f1 = -1.0;
  std::vector<TokenSequence> batch;
  std::vector<int> targets;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);

    double loss_sum = 0.0;
    for (std::size_t start = 0, b = 1; start < order.size(); start += config.batch_size, ++b) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      targets.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_set[order[i]].sequence);
        targets.push_back(to_target(train_set[order[i]].label));
      }
      auto g = backward(state, std::span<const TokenSequence>(batch), std::span<const int>(targets), &rng);
      if (!std::isfinite(static_cast<double>(g.loss))) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b));
      }
      loss_sum += static_cast<double>(g.loss) * static_cast<double>(end - start);
      adam_update(state, g.gradients);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(train_set.size());
    m.train_accuracy = report_from_matrix("", confusion(state, train_set)).accuracy;
    if (!dev_set.empty()) {
      const auto r = report_from_matrix("", confusion(state, dev_set));
      m.dev_f1 = r.f1;
      m.dev_accuracy = r.accuracy;
    }
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);

    if (!dev_set.empty()) {
      if (*m.dev_f1 > best_f1) {
        best_f1 = *m.dev_f1;
        result.best_epoch = epoch;
        result.state = state;
      }
    } else {
      result.best_epoch = epoch;
    }
  }
  if (dev_set.empty()) result.state = std::move(state);
  return result;
}

struct Prediction {
  std::string id;
  double probability = 0.0;
  Label label = Label::kUninformative;
};

template <class Scalar>
std::vector<Prediction> predict_scored(const ModelState<Scalar>& state,
                                       const std::vector<Tweet>& tweets) {
  std::vector<Prediction> out;
  out.reserve(tweets.size());
  ForwardCache<Scalar> cache;
  for (const auto& t : tweets) {
    const auto seq = encode_text(t.text, state.vocab, state.config.max_length);
    const double p = static_cast<double>(
        detail::sigmoid(forward_logit(state.params, state.config, seq.tokens, nullptr, cache)));
    out.push_back({t.id, p, threshold_label(p)});
  }
  return out;
}

/// Deterministic (dropout off) hard-label predictions keyed by tweet id.
template <class Scalar>
PredictionSet predict(const ModelState<Scalar>& state, const std::vector<Tweet>& tweets,
                      std::string model_name = "bigrucnn") {
  PredictionSet set(std::move(model_name));
  for (auto& p : predict_scored(state, tweets)) set.add(std::move(p.id), p.label);
  return set;
}

}  // namespace tweetinfo
