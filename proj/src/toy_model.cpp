// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <sstream>

#include "sdcd/model.hpp"
#include "sdcd/numerics.hpp"

namespace sdcd {

namespace {

constexpr double kLayerNormEps = 1e-5;

struct Block {
  Matrix wq, wk, wv, wo;
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
};

struct Affine {
  Matrix w;
  std::vector<double> b;
};

Matrix random_matrix(SeededRng& rng, std::size_t rows, std::size_t cols, double scale) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

std::vector<double> random_vector(SeededRng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

Block random_block(SeededRng& rng, std::size_t dim) {
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  const std::size_t hidden = 2 * dim;
  Block b;
  b.wq = random_matrix(rng, dim, dim, s);
  b.wk = random_matrix(rng, dim, dim, s);
  b.wv = random_matrix(rng, dim, dim, s);
  b.wo = random_matrix(rng, dim, dim, s);
  b.w1 = random_matrix(rng, dim, hidden, s);
  b.b1 = random_vector(rng, hidden, 0.1);
  b.w2 = random_matrix(rng, hidden, dim, 1.0 / std::sqrt(static_cast<double>(hidden)));
  b.b2 = random_vector(rng, dim, 0.1);
  return b;
}

Matrix matmul(const Matrix& x, const Matrix& w) {
  Matrix out(x.rows(), w.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xi = x.row(i);
    auto oi = out.row(i);
    for (std::size_t k = 0; k < w.rows(); ++k) {
      const double a = xi[k];
      auto wk = w.row(k);
      for (std::size_t j = 0; j < w.cols(); ++j) oi[j] += a * wk[j];
    }
  }
  return out;
}

void add_bias(Matrix& x, const std::vector<double>& b) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
  }
}

Matrix layer_norm(const Matrix& x) {
  Matrix out = x;
  const double n = static_cast<double>(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = out.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (double& v : r) v = (v - mean) * inv;
  }
  return out;
}

double gelu(double x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2 / pi)
  return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

// Multi-head self-attention over the rows of `x`. When `head_maps` is non-null it
// receives one post-softmax [n x n] map per head.
Matrix self_attention(const Matrix& x, const Block& b, std::size_t heads, bool causal,
                      std::vector<Matrix>* head_maps) {
  const std::size_t n = x.rows();
  const std::size_t dim = x.cols();
  const std::size_t hd = dim / heads;
  const Matrix q = matmul(x, b.wq);
  const Matrix k = matmul(x, b.wk);
  const Matrix v = matmul(x, b.wv);
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Matrix concat(n, dim);
  std::vector<double> scores;
  for (std::size_t h = 0; h < heads; ++h) {
    Matrix probs(n, n);
    const std::size_t c0 = h * hd;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t allowed = causal ? i + 1 : n;
      scores.assign(allowed, 0.0);
      for (std::size_t j = 0; j < allowed; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) s += q.at(i, c0 + c) * k.at(j, c0 + c);
        scores[j] = s * scale;
      }
      const ProbVec p = softmax(scores);
      for (std::size_t j = 0; j < allowed; ++j) probs.at(i, j) = p[j];
      for (std::size_t j = 0; j < allowed; ++j) {
        const double pj = p[j];
        for (std::size_t c = 0; c < hd; ++c) concat.at(i, c0 + c) += pj * v.at(j, c0 + c);
      }
    }
    if (head_maps) head_maps->push_back(std::move(probs));
  }
  return matmul(concat, b.wo);
}

void block_forward(Matrix& x, const Block& b, std::size_t heads, bool causal,
                   std::vector<Matrix>* head_maps) {
  const Matrix attn = self_attention(layer_norm(x), b, heads, causal, head_maps);
  for (std::size_t i = 0; i < x.data().size(); ++i) x.data()[i] += attn.data()[i];
  Matrix hidden = matmul(layer_norm(x), b.w1);
  add_bias(hidden, b.b1);
  for (double& v : hidden.data()) v = gelu(v);
  Matrix out = matmul(hidden, b.w2);
  add_bias(out, b.b2);
  for (std::size_t i = 0; i < x.data().size(); ++i) x.data()[i] += out.data()[i];
}

double sinusoid(std::size_t pos, std::size_t c, std::size_t dim) {
  const double rate = std::pow(10000.0, -static_cast<double>(2 * (c / 2)) / static_cast<double>(dim));
  const double a = static_cast<double>(pos) * rate;
  return (c % 2 == 0) ? std::sin(a) : std::cos(a);
}

}  // namespace

struct ToyModel::Weights {
  Matrix patch_embed;  // input_dim x dim
  Matrix patch_pos;    // patches x dim
  std::vector<Block> encoder;
  std::vector<Affine> linear_encoder;
  Affine projector;
  Matrix token_embed;  // vocab x dim
  std::vector<Block> decoder;
  Matrix unembed;  // dim x vocab
};

void ToyModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument("toy model config: " + msg); };
  if (encoder_layers < 2) fail("encoder_layers must be >= 2");
  if (decoder_layers < 1) fail("decoder_layers must be >= 1");
  if (heads < 1) fail("heads must be >= 1");
  if (patches < 1) fail("patches must be >= 1");
  if (dim < 1) fail("dim must be >= 1");
  if (dim % heads != 0) fail("dim must be divisible by heads");
  if (vocab < 1) fail("vocab must be >= 1");
  if (eos >= vocab) fail("eos token must be inside the vocabulary");
}

ToyModel::ToyModel(const ToyModelConfig& config) : config_(config), weights_(std::make_unique<Weights>()) {
  config_.validate();
  SeededRng rng(config_.seed);
  const std::size_t dim = config_.dim;
  const std::size_t in = config_.effective_input_dim();
  auto& w = *weights_;
  w.patch_embed = random_matrix(rng, in, dim, 1.0 / std::sqrt(static_cast<double>(in)));
  w.patch_pos = random_matrix(rng, config_.patches, dim, 0.1);
  for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
    if (config_.encoder_kind == EncoderKind::transformer) {
      w.encoder.push_back(random_block(rng, dim));
    } else {
      w.linear_encoder.push_back(Affine{random_matrix(rng, dim, dim, 1.0 / std::sqrt(static_cast<double>(dim))),
                                        random_vector(rng, dim, 0.1)});
    }
  }
  w.projector = Affine{random_matrix(rng, dim, dim, 1.0 / std::sqrt(static_cast<double>(dim))),
                       random_vector(rng, dim, 0.1)};
  w.token_embed = random_matrix(rng, config_.vocab, dim, 1.0);
  for (std::size_t l = 0; l < config_.decoder_layers; ++l) w.decoder.push_back(random_block(rng, dim));
  w.unembed = random_matrix(rng, dim, config_.vocab, 1.0);
}

ToyModel::~ToyModel() = default;

FrameFeatures ToyModel::embed_patches(const FrameFeatures& raw) const {
  const std::size_t in = config_.effective_input_dim();
  if (raw.patches() != config_.patches || raw.dim() != in) {
    throw InvalidArgument("toy model: raw frame shape does not match config");
  }
  FrameFeatures out(raw.frames(), config_.patches, config_.dim);
  for (std::size_t t = 0; t < raw.frames(); ++t) {
    for (std::size_t k = 0; k < config_.patches; ++k) {
      auto src = raw.token(t, k);
      auto dst = out.token(t, k);
      for (std::size_t c = 0; c < config_.dim; ++c) {
        double s = weights_->patch_pos.at(k, c);
        for (std::size_t i = 0; i < in; ++i) s += src[i] * weights_->patch_embed.at(i, c);
        dst[c] = s;
      }
    }
  }
  return out;
}

FrameFeatures ToyModel::encoder_layer(std::size_t layer, const FrameFeatures& h) const {
  if (layer < 1 || layer > config_.encoder_layers) {
    throw InvalidArgument("toy model: encoder layer index out of range");
  }
  if (h.patches() != config_.patches || h.dim() != config_.dim) {
    throw InvalidArgument("toy model: encoder input shape mismatch");
  }
  FrameFeatures out(h.frames(), h.patches(), h.dim());
  for (std::size_t t = 0; t < h.frames(); ++t) {
    Matrix x(h.patches(), h.dim());
    auto src = h.frame(t);
    std::copy(src.begin(), src.end(), x.data().begin());
    if (config_.encoder_kind == EncoderKind::transformer) {
      block_forward(x, weights_->encoder[layer - 1], config_.heads, /*causal=*/false, nullptr);
    } else {
      const Affine& a = weights_->linear_encoder[layer - 1];
      x = matmul(x, a.w);
      add_bias(x, a.b);
    }
    std::copy(x.data().begin(), x.data().end(), out.frame(t).begin());
  }
  return out;
}

FrameFeatures ToyModel::project(const FrameFeatures& final_layer) const {
  FrameFeatures out(final_layer.frames(), final_layer.patches(), config_.dim);
  const Affine& p = weights_->projector;
  for (std::size_t t = 0; t < final_layer.frames(); ++t) {
    for (std::size_t k = 0; k < final_layer.patches(); ++k) {
      auto src = final_layer.token(t, k);
      auto dst = out.token(t, k);
      for (std::size_t c = 0; c < config_.dim; ++c) {
        double s = p.b[c];
        for (std::size_t i = 0; i < src.size(); ++i) s += src[i] * p.w.at(i, c);
        dst[c] = s;
      }
    }
  }
  return out;
}

DecoderOutput ToyModel::forward(const VideoTensor& visual, std::span<const TokenId> query,
                                std::span<const TokenId> generated,
                                std::vector<std::vector<Matrix>>* per_head) const {
  const auto& v = visual.features;
  if (v.frames() == 0 || v.patches() != config_.patches || v.dim() != config_.dim) {
    throw InvalidArgument("toy model: visual tensor shape does not match config");
  }
  validate_tokens(*this, query, "query");
  validate_tokens(*this, generated, "generated");
  if (query.empty() && generated.empty()) {
    throw InvalidArgument("toy model: at least one text token is required");
  }
  const TokenLayout layout = token_layout(v.frames());
  const std::size_t n_visual = layout.visual_count();
  const std::size_t n = n_visual + query.size() + generated.size();
  const std::size_t dim = config_.dim;

  Matrix x(n, dim);
  for (std::size_t t = 0; t < v.frames(); ++t) {
    for (std::size_t k = 0; k < v.patches(); ++k) {
      const std::size_t pos = layout.position(t, k);
      auto src = v.token(t, k);
      for (std::size_t c = 0; c < dim; ++c) x.at(pos, c) = src[c] + sinusoid(pos, c, dim);
    }
  }
  auto put_text = [&](std::size_t pos, TokenId tok) {
    for (std::size_t c = 0; c < dim; ++c) {
      x.at(pos, c) = weights_->token_embed.at(tok, c) + sinusoid(pos, c, dim);
    }
  };
  std::size_t pos = n_visual;
  for (TokenId tok : query) put_text(pos++, tok);
  for (TokenId tok : generated) put_text(pos++, tok);

  DecoderOutput out;
  out.attentions.reserve(config_.decoder_layers);
  for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
    std::vector<Matrix> heads;
    block_forward(x, weights_->decoder[l], config_.heads, /*causal=*/true, &heads);
    Matrix summed(n, n);
    for (const Matrix& h : heads) {
      for (std::size_t i = 0; i < summed.data().size(); ++i) summed.data()[i] += h.data()[i];
    }
    out.attentions.push_back(std::move(summed));
    if (per_head) per_head->push_back(std::move(heads));
  }

  Matrix last(1, dim);
  auto xr = x.row(n - 1);
  std::copy(xr.begin(), xr.end(), last.data().begin());
  const Matrix logits = matmul(layer_norm(last), weights_->unembed);
  out.logits.assign(logits.data().begin(), logits.data().end());
  return out;
}

DecoderOutput ToyModel::decode_step(const VideoTensor& visual, std::span<const TokenId> query,
                                    std::span<const TokenId> generated) const {
  return forward(visual, query, generated, nullptr);
}

std::vector<std::vector<Matrix>> ToyModel::decode_step_per_head(const VideoTensor& visual,
                                                                std::span<const TokenId> query,
                                                                std::span<const TokenId> generated) const {
  std::vector<std::vector<Matrix>> per_head;
  forward(visual, query, generated, &per_head);
  return per_head;
}

std::unique_ptr<ToyModel> toy_model_build(const ToyModelConfig& config) {
  return std::make_unique<ToyModel>(config);
}

}  // namespace sdcd
