#include "peqa/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "peqa/error.hpp"

namespace peqa {
namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename Real>
using Mat = Matrix<Real>;

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

template <typename Real>
Tensor<Real> MakeTensor(std::string name, Eigen::Index rows, Eigen::Index cols,
                        bool trainable) {
  Tensor<Real> t;
  t.name = std::move(name);
  t.value = Mat<Real>::Zero(rows, cols);
  t.grad = Mat<Real>::Zero(rows, cols);
  t.trainable = trainable;
  return t;
}

template <typename Real>
void FillNormal(Tensor<Real>& t, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < t.value.size(); ++i) {
    t.value.data()[i] = static_cast<Real>(dist(rng));
  }
}

template <typename Real>
Linear<Real> MakeLinear(const std::string& name, int in, int out,
                        std::mt19937_64& rng, bool trainable) {
  Linear<Real> lin{MakeTensor<Real>(name + ".weight", in, out, trainable),
                   MakeTensor<Real>(name + ".bias", 1, out, trainable)};
  FillNormal(lin.weight, rng, 1.0 / std::sqrt(static_cast<double>(in)));
  return lin;
}

template <typename Real>
LayerNormParams<Real> MakeLayerNorm(const std::string& name, int d) {
  LayerNormParams<Real> ln{MakeTensor<Real>(name + ".gain", 1, d, false),
                           MakeTensor<Real>(name + ".bias", 1, d, false)};
  ln.gain.value.setOnes();
  return ln;
}

template <typename Real>
AttentionParams<Real> MakeAttention(const std::string& name, int d,
                                    std::mt19937_64& rng) {
  return {MakeLinear<Real>(name + ".query", d, d, rng, false),
          MakeLinear<Real>(name + ".key", d, d, rng, false),
          MakeLinear<Real>(name + ".value", d, d, rng, false),
          MakeLinear<Real>(name + ".output", d, d, rng, false)};
}

template <typename Real>
FeedForwardParams<Real> MakeFeedForward(const std::string& name, int d, int ff,
                                        std::mt19937_64& rng) {
  return {MakeLinear<Real>(name + ".in", d, ff, rng, false),
          MakeLinear<Real>(name + ".out", ff, d, rng, false)};
}

// Each adapter site draws from its own stream so that base weights and the
// other sites are unaffected by which layers carry adapters.
template <typename Real>
AdapterBlock<Real> MakeAdapter(const std::string& name, int d, int b,
                               std::uint64_t seed, int layer, int sublayer) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(layer),
                    static_cast<std::uint32_t>(sublayer), 0xADA7u};
  std::mt19937_64 rng(seq);
  AdapterBlock<Real> block{MakeLinear<Real>(name + ".down", d, b, rng, true),
                           MakeLinear<Real>(name + ".up", b, d, rng, true)};
  block.up.weight.value.setZero();
  return block;
}

// ---------------------------------------------------------------------------
// Differentiable building blocks. Each *Forward fills a cache consumed by the
// matching *Backward, which returns the input gradient and accumulates
// parameter gradients into trainable tensors only.
// ---------------------------------------------------------------------------

template <typename Real>
void Accumulate(Tensor<Real>& t, const Mat<Real>& delta) {
  if (t.trainable) t.grad += delta;
}

template <typename Real>
Mat<Real> LinearForward(const Linear<Real>& lin, const Mat<Real>& x) {
  Mat<Real> y = x * lin.weight.value;
  y.rowwise() += lin.bias.value.row(0);
  return y;
}

template <typename Real>
Mat<Real> LinearBackward(Linear<Real>& lin, const Mat<Real>& x,
                         const Mat<Real>& dy) {
  if (lin.weight.trainable) lin.weight.grad.noalias() += x.transpose() * dy;
  if (lin.bias.trainable) lin.bias.grad += dy.colwise().sum();
  return dy * lin.weight.value.transpose();
}

template <typename Real>
struct LayerNormCache {
  Mat<Real> normalized;
  Vector<Real> inv_std;
};

template <typename Real>
Mat<Real> LayerNormForward(const LayerNormParams<Real>& p, const Mat<Real>& x,
                           LayerNormCache<Real>* cache) {
  const auto rows = x.rows();
  const auto d = static_cast<Real>(x.cols());
  Mat<Real> normalized(rows, x.cols());
  Vector<Real> inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Real mean = x.row(r).sum() / d;
    const auto centered = (x.row(r).array() - mean).matrix();
    const Real var = centered.squaredNorm() / d;
    inv_std[r] = Real(1) / std::sqrt(var + static_cast<Real>(kLayerNormEps));
    normalized.row(r) = centered * inv_std[r];
  }
  Mat<Real> y = (normalized.array().rowwise() * p.gain.value.row(0).array()).matrix();
  y.rowwise() += p.bias.value.row(0);
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename Real>
Mat<Real> LayerNormBackward(LayerNormParams<Real>& p,
                            const LayerNormCache<Real>& c,
                            const Mat<Real>& dy) {
  Accumulate(p.gain, Mat<Real>((dy.array() * c.normalized.array()).colwise().sum()));
  Accumulate(p.bias, Mat<Real>(dy.colwise().sum()));
  const Mat<Real> dnorm = (dy.array().rowwise() * p.gain.value.row(0).array()).matrix();
  const auto d = static_cast<Real>(dy.cols());
  Mat<Real> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const Real mean_d = dnorm.row(r).sum() / d;
    const Real mean_dx = dnorm.row(r).dot(c.normalized.row(r)) / d;
    dx.row(r) = c.inv_std[r] *
                (dnorm.row(r).array() - mean_d - c.normalized.row(r).array() * mean_dx)
                    .matrix();
  }
  return dx;
}

template <typename Real>
struct AttentionCache {
  Mat<Real> query_input, kv_input;
  Mat<Real> q, k, v;
  std::vector<Mat<Real>> probs;  // per head, Tq x Tk
  Mat<Real> context;
};

template <typename Real>
Mat<Real> AttentionForward(const AttentionParams<Real>& p,
                           const Mat<Real>& query_input,
                           const Mat<Real>& kv_input, int heads, bool causal,
                           AttentionCache<Real>* cache) {
  const Mat<Real> q = LinearForward(p.query, query_input);
  const Mat<Real> k = LinearForward(p.key, kv_input);
  const Mat<Real> v = LinearForward(p.value, kv_input);
  const auto tq = q.rows();
  const auto tk = k.rows();
  const auto dh = q.cols() / heads;
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(dh));

  Mat<Real> context(tq, q.cols());
  std::vector<Mat<Real>> probs;
  probs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const auto q_h = q.middleCols(h * dh, dh);
    const auto k_h = k.middleCols(h * dh, dh);
    Mat<Real> scores = (q_h * k_h.transpose()) * scale;
    Mat<Real> prob = Mat<Real>::Zero(tq, tk);
    for (Eigen::Index i = 0; i < tq; ++i) {
      const Eigen::Index visible = causal ? std::min<Eigen::Index>(i + 1, tk) : tk;
      const Real max = scores.row(i).head(visible).maxCoeff();
      Real sum = 0;
      for (Eigen::Index j = 0; j < visible; ++j) {
        prob(i, j) = std::exp(scores(i, j) - max);
        sum += prob(i, j);
      }
      prob.row(i).head(visible) /= sum;
    }
    context.middleCols(h * dh, dh) = prob * v.middleCols(h * dh, dh);
    probs.push_back(std::move(prob));
  }
  Mat<Real> out = LinearForward(p.output, context);
  if (cache != nullptr) {
    cache->query_input = query_input;
    cache->kv_input = kv_input;
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->probs = std::move(probs);
    cache->context = std::move(context);
  }
  return out;
}

template <typename Real>
struct AttentionGrads {
  Mat<Real> query_input;
  Mat<Real> kv_input;
};

template <typename Real>
AttentionGrads<Real> AttentionBackward(AttentionParams<Real>& p,
                                       const AttentionCache<Real>& c,
                                       const Mat<Real>& dout, int heads) {
  const Mat<Real> dcontext = LinearBackward(p.output, c.context, dout);
  const auto dh = c.q.cols() / heads;
  const Real scale = Real(1) / std::sqrt(static_cast<Real>(dh));
  Mat<Real> dq = Mat<Real>::Zero(c.q.rows(), c.q.cols());
  Mat<Real> dk = Mat<Real>::Zero(c.k.rows(), c.k.cols());
  Mat<Real> dv = Mat<Real>::Zero(c.v.rows(), c.v.cols());
  for (int h = 0; h < heads; ++h) {
    const Mat<Real>& prob = c.probs[static_cast<std::size_t>(h)];
    const auto dctx_h = dcontext.middleCols(h * dh, dh);
    const Mat<Real> dprob = dctx_h * c.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh) = prob.transpose() * dctx_h;
    const Vector<Real> row_dot = (dprob.array() * prob.array()).rowwise().sum();
    Mat<Real> dscores =
        (prob.array() * (dprob.array().colwise() - row_dot.array())).matrix() * scale;
    dq.middleCols(h * dh, dh) = dscores * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh) = dscores.transpose() * c.q.middleCols(h * dh, dh);
  }
  AttentionGrads<Real> out;
  out.query_input = LinearBackward(p.query, c.query_input, dq);
  out.kv_input = LinearBackward(p.key, c.kv_input, dk);
  out.kv_input += LinearBackward(p.value, c.kv_input, dv);
  return out;
}

template <typename Real>
struct PointwiseCache {
  Mat<Real> input;
  Mat<Real> pre;
  Mat<Real> hidden;
};

template <typename Real>
Mat<Real> ApplyActivation(Activation act, const Mat<Real>& x) {
  return x.unaryExpr([act](Real v) { return Activate(act, v); });
}

template <typename Real>
Mat<Real> ActivationGrad(Activation act, const Mat<Real>& pre,
                         const Mat<Real>& dy) {
  return (dy.array() *
          pre.unaryExpr([act](Real v) { return ActivateDerivative(act, v); }).array())
      .matrix();
}

template <typename Real>
Mat<Real> FeedForwardForward(const FeedForwardParams<Real>& p,
                             const Mat<Real>& x, PointwiseCache<Real>* cache) {
  Mat<Real> pre = LinearForward(p.in, x);
  Mat<Real> hidden = ApplyActivation(Activation::kGelu, pre);
  Mat<Real> out = LinearForward(p.out, hidden);
  if (cache != nullptr) *cache = {x, std::move(pre), std::move(hidden)};
  return out;
}

template <typename Real>
Mat<Real> FeedForwardBackward(FeedForwardParams<Real>& p,
                              const PointwiseCache<Real>& c,
                              const Mat<Real>& dy) {
  const Mat<Real> dhidden = LinearBackward(p.out, c.hidden, dy);
  return LinearBackward(p.in, c.input,
                        ActivationGrad(Activation::kGelu, c.pre, dhidden));
}

template <typename Real>
Mat<Real> AdapterBlockForward(const AdapterBlock<Real>& p, Activation act,
                              const Mat<Real>& x, PointwiseCache<Real>* cache) {
  Mat<Real> pre = LinearForward(p.down, x);
  Mat<Real> hidden = ApplyActivation(act, pre);
  Mat<Real> out = x + LinearForward(p.up, hidden);
  if (cache != nullptr) *cache = {x, std::move(pre), std::move(hidden)};
  return out;
}

template <typename Real>
Mat<Real> AdapterBlockBackward(AdapterBlock<Real>& p, Activation act,
                               const PointwiseCache<Real>& c,
                               const Mat<Real>& dy) {
  const Mat<Real> dhidden = LinearBackward(p.up, c.hidden, dy);
  return dy + LinearBackward(p.down, c.input, ActivationGrad(act, c.pre, dhidden));
}

// Runs an optional adapter; absent adapters are the identity.
template <typename Real>
Mat<Real> MaybeAdapter(const std::optional<AdapterBlock<Real>>& block,
                       Activation act, const Mat<Real>& x,
                       PointwiseCache<Real>* cache) {
  return block ? AdapterBlockForward(*block, act, x, cache) : x;
}

template <typename Real>
Mat<Real> MaybeAdapterBackward(std::optional<AdapterBlock<Real>>& block,
                               Activation act, const PointwiseCache<Real>& c,
                               const Mat<Real>& dy) {
  return block ? AdapterBlockBackward(*block, act, c, dy) : dy;
}

void CheckIds(const std::vector<int>& ids, const ToyConfig& config,
              const char* what) {
  if (ids.empty() || static_cast<int>(ids.size()) > config.max_seq_len) {
    throw Error(ErrorKind::kDimensionMismatch,
                std::string(what) + " length " + std::to_string(ids.size()) +
                    " outside 1.." + std::to_string(config.max_seq_len));
  }
  for (int id : ids) {
    if (id < 0 || id >= config.vocab_size) {
      throw Error(ErrorKind::kDimensionMismatch,
                  std::string(what) + " token " + std::to_string(id) +
                      " outside the vocabulary");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ToyConfig
// ---------------------------------------------------------------------------

AdapterSet ToyConfig::active_adapters() const {
  return adapters.value_or(AdapterSet::Full(n_encoder_layers, n_decoder_layers));
}

ModelDims ToyConfig::dims(std::int64_t base_total_params) const {
  ModelDims d;
  d.d_model = d_model;
  d.bottleneck = bottleneck;
  d.n_encoder_layers = n_encoder_layers;
  d.n_decoder_layers = n_decoder_layers;
  d.adapters_per_layer = 2;
  d.base_total_params = base_total_params;
  return d;
}

void ToyConfig::Validate() const {
  auto fail = [](const std::string& message) {
    throw Error(ErrorKind::kInvalidConfig, message);
  };
  if (vocab_size < 2) fail("vocab_size must be >= 2");
  if (d_model < 1 || n_heads < 1 || d_ff < 1 || bottleneck < 1 ||
      max_seq_len < 1) {
    fail("model widths must be positive");
  }
  if (n_encoder_layers < 1 || n_decoder_layers < 1) fail("need at least one encoder and one decoder layer");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (adapters && (adapters->n_encoder_layers() != n_encoder_layers ||
                   adapters->n_decoder_layers() != n_decoder_layers)) {
    fail("adapter set was built for a different layer count");
  }
}

// ---------------------------------------------------------------------------
// ToyModel
// ---------------------------------------------------------------------------

template <typename Real>
AdapterParams<Real> AdapterBlock<Real>::params() const {
  AdapterParams<Real> p;
  p.down = down.weight.value;
  p.down_bias = down.bias.value.row(0).transpose();
  p.up = up.weight.value;
  p.up_bias = up.bias.value.row(0).transpose();
  return p;
}

template <typename Real>
struct ToyModel<Real>::Cache {
  struct Encoder {
    AttentionCache<Real> attention;
    PointwiseCache<Real> attention_adapter;
    LayerNormCache<Real> attention_norm;
    PointwiseCache<Real> feed_forward;
    PointwiseCache<Real> feed_forward_adapter;
    LayerNormCache<Real> output_norm;
  };
  struct Decoder {
    AttentionCache<Real> self_attention;
    PointwiseCache<Real> attention_adapter;
    LayerNormCache<Real> self_attention_norm;
    AttentionCache<Real> cross_attention;
    LayerNormCache<Real> cross_attention_norm;
    PointwiseCache<Real> feed_forward;
    PointwiseCache<Real> feed_forward_adapter;
    LayerNormCache<Real> output_norm;
  };
  LayerNormCache<Real> encoder_embedding;
  LayerNormCache<Real> decoder_embedding;
  std::vector<Encoder> encoder;
  std::vector<Decoder> decoder;
  Mat<Real> encoder_output;
  Mat<Real> decoder_output;
  Mat<Real> probs;  // softmax of logits
  std::vector<int> decoder_input;
};

template <typename Real>
ToyModel<Real> ToyModel<Real>::Build(const ToyConfig& config) {
  config.Validate();
  ToyModel model;
  model.config_ = config;
  const int d = config.d_model;
  std::mt19937_64 rng(config.seed);

  model.token_embedding_ = MakeTensor<Real>("embedding.tokens", config.vocab_size, d, false);
  FillNormal(model.token_embedding_, rng, 1.0);
  model.encoder_positions_ = MakeTensor<Real>("encoder.positions", config.max_seq_len, d, false);
  FillNormal(model.encoder_positions_, rng, 1.0);
  model.decoder_positions_ = MakeTensor<Real>("decoder.positions", config.max_seq_len, d, false);
  FillNormal(model.decoder_positions_, rng, 1.0);
  model.encoder_embedding_norm_ = MakeLayerNorm<Real>("encoder.embedding_norm", d);
  model.decoder_embedding_norm_ = MakeLayerNorm<Real>("decoder.embedding_norm", d);

  const AdapterSet active = config.active_adapters();
  for (int i = 0; i < config.n_encoder_layers; ++i) {
    const std::string name = "encoder." + std::to_string(i);
    EncoderLayer<Real> layer;
    layer.self_attention = MakeAttention<Real>(name + ".self_attention", d, rng);
    layer.attention_norm = MakeLayerNorm<Real>(name + ".attention_norm", d);
    layer.feed_forward = MakeFeedForward<Real>(name + ".feed_forward", d, config.d_ff, rng);
    layer.output_norm = MakeLayerNorm<Real>(name + ".output_norm", d);
    model.encoder_.push_back(std::move(layer));
  }
  for (int i = 0; i < config.n_decoder_layers; ++i) {
    const std::string name = "decoder." + std::to_string(i);
    DecoderLayer<Real> layer;
    layer.self_attention = MakeAttention<Real>(name + ".self_attention", d, rng);
    layer.self_attention_norm = MakeLayerNorm<Real>(name + ".self_attention_norm", d);
    layer.cross_attention = MakeAttention<Real>(name + ".cross_attention", d, rng);
    layer.cross_attention_norm = MakeLayerNorm<Real>(name + ".cross_attention_norm", d);
    layer.feed_forward = MakeFeedForward<Real>(name + ".feed_forward", d, config.d_ff, rng);
    layer.output_norm = MakeLayerNorm<Real>(name + ".output_norm", d);
    model.decoder_.push_back(std::move(layer));
  }
  model.output_bias_ = MakeTensor<Real>("output.bias", 1, config.vocab_size, false);

  // Adapters come last and use per-site streams (see MakeAdapter).
  const int b = config.bottleneck;
  for (int global : active.layers()) {
    const bool is_encoder = active.is_encoder_layer(global);
    const int local = is_encoder ? global : global - config.n_encoder_layers;
    const std::string name =
        (is_encoder ? "encoder." : "decoder.") + std::to_string(local);
    auto attention = MakeAdapter<Real>(name + ".attention_adapter", d, b,
                                       config.seed, global, 0);
    auto feed_forward = MakeAdapter<Real>(name + ".feed_forward_adapter", d, b,
                                          config.seed, global, 1);
    if (is_encoder) {
      model.encoder_[local].attention_adapter = std::move(attention);
      model.encoder_[local].feed_forward_adapter = std::move(feed_forward);
    } else {
      model.decoder_[local].attention_adapter = std::move(attention);
      model.decoder_[local].feed_forward_adapter = std::move(feed_forward);
    }
  }
  return model;
}

template <typename Real>
template <typename Self, typename Fn>
void ToyModel<Real>::VisitTensors(Self& self, Fn&& fn) {
  auto linear = [&fn](auto& lin) {
    fn(lin.weight);
    fn(lin.bias);
  };
  auto norm = [&fn](auto& ln) {
    fn(ln.gain);
    fn(ln.bias);
  };
  auto attention = [&linear](auto& a) {
    linear(a.query);
    linear(a.key);
    linear(a.value);
    linear(a.output);
  };
  auto adapter = [&linear](auto& block) {
    if (block) {
      linear(block->down);
      linear(block->up);
    }
  };
  fn(self.token_embedding_);
  fn(self.encoder_positions_);
  fn(self.decoder_positions_);
  norm(self.encoder_embedding_norm_);
  norm(self.decoder_embedding_norm_);
  for (auto& layer : self.encoder_) {
    attention(layer.self_attention);
    adapter(layer.attention_adapter);
    norm(layer.attention_norm);
    linear(layer.feed_forward.in);
    linear(layer.feed_forward.out);
    adapter(layer.feed_forward_adapter);
    norm(layer.output_norm);
  }
  for (auto& layer : self.decoder_) {
    attention(layer.self_attention);
    adapter(layer.attention_adapter);
    norm(layer.self_attention_norm);
    attention(layer.cross_attention);
    norm(layer.cross_attention_norm);
    linear(layer.feed_forward.in);
    linear(layer.feed_forward.out);
    adapter(layer.feed_forward_adapter);
    norm(layer.output_norm);
  }
  fn(self.output_bias_);
}

template <typename Real>
void ToyModel<Real>::ForEachTensor(const std::function<void(Tensor<Real>&)>& fn) {
  VisitTensors(*this, fn);
}

template <typename Real>
void ToyModel<Real>::ForEachTensor(
    const std::function<void(const Tensor<Real>&)>& fn) const {
  VisitTensors(*this, fn);
}

template <typename Real>
Real ToyModel<Real>::RunForward(const Sample& sample, Cache* cache,
                                Matrix<Real>* logits_out) const {
  CheckIds(sample.source, config_, "source");
  CheckIds(sample.target, config_, "target");
  const int heads = config_.n_heads;
  const Activation act = config_.adapter_activation;
  const auto tgt_len = static_cast<Eigen::Index>(sample.target.size());

  std::vector<int> decoder_input{kBosId};
  decoder_input.insert(decoder_input.end(), sample.target.begin(),
                       sample.target.end() - 1);

  auto embed = [this](const std::vector<int>& ids, const Tensor<Real>& positions) {
    Mat<Real> x(static_cast<Eigen::Index>(ids.size()), config_.d_model);
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      x.row(t) = token_embedding_.value.row(ids[static_cast<std::size_t>(t)]) +
                 positions.value.row(t);
    }
    return x;
  };

  if (cache != nullptr) {
    cache->encoder.assign(encoder_.size(), {});
    cache->decoder.assign(decoder_.size(), {});
    cache->decoder_input = decoder_input;
  }

  Mat<Real> x = LayerNormForward(encoder_embedding_norm_,
                                 embed(sample.source, encoder_positions_),
                                 cache ? &cache->encoder_embedding : nullptr);
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    const auto& layer = encoder_[i];
    auto* c = cache ? &cache->encoder[i] : nullptr;
    Mat<Real> a = AttentionForward(layer.self_attention, x, x, heads, false,
                                   c ? &c->attention : nullptr);
    a = MaybeAdapter(layer.attention_adapter, act, a,
                     c ? &c->attention_adapter : nullptr);
    Mat<Real> h = LayerNormForward(layer.attention_norm, Mat<Real>(x + a),
                                   c ? &c->attention_norm : nullptr);
    Mat<Real> f = FeedForwardForward(layer.feed_forward, h,
                                     c ? &c->feed_forward : nullptr);
    f = MaybeAdapter(layer.feed_forward_adapter, act, f,
                     c ? &c->feed_forward_adapter : nullptr);
    x = LayerNormForward(layer.output_norm, Mat<Real>(h + f),
                         c ? &c->output_norm : nullptr);
  }
  const Mat<Real> memory = x;

  Mat<Real> y = LayerNormForward(decoder_embedding_norm_,
                                 embed(decoder_input, decoder_positions_),
                                 cache ? &cache->decoder_embedding : nullptr);
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const auto& layer = decoder_[i];
    auto* c = cache ? &cache->decoder[i] : nullptr;
    Mat<Real> a = AttentionForward(layer.self_attention, y, y, heads, true,
                                   c ? &c->self_attention : nullptr);
    a = MaybeAdapter(layer.attention_adapter, act, a,
                     c ? &c->attention_adapter : nullptr);
    Mat<Real> h1 = LayerNormForward(layer.self_attention_norm, Mat<Real>(y + a),
                                    c ? &c->self_attention_norm : nullptr);
    Mat<Real> cross = AttentionForward(layer.cross_attention, h1, memory, heads,
                                       false, c ? &c->cross_attention : nullptr);
    Mat<Real> h2 = LayerNormForward(layer.cross_attention_norm,
                                    Mat<Real>(h1 + cross),
                                    c ? &c->cross_attention_norm : nullptr);
    Mat<Real> f = FeedForwardForward(layer.feed_forward, h2,
                                     c ? &c->feed_forward : nullptr);
    f = MaybeAdapter(layer.feed_forward_adapter, act, f,
                     c ? &c->feed_forward_adapter : nullptr);
    y = LayerNormForward(layer.output_norm, Mat<Real>(h2 + f),
                         c ? &c->output_norm : nullptr);
  }

  // Output projection shares the token embedding.
  Mat<Real> logits = y * token_embedding_.value.transpose();
  logits.rowwise() += output_bias_.value.row(0);
  Mat<Real> probs(tgt_len, config_.vocab_size);
  Real loss = 0;
  for (Eigen::Index t = 0; t < tgt_len; ++t) {
    const Real max = logits.row(t).maxCoeff();
    probs.row(t) = (logits.row(t).array() - max).exp().matrix();
    const Real sum = probs.row(t).sum();
    probs.row(t) /= sum;
    const int gold = sample.target[static_cast<std::size_t>(t)];
    loss -= logits(t, gold) - max - std::log(sum);
  }
  loss /= static_cast<Real>(tgt_len);

  if (cache != nullptr) {
    cache->encoder_output = memory;
    cache->decoder_output = y;
    cache->probs = std::move(probs);
  }
  if (logits_out != nullptr) *logits_out = std::move(logits);
  return loss;
}

template <typename Real>
void ToyModel<Real>::RunBackward(const Sample& sample, const Cache& cache,
                                 Real scale) {
  const int heads = config_.n_heads;
  const Activation act = config_.adapter_activation;
  const auto tgt_len = static_cast<Eigen::Index>(sample.target.size());

  Mat<Real> dlogits = cache.probs;
  for (Eigen::Index t = 0; t < tgt_len; ++t) {
    dlogits(t, sample.target[static_cast<std::size_t>(t)]) -= Real(1);
  }
  dlogits *= scale / static_cast<Real>(tgt_len);

  Accumulate(token_embedding_, Mat<Real>(dlogits.transpose() * cache.decoder_output));
  Accumulate(output_bias_, Mat<Real>(dlogits.colwise().sum()));
  Mat<Real> dy = dlogits * token_embedding_.value;
  Mat<Real> dmemory = Mat<Real>::Zero(cache.encoder_output.rows(),
                                      cache.encoder_output.cols());
  for (std::size_t i = decoder_.size(); i-- > 0;) {
    auto& layer = decoder_[i];
    const auto& c = cache.decoder[i];
    const Mat<Real> ds3 = LayerNormBackward(layer.output_norm, c.output_norm, dy);
    Mat<Real> dh2 = ds3;
    const Mat<Real> df = MaybeAdapterBackward(layer.feed_forward_adapter, act,
                                              c.feed_forward_adapter, ds3);
    dh2 += FeedForwardBackward(layer.feed_forward, c.feed_forward, df);

    const Mat<Real> ds2 =
        LayerNormBackward(layer.cross_attention_norm, c.cross_attention_norm, dh2);
    Mat<Real> dh1 = ds2;
    auto cross = AttentionBackward(layer.cross_attention, c.cross_attention, ds2, heads);
    dh1 += cross.query_input;
    dmemory += cross.kv_input;

    const Mat<Real> ds1 =
        LayerNormBackward(layer.self_attention_norm, c.self_attention_norm, dh1);
    dy = ds1;
    const Mat<Real> da = MaybeAdapterBackward(layer.attention_adapter, act,
                                              c.attention_adapter, ds1);
    auto self = AttentionBackward(layer.self_attention, c.self_attention, da, heads);
    dy += self.query_input + self.kv_input;
  }
  const Mat<Real> ddec_embed =
      LayerNormBackward(decoder_embedding_norm_, cache.decoder_embedding, dy);

  Mat<Real> dx = dmemory;
  for (std::size_t i = encoder_.size(); i-- > 0;) {
    auto& layer = encoder_[i];
    const auto& c = cache.encoder[i];
    const Mat<Real> ds2 = LayerNormBackward(layer.output_norm, c.output_norm, dx);
    Mat<Real> dh = ds2;
    const Mat<Real> df = MaybeAdapterBackward(layer.feed_forward_adapter, act,
                                              c.feed_forward_adapter, ds2);
    dh += FeedForwardBackward(layer.feed_forward, c.feed_forward, df);
    const Mat<Real> ds1 = LayerNormBackward(layer.attention_norm, c.attention_norm, dh);
    dx = ds1;
    const Mat<Real> da = MaybeAdapterBackward(layer.attention_adapter, act,
                                              c.attention_adapter, ds1);
    auto self = AttentionBackward(layer.self_attention, c.attention, da, heads);
    dx += self.query_input + self.kv_input;
  }
  const Mat<Real> denc_embed =
      LayerNormBackward(encoder_embedding_norm_, cache.encoder_embedding, dx);

  // Embedding tables and positions, only reached if someone unfreezes them.
  auto scatter = [](Tensor<Real>& table, Tensor<Real>& positions,
                    const std::vector<int>& ids, const Mat<Real>& grad) {
    for (Eigen::Index t = 0; t < grad.rows(); ++t) {
      if (table.trainable) table.grad.row(ids[static_cast<std::size_t>(t)]) += grad.row(t);
      if (positions.trainable) positions.grad.row(t) += grad.row(t);
    }
  };
  scatter(token_embedding_, encoder_positions_, sample.source, denc_embed);
  scatter(token_embedding_, decoder_positions_, cache.decoder_input, ddec_embed);
}

template <typename Real>
ForwardResult<Real> ToyModel<Real>::Forward(const Sample& sample) const {
  ForwardResult<Real> out;
  out.loss = RunForward(sample, nullptr, &out.logits);
  return out;
}

template <typename Real>
Real ToyModel<Real>::Loss(std::span<const Sample> batch) const {
  if (batch.empty()) throw Error(ErrorKind::kInvalidConfig, "empty batch");
  Real total = 0;
  for (const auto& sample : batch) total += RunForward(sample, nullptr, nullptr);
  return total / static_cast<Real>(batch.size());
}

template <typename Real>
Real ToyModel<Real>::LossAndGradient(std::span<const Sample> batch) {
  if (batch.empty()) throw Error(ErrorKind::kInvalidConfig, "empty batch");
  ForEachTensor([](Tensor<Real>& t) { t.grad.setZero(); });
  const Real scale = Real(1) / static_cast<Real>(batch.size());
  Real total = 0;
  Cache cache;
  for (const auto& sample : batch) {
    total += RunForward(sample, &cache, nullptr);
    RunBackward(sample, cache, scale);
  }
  return total * scale;
}

template <typename Real>
std::int64_t ToyModel<Real>::trainable_count() const {
  std::int64_t n = 0;
  ForEachTensor([&n](const Tensor<Real>& t) {
    if (t.trainable) n += t.size();
  });
  return n;
}

template <typename Real>
std::int64_t ToyModel<Real>::frozen_count() const {
  std::int64_t n = 0;
  ForEachTensor([&n](const Tensor<Real>& t) {
    if (!t.trainable) n += t.size();
  });
  return n;
}

template <typename Real>
std::vector<Real> ToyModel<Real>::TrainableGradient() const {
  std::vector<Real> out;
  ForEachTensor([&out](const Tensor<Real>& t) {
    if (t.trainable) out.insert(out.end(), t.grad.data(), t.grad.data() + t.grad.size());
  });
  return out;
}

template <typename Real>
FreezeReport ToyModel<Real>::Report() const {
  FreezeReport report;
  ForEachTensor([&report](const Tensor<Real>& t) {
    report.tensors.push_back({t.name, t.trainable, t.size()});
    (t.trainable ? report.trainable_total : report.frozen_total) += t.size();
  });
  report.trainable_percent =
      100.0 * static_cast<double>(report.trainable_total) /
      static_cast<double>(report.trainable_total + report.frozen_total);
  return report;
}

template <typename Real>
void ToyModel<Real>::RandomizeAdapters(std::uint64_t seed, Real scale) {
  std::mt19937_64 rng(seed);
  ForEachTensor([&](Tensor<Real>& t) {
    if (t.trainable) FillNormal(t, rng, static_cast<double>(scale));
  });
}

template struct AdapterBlock<float>;
template struct AdapterBlock<double>;
template class ToyModel<float>;
template class ToyModel<double>;

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

GradCheckReport GradCheck(const ToyModel<double>& model,
                          std::span<const Sample> batch, double eps,
                          double floor) {
  ToyModel<double> work = model;
  work.LossAndGradient(batch);

  GradCheckReport report;
  report.eps = eps;
  report.floor = floor;
  std::vector<Tensor<double>*> tensors;
  work.ForEachTensor([&](Tensor<double>& t) {
    if (t.trainable) {
      tensors.push_back(&t);
    } else {
      report.max_frozen_gradient =
          std::max(report.max_frozen_gradient, t.grad.cwiseAbs().maxCoeff());
    }
  });

  for (Tensor<double>* t : tensors) {
    const Matrix<double> analytic = t->grad;
    for (Eigen::Index i = 0; i < t->value.size(); ++i) {
      double& v = t->value.data()[i];
      const double saved = v;
      v = saved + eps;
      const double plus = work.Loss(batch);
      v = saved - eps;
      const double minus = work.Loss(batch);
      v = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic.data()[i];
      const double err =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (report.checked == 0 || err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_tensor = t->name;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
      ++report.checked;
    }
  }
  return report;
}

}  // namespace peqa
