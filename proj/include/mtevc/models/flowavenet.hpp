// Copyright 2026 The mtevc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "mtevc/autodiff/adam.hpp"
#include "mtevc/autodiff/nn_ops.hpp"
#include "mtevc/autodiff/ops.hpp"
#include "mtevc/autodiff/params.hpp"
#include "mtevc/dsp/waveform.hpp"
#include "mtevc/error.hpp"
#include "mtevc/rng.hpp"

namespace mtevc::models {

struct FlowConfig {
  int blocks = 8;           // context blocks, each starts with a squeeze
  int flows_per_block = 6;  // flow = actnorm -> coupling -> change_order
  int coupling_stacks = 2;
  int dilations_per_stack = 3;  // dilations 1, 2, 4, ...
  int coupling_kernel = 3;      // non-causal, same padding
  int coupling_channels = 256;
  int mel_dim = 80;
  int num_speakers = 1;
  int num_emotions = 6;
  int speaker_embed_dim = 16;
  int emotion_embed_dim = 16;
  std::vector<int> upsample_strides = {16, 16};

  int coupling_layers() const { return coupling_stacks * dilations_per_stack; }
  long coupling_dilation(int layer) const {
    return 1L << (layer % dilations_per_stack);
  }
  // Audio channels inside block b (0-based), after its squeeze.
  long channels_at(int b) const { return 1L << (b + 1); }
  long cond_channels_at(int b) const { return mel_dim * channels_at(b); }
  long squeeze_factor() const { return 1L << blocks; }
  long hop() const {
    long h = 1;
    for (int s : upsample_strides) h *= s;
    return h;
  }

  void validate() const {
    if (blocks <= 0 || flows_per_block <= 0 || coupling_stacks <= 0 ||
        dilations_per_stack <= 0 || coupling_channels <= 0 || mel_dim <= 0 ||
        num_speakers <= 0 || num_emotions <= 0 || speaker_embed_dim <= 0 ||
        emotion_embed_dim <= 0)
      throw InvalidInput("flow config: all dimensions must be positive");
    if (coupling_kernel < 1 || coupling_kernel % 2 == 0)
      throw InvalidInput("flow config: coupling kernel must be odd");
    for (int s : upsample_strides)
      if (s <= 0) throw InvalidInput("flow config: bad upsample stride");
  }
};

// y_even = x_even * exp(s) + m, and its exact inverse.
template <class S>
autodiff::Tensor<S> couple_forward_halves(const autodiff::Tensor<S>& x_even,
                                          const autodiff::Tensor<S>& s,
                                          const autodiff::Tensor<S>& m) {
  return autodiff::add(autodiff::mul(x_even, autodiff::exp(s)), m);
}

template <class S>
autodiff::Tensor<S> couple_inverse_halves(const autodiff::Tensor<S>& y_even,
                                          const autodiff::Tensor<S>& s,
                                          const autodiff::Tensor<S>& m) {
  return autodiff::mul(autodiff::sub(y_even, m),
                       autodiff::exp(autodiff::scale(s, S(-1))));
}

template <class S>
struct FlowOutput {
  autodiff::Tensor<S> z;
  autodiff::Tensor<S> logdet;  // scalar, summed over all flows
};

// Flow-based vocoder. Each block squeezes time into channels, then runs
// flows of ActNorm -> affine coupling -> half swap. The coupling scale and
// shift come from one non-causal WaveNet over the identity half, with Mel
// conditioning squeezed in lockstep and per-layer speaker/emotion biases.
// Training maximizes the exact likelihood; sampling inverts the stack.
template <class S>
class FlowModel {
public:
  using Tensor = autodiff::Tensor<S>;

  FlowModel(FlowConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int ch = cfg_.coupling_channels;
    const int K = cfg_.coupling_kernel;
    params_.add("speaker_table",
                autodiff::normal_init<S>(
                    {cfg_.num_speakers, cfg_.speaker_embed_dim}, 0.1, rng));
    params_.add("emotion_table",
                autodiff::normal_init<S>(
                    {cfg_.num_emotions, cfg_.emotion_embed_dim}, 0.1, rng));
    for (int b = 0; b < cfg_.blocks; ++b) {
      const long C = cfg_.channels_at(b);
      const long condC = cfg_.cond_channels_at(b);
      for (int f = 0; f < cfg_.flows_per_block; ++f) {
        const std::string p = flow_prefix(b, f);
        params_.add(p + "an_scale",
                    autodiff::constant_init<S>({C, 1}, 1.0));
        params_.add(p + "an_bias", Tensor::zeros({C, 1}));
        params_.add(p + "front",
                    autodiff::glorot_uniform<S>({ch, C / 2, 1}, C / 2, ch,
                                                rng));
        for (int l = 0; l < cfg_.coupling_layers(); ++l) {
          const std::string q = p + "l" + std::to_string(l);
          params_.add(q + "_conv",
                      autodiff::glorot_uniform<S>({2 * ch, ch, K}, ch * K,
                                                  2 * ch * K, rng));
          params_.add(q + "_cond",
                      autodiff::glorot_uniform<S>({2 * ch, condC, 1}, condC,
                                                  2 * ch, rng));
          params_.add(q + "_spk",
                      autodiff::glorot_uniform<S>(
                          {2 * ch, cfg_.speaker_embed_dim},
                          cfg_.speaker_embed_dim, 2 * ch, rng));
          params_.add(q + "_emo",
                      autodiff::glorot_uniform<S>(
                          {2 * ch, cfg_.emotion_embed_dim},
                          cfg_.emotion_embed_dim, 2 * ch, rng));
          params_.add(q + "_res",
                      autodiff::glorot_uniform<S>({ch, ch, 1}, ch, ch, rng));
          params_.add(q + "_skip",
                      autodiff::glorot_uniform<S>({ch, ch, 1}, ch, ch, rng));
        }
        params_.add(p + "end1",
                    autodiff::glorot_uniform<S>({ch, ch, 1}, ch, ch, rng));
        // Zero head: every flow starts as the identity transform.
        params_.add(p + "end2", Tensor::zeros({C, ch, 1}));
      }
    }
    for (size_t u = 0; u < cfg_.upsample_strides.size(); ++u) {
      const int stride = cfg_.upsample_strides[u];
      const int uk = 2 * stride;
      params_.add("upsample" + std::to_string(u),
                  autodiff::glorot_uniform<S>({cfg_.mel_dim, cfg_.mel_dim, uk},
                                              cfg_.mel_dim * uk,
                                              cfg_.mel_dim * uk, rng));
    }
    params_.add("mel_mean", Tensor::zeros({1, cfg_.mel_dim}), false);
    params_.add("mel_std",
                autodiff::constant_init<S>({1, cfg_.mel_dim}, 1.0), false);
    params_.add("actnorm_ready", Tensor::zeros({1}), false);
  }

  const FlowConfig& config() const { return cfg_; }
  autodiff::ParamStore<S>& params() { return params_; }
  const autodiff::ParamStore<S>& params() const { return params_; }
  long hop() const { return cfg_.hop(); }

  bool actnorm_initialized() const {
    return params_.get("actnorm_ready").values()[0] != S(0);
  }

  void set_mel_normalization(const std::vector<S>& mean,
                             const std::vector<S>& std) {
    if (static_cast<long>(mean.size()) != cfg_.mel_dim ||
        static_cast<long>(std.size()) != cfg_.mel_dim)
      throw ShapeError("mel normalization length mismatch");
    for (S v : std)
      if (v == S(0)) throw SingularityError("mel std contains a zero");
    params_.get("mel_mean").values().assign(mean.begin(), mean.end());
    params_.get("mel_std").values().assign(std.begin(), std.end());
  }

  // Mel frames [frames, mel] to per-sample conditioning [mel, frames*hop].
  Tensor upsample_conditions(const Eigen::MatrixXd& mel) {
    if (mel.rows() == 0 || mel.cols() != cfg_.mel_dim)
      throw ShapeError("upsample_conditions: mel is " +
                       std::to_string(mel.rows()) + "x" +
                       std::to_string(mel.cols()) + ", expected [frames," +
                       std::to_string(cfg_.mel_dim) + "]");
    const auto& mu = params_.get("mel_mean").values();
    const auto& sd = params_.get("mel_std").values();
    autodiff::SVec<S> v(mel.size());
    for (long f = 0; f < mel.rows(); ++f)
      for (int d = 0; d < cfg_.mel_dim; ++d)
        v[d * mel.rows() + f] =
            (static_cast<S>(mel(f, d)) - mu[d]) / sd[d];
    Tensor h = Tensor::from_values({cfg_.mel_dim, mel.rows()}, std::move(v));
    for (size_t u = 0; u < cfg_.upsample_strides.size(); ++u)
      h = autodiff::conv1d_transposed(
          h, params_.get("upsample" + std::to_string(u)),
          cfg_.upsample_strides[u]);
    return h;
  }

  // x [1, T] and cond [mel, T] -> latent z and the accumulated logdet.
  FlowOutput<S> forward(const Tensor& x, const Tensor& cond, int speaker,
                        int emotion) {
    check_inputs(x, cond);
    Tensor h = x;
    Tensor c = cond;
    Tensor logdet = Tensor::from_values({1}, autodiff::SVec<S>{S(0)});
    for (int b = 0; b < cfg_.blocks; ++b) {
      h = autodiff::squeeze2(h);
      c = autodiff::squeeze2(c);
      for (int f = 0; f < cfg_.flows_per_block; ++f) {
        const std::string p = flow_prefix(b, f);
        h = actnorm_forward(p, h, &logdet);
        h = coupling_forward(b, f, h, c, speaker, emotion, &logdet);
        h = change_order(h);
      }
    }
    return {h, logdet};
  }

  // Value-level inverse of forward; gradients are not recorded.
  Tensor inverse(const Tensor& z, const Tensor& cond, int speaker,
                 int emotion) {
    autodiff::NoGradGuard guard;
    if (cond.rank() != 2 || cond.dim(0) != cfg_.mel_dim)
      throw ShapeError("flow inverse: conditioning must be [mel, T]");
    std::vector<Tensor> pyramid(cfg_.blocks);
    Tensor c = cond;
    for (int b = 0; b < cfg_.blocks; ++b) {
      c = autodiff::squeeze2(c);
      pyramid[b] = c;
    }
    Tensor h = z;
    if (h.rank() != 2 || h.dim(0) != cfg_.channels_at(cfg_.blocks - 1))
      throw ShapeError("flow inverse: z has shape " +
                       autodiff::shape_str(h.shape()));
    for (int b = cfg_.blocks - 1; b >= 0; --b) {
      for (int f = cfg_.flows_per_block - 1; f >= 0; --f) {
        const std::string p = flow_prefix(b, f);
        h = change_order(h);
        h = coupling_inverse(b, f, h, pyramid[b], speaker, emotion);
        h = actnorm_inverse(p, h);
      }
      h = autodiff::unsqueeze2(h);
    }
    return h;
  }

  // loss = -log p(x) / T; log p(x) = log N(z; 0, I) + logdet.
  Tensor loss(const FlowOutput<S>& out, long num_samples) {
    return autodiff::scale(
        autodiff::sub(autodiff::gaussian_nll(out.z), out.logdet),
        S(1.0 / static_cast<double>(num_samples)));
  }

  double log_likelihood(const Tensor& x, const Tensor& cond, int speaker,
                        int emotion) {
    autodiff::NoGradGuard guard;
    FlowOutput<S> out = forward(x, cond, speaker, emotion);
    return static_cast<double>(out.logdet.item()) -
           static_cast<double>(autodiff::gaussian_nll(out.z).item());
  }

  // Sets every ActNorm so its outputs on this batch have per-channel mean
  // zero and unit variance, walking flows in order so each sees the
  // already-normalized activations of the previous ones.
  void init_actnorm(const Tensor& x, const Tensor& cond, int speaker,
                    int emotion) {
    autodiff::NoGradGuard guard;
    check_inputs(x, cond);
    Tensor h = x;
    Tensor c = cond;
    for (int b = 0; b < cfg_.blocks; ++b) {
      h = autodiff::squeeze2(h);
      c = autodiff::squeeze2(c);
      for (int f = 0; f < cfg_.flows_per_block; ++f) {
        const std::string p = flow_prefix(b, f);
        set_actnorm_from_stats(p, h);
        h = actnorm_forward(p, h, nullptr);
        h = coupling_forward(b, f, h, c, speaker, emotion, nullptr);
        h = change_order(h);
      }
    }
    params_.get("actnorm_ready").values()[0] = S(1);
  }

  // One likelihood update on a crop; the first call runs the
  // data-dependent ActNorm initialization on that batch.
  double train_step(const std::vector<S>& samples,
                    const Eigen::MatrixXd& mel_crop, int speaker, int emotion,
                    autodiff::Adam<S>& opt) {
    const long T = static_cast<long>(samples.size());
    if (T == 0) throw InvalidInput("flow train_step: empty crop");
    if (mel_crop.rows() * hop() != T)
      throw ShapeError("flow train_step: " + std::to_string(T) +
                       " samples for " + std::to_string(mel_crop.rows()) +
                       " Mel frames (hop " + std::to_string(hop()) + ")");
    Tensor x = Tensor::from_values({1, T}, autodiff::SVec<S>(samples.begin(), samples.end()));
    if (!actnorm_initialized()) {
      Tensor cond0 = upsample_conditions(mel_crop);
      init_actnorm(x, cond0, speaker, emotion);
    }
    params_.zero_grad();
    Tensor cond = upsample_conditions(mel_crop);
    FlowOutput<S> out = forward(x, cond, speaker, emotion);
    Tensor l = loss(out, T);
    double value = static_cast<double>(l.item());
    l.backward();
    opt.step();
    return value;
  }

  // Draws z ~ N(0, prior_scale^2 I) and inverts the flow. One normal draw
  // per output sample, in row-major z order.
  dsp::Waveform sample(const Eigen::MatrixXd& mel, int speaker, int emotion,
                       Rng& rng, double prior_scale = 0.8) {
    if (prior_scale < 0.0)
      throw InvalidInput("sample: prior scale must be non-negative");
    autodiff::NoGradGuard guard;
    Tensor cond = upsample_conditions(mel);
    const long T = cond.dim(1);
    if (T % cfg_.squeeze_factor() != 0)
      throw ShapeError("flow sample: length " + std::to_string(T) +
                       " not divisible by " +
                       std::to_string(cfg_.squeeze_factor()));
    const long C = cfg_.channels_at(cfg_.blocks - 1);
    autodiff::SVec<S> zv(T);
    for (long i = 0; i < T; ++i)
      zv[i] = static_cast<S>(rng.normal() * prior_scale);
    Tensor z = Tensor::from_values({C, T / C}, std::move(zv));
    Tensor x = inverse(z, cond, speaker, emotion);
    dsp::Waveform w;
    w.samples.assign(x.values().begin(), x.values().end());
    return w;
  }

private:
  static std::string flow_prefix(int b, int f) {
    return "b" + std::to_string(b) + "_f" + std::to_string(f) + "_";
  }

  void check_inputs(const Tensor& x, const Tensor& cond) const {
    if (x.rank() != 2 || x.dim(0) != 1)
      throw ShapeError("flow forward: x must be [1, T]");
    const long T = x.dim(1);
    if (T % cfg_.squeeze_factor() != 0)
      throw ShapeError("flow forward: length " + std::to_string(T) +
                       " not divisible by " +
                       std::to_string(cfg_.squeeze_factor()));
    if (cond.rank() != 2 || cond.dim(0) != cfg_.mel_dim || cond.dim(1) != T)
      throw ShapeError("flow forward: conditioning " +
                       autodiff::shape_str(cond.shape()) + " for " +
                       std::to_string(T) + " samples");
  }

  Tensor actnorm_forward(const std::string& p, const Tensor& h,
                         Tensor* logdet) {
    Tensor& scale = params_.get(p + "an_scale");
    for (S v : scale.values())
      if (v == S(0))
        throw SingularityError("actnorm scale has a zero channel");
    Tensor y = autodiff::add_colvec(autodiff::mul_colvec(h, scale),
                                    params_.get(p + "an_bias"));
    if (logdet)
      *logdet = autodiff::add(
          *logdet,
          autodiff::scale(autodiff::sum(autodiff::log_abs(scale)),
                          static_cast<S>(h.dim(1))));
    return y;
  }

  Tensor actnorm_inverse(const std::string& p, const Tensor& y) {
    const Tensor& scale = params_.get(p + "an_scale");
    const Tensor& bias = params_.get(p + "an_bias");
    const long C = y.dim(0);
    autodiff::SVec<S> recip(C), neg(C);
    for (long c = 0; c < C; ++c) {
      if (scale.values()[c] == S(0))
        throw SingularityError("actnorm scale has a zero channel");
      recip[c] = S(1) / scale.values()[c];
      neg[c] = -bias.values()[c];
    }
    return autodiff::mul_colvec(
        autodiff::add_colvec(y, Tensor::from_values({C, 1}, std::move(neg))),
        Tensor::from_values({C, 1}, std::move(recip)));
  }

  void set_actnorm_from_stats(const std::string& p, const Tensor& h) {
    const long C = h.dim(0), T = h.dim(1);
    Tensor& scale = params_.get(p + "an_scale");
    Tensor& bias = params_.get(p + "an_bias");
    for (long c = 0; c < C; ++c) {
      double mean = 0.0, sq = 0.0;
      const S* row = h.data() + c * T;
      for (long t = 0; t < T; ++t) {
        mean += row[t];
        sq += static_cast<double>(row[t]) * row[t];
      }
      mean /= T;
      double var = sq / T - mean * mean;
      if (!(var > 1e-24))
        throw SingularityError("actnorm init: channel " + std::to_string(c) +
                               " has zero variance");
      double sd = std::sqrt(var);
      scale.values()[c] = static_cast<S>(1.0 / sd);
      bias.values()[c] = static_cast<S>(-mean / sd);
    }
  }

  // (s, m) from the coupling network over the identity half.
  std::pair<Tensor, Tensor> coupling_maps(int b, int f, const Tensor& x_odd,
                                          const Tensor& cond, int speaker,
                                          int emotion) {
    const std::string p = flow_prefix(b, f);
    const int ch = cfg_.coupling_channels;
    const long half = cfg_.channels_at(b) / 2;
    Tensor h = autodiff::conv1d(x_odd, params_.get(p + "front"));
    Tensor skip_sum;
    for (int l = 0; l < cfg_.coupling_layers(); ++l) {
      const std::string q = p + "l" + std::to_string(l);
      Tensor pre =
          autodiff::conv1d(h, params_.get(q + "_conv"),
                           cfg_.coupling_dilation(l), autodiff::PadMode::kSame);
      pre = autodiff::add(pre,
                          autodiff::conv1d(cond, params_.get(q + "_cond")));
      pre = autodiff::add_colvec(pre, global_bias(q, speaker, emotion));
      Tensor z = autodiff::mul(
          autodiff::tanh(autodiff::slice_rows(pre, 0, ch)),
          autodiff::sigmoid(autodiff::slice_rows(pre, ch, 2 * ch)));
      Tensor skip = autodiff::conv1d(z, params_.get(q + "_skip"));
      skip_sum = skip_sum.defined() ? autodiff::add(skip_sum, skip) : skip;
      h = autodiff::add(h, autodiff::conv1d(z, params_.get(q + "_res")));
    }
    Tensor e = autodiff::relu(skip_sum);
    e = autodiff::relu(autodiff::conv1d(e, params_.get(p + "end1")));
    Tensor sm = autodiff::conv1d(e, params_.get(p + "end2"));
    return {autodiff::slice_rows(sm, 0, half),
            autodiff::slice_rows(sm, half, 2 * half)};
  }

  Tensor coupling_forward(int b, int f, const Tensor& x, const Tensor& cond,
                          int speaker, int emotion, Tensor* logdet) {
    const long C = x.dim(0);
    if (C % 2 != 0) throw ShapeError("coupling: odd channel count");
    Tensor x_odd = autodiff::slice_rows(x, 0, C / 2);
    Tensor x_even = autodiff::slice_rows(x, C / 2, C);
    auto [s, m] = coupling_maps(b, f, x_odd, cond, speaker, emotion);
    Tensor y_even = couple_forward_halves(x_even, s, m);
    if (logdet) *logdet = autodiff::add(*logdet, autodiff::sum(s));
    return autodiff::concat_rows(x_odd, y_even);
  }

  Tensor coupling_inverse(int b, int f, const Tensor& y, const Tensor& cond,
                          int speaker, int emotion) {
    const long C = y.dim(0);
    if (C % 2 != 0) throw ShapeError("coupling: odd channel count");
    Tensor y_odd = autodiff::slice_rows(y, 0, C / 2);
    Tensor y_even = autodiff::slice_rows(y, C / 2, C);
    auto [s, m] = coupling_maps(b, f, y_odd, cond, speaker, emotion);
    return autodiff::concat_rows(y_odd, couple_inverse_halves(y_even, s, m));
  }

  Tensor change_order(const Tensor& x) {
    const long C = x.dim(0);
    if (C % 2 != 0) throw ShapeError("change_order: odd channel count");
    return autodiff::concat_rows(autodiff::slice_rows(x, C / 2, C),
                                 autodiff::slice_rows(x, 0, C / 2));
  }

  Tensor global_bias(const std::string& q, int speaker, int emotion) {
    Tensor es = autodiff::transpose(autodiff::embedding_rows(
        params_.get("speaker_table"), std::vector<int>{speaker}));
    Tensor ee = autodiff::transpose(autodiff::embedding_rows(
        params_.get("emotion_table"), std::vector<int>{emotion}));
    return autodiff::add(autodiff::matmul(params_.get(q + "_spk"), es),
                         autodiff::matmul(params_.get(q + "_emo"), ee));
  }

  FlowConfig cfg_;
  autodiff::ParamStore<S> params_;
};

}  // namespace mtevc::models
