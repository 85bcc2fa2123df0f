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
#include "mtevc/dsp/mulaw.hpp"
#include "mtevc/dsp/waveform.hpp"
#include "mtevc/error.hpp"
#include "mtevc/rng.hpp"

namespace mtevc::models {

struct WaveNetConfig {
  int cycles = 4;
  int dilations_per_cycle = 6;  // dilations 1, 2, 4, ..., 2^(n-1)
  int kernel = 2;               // causal
  int residual_channels = 256;
  int gate_channels = 256;
  int skip_channels = 256;
  int classes = 256;
  int mel_dim = 80;
  int num_speakers = 1;
  int num_emotions = 6;
  int speaker_embed_dim = 16;
  int emotion_embed_dim = 16;
  std::vector<int> upsample_strides = {16, 16};

  int layers() const { return cycles * dilations_per_cycle; }
  long dilation(int layer) const {
    return 1L << (layer % dilations_per_cycle);
  }
  long hop() const {
    long h = 1;
    for (int s : upsample_strides) h *= s;
    return h;
  }
  // Past samples the current prediction can see, current one included.
  long receptive_field() const {
    long per_cycle = (1L << dilations_per_cycle) - 1;
    return static_cast<long>(cycles) * per_cycle * (kernel - 1) + 1;
  }

  void validate() const {
    if (cycles <= 0 || dilations_per_cycle <= 0 || kernel < 2 ||
        residual_channels <= 0 || gate_channels <= 0 || skip_channels <= 0 ||
        classes <= 0 || mel_dim <= 0 || num_speakers <= 0 ||
        num_emotions <= 0 || speaker_embed_dim <= 0 || emotion_embed_dim <= 0)
      throw InvalidInput("wavenet config: all dimensions must be positive");
    for (int s : upsample_strides)
      if (s <= 0) throw InvalidInput("wavenet config: bad upsample stride");
  }
};

enum class SampleMode { kNaive, kFast };

// Autoregressive vocoder over mu-law classes. Each residual layer runs a
// dilated causal convolution to 2x gate channels, adds 1x1-projected local
// conditioning and broadcast global speaker/emotion projections, applies
// the tanh/sigmoid gate, and feeds residual and skip 1x1 convolutions. The
// skip sum passes relu -> 1x1 -> relu -> 1x1 into class logits.
template <class S>
class WaveNetModel {
public:
  using Tensor = autodiff::Tensor<S>;

  WaveNetModel(WaveNetConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int R = cfg_.residual_channels, G = cfg_.gate_channels;
    const int K = cfg_.kernel, Sk = cfg_.skip_channels;
    params_.add("input_embed",
                autodiff::normal_init<S>({R, cfg_.classes}, 0.1, rng));
    params_.add("speaker_table",
                autodiff::normal_init<S>(
                    {cfg_.num_speakers, cfg_.speaker_embed_dim}, 0.1, rng));
    params_.add("emotion_table",
                autodiff::normal_init<S>(
                    {cfg_.num_emotions, cfg_.emotion_embed_dim}, 0.1, rng));
    for (int l = 0; l < cfg_.layers(); ++l) {
      const std::string p = "layer" + std::to_string(l);
      params_.add(p + "_conv",
                  autodiff::glorot_uniform<S>({2 * G, R, K}, R * K, 2 * G * K,
                                              rng));
      params_.add(p + "_cond",
                  autodiff::glorot_uniform<S>({2 * G, cfg_.mel_dim, 1},
                                              cfg_.mel_dim, 2 * G, rng));
      params_.add(p + "_spk",
                  autodiff::glorot_uniform<S>({2 * G, cfg_.speaker_embed_dim},
                                              cfg_.speaker_embed_dim, 2 * G,
                                              rng));
      params_.add(p + "_emo",
                  autodiff::glorot_uniform<S>({2 * G, cfg_.emotion_embed_dim},
                                              cfg_.emotion_embed_dim, 2 * G,
                                              rng));
      params_.add(p + "_res",
                  autodiff::glorot_uniform<S>({R, G, 1}, G, R, rng));
      params_.add(p + "_skip",
                  autodiff::glorot_uniform<S>({Sk, G, 1}, G, Sk, rng));
    }
    params_.add("head1",
                autodiff::glorot_uniform<S>({Sk, Sk, 1}, Sk, Sk, rng));
    // Zero head: uniform class distribution at initialization.
    params_.add("head2", Tensor::zeros({cfg_.classes, Sk, 1}));
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
  }

  const WaveNetConfig& config() const { return cfg_; }
  autodiff::ParamStore<S>& params() { return params_; }
  const autodiff::ParamStore<S>& params() const { return params_; }

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

  // input_ids[t] is the class of sample t-1 (zero class at the start).
  // cond must span exactly the same T samples.
  Tensor forward_teacher_forced(const std::vector<int>& input_ids,
                                const Tensor& cond, int speaker, int emotion) {
    const long T = static_cast<long>(input_ids.size());
    if (T == 0) throw ShapeError("wavenet forward: empty input");
    if (cond.rank() != 2 || cond.dim(0) != cfg_.mel_dim || cond.dim(1) != T)
      throw ShapeError("wavenet forward: conditioning " +
                       autodiff::shape_str(cond.shape()) + " for " +
                       std::to_string(T) + " samples");
    const int G = cfg_.gate_channels;
    Tensor x = autodiff::embedding_cols(params_.get("input_embed"), input_ids);
    Tensor skip_sum;
    for (int l = 0; l < cfg_.layers(); ++l) {
      const std::string p = "layer" + std::to_string(l);
      Tensor pre = autodiff::conv1d(x, params_.get(p + "_conv"),
                                    cfg_.dilation(l));
      pre = autodiff::add(pre, autodiff::conv1d(cond,
                                                params_.get(p + "_cond")));
      pre = autodiff::add_colvec(pre, global_bias(l, speaker, emotion));
      Tensor z = autodiff::mul(
          autodiff::tanh(autodiff::slice_rows(pre, 0, G)),
          autodiff::sigmoid(autodiff::slice_rows(pre, G, 2 * G)));
      Tensor skip = autodiff::conv1d(z, params_.get(p + "_skip"));
      skip_sum = skip_sum.defined() ? autodiff::add(skip_sum, skip) : skip;
      x = autodiff::add(x, autodiff::conv1d(z, params_.get(p + "_res")));
    }
    Tensor h = autodiff::relu(skip_sum);
    h = autodiff::relu(autodiff::conv1d(h, params_.get("head1")));
    Tensor logits_ct = autodiff::conv1d(h, params_.get("head2"));
    return autodiff::transpose(logits_ct);  // [T, classes]
  }

  // One cross-entropy teacher-forced update over a crop whose targets are
  // mu-law classes; prev_class seeds the shifted input at the crop start.
  double train_step(const std::vector<int>& targets, int prev_class,
                    const Eigen::MatrixXd& mel_crop, int speaker, int emotion,
                    autodiff::Adam<S>& opt) {
    const long T = static_cast<long>(targets.size());
    if (T == 0) throw InvalidInput("wavenet train_step: empty crop");
    if (mel_crop.rows() * hop() != T)
      throw ShapeError("wavenet train_step: " + std::to_string(T) +
                       " samples for " + std::to_string(mel_crop.rows()) +
                       " Mel frames (hop " + std::to_string(hop()) + ")");
    std::vector<int> input_ids(targets.size());
    input_ids[0] = prev_class;
    for (size_t t = 1; t < targets.size(); ++t) input_ids[t] = targets[t - 1];
    params_.zero_grad();
    Tensor cond = upsample_conditions(mel_crop);
    Tensor logits = forward_teacher_forced(input_ids, cond, speaker, emotion);
    Tensor loss = autodiff::cross_entropy_with_logits(logits, targets);
    double value = static_cast<double>(loss.item());
    loss.backward();
    opt.step();
    return value;
  }

  long hop() const { return cfg_.hop(); }

  // Class representing silence, used to seed the autoregression. Matches
  // the mu-law zero class for 256-class models.
  int zero_class() const { return cfg_.classes / 2; }

  // Draws frames*hop samples autoregressively. Both modes consume one
  // uniform draw per step from rng, so a shared seed yields comparable
  // class sequences. classes_out and logit_trace, when given, receive the
  // drawn class ids and the pre-softmax logits of every step.
  dsp::Waveform sample(const Eigen::MatrixXd& mel, int speaker, int emotion,
                       SampleMode mode, Rng& rng, double temperature = 1.0,
                       std::vector<int>* classes_out = nullptr,
                       std::vector<std::vector<double>>* logit_trace = nullptr) {
    if (temperature <= 0.0)
      throw InvalidInput("sample: temperature must be positive");
    autodiff::NoGradGuard guard;
    Tensor cond = upsample_conditions(mel);
    const long T = cond.dim(1);
    std::vector<int> classes;
    classes.reserve(T);
    if (mode == SampleMode::kNaive)
      sample_naive(cond, speaker, emotion, T, rng, temperature, classes,
                   logit_trace);
    else
      sample_fast(cond, speaker, emotion, T, rng, temperature, classes,
                  logit_trace);
    if (classes_out) *classes_out = classes;
    dsp::Waveform w;
    w.sample_rate_hz = 16000;
    w.samples.resize(classes.size());
    for (size_t i = 0; i < classes.size(); ++i)
      w.samples[i] = static_cast<float>(
          dsp::mu_law_dequantize(classes[i], cfg_.classes));
    return w;
  }

private:
  Tensor global_bias(int layer, int speaker, int emotion) {
    const std::string p = "layer" + std::to_string(layer);
    Tensor es = autodiff::transpose(autodiff::embedding_rows(
        params_.get("speaker_table"), std::vector<int>{speaker}));
    Tensor ee = autodiff::transpose(autodiff::embedding_rows(
        params_.get("emotion_table"), std::vector<int>{emotion}));
    return autodiff::add(autodiff::matmul(params_.get(p + "_spk"), es),
                         autodiff::matmul(params_.get(p + "_emo"), ee));
  }

  int draw_class(const std::vector<double>& logits, Rng& rng,
                 double temperature,
                 std::vector<std::vector<double>>* logit_trace) {
    if (logit_trace) logit_trace->push_back(logits);
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (size_t c = 0; c < logits.size(); ++c) {
      p[c] = std::exp((logits[c] - m) / temperature);
      z += p[c];
    }
    double u = rng.uniform() * z;
    double acc = 0.0;
    for (size_t c = 0; c < p.size(); ++c) {
      acc += p[c];
      if (u < acc) return static_cast<int>(c);
    }
    return static_cast<int>(p.size()) - 1;
  }

  // Recomputes the whole prefix each step through the training graph.
  void sample_naive(const Tensor& cond, int speaker, int emotion, long T,
                    Rng& rng, double temperature, std::vector<int>& classes,
                    std::vector<std::vector<double>>* logit_trace) {
    std::vector<int> input_ids;
    input_ids.reserve(T);
    for (long t = 0; t < T; ++t) {
      input_ids.push_back(t == 0 ? zero_class() : classes[t - 1]);
      Tensor logits = forward_teacher_forced(
          input_ids, autodiff::slice_cols(cond, 0, t + 1), speaker, emotion);
      std::vector<double> row(cfg_.classes);
      for (int c = 0; c < cfg_.classes; ++c)
        row[c] = static_cast<double>(logits.values()[t * cfg_.classes + c]);
      classes.push_back(draw_class(row, rng, temperature, logit_trace));
    }
  }

  // Incremental evaluation: per layer a ring buffer keeps the last
  // dilation inputs, so each step costs one pass over the layers.
  void sample_fast(const Tensor& cond, int speaker, int emotion, long T,
                   Rng& rng, double temperature, std::vector<int>& classes,
                   std::vector<std::vector<double>>* logit_trace) {
    using Mat = autodiff::EMat<S>;
    using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
    const int R = cfg_.residual_channels, G = cfg_.gate_channels;
    const int Sk = cfg_.skip_channels, L = cfg_.layers();

    autodiff::CMatMap<S> embed(params_.get("input_embed").data(), R,
                               cfg_.classes);
    autodiff::CMatMap<S> condm(cond.data(), cfg_.mel_dim, T);
    std::vector<Mat> w_past(L), w_cur(L), w_cond(L), w_res(L), w_skip(L);
    std::vector<Vec> gbias(L);
    for (int l = 0; l < L; ++l) {
      const std::string p = "layer" + std::to_string(l);
      const auto& cw = params_.get(p + "_conv");
      w_past[l].resize(2 * G, R);
      w_cur[l].resize(2 * G, R);
      for (int o = 0; o < 2 * G; ++o)
        for (int i = 0; i < R; ++i) {
          w_past[l](o, i) = cw.values()[(o * R + i) * 2 + 0];
          w_cur[l](o, i) = cw.values()[(o * R + i) * 2 + 1];
        }
      w_cond[l] = autodiff::CMatMap<S>(params_.get(p + "_cond").data(), 2 * G,
                                       cfg_.mel_dim);
      w_res[l] = autodiff::CMatMap<S>(params_.get(p + "_res").data(), R, G);
      w_skip[l] = autodiff::CMatMap<S>(params_.get(p + "_skip").data(), Sk, G);
      Tensor gb = global_bias(l, speaker, emotion);
      gbias[l] = autodiff::CVecMap<S>(gb.data(), 2 * G);
    }
    autodiff::CMatMap<S> h1(params_.get("head1").data(), Sk, Sk);
    autodiff::CMatMap<S> h2(params_.get("head2").data(), cfg_.classes, Sk);

    std::vector<Mat> ring(L);
    for (int l = 0; l < L; ++l)
      ring[l] = Mat::Zero(R, cfg_.dilation(l));

    Vec x(R), pre(2 * G), z(G), skip_acc(Sk), hv(Sk);
    std::vector<double> row(cfg_.classes);
    for (long t = 0; t < T; ++t) {
      const int prev = t == 0 ? zero_class() : classes[t - 1];
      x = embed.col(prev);
      skip_acc.setZero();
      for (int l = 0; l < L; ++l) {
        const long d = cfg_.dilation(l);
        const long slot = t % d;
        pre.noalias() = w_cur[l] * x;
        if (t >= d) pre.noalias() += w_past[l] * ring[l].col(slot);
        pre.noalias() += w_cond[l] * condm.col(t);
        pre += gbias[l];
        for (int g = 0; g < G; ++g)
          z[g] = std::tanh(pre[g]) *
                 (S(1) / (S(1) + std::exp(-pre[G + g])));
        ring[l].col(slot) = x;
        skip_acc.noalias() += w_skip[l] * z;
        x.noalias() += w_res[l] * z;
      }
      hv.noalias() = h1 * skip_acc.cwiseMax(S(0));
      Vec logits = h2 * hv.cwiseMax(S(0));
      for (int c = 0; c < cfg_.classes; ++c)
        row[c] = static_cast<double>(logits[c]);
      classes.push_back(draw_class(row, rng, temperature, logit_trace));
    }
  }

  WaveNetConfig cfg_;
  autodiff::ParamStore<S> params_;
};

}  // namespace mtevc::models
