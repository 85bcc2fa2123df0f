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
#include <string>
#include <vector>

#include "mtevc/autodiff/adam.hpp"
#include "mtevc/autodiff/nn_ops.hpp"
#include "mtevc/autodiff/ops.hpp"
#include "mtevc/autodiff/params.hpp"
#include "mtevc/dsp/dtw.hpp"
#include "mtevc/dsp/spectrogram.hpp"
#include "mtevc/error.hpp"
#include "mtevc/rng.hpp"

namespace mtevc::models {

struct ConversionConfig {
  int mel_dim = 80;
  int ppg_dim = 131;
  bool use_ppg = true;  // false selects the Mel-only variant
  int num_emotions = 6;
  int emotion_embed_dim = 16;
  int dense_units = 256;
  int dense_layers = 2;
  int blstm_layers = 4;
  int blstm_units = 256;  // per direction
  double grad_clip_norm = 5.0;

  int input_dim() const { return mel_dim + (use_ppg ? ppg_dim : 0); }

  void validate() const {
    if (mel_dim <= 0 || ppg_dim <= 0 || num_emotions <= 0 ||
        emotion_embed_dim <= 0 || dense_units <= 0 || dense_layers < 0 ||
        blstm_layers <= 0 || blstm_units <= 0)
      throw InvalidInput("conversion config: all dimensions must be positive");
  }
};

// One aligned training example: source features warped onto the target
// timeline, plus the target emotion id.
struct TrainingPair {
  Eigen::MatrixXd input;   // frames x (mel or mel+ppg)
  Eigen::MatrixXd target;  // frames x mel
  int emotion = 0;
};

// Aligns a source/target utterance pair for training. The warp runs over
// Mel frames with the squared Euclidean distance; each target frame pulls
// the lowest-index source frame paired with it, so targets stay untouched
// ground truth. A PPG matrix, when given, must match the source frame count
// within +-2 frames (both are trimmed to the overlap).
inline TrainingPair prepare_pair(const dsp::MelSpectrogram& src,
                                 const Eigen::MatrixXd* src_ppg,
                                 const dsp::MelSpectrogram& tgt, int emotion) {
  if (src.frames() == 0 || tgt.frames() == 0)
    throw InvalidInput("prepare_pair: empty spectrogram");
  long src_frames = src.frames();
  Eigen::MatrixXd mel = src.values;
  Eigen::MatrixXd ppg;
  if (src_ppg) {
    long diff = src_ppg->rows() - src_frames;
    if (diff > 2 || diff < -2)
      throw AlignmentError(
          "prepare_pair: PPG has " + std::to_string(src_ppg->rows()) +
          " frames for " + std::to_string(src_frames) + " Mel frames");
    long n = std::min<long>(src_ppg->rows(), src_frames);
    mel = src.values.topRows(n);
    ppg = src_ppg->topRows(n);
    src_frames = n;
  }

  auto path = dsp::dtw_align(mel, tgt.values);
  auto warp = dsp::dtw_project_to_second(path, static_cast<int>(tgt.frames()));

  TrainingPair pair;
  pair.emotion = emotion;
  pair.target = tgt.values;
  const long width = mel.cols() + (src_ppg ? ppg.cols() : 0);
  pair.input.resize(tgt.frames(), width);
  for (long j = 0; j < tgt.frames(); ++j) {
    pair.input.block(j, 0, 1, mel.cols()) = mel.row(warp[j]);
    if (src_ppg)
      pair.input.block(j, mel.cols(), 1, ppg.cols()) = ppg.row(warp[j]);
  }
  return pair;
}

// Mel-to-Mel regression model: the target emotion id is embedded, passed
// through a softsign dense layer, broadcast over time and concatenated with
// the per-frame inputs; a dense stack and a bidirectional LSTM stack regress
// the target Mel frames. Inputs and targets are z-scored with statistics
// stored alongside the weights.
template <class S>
class ConversionModel {
public:
  using Tensor = autodiff::Tensor<S>;

  explicit ConversionModel(ConversionConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const int in = cfg_.input_dim();
    const int E = cfg_.emotion_embed_dim;
    const int D = cfg_.dense_units;
    const int H = cfg_.blstm_units;

    params_.add("emotion_table",
                autodiff::normal_init<S>({cfg_.num_emotions, E}, 0.1, rng));
    params_.add("emotion_w", autodiff::glorot_uniform<S>({E, E}, E, E, rng));
    params_.add("emotion_b", Tensor::zeros({1, E}));

    int prev = in + E;
    for (int l = 0; l < cfg_.dense_layers; ++l) {
      const std::string p = "dense" + std::to_string(l);
      params_.add(p + "_w",
                  autodiff::glorot_uniform<S>({prev, D}, prev, D, rng));
      params_.add(p + "_b", Tensor::zeros({1, D}));
      prev = D;
    }
    for (int l = 0; l < cfg_.blstm_layers; ++l) {
      for (const char* dir : {"fwd", "bwd"}) {
        const std::string p =
            "blstm" + std::to_string(l) + "_" + dir;
        params_.add(p + "_wx", autodiff::glorot_uniform<S>({prev, 4 * H},
                                                           prev, 4 * H, rng));
        params_.add(p + "_wh",
                    autodiff::glorot_uniform<S>({H, 4 * H}, H, 4 * H, rng));
        Tensor b = Tensor::zeros({1, 4 * H});
        for (int u = 0; u < H; ++u) b.values()[H + u] = S(1);  // forget gate
        params_.add(p + "_b", std::move(b));
      }
      prev = 2 * H;
    }
    params_.add("proj_w",
                autodiff::glorot_uniform<S>({prev, cfg_.mel_dim}, prev,
                                            cfg_.mel_dim, rng));
    params_.add("proj_b", Tensor::zeros({1, cfg_.mel_dim}));

    params_.add("in_mean", Tensor::zeros({1, in}), false);
    params_.add("in_std", autodiff::constant_init<S>({1, in}, 1.0), false);
    params_.add("out_mean", Tensor::zeros({1, cfg_.mel_dim}), false);
    params_.add("out_std",
                autodiff::constant_init<S>({1, cfg_.mel_dim}, 1.0), false);
  }

  const ConversionConfig& config() const { return cfg_; }
  autodiff::ParamStore<S>& params() { return params_; }
  const autodiff::ParamStore<S>& params() const { return params_; }

  void set_normalization(const std::vector<S>& in_mean,
                         const std::vector<S>& in_std,
                         const std::vector<S>& out_mean,
                         const std::vector<S>& out_std) {
    assign_buffer("in_mean", in_mean);
    assign_buffer("in_std", in_std);
    assign_buffer("out_mean", out_mean);
    assign_buffer("out_std", out_std);
  }

  // Raw per-frame inputs [T, input_dim] to predicted Mel frames [T, mel].
  Tensor forward(const Tensor& input, int emotion) {
    Tensor normed = normalize(input, "in_mean", "in_std");
    Tensor hidden = backbone(normed, emotion);
    return denormalize(hidden);
  }

  // One L1 teacher-forced update. Loss lives in the normalized target
  // domain; the pre-update value is returned.
  double train_step(const TrainingPair& pair, autodiff::Adam<S>& opt) {
    Tensor input = to_tensor(pair.input);
    Tensor target = to_tensor(pair.target);
    params_.zero_grad();
    Tensor normed = normalize(input, "in_mean", "in_std");
    Tensor pred = backbone(normed, pair.emotion);
    Tensor tnorm = normalize(target, "out_mean", "out_std");
    Tensor loss = autodiff::l1_loss(pred, tnorm);
    double value = static_cast<double>(loss.item());
    loss.backward();
    params_.clip_grad_norm(cfg_.grad_clip_norm);
    opt.step();
    return value;
  }

  // Converts raw features and returns the denormalized Mel prediction.
  Eigen::MatrixXd convert(const Eigen::MatrixXd& input, int emotion) {
    autodiff::NoGradGuard guard;
    Tensor out = forward(to_tensor(input), emotion);
    Eigen::MatrixXd result(out.dim(0), out.dim(1));
    for (long r = 0; r < out.dim(0); ++r)
      for (long c = 0; c < out.dim(1); ++c)
        result(r, c) = static_cast<double>(out.values()[r * out.dim(1) + c]);
    return result;
  }

  Tensor to_tensor(const Eigen::MatrixXd& m) const {
    autodiff::SVec<S> v(m.size());
    for (long r = 0; r < m.rows(); ++r)
      for (long c = 0; c < m.cols(); ++c)
        v[r * m.cols() + c] = static_cast<S>(m(r, c));
    return Tensor::from_values({m.rows(), m.cols()}, std::move(v));
  }

private:
  void assign_buffer(const std::string& name, const std::vector<S>& v) {
    auto& t = params_.get(name);
    if (static_cast<long>(v.size()) != t.size())
      throw ShapeError("normalization vector for '" + name + "' has " +
                       std::to_string(v.size()) + " entries, expected " +
                       std::to_string(t.size()));
    t.values().assign(v.begin(), v.end());
  }

  Tensor normalize(const Tensor& x, const char* mean, const char* std) {
    const Tensor& mu = params_.get(mean);
    const Tensor& sd = params_.get(std);
    Tensor centered = autodiff::sub(x, autodiff::tile_rows(mu, x.dim(0)));
    Tensor inv = inverse_rowvec(sd);
    return autodiff::mul(centered, autodiff::tile_rows(inv, x.dim(0)));
  }

  Tensor denormalize(const Tensor& y) {
    const Tensor& mu = params_.get("out_mean");
    const Tensor& sd = params_.get("out_std");
    Tensor scaled = autodiff::mul(y, autodiff::tile_rows(sd, y.dim(0)));
    return autodiff::add(scaled, autodiff::tile_rows(mu, y.dim(0)));
  }

  Tensor inverse_rowvec(const Tensor& sd) {
    autodiff::SVec<S> v(sd.values());
    for (S& x : v) {
      if (x == S(0))
        throw SingularityError("normalization std contains a zero");
      x = S(1) / x;
    }
    return Tensor::from_values(sd.shape(), std::move(v));
  }

  // Normalized inputs [T, in] to normalized Mel prediction [T, mel].
  Tensor backbone(const Tensor& input, int emotion) {
    if (input.rank() != 2 || input.dim(1) != cfg_.input_dim())
      throw ShapeError("conversion forward: input " +
                       autodiff::shape_str(input.shape()) + ", expected [T," +
                       std::to_string(cfg_.input_dim()) + "]");
    const long T = input.dim(0);
    Tensor code = autodiff::embedding_rows(params_.get("emotion_table"),
                                           std::vector<int>{emotion});
    Tensor emo = autodiff::softsign(autodiff::dense(
        code, params_.get("emotion_w"), params_.get("emotion_b")));
    Tensor h = autodiff::concat_cols(input, autodiff::tile_rows(emo, T));
    for (int l = 0; l < cfg_.dense_layers; ++l) {
      const std::string p = "dense" + std::to_string(l);
      h = autodiff::tanh(autodiff::dense(h, params_.get(p + "_w"),
                                         params_.get(p + "_b")));
    }
    for (int l = 0; l < cfg_.blstm_layers; ++l) {
      const std::string p = "blstm" + std::to_string(l);
      Tensor fwd = autodiff::lstm_sequence(h, params_.get(p + "_fwd_wx"),
                                           params_.get(p + "_fwd_wh"),
                                           params_.get(p + "_fwd_b"));
      Tensor rev = autodiff::reverse_rows(h);
      Tensor bwd = autodiff::reverse_rows(autodiff::lstm_sequence(
          rev, params_.get(p + "_bwd_wx"), params_.get(p + "_bwd_wh"),
          params_.get(p + "_bwd_b")));
      h = autodiff::concat_cols(fwd, bwd);
    }
    return autodiff::dense(h, params_.get("proj_w"), params_.get("proj_b"));
  }

  ConversionConfig cfg_;
  autodiff::ParamStore<S> params_;
};

}  // namespace mtevc::models
