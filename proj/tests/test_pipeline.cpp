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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mtevc/dsp/waveform.hpp"
#include "mtevc/error.hpp"
#include "mtevc/pipeline/config.hpp"
#include "mtevc/pipeline/features.hpp"
#include "mtevc/pipeline/inference.hpp"
#include "mtevc/pipeline/manifest.hpp"
#include "mtevc/pipeline/synth.hpp"
#include "mtevc/pipeline/training.hpp"
#include "mtevc/rng.hpp"

using namespace mtevc;
using pipeline::Manifest;
using pipeline::ManifestEntry;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mtevc_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small corpus and short utterances so training cases stay quick.
pipeline::SyntheticCorpusSpec small_spec() {
  pipeline::SyntheticCorpusSpec spec;
  spec.num_speakers = 2;
  spec.num_emotions = 2;
  spec.utterances_per_cell = 4;
  spec.min_duration_s = 0.45;
  spec.max_duration_s = 0.6;
  return spec;
}

pipeline::RunConfig tiny_run_config() {
  pipeline::RunConfig cfg;
  cfg.seed = 77;
  cfg.conversion.num_emotions = 2;
  cfg.conversion.emotion_embed_dim = 4;
  cfg.conversion.dense_layers = 1;
  cfg.conversion.dense_units = 16;
  cfg.conversion.blstm_layers = 1;
  cfg.conversion.blstm_units = 12;
  cfg.wavenet.cycles = 1;
  cfg.wavenet.dilations_per_cycle = 3;
  cfg.wavenet.residual_channels = 4;
  cfg.wavenet.gate_channels = 8;
  cfg.wavenet.skip_channels = 4;
  cfg.wavenet.classes = 32;
  cfg.wavenet.num_speakers = 2;
  cfg.wavenet.num_emotions = 2;
  cfg.wavenet.speaker_embed_dim = 2;
  cfg.wavenet.emotion_embed_dim = 2;
  cfg.wavenet.upsample_strides = {16, 16};
  cfg.flowavenet.blocks = 2;
  cfg.flowavenet.flows_per_block = 1;
  cfg.flowavenet.coupling_stacks = 1;
  cfg.flowavenet.dilations_per_stack = 2;
  cfg.flowavenet.coupling_channels = 4;
  cfg.flowavenet.num_speakers = 2;
  cfg.flowavenet.num_emotions = 2;
  cfg.flowavenet.speaker_embed_dim = 2;
  cfg.flowavenet.emotion_embed_dim = 2;
  cfg.flowavenet.upsample_strides = {16, 16};
  cfg.training.conversion_steps = 25;
  cfg.training.vocoder_steps = 5;
  cfg.training.crop_samples = 1024;
  cfg.training.checkpoint_every = 10;
  cfg.training.validate_every = 10;
  cfg.training.log_every = 0;
  cfg.training.griffin_lim_iters = 4;
  return cfg;
}

// Synthesizes and prepares the shared small corpus once per process.
struct Fixture {
  fs::path root;
  Manifest manifest;
  pipeline::RunConfig cfg;
  std::string cache;

  Fixture() {
    root = fresh_dir("fixture");
    cfg = tiny_run_config();
    manifest = pipeline::synth_dataset(small_spec(), root.string(), 42);
    cache = (root / "cache").string();
    auto rep = pipeline::prepare_features(manifest, cache, cfg.features,
                                          pipeline::features_fingerprint(cfg));
    REQUIRE(rep.failed.empty());
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("feature files survive a binary round trip") {
  auto dir = fresh_dir("featfile");
  Eigen::MatrixXf m(3, 5);
  Rng rng(9);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = (float)rng.normal();
  auto path = (dir / "x.melf").string();
  pipeline::write_feature_file(path, pipeline::kMelMagic, m);
  auto back = pipeline::read_feature_file(path, pipeline::kMelMagic);
  CHECK(back.rows() == 3);
  CHECK(back.cols() == 5);
  CHECK(back == m);

  CHECK_THROWS_AS(pipeline::read_feature_file(path, pipeline::kPpgMagic),
                  DataError);
  {
    std::ofstream out(dir / "trunc.melf", std::ios::binary);
    std::string bytes = slurp(path);
    out.write(bytes.data(), (long)bytes.size() - 7);
  }
  CHECK_THROWS_AS(pipeline::read_feature_file((dir / "trunc.melf").string(),
                                              pipeline::kMelMagic),
                  DataError);
  fs::remove_all(dir);
}

TEST_CASE("manifests round trip and resolve relative paths") {
  auto dir = fresh_dir("manifest");
  { std::ofstream(dir / "a.wav") << "x"; }
  Manifest m;
  m.speakers = {"alice", "bob"};
  m.emotions = {"happy", "sad"};
  m.entries.push_back({"u000", "a.wav", 1, 0, "", "hello there"});
  pipeline::save_manifest(m, (dir / "manifest.json").string());

  auto back = pipeline::load_manifest((dir / "manifest.json").string());
  CHECK(back.entries.size() == 1);
  CHECK(back.entries[0].utterance_id == "u000");
  CHECK(back.entries[0].speaker_id == 1);
  CHECK(back.entries[0].text == "hello there");
  CHECK(back.speakers == m.speakers);
  CHECK(fs::path(back.entries[0].wav_path).is_absolute());
  CHECK(fs::exists(back.entries[0].wav_path));
  CHECK(back.entries[0].cache_key() == "u000_s1_e0");
  fs::remove_all(dir);
}

TEST_CASE("manifest validation names the offending entry") {
  auto dir = fresh_dir("manifest_bad");
  { std::ofstream(dir / "a.wav") << "x"; }
  Manifest m;
  m.speakers = {"alice"};
  m.emotions = {"happy"};
  m.entries.push_back({"u000", (dir / "a.wav").string(), 0, 0, "", ""});

  SUBCASE("speaker id outside the table") {
    m.entries[0].speaker_id = 3;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("u000"), DataError);
  }
  SUBCASE("emotion id outside the table") {
    m.entries[0].emotion_id = -1;
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("u000"), DataError);
  }
  SUBCASE("dangling wav path") {
    m.entries[0].wav_path = (dir / "gone.wav").string();
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("gone.wav"),
                         DataError);
    CHECK_NOTHROW(m.validate(false));
  }
  SUBCASE("dangling ppg path") {
    m.entries[0].ppg_path = (dir / "gone.ppgf").string();
    CHECK_THROWS_WITH_AS(m.validate(), doctest::Contains("gone.ppgf"),
                         DataError);
  }
  fs::remove_all(dir);
}

TEST_CASE("run configs reject unknown keys and fingerprint their sections") {
  auto dir = fresh_dir("config");
  {
    std::ofstream out(dir / "bad.json");
    out << R"({"training": {"conversion_steps": 5, "warp_factor": 2}})";
  }
  CHECK_THROWS_WITH_AS(
      pipeline::load_run_config((dir / "bad.json").string()),
      doctest::Contains("training.warp_factor"), UsageError);

  pipeline::RunConfig cfg = tiny_run_config();
  pipeline::save_run_config(cfg, (dir / "cfg.json").string());
  auto back = pipeline::load_run_config((dir / "cfg.json").string());
  CHECK(pipeline::canonical_text(back) == pipeline::canonical_text(cfg));
  CHECK(pipeline::conversion_fingerprint(back) ==
        pipeline::conversion_fingerprint(cfg));

  pipeline::RunConfig other = cfg;
  other.wavenet.classes = 256;
  CHECK(pipeline::wavenet_fingerprint(other) !=
        pipeline::wavenet_fingerprint(cfg));
  CHECK(pipeline::conversion_fingerprint(other) ==
        pipeline::conversion_fingerprint(cfg));
  CHECK(pipeline::flowavenet_fingerprint(other) ==
        pipeline::flowavenet_fingerprint(cfg));

  // Feature settings feed every model, so they move all fingerprints.
  pipeline::RunConfig feat = cfg;
  feat.features.num_mels = 40;
  CHECK(pipeline::features_fingerprint(feat) !=
        pipeline::features_fingerprint(cfg));
  CHECK(pipeline::conversion_fingerprint(feat) !=
        pipeline::conversion_fingerprint(cfg));
  CHECK(pipeline::wavenet_fingerprint(feat) !=
        pipeline::wavenet_fingerprint(cfg));
  fs::remove_all(dir);
}

TEST_CASE("the synthetic corpus has the advertised shape") {
  auto dir = fresh_dir("synth_shape");
  pipeline::SyntheticCorpusSpec spec;  // 2 speakers x 3 emotions x 5
  auto m = pipeline::synth_dataset(spec, dir.string(), 5);

  CHECK(m.entries.size() == 30);
  CHECK(m.speakers.size() == 2);
  CHECK(m.emotions == std::vector<std::string>{"happy", "sad", "angry"});
  long wavs = 0, ppgs = 0;
  for (auto& e : fs::directory_iterator(dir / "wavs")) (void)e, ++wavs;
  for (auto& e : fs::directory_iterator(dir / "ppgs")) (void)e, ++ppgs;
  CHECK(wavs == 30);
  CHECK(ppgs == 30);

  for (const auto& e : m.entries) {
    auto w = dsp::read_wav(e.wav_path);
    CHECK(w.sample_rate_hz == 16000);
    auto ppg = pipeline::read_feature_file(e.ppg_path, pipeline::kPpgMagic);
    CHECK(ppg.cols() == 131);
    // One PPG row per centered Mel frame.
    CHECK(ppg.rows() == (long)w.samples.size() / 256 + 1);
    for (long r = 0; r < ppg.rows(); ++r) {
      CHECK(std::abs(ppg.row(r).sum() - 1.0f) < 1e-4f);
      CHECK(ppg.row(r).minCoeff() > 0.0f);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("parallel utterances share content across speakers and emotions") {
  auto dir = fresh_dir("synth_parallel");
  auto spec = small_spec();
  auto m = pipeline::synth_dataset(spec, dir.string(), 21);

  auto find = [&](int spk, int emo, const std::string& utt) {
    for (const auto& e : m.entries)
      if (e.speaker_id == spk && e.emotion_id == emo && e.utterance_id == utt)
        return e;
    REQUIRE(false);
    return m.entries[0];
  };

  // Same emotion, different speaker: identical duration and PPG bytes.
  auto a = find(0, 1, "u000");
  auto b = find(1, 1, "u000");
  CHECK(slurp(a.ppg_path) == slurp(b.ppg_path));
  CHECK(dsp::read_wav(a.wav_path).samples.size() ==
        dsp::read_wav(b.wav_path).samples.size());

  // Different emotion: durations differ but the dominant PPG class
  // trajectory matches after normalizing time.
  auto c = find(0, 0, "u000");
  auto pa = pipeline::read_feature_file(a.ppg_path, pipeline::kPpgMagic);
  auto pc = pipeline::read_feature_file(c.ppg_path, pipeline::kPpgMagic);
  CHECK(pa.rows() != pc.rows());
  long agree = 0;
  for (long i = 0; i < pa.rows(); ++i) {
    long j = std::lround((double)i * (pc.rows() - 1) / (pa.rows() - 1));
    Eigen::Index ca, cc;
    pa.row(i).maxCoeff(&ca);
    pc.row(j).maxCoeff(&cc);
    agree += (ca == cc);
  }
  CHECK((double)agree / pa.rows() > 0.75);
  fs::remove_all(dir);
}

TEST_CASE("the same seed reproduces the corpus bit for bit") {
  auto d1 = fresh_dir("synth_det1");
  auto d2 = fresh_dir("synth_det2");
  auto d3 = fresh_dir("synth_det3");
  auto spec = small_spec();
  auto m1 = pipeline::synth_dataset(spec, d1.string(), 33);
  pipeline::synth_dataset(spec, d2.string(), 33);
  pipeline::synth_dataset(spec, d3.string(), 34);

  bool other_seed_differs = false;
  for (const auto& e : m1.entries) {
    auto rel = fs::relative(e.wav_path, d1);
    CHECK(slurp(d1 / rel) == slurp(d2 / rel));
    auto relp = fs::relative(e.ppg_path, d1);
    CHECK(slurp(d1 / relp) == slurp(d2 / relp));
    if (slurp(d1 / rel) != slurp(d3 / rel)) other_seed_differs = true;
  }
  CHECK(slurp(d1 / "manifest.json") == slurp(d2 / "manifest.json"));
  CHECK(other_seed_differs);
  fs::remove_all(d1);
  fs::remove_all(d2);
  fs::remove_all(d3);
}

TEST_CASE("feature preparation caches by mtime and fingerprint") {
  auto dir = fresh_dir("prepare");
  auto spec = small_spec();
  auto m = pipeline::synth_dataset(spec, dir.string(), 8);
  pipeline::RunConfig cfg = tiny_run_config();
  auto cache = (dir / "cache").string();
  const uint64_t fp = pipeline::features_fingerprint(cfg);

  CHECK_THROWS_AS(pipeline::load_feature_stats(cache), DataError);

  auto r1 = pipeline::prepare_features(m, cache, cfg.features, fp);
  CHECK(r1.computed == (long)m.entries.size());
  CHECK(r1.cached == 0);
  CHECK(r1.failed.empty());

  auto r2 = pipeline::prepare_features(m, cache, cfg.features, fp);
  CHECK(r2.computed == 0);
  CHECK(r2.cached == (long)m.entries.size());

  // The cached matrices are frames x num_mels and the stored statistics
  // z-score them to per-dimension zero mean.
  auto stats = pipeline::load_feature_stats(cache);
  REQUIRE((int)stats.mean.size() == cfg.features.num_mels);
  std::vector<double> acc(stats.mean.size(), 0.0);
  long frames = 0;
  for (const auto& e : m.entries) {
    auto mel = pipeline::load_cached_mel(cache, e.cache_key());
    CHECK(mel.cols() == cfg.features.num_mels);
    auto w = dsp::read_wav(e.wav_path);
    CHECK(mel.rows() == (long)w.samples.size() / cfg.features.hop_length + 1);
    for (long i = 0; i < mel.rows(); ++i, ++frames)
      for (long j = 0; j < mel.cols(); ++j)
        acc[j] += ((double)mel(i, j) - stats.mean[j]) / stats.stddev[j];
  }
  CHECK(frames == stats.frames);
  for (double a : acc) CHECK(std::abs(a / frames) < 1e-6);

  // A stale fingerprint invalidates everything; a touched file only
  // invalidates itself.
  auto r3 = pipeline::prepare_features(m, cache, cfg.features, fp + 1);
  CHECK(r3.computed == (long)m.entries.size());
  auto later = fs::last_write_time(m.entries[0].wav_path) +
               std::chrono::seconds(2);
  fs::last_write_time(m.entries[0].wav_path, later);
  auto r4 = pipeline::prepare_features(m, cache, cfg.features, fp + 1);
  CHECK(r4.computed == 1);
  CHECK(r4.cached == (long)m.entries.size() - 1);

  // A corrupt WAV lands in the failure list and is skipped.
  {
    std::ofstream out(m.entries[1].wav_path, std::ios::binary);
    out << "not a wav";
  }
  auto later2 = fs::last_write_time(m.entries[1].wav_path) +
                std::chrono::seconds(2);
  fs::last_write_time(m.entries[1].wav_path, later2);
  auto r5 = pipeline::prepare_features(m, cache, cfg.features, fp + 1);
  REQUIRE(r5.failed.size() == 1);
  CHECK(r5.failed[0].find(m.entries[1].cache_key()) != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("conversion training needs parallel pairs and a known emotion") {
  const auto& f = fixture();
  auto out = fresh_dir("conv_bad");

  CHECK_THROWS_AS(pipeline::train_conversion(f.manifest, f.cache, f.cfg, 9,
                                             out.string()),
                  UsageError);

  Manifest solo = f.manifest;
  solo.entries.erase(
      std::remove_if(solo.entries.begin(), solo.entries.end(),
                     [](const ManifestEntry& e) { return e.emotion_id != 0; }),
      solo.entries.end());
  CHECK_THROWS_AS(pipeline::train_conversion(solo, f.cache, f.cfg, 0,
                                             out.string()),
                  DataError);
  fs::remove_all(out);
}

TEST_CASE("conversion training is deterministic through the checkpoint") {
  const auto& f = fixture();
  auto o1 = fresh_dir("conv_det1");
  auto o2 = fresh_dir("conv_det2");

  auto r1 = pipeline::train_conversion(f.manifest, f.cache, f.cfg, 0,
                                       o1.string());
  auto r2 = pipeline::train_conversion(f.manifest, f.cache, f.cfg, 0,
                                       o2.string());
  CHECK(r1.steps == f.cfg.training.conversion_steps);
  CHECK(r1.losses == r2.losses);
  CHECK(slurp(r1.checkpoint_path) == slurp(r2.checkpoint_path));
  CHECK(std::isfinite(r1.losses.back()));
  CHECK_FALSE(r1.validation.empty());

  // Cadence checkpoints stay on disk alongside the final one.
  CHECK(fs::exists(o1 / "conversion_step000010.ckpt"));
  CHECK(fs::exists(o1 / "conversion_step000020.ckpt"));
  CHECK(fs::exists(o1 / "conversion.ckpt"));

  // Converting through the saved checkpoint is reproducible bit for bit.
  const auto& e = f.manifest.entries[0];
  pipeline::ConvertRequest req;
  req.source_wav = e.wav_path;
  req.source_ppg = e.ppg_path;
  req.target_emotion = 1;
  req.conversion_checkpoint = r1.checkpoint_path;
  req.out_wav = (o1 / "c1.wav").string();
  pipeline::convert_utterance(f.cfg, req);
  req.out_wav = (o1 / "c2.wav").string();
  pipeline::convert_utterance(f.cfg, req);
  CHECK(slurp(o1 / "c1.wav") == slurp(o1 / "c2.wav"));

  auto w = dsp::read_wav((o1 / "c1.wav").string());
  CHECK(w.samples.size() % 256 == 0);
  fs::remove_all(o1);
  fs::remove_all(o2);
}

TEST_CASE("a checkpoint from another configuration is rejected up front") {
  const auto& f = fixture();
  auto out = fresh_dir("conv_mismatch");
  auto r = pipeline::train_conversion(f.manifest, f.cache, f.cfg, 0,
                                      out.string());

  pipeline::RunConfig other = f.cfg;
  other.conversion.blstm_units = 13;
  pipeline::ConvertRequest req;
  // The source file does not exist: fingerprint checking must fire first.
  req.source_wav = (out / "missing.wav").string();
  req.source_ppg = (out / "missing.ppgf").string();
  req.target_emotion = 1;
  req.conversion_checkpoint = r.checkpoint_path;
  req.out_wav = (out / "c.wav").string();
  CHECK_THROWS_AS(pipeline::convert_utterance(other, req),
                  CompatibilityError);

  req.target_emotion = 7;
  CHECK_THROWS_AS(pipeline::convert_utterance(f.cfg, req), UsageError);
  req.target_emotion = 1;
  req.generator = "wavenet";
  CHECK_THROWS_AS(pipeline::convert_utterance(f.cfg, req), UsageError);
  fs::remove_all(out);
}

TEST_CASE("vocoder training validates its inputs and rotates checkpoints") {
  const auto& f = fixture();
  auto out = fresh_dir("voc");

  CHECK_THROWS_AS(pipeline::train_vocoder(f.manifest, f.cache, f.cfg,
                                          "melgan", out.string()),
                  UsageError);

  pipeline::RunConfig narrow = f.cfg;
  narrow.wavenet.num_emotions = 1;
  CHECK_THROWS_AS(pipeline::train_vocoder(f.manifest, f.cache, narrow,
                                          "wavenet", out.string()),
                  DataError);

  pipeline::RunConfig cfg = f.cfg;
  cfg.training.vocoder_steps = 6;
  cfg.training.checkpoint_every = 2;
  cfg.training.checkpoint_keep = 2;
  auto r = pipeline::train_vocoder(f.manifest, f.cache, cfg, "wavenet",
                                   out.string());
  CHECK(r.steps == 6);
  CHECK(std::isfinite(r.losses.back()));
  CHECK_FALSE(fs::exists(out / "wavenet_step000002.ckpt"));
  CHECK(fs::exists(out / "wavenet_step000004.ckpt"));
  CHECK(fs::exists(out / "wavenet_step000006.ckpt"));
  CHECK(fs::exists(out / "wavenet.ckpt"));
  fs::remove_all(out);
}

TEST_CASE("both vocoders synthesize deterministic audio from checkpoints") {
  const auto& f = fixture();
  auto out = fresh_dir("voc_synth");

  for (std::string kind : {"wavenet", "flowavenet"}) {
    auto r = pipeline::train_vocoder(f.manifest, f.cache, f.cfg, kind,
                                     out.string());
    pipeline::SynthesizeRequest req;
    req.source_wav = f.manifest.entries[0].wav_path;
    req.speaker = 0;
    req.emotion = 0;
    req.generator = kind;
    req.vocoder_checkpoint = r.checkpoint_path;
    req.out_wav = (out / (kind + "_1.wav")).string();
    pipeline::synthesize_utterance(f.cfg, req);
    req.out_wav = (out / (kind + "_2.wav")).string();
    pipeline::synthesize_utterance(f.cfg, req);
    CHECK(slurp(out / (kind + "_1.wav")) == slurp(out / (kind + "_2.wav")));

    auto w = dsp::read_wav((out / (kind + "_1.wav")).string());
    auto src = dsp::read_wav(req.source_wav);
    CHECK(w.samples.size() ==
          (src.samples.size() / 256 + 1) * 256);
  }
  fs::remove_all(out);
}

TEST_CASE("the evaluation command writes machine and human reports") {
  auto dir = fresh_dir("evalcmd");
  auto spec = small_spec();
  spec.num_speakers = 1;
  spec.utterances_per_cell = 1;
  auto m = pipeline::synth_dataset(spec, dir.string(), 3);

  nlohmann::json pairs;
  pairs["pairs"] = nlohmann::json::array();
  pairs["pairs"].push_back({{"id", "u000"},
                            {"emotion", "happy"},
                            {"converted", m.entries[0].wav_path},
                            {"target", m.entries[0].wav_path}});
  auto pairs_path = (dir / "pairs.json").string();
  { std::ofstream(pairs_path) << pairs.dump(2); }

  auto report = pipeline::evaluate_command(pairs_path, {},
                                           (dir / "out").string());
  REQUIRE(report.utterances.size() == 1);
  CHECK(report.utterances[0].metrics.mcd_db == 0.0);
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(fs::exists(dir / "out" / "report.txt"));
  auto parsed = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
  CHECK(parsed["emotions"]["happy"]["mcd_db"].get<double>() == 0.0);
  fs::remove_all(dir);
}

}  // TEST_SUITE
