// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dasp/detection.hpp"
#include "dasp/dsp.hpp"
#include "dasp/losses.hpp"
#include "dasp/net.hpp"
#include "dasp/normalize.hpp"
#include "dasp/optim.hpp"
#include "dasp/rng.hpp"
#include "dasp/spatial.hpp"
#include "dasp/tensor.hpp"

namespace dasp::pipe {

using ad::Tape;
using ad::Var;

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Reproducible dataset recipe: identical spec => identical dataset. Every
/// random draw flows from `seed` through Rng::stream(seed, tag, index).
struct SynthSpec {
  std::string task;  // denoise | separate | sed | speaker | doa
  double sample_rate = 8000.0;
  double clip_seconds = 2.0;
  std::size_t clips = 50;
  double snr_db = 0.0;
  std::size_t sources = 2;
  double event_density = 0.3;
  double event_min_len = 0.25;  // event length range, fraction of the clip
  double event_max_len = 0.6;
  std::uint64_t seed = 0;
};

inline std::size_t clip_samples(const SynthSpec& spec) {
  return std::size_t(spec.clip_seconds * spec.sample_rate);
}

inline double signal_power(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / double(x.size());
}

/// Scales `noise` in place so that 10 log10(P_signal / P_noise) is exactly
/// the requested SNR.
inline void scale_noise_to_snr(const std::vector<double>& signal,
                               std::vector<double>& noise, double snr_db) {
  const double ps = signal_power(signal);
  const double pn = signal_power(noise);
  if (pn <= 0.0 || ps <= 0.0)
    throw std::invalid_argument("scale_noise_to_snr: degenerate powers");
  const double target = ps / std::pow(10.0, snr_db / 10.0);
  const double scale = std::sqrt(target / pn);
  for (double& v : noise) v *= scale;
}

struct DenoiseClip {
  std::vector<double> clean, noise, mixture;
};

/// Amplitude-modulated 1 kHz tone in white noise at the exact spec SNR.
inline std::vector<DenoiseClip> synth_denoise(const SynthSpec& spec) {
  std::vector<DenoiseClip> clips(spec.clips);
  const std::size_t n = clip_samples(spec);
  for (std::size_t c = 0; c < spec.clips; ++c) {
    Rng rng = Rng::stream(spec.seed, "denoise-clip", c);
    DenoiseClip& clip = clips[c];
    clip.clean.resize(n);
    clip.noise.resize(n);
    const double phase = rng.uniform(0.0, 2.0 * dsp::kPi);
    const double am_rate = rng.uniform(0.5, 2.0);
    const double am_phase = rng.uniform(0.0, 2.0 * dsp::kPi);
    for (std::size_t i = 0; i < n; ++i) {
      const double ts = double(i) / spec.sample_rate;
      const double env =
          0.6 + 0.4 * std::sin(2.0 * dsp::kPi * am_rate * ts + am_phase);
      clip.clean[i] = env * std::sin(2.0 * dsp::kPi * 1000.0 * ts + phase);
      clip.noise[i] = rng.gaussian();
    }
    scale_noise_to_snr(clip.clean, clip.noise, spec.snr_db);
    clip.mixture.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      clip.mixture[i] = clip.clean[i] + clip.noise[i];
  }
  return clips;
}

struct SeparationClip {
  std::vector<std::vector<double>> stems;  // J sources
  std::vector<double> mixture;
};

/// Non-overlapping sinusoid combs: source j uses harmonics congruent to
/// j+1 modulo sources+1 of a 300 Hz base, so the stems occupy disjoint
/// bins.
inline std::vector<SeparationClip> synth_separation(const SynthSpec& spec) {
  if (spec.sources < 2 || spec.sources > 3)
    throw std::invalid_argument("synth_separation: sources must be 2 or 3");
  std::vector<SeparationClip> clips(spec.clips);
  const std::size_t n = clip_samples(spec);
  const double base = 300.0;
  for (std::size_t c = 0; c < spec.clips; ++c) {
    Rng rng = Rng::stream(spec.seed, "separate-clip", c);
    SeparationClip& clip = clips[c];
    clip.stems.assign(spec.sources, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < spec.sources; ++j) {
      const double am_rate = rng.uniform(0.5, 3.0);
      const double am_phase = rng.uniform(0.0, 2.0 * dsp::kPi);
      // Harmonics (j+1), (j+1)+(J+1), ... of the base frequency.
      for (std::size_t h = 0; h < 4; ++h) {
        const double f =
            base * double(j + 1 + h * (spec.sources + 1));
        if (f >= spec.sample_rate / 2.0 * 0.95) break;
        const double amp = rng.uniform(0.4, 1.0) / double(h + 1);
        const double phase = rng.uniform(0.0, 2.0 * dsp::kPi);
        for (std::size_t i = 0; i < n; ++i) {
          const double ts = double(i) / spec.sample_rate;
          clip.stems[j][i] +=
              amp *
              (0.7 + 0.3 * std::sin(2.0 * dsp::kPi * am_rate * ts + am_phase)) *
              std::sin(2.0 * dsp::kPi * f * ts + phase);
        }
      }
    }
    clip.mixture.assign(n, 0.0);
    for (std::size_t j = 0; j < spec.sources; ++j)
      for (std::size_t i = 0; i < n; ++i)
        clip.mixture[i] += clip.stems[j][i];
  }
  return clips;
}

struct SedClip {
  std::vector<double> audio;
  Tensor frame_truth;  // L x T (hidden from training)
  Tensor clip_labels;  // L
};

inline constexpr std::size_t kSedClasses = 2;

/// Weak-label event clips: class 0 bursts live in 300-800 Hz, class 1 in
/// 1500-3000 Hz, over a faint noise floor. Density 0 gives all-silent
/// labels.
inline std::vector<SedClip> synth_sed(const SynthSpec& spec,
                                      const dsp::FrameConfig& cfg) {
  std::vector<SedClip> clips(spec.clips);
  const std::size_t n = clip_samples(spec);
  const std::array<std::pair<double, double>, kSedClasses> bands{
      {{300.0, 800.0}, {1500.0, 3000.0}}};
  for (std::size_t c = 0; c < spec.clips; ++c) {
    Rng rng = Rng::stream(spec.seed, "sed-clip", c);
    SedClip& clip = clips[c];
    clip.audio.assign(n, 0.0);
    for (double& v : clip.audio) v = 0.01 * rng.gaussian();
    const std::size_t frames = cfg.frame_count(n);
    clip.frame_truth = Tensor({kSedClasses, frames}, 0.0);
    clip.clip_labels = Tensor({kSedClasses}, 0.0);
    for (std::size_t l = 0; l < kSedClasses; ++l) {
      if (rng.uniform() >= spec.event_density) continue;
      const double len = rng.uniform(spec.event_min_len, spec.event_max_len);
      const double onset = rng.uniform(0.0, 1.0 - len);
      const std::size_t start = std::size_t(onset * double(n));
      const std::size_t stop = std::min(n, start + std::size_t(len * double(n)));
      // Sum of in-band sinusoids with a soft attack/release envelope.
      for (int tone = 0; tone < 6; ++tone) {
        const double f = rng.uniform(bands[l].first, bands[l].second);
        const double amp = rng.uniform(0.2, 0.5);
        const double phase = rng.uniform(0.0, 2.0 * dsp::kPi);
        for (std::size_t i = start; i < stop; ++i) {
          const double ts = double(i) / spec.sample_rate;
          const double edge =
              std::min({1.0, double(i - start) / 200.0,
                        double(stop - i) / 200.0});
          clip.audio[i] +=
              edge * amp * std::sin(2.0 * dsp::kPi * f * ts + phase);
        }
      }
      clip.clip_labels[l] = 1.0;
      for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t f_start = t * cfg.hop;
        const std::size_t f_stop = f_start + cfg.length;
        const std::size_t lo = std::max(start, f_start);
        const std::size_t hi = std::min(stop, f_stop);
        if (hi > lo && double(hi - lo) >= 0.5 * double(cfg.length))
          clip.frame_truth.at(l, t) = 1.0;
      }
    }
  }
  return clips;
}

struct SpeakerClip {
  std::vector<double> audio;
  std::size_t speaker = 0;
};

/// Harmonic-comb "voices": per-speaker fundamental, spectral decay and
/// amplitude-modulation rate, lightly noised.
inline std::vector<SpeakerClip> synth_speaker(const SynthSpec& spec) {
  const std::vector<double> f0{110.0, 146.8, 196.0, 261.6, 349.2};
  const std::size_t speakers = std::min<std::size_t>(spec.sources, f0.size());
  if (speakers < 2)
    throw std::invalid_argument("synth_speaker: need >= 2 speakers");
  std::vector<SpeakerClip> clips;
  const std::size_t n = clip_samples(spec);
  for (std::size_t c = 0; c < spec.clips; ++c) {
    Rng rng = Rng::stream(spec.seed, "speaker-clip", c);
    SpeakerClip clip;
    clip.speaker = c % speakers;
    const double fund = f0[clip.speaker];
    const double decay = 0.55 + 0.08 * double(clip.speaker);
    const double am = 2.0 + 1.5 * double(clip.speaker);
    clip.audio.assign(n, 0.0);
    std::vector<double> phases(8);
    for (double& p : phases) p = rng.uniform(0.0, 2.0 * dsp::kPi);
    const double am_phase = rng.uniform(0.0, 2.0 * dsp::kPi);
    for (std::size_t i = 0; i < n; ++i) {
      const double ts = double(i) / spec.sample_rate;
      double v = 0.0;
      double a = 1.0;
      for (int h = 1; h <= 8; ++h) {
        const double f = fund * h;
        if (f >= spec.sample_rate / 2.0 * 0.95) break;
        v += a * std::sin(2.0 * dsp::kPi * f * ts + phases[std::size_t(h - 1)]);
        a *= decay;
      }
      const double env =
          0.7 + 0.3 * std::sin(2.0 * dsp::kPi * am * ts + am_phase);
      clip.audio[i] = 0.3 * env * v + 0.01 * rng.gaussian();
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

struct DoaSceneSample {
  spatial::ArrayScene scene;
  spatial::Direction truth;
};

/// Single-source white-noise scenes at the requested SNR on an azimuth
/// ring; the geometry is a 5 cm square array.
inline std::vector<DoaSceneSample> synth_doa(const SynthSpec& spec) {
  std::vector<DoaSceneSample> out(spec.clips);
  const std::size_t n = clip_samples(spec);
  for (std::size_t c = 0; c < spec.clips; ++c) {
    Rng rng = Rng::stream(spec.seed, "doa-scene", c);
    DoaSceneSample& s = out[c];
    s.scene.geometry = spatial::ArrayGeometry::square(0.05);
    s.scene.sample_rate = spec.sample_rate;
    s.truth = spatial::Direction::from_azimuth_deg(rng.uniform(0.0, 360.0));
    std::vector<double> sig(n);
    for (double& v : sig) v = rng.gaussian();
    s.scene.sources.push_back({s.truth, std::move(sig)});
    // SNR relative to a unit-power source.
    s.scene.noise_std = std::pow(10.0, -spec.snr_db / 20.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared training helpers
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch = 128;
  double learning_rate = 1e-3;
  std::size_t patience = 10;  // early stop on validation plateau
};

/// 80/20 train/validation split by clip index, seeded.
inline void split_clips(std::size_t count, std::uint64_t seed,
                        std::vector<std::size_t>* train,
                        std::vector<std::size_t>* val) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::stream(seed, "clip-split");
  for (std::size_t i = count; i > 1; --i)
    std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
  const std::size_t val_count = std::max<std::size_t>(1, count / 5);
  val->assign(idx.begin(), idx.begin() + long(val_count));
  train->assign(idx.begin() + long(val_count), idx.end());
}

/// Log-magnitude with a floor, elementwise.
inline double log_magnitude(double magnitude) {
  return std::log(std::max(magnitude, 1e-8));
}

/// Context feature for frame t: log magnitudes of frames t-Q..t+Q (indices
/// clamped at the clip edges), stacked into one column.
inline Tensor context_features(const Tensor& log_mag, std::size_t frame,
                               std::size_t context) {
  const std::size_t T = log_mag.rows(), K = log_mag.cols();
  Tensor out({(2 * context + 1) * K});
  std::size_t offset = 0;
  for (long dt = -long(context); dt <= long(context); ++dt) {
    long src = long(frame) + dt;
    src = std::max(0L, std::min(long(T) - 1, src));
    for (std::size_t k = 0; k < K; ++k)
      out[offset + k] = log_mag.at(std::size_t(src), k);
    offset += K;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Denoiser (multi-frame concatenation mask estimator)
// ---------------------------------------------------------------------------

enum class DenoiseLoss { bce_mask, spectral };

struct DenoiseResult {
  nn::Sequential net;
  std::vector<double> train_loss;       // per epoch, mean per frame
  std::vector<double> validation_loss;  // per epoch
  double si_sdr_noisy = 0.0;     // held-out means
  double si_sdr_enhanced = 0.0;
  double si_sdr_oracle = 0.0;    // oracle Wiener mask bound
  std::size_t context = 2;
  dsp::FrameConfig config;
};

inline Tensor log_magnitude_matrix(const dsp::Spectrogram& spec) {
  Tensor m = spec.magnitude();
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = log_magnitude(m[i]);
  return m;
}

/// Applies a trained mask net to one mixture and reconstructs the waveform.
inline std::vector<double> denoise_signal(const nn::Sequential& net,
                                          const std::vector<double>& mixture,
                                          const dsp::FrameConfig& cfg,
                                          double sample_rate,
                                          std::size_t context) {
  dsp::Spectrogram spec = dsp::stft(mixture, cfg, sample_rate);
  Tensor log_mag = log_magnitude_matrix(spec);
  Tensor mask({spec.frames, spec.bins});
  Tape t;
  std::vector<Var> cols;
  Tensor batch({(2 * context + 1) * spec.bins, spec.frames});
  for (std::size_t f = 0; f < spec.frames; ++f) {
    Tensor col = context_features(log_mag, f, context);
    for (std::size_t i = 0; i < col.size(); ++i) batch.at(i, f) = col[i];
  }
  Tensor out = net.evaluate(batch);
  for (std::size_t f = 0; f < spec.frames; ++f)
    for (std::size_t k = 0; k < spec.bins; ++k)
      mask.at(f, k) = out.at(k, f);
  dsp::MaskSeq masks(std::move(mask));
  return dsp::istft(spec, &masks);
}

/// SI-SDR over the fully covered interior: the first and last frame length
/// of an overlap-add reconstruction carry partial window sums and would cap
/// the measurement otherwise.
inline double interior_si_sdr(const std::vector<double>& reference,
                              const std::vector<double>& estimate,
                              std::size_t edge_skip) {
  const std::size_t n = std::min(reference.size(), estimate.size());
  if (n <= 2 * edge_skip + 16)
    throw std::invalid_argument("interior_si_sdr: signal too short");
  std::vector<double> c(reference.begin() + long(edge_skip),
                        reference.begin() + long(n - edge_skip));
  std::vector<double> e(estimate.begin() + long(edge_skip),
                        estimate.begin() + long(n - edge_skip));
  return loss::si_sdr(c, e);
}

inline DenoiseResult train_denoiser(const std::vector<DenoiseClip>& clips,
                                    std::size_t context,
                                    const std::string& net_descriptor,
                                    DenoiseLoss loss_kind,
                                    const dsp::FrameConfig& cfg,
                                    double sample_rate, std::uint64_t seed,
                                    const TrainOptions& opt = {}) {
  if (clips.empty()) throw std::invalid_argument("train_denoiser: no clips");
  Rng init = Rng::stream(seed, "denoise-init");
  DenoiseResult result;
  result.net = nn::Sequential::from_descriptor(net_descriptor, init);
  result.context = context;
  result.config = cfg;

  // Precompute per-clip features and Wiener labels.
  struct ClipData {
    Tensor features;  // D x T
    Tensor labels;    // K x T Wiener gains
    Tensor mix_mag;   // K x T magnitudes
    Tensor clean_mag;
  };
  std::vector<ClipData> data(clips.size());
  for (std::size_t c = 0; c < clips.size(); ++c) {
    dsp::Spectrogram mix = dsp::stft(clips[c].mixture, cfg, sample_rate);
    dsp::Spectrogram clean = dsp::stft(clips[c].clean, cfg, sample_rate);
    dsp::Spectrogram noise = dsp::stft(clips[c].noise, cfg, sample_rate);
    Tensor wiener = dsp::wiener_gain(clean.power(), noise.power());
    Tensor log_mag = log_magnitude_matrix(mix);
    ClipData& cd = data[c];
    const std::size_t T = mix.frames, K = mix.bins;
    cd.features = Tensor({(2 * context + 1) * K, T});
    cd.labels = Tensor({K, T});
    cd.mix_mag = Tensor({K, T});
    cd.clean_mag = Tensor({K, T});
    Tensor mixm = mix.magnitude(), cleanm = clean.magnitude();
    for (std::size_t f = 0; f < T; ++f) {
      Tensor col = context_features(log_mag, f, context);
      for (std::size_t i = 0; i < col.size(); ++i)
        cd.features.at(i, f) = col[i];
      for (std::size_t k = 0; k < K; ++k) {
        cd.labels.at(k, f) = wiener.at(f, k);
        cd.mix_mag.at(k, f) = mixm.at(f, k);
        cd.clean_mag.at(k, f) = cleanm.at(f, k);
      }
    }
  }

  std::vector<std::size_t> train_clips, val_clips;
  split_clips(clips.size(), seed, &train_clips, &val_clips);

  auto batch_loss = [&](Tape& t, const ClipData& cd, std::size_t begin,
                        std::size_t end, nn::BoundParams* bp) {
    const std::size_t D = cd.features.rows();
    const std::size_t K = cd.labels.rows();
    Tensor fb({D, end - begin}), lb({K, end - begin});
    Tensor mm({K, end - begin}), cm({K, end - begin});
    for (std::size_t f = begin; f < end; ++f)
      for (std::size_t i = 0; i < D; ++i) fb.at(i, f - begin) = cd.features.at(i, f);
    for (std::size_t f = begin; f < end; ++f)
      for (std::size_t k = 0; k < K; ++k) {
        lb.at(k, f - begin) = cd.labels.at(k, f);
        mm.at(k, f - begin) = cd.mix_mag.at(k, f);
        cm.at(k, f - begin) = cd.clean_mag.at(k, f);
      }
    Var mask = result.net.forward(t, t.constant(fb), bp);
    if (loss_kind == DenoiseLoss::bce_mask) return loss::bce(t, mask, lb);
    return loss::spectral_distance(t, mask, mm, cm);
  };

  AdamState adam;
  adam.alpha = opt.learning_rate;
  std::vector<Tensor*> params = result.net.parameters();
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  Rng shuffle_rng = Rng::stream(seed, "denoise-shuffle");
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::size_t frames_seen = 0;
    std::vector<std::size_t> order = train_clips;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
    for (std::size_t c : order) {
      const std::size_t T = data[c].features.cols();
      for (std::size_t begin = 0; begin < T; begin += opt.batch) {
        const std::size_t end = std::min(T, begin + opt.batch);
        Tape t;
        nn::BoundParams bp;
        Var l = batch_loss(t, data[c], begin, end, &bp);
        const double lv = t.val(l).item();
        if (!std::isfinite(lv))
          throw std::runtime_error(
              "train_denoiser: divergence (nonfinite loss) at epoch " +
              std::to_string(epoch) + ", clip " + std::to_string(c));
        t.backward(l);
        adam_step(adam, bp.tensors, bp.gradients(t));
        epoch_loss += lv;
        frames_seen += end - begin;
      }
    }
    result.train_loss.push_back(epoch_loss / double(frames_seen));
    double val_loss = 0.0;
    std::size_t val_frames = 0;
    for (std::size_t c : val_clips) {
      Tape t;
      Var l = batch_loss(t, data[c], 0, data[c].features.cols(), nullptr);
      val_loss += t.val(l).item();
      val_frames += data[c].features.cols();
    }
    val_loss /= double(val_frames);
    result.validation_loss.push_back(val_loss);
    if (val_loss < best_val - 1e-9) {
      best_val = val_loss;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
  }

  // Held-out evaluation: SI-SDR of noisy input, enhanced output, and the
  // oracle Wiener bound.
  double noisy = 0.0, enhanced = 0.0, oracle = 0.0;
  for (std::size_t c : val_clips) {
    const DenoiseClip& clip = clips[c];
    noisy += interior_si_sdr(clip.clean, clip.mixture, cfg.length);
    std::vector<double> est = denoise_signal(result.net, clip.mixture, cfg,
                                             sample_rate, context);
    enhanced += interior_si_sdr(clip.clean, est, cfg.length);
    dsp::Spectrogram mix = dsp::stft(clip.mixture, cfg, sample_rate);
    dsp::Spectrogram clean = dsp::stft(clip.clean, cfg, sample_rate);
    dsp::Spectrogram noise = dsp::stft(clip.noise, cfg, sample_rate);
    dsp::MaskSeq wiener(dsp::wiener_gain(clean.power(), noise.power()));
    std::vector<double> oracle_est = dsp::istft(mix, &wiener);
    oracle += interior_si_sdr(clip.clean, oracle_est, cfg.length);
  }
  const double count = double(val_clips.size());
  result.si_sdr_noisy = noisy / count;
  result.si_sdr_enhanced = enhanced / count;
  result.si_sdr_oracle = oracle / count;
  return result;
}

// ---------------------------------------------------------------------------
// PIT separator
// ---------------------------------------------------------------------------

struct SeparatorResult {
  nn::Sequential net;
  std::vector<double> train_loss;  // per epoch PIT loss per frame
  double pit_loss_final = 0.0;
  std::vector<double> si_sdr_per_source;  // held-out, matched permutation
  double si_sdr_oracle = 0.0;             // ideal-mask bound (mean)
  dsp::FrameConfig config;
};

/// Mask net: log-magnitude frame -> J * K sigmoid masks stacked by source.
inline SeparatorResult train_separator(
    const std::vector<SeparationClip>& clips, const std::string& net_descriptor,
    const dsp::FrameConfig& cfg, double sample_rate, std::uint64_t seed,
    const TrainOptions& opt = {}) {
  if (clips.empty()) throw std::invalid_argument("train_separator: no clips");
  const std::size_t J = clips[0].stems.size();
  if (J < 2 || J > 3)
    throw std::invalid_argument("train_separator: J must be 2 or 3");
  Rng init = Rng::stream(seed, "separate-init");
  SeparatorResult result;
  result.net = nn::Sequential::from_descriptor(net_descriptor, init);
  result.config = cfg;

  struct ClipData {
    Tensor features;                // K x T log magnitude
    Tensor mix_mag;                 // K x T
    std::vector<Tensor> stem_mags;  // J of K x T
  };
  std::vector<ClipData> data(clips.size());
  const std::size_t K = cfg.bins();
  for (std::size_t c = 0; c < clips.size(); ++c) {
    dsp::Spectrogram mix = dsp::stft(clips[c].mixture, cfg, sample_rate);
    ClipData& cd = data[c];
    const std::size_t T = mix.frames;
    cd.features = Tensor({K, T});
    cd.mix_mag = Tensor({K, T});
    Tensor mm = mix.magnitude();
    for (std::size_t f = 0; f < T; ++f)
      for (std::size_t k = 0; k < K; ++k) {
        cd.mix_mag.at(k, f) = mm.at(f, k);
        cd.features.at(k, f) = log_magnitude(mm.at(f, k));
      }
    for (std::size_t j = 0; j < J; ++j) {
      dsp::Spectrogram stem = dsp::stft(clips[c].stems[j], cfg, sample_rate);
      Tensor sm = stem.magnitude();
      Tensor out({K, T});
      for (std::size_t f = 0; f < T; ++f)
        for (std::size_t k = 0; k < K; ++k) out.at(k, f) = sm.at(f, k);
      cd.stem_mags.push_back(std::move(out));
    }
  }

  std::vector<std::size_t> train_clips, val_clips;
  split_clips(clips.size(), seed, &train_clips, &val_clips);

  AdamState adam;
  adam.alpha = opt.learning_rate;
  Rng shuffle_rng = Rng::stream(seed, "separate-shuffle");
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::size_t frames_seen = 0;
    std::vector<std::size_t> order = train_clips;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
    for (std::size_t c : order) {
      Tape t;
      nn::BoundParams bp;
      Var out = result.net.forward(t, t.constant(data[c].features), &bp);
      // Split stacked masks by source and build the PIT pairwise costs.
      std::vector<std::vector<Var>> d(J, std::vector<Var>(J));
      for (std::size_t j = 0; j < J; ++j) {
        Var mask_j = t.slice_rows(out, j * K, (j + 1) * K);
        for (std::size_t i = 0; i < J; ++i)
          d[j][i] = loss::spectral_distance(t, mask_j, data[c].mix_mag,
                                            data[c].stem_mags[i]);
      }
      auto [l, perm] = loss::pit_loss(t, d);
      const double lv = t.val(l).item();
      if (!std::isfinite(lv))
        throw std::runtime_error("train_separator: divergence at epoch " +
                                 std::to_string(epoch));
      t.backward(l);
      adam_step(adam, bp.tensors, bp.gradients(t));
      epoch_loss += lv;
      frames_seen += data[c].features.cols();
    }
    result.train_loss.push_back(epoch_loss / double(frames_seen));
  }
  result.pit_loss_final =
      result.train_loss.empty() ? 0.0 : result.train_loss.back();

  // Held-out separation quality.
  result.si_sdr_per_source.assign(J, 0.0);
  double oracle_acc = 0.0;
  for (std::size_t c : val_clips) {
    dsp::Spectrogram mix = dsp::stft(clips[c].mixture, cfg, sample_rate);
    Tensor out = result.net.evaluate(data[c].features);
    // Reconstruct each estimate and match to stems by PIT on waveforms.
    std::vector<std::vector<double>> estimates(J);
    for (std::size_t j = 0; j < J; ++j) {
      Tensor mask({mix.frames, mix.bins});
      for (std::size_t f = 0; f < mix.frames; ++f)
        for (std::size_t k = 0; k < K; ++k)
          mask.at(f, k) = out.at(j * K + k, f);
      dsp::MaskSeq ms(std::move(mask));
      estimates[j] = dsp::istft(mix, &ms);
    }
    Tensor cost({J, J});
    for (std::size_t j = 0; j < J; ++j)
      for (std::size_t i = 0; i < J; ++i)
        cost.at(j, i) =
            -interior_si_sdr(clips[c].stems[i], estimates[j], cfg.length);
    loss::PitResult match = loss::pit_assign(cost);
    for (std::size_t j = 0; j < J; ++j)
      result.si_sdr_per_source[match.permutation[j]] += -cost.at(j, match.permutation[j]);
    // Oracle: ideal masks from stem powers.
    std::vector<Tensor> powers;
    for (std::size_t j = 0; j < J; ++j) {
      dsp::Spectrogram stem = dsp::stft(clips[c].stems[j], cfg, sample_rate);
      powers.push_back(stem.power());
    }
    auto ideal = dsp::ideal_masks(powers, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
      std::vector<double> est = dsp::istft(mix, &ideal[j]);
      oracle_acc += interior_si_sdr(clips[c].stems[j], est, cfg.length);
    }
  }
  for (double& v : result.si_sdr_per_source) v /= double(val_clips.size());
  result.si_sdr_oracle = oracle_acc / double(val_clips.size() * J);
  return result;
}

// ---------------------------------------------------------------------------
// Weak-label SED trainer
// ---------------------------------------------------------------------------

struct SedLossSpec {
  std::string kind = "bce";  // bce | weighted_bce | ifl | focal_asym | dice
  double beta = 1.0;
  double c0 = 1.0;
  double eta = 0.0;
  double kappa0 = 0.0;
  double alpha = 0.5;
};

inline Var sed_clip_loss(Tape& t, const SedLossSpec& spec, Var clip_probs,
                         const Tensor& labels) {
  if (spec.kind == "bce") return loss::bce(t, clip_probs, labels);
  if (spec.kind == "weighted_bce")
    return loss::weighted_bce(t, clip_probs, labels, spec.beta);
  if (spec.kind == "ifl") {
    Var as_matrix = t.reshape(clip_probs, {t.val(clip_probs).size(), 1});
    return loss::inverse_frequency_loss(
        t, as_matrix, labels.reshape({labels.size(), 1}), spec.c0, spec.eta);
  }
  if (spec.kind == "focal_asym")
    return loss::asymmetric_focal_loss(t, clip_probs, labels, spec.eta);
  if (spec.kind == "dice")
    return loss::dice_loss(t, clip_probs, labels, spec.kappa0, spec.alpha,
                           spec.eta);
  throw std::invalid_argument("sed: unknown loss kind '" + spec.kind + "'");
}

/// Clip-level aggregation of one class row (1 x T) on the tape. Sorting-
/// based kinds freeze their order-statistic weights at the forward values.
inline Var aggregate_var(Tape& t, Var row, sed::Aggregation method,
                         const sed::AggregationParams& params) {
  const std::size_t T = t.val(row).size();
  Var flat = t.reshape(row, {T});
  switch (method) {
    case sed::Aggregation::max:
      return t.max(flat);
    case sed::Aggregation::mean:
      return t.mean(flat);
    case sed::Aggregation::linear_softmax: {
      Var scores = loss::linear_softmax_clip_scores(t, t.reshape(flat, {1, T}));
      return t.reshape(scores, {1});
    }
    case sed::Aggregation::softmax_weighted: {
      Var w = t.softmax(t.mul_scalar(flat, params.tau));
      return t.dot(w, flat);
    }
    case sed::Aggregation::top_n:
    case sed::Aggregation::exp_sorted: {
      const Tensor& v = t.val(flat);
      std::vector<std::size_t> idx(T);
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a,
                                                   std::size_t b) {
        return v[a] > v[b];
      });
      Tensor w({T}, 0.0);
      if (method == sed::Aggregation::top_n) {
        for (std::size_t i = 0; i < params.top_n; ++i)
          w[idx[i]] = 1.0 / double(params.top_n);
      } else {
        const double norm = (1.0 - params.lambda) /
                            (1.0 - std::pow(params.lambda, double(T)));
        double wt = norm;
        for (std::size_t i = 0; i < T; ++i) {
          w[idx[i]] = wt;
          wt *= params.lambda;
        }
      }
      return t.dot(t.constant(w), flat);
    }
  }
  throw std::logic_error("unreachable aggregation");
}

struct SedResult {
  nn::Sequential net;
  std::vector<double> train_loss;  // per epoch, per clip
  double frame_auc = 0.0;          // held-out, against hidden frame truth
  double clip_auc = 0.0;           // held-out aggregated scores vs labels
  double mean_frame_prob = 0.0;    // over held-out frames, all classes
  dsp::FrameConfig config;
  std::size_t mel_filters = 0;
};

inline Tensor sed_features(const SedClip& clip, const dsp::FrameConfig& cfg,
                           const dsp::MelBank& bank, double sample_rate) {
  dsp::Spectrogram spec = dsp::stft(clip.audio, cfg, sample_rate);
  Tensor lm = dsp::log_mel(spec, bank);  // T x F
  return lm.transpose();                 // F x T
}

inline SedResult train_sed(const std::vector<SedClip>& clips,
                           sed::Aggregation aggregation,
                           const sed::AggregationParams& agg_params,
                           const SedLossSpec& loss_spec,
                           const std::string& net_descriptor,
                           const dsp::FrameConfig& cfg, double sample_rate,
                           std::size_t mel_filters, std::uint64_t seed,
                           const TrainOptions& opt = {}) {
  if (clips.empty()) throw std::invalid_argument("train_sed: no clips");
  Rng init = Rng::stream(seed, "sed-init");
  SedResult result;
  result.net = nn::Sequential::from_descriptor(net_descriptor, init);
  result.config = cfg;
  result.mel_filters = mel_filters;
  dsp::MelBank bank = dsp::mel_bank(mel_filters, cfg.bins(), sample_rate);

  std::vector<Tensor> features(clips.size());
  for (std::size_t c = 0; c < clips.size(); ++c)
    features[c] = sed_features(clips[c], cfg, bank, sample_rate);

  std::vector<std::size_t> train_clips, val_clips;
  split_clips(clips.size(), seed, &train_clips, &val_clips);

  AdamState adam;
  adam.alpha = opt.learning_rate;
  Rng shuffle_rng = Rng::stream(seed, "sed-shuffle");
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::vector<std::size_t> order = train_clips;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
    for (std::size_t c : order) {
      Tape t;
      nn::BoundParams bp;
      Var frame_probs = result.net.forward(t, t.constant(features[c]), &bp);
      const std::size_t L = clips[c].clip_labels.size();
      std::vector<Var> clip_probs;
      for (std::size_t l = 0; l < L; ++l)
        clip_probs.push_back(t.reshape(
            aggregate_var(t, t.slice_rows(frame_probs, l, l + 1), aggregation,
                          agg_params),
            {1}));
      Var clip_vec = t.concat(clip_probs, 0);
      Var l = sed_clip_loss(t, loss_spec, clip_vec, clips[c].clip_labels);
      const double lv = t.val(l).item();
      if (!std::isfinite(lv))
        throw std::runtime_error("train_sed: divergence at epoch " +
                                 std::to_string(epoch));
      t.backward(l);
      adam_step(adam, bp.tensors, bp.gradients(t));
      epoch_loss += lv;
    }
    result.train_loss.push_back(epoch_loss / double(order.size()));
  }

  // Frame-level AUC against the hidden truth on held-out clips, plus the
  // clip-level AUC of the aggregated scores.
  sed::ScoredSet scored;
  sed::ScoredSet clip_scored;
  double prob_acc = 0.0;
  std::size_t prob_count = 0;
  for (std::size_t c : val_clips) {
    Tensor probs = result.net.evaluate(features[c]);
    for (std::size_t l = 0; l < probs.rows(); ++l) {
      std::vector<double> row(probs.cols());
      for (std::size_t f = 0; f < probs.cols(); ++f) {
        const double p = probs.at(l, f);
        row[f] = std::clamp(p, 0.0, 1.0);
        prob_acc += p;
        ++prob_count;
        if (clips[c].frame_truth.at(l, f) > 0.5)
          scored.positives.push_back(p);
        else
          scored.negatives.push_back(p);
      }
      const double clip_score = sed::aggregate(row, aggregation, agg_params);
      if (clips[c].clip_labels[l] > 0.5)
        clip_scored.positives.push_back(clip_score);
      else
        clip_scored.negatives.push_back(clip_score);
    }
  }
  result.mean_frame_prob = prob_acc / double(prob_count);
  if (!scored.positives.empty() && !scored.negatives.empty())
    result.frame_auc = sed::auc_exact(scored);
  if (!clip_scored.positives.empty() && !clip_scored.negatives.empty())
    result.clip_auc = sed::auc_exact(clip_scored);
  return result;
}

// ---------------------------------------------------------------------------
// Speaker enrollment / identification
// ---------------------------------------------------------------------------

struct SpeakerExtractor {
  nn::DenseLayer frame_layer;   // per-frame MFCC transform
  nn::DenseLayer embed_layer;   // post-pooling projection
  std::size_t mfcc_coeffs = 13;
  dsp::FrameConfig config{256, 128};
  double sample_rate = 8000.0;
  std::size_t mel_filters = 24;

  static SpeakerExtractor make(std::uint64_t seed, std::size_t hidden = 32,
                               std::size_t embed_dim = 16) {
    Rng rng = Rng::stream(seed, "speaker-init");
    SpeakerExtractor e;
    e.frame_layer = nn::DenseLayer(e.mfcc_coeffs, hidden,
                                   nn::Activation::tanh, rng);
    e.embed_layer = nn::DenseLayer(2 * hidden, embed_dim,
                                   nn::Activation::identity, rng);
    return e;
  }

  Tensor mfcc_features(const std::vector<double>& audio) const {
    dsp::Spectrogram spec = dsp::stft(audio, config, sample_rate);
    dsp::MelBank bank = dsp::mel_bank(mel_filters, config.bins(), sample_rate);
    return dsp::mfcc(spec, bank, mfcc_coeffs).transpose();  // C x T
  }

  /// MFCC -> per-frame dense -> stats pooling -> dense (not normalized).
  Var embed(Tape& t, const Tensor& mfcc_cols,
            nn::BoundParams* bound = nullptr) const {
    Var frames = frame_layer.forward(t, t.constant(mfcc_cols), bound);
    nn::PoolingHead stats = nn::PoolingHead::stats_pool(1e-8);
    Var pooled = stats.forward(t, frames);
    return embed_layer.forward(t, pooled, bound);
  }

  /// Unit-normalized embedding of raw audio (value path).
  Tensor embedding(const std::vector<double>& audio) const {
    Tape t;
    Tensor e = t.val(embed(t, mfcc_features(audio)));
    const double n = e.norm2();
    if (n < 1e-12) throw std::runtime_error("speaker: zero-norm embedding");
    for (std::size_t i = 0; i < e.size(); ++i) e[i] /= n;
    return e;
  }

  std::vector<Tensor*> parameters() {
    return {&frame_layer.W, &frame_layer.b, &embed_layer.W, &embed_layer.b};
  }
};

struct SpeakerRecord {
  std::string id;
  Tensor embedding;  // unit norm
};

inline SpeakerRecord speaker_enroll(const std::vector<double>& audio,
                                    const SpeakerExtractor& extractor,
                                    const std::string& id) {
  return {id, extractor.embedding(audio)};
}

struct IdentifyResult {
  bool matched = false;
  std::string id;
  double score = 0.0;       // S_max
  bool score_defined = true;  // false on an empty registry
};

inline IdentifyResult speaker_identify(const std::vector<double>& audio,
                                       const std::vector<SpeakerRecord>& registry,
                                       const SpeakerExtractor& extractor,
                                       double threshold) {
  IdentifyResult out;
  if (registry.empty()) {
    out.score_defined = false;
    return out;
  }
  Tensor z = extractor.embedding(audio);
  double best = -2.0;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < registry.size(); ++i) {
    const double s = dot(z, registry[i].embedding);
    if (s > best) {
      best = s;
      best_i = i;
    }
  }
  out.score = best;
  if (best >= threshold) {
    out.matched = true;
    out.id = registry[best_i].id;
  }
  return out;
}

struct SpeakerTrainResult {
  SpeakerExtractor extractor;
  std::vector<double> train_loss;
  double top1_accuracy = 0.0;  // held-out identification
};

/// Contrastive training over clip pairs: one anchor and one second clip per
/// speaker per step, normalized-temperature cross-entropy across the batch.
inline SpeakerTrainResult train_speaker_extractor(
    const std::vector<SpeakerClip>& clips, std::size_t speakers,
    std::uint64_t seed, std::size_t steps = 60, double tau = 0.2,
    double learning_rate = 3e-3) {
  SpeakerTrainResult result;
  result.extractor = SpeakerExtractor::make(seed);

  // Features once.
  std::vector<Tensor> feats(clips.size());
  for (std::size_t c = 0; c < clips.size(); ++c)
    feats[c] = result.extractor.mfcc_features(clips[c].audio);

  std::vector<std::size_t> train_clips, val_clips;
  split_clips(clips.size(), seed, &train_clips, &val_clips);
  std::vector<std::vector<std::size_t>> by_speaker(speakers);
  for (std::size_t c : train_clips)
    by_speaker[clips[c].speaker].push_back(c);
  for (const auto& group : by_speaker)
    if (group.size() < 2)
      throw std::invalid_argument("train_speaker_extractor: a speaker has "
                                  "fewer than 2 training clips");

  AdamState adam;
  adam.alpha = learning_rate;
  Rng rng = Rng::stream(seed, "speaker-train");
  for (std::size_t step = 0; step < steps; ++step) {
    Tape t;
    nn::BoundParams bp;
    std::vector<Var> anchors, augmented;
    for (std::size_t s = 0; s < speakers; ++s) {
      const auto& group = by_speaker[s];
      const std::size_t a = group[rng.uniform_int(group.size())];
      std::size_t b = group[rng.uniform_int(group.size())];
      while (b == a) b = group[rng.uniform_int(group.size())];
      anchors.push_back(result.extractor.embed(t, feats[a], &bp));
      augmented.push_back(result.extractor.embed(t, feats[b], &bp));
    }
    Var l = loss::ntxent_loss(t, anchors, augmented, tau);
    const double lv = t.val(l).item();
    if (!std::isfinite(lv))
      throw std::runtime_error("train_speaker_extractor: divergence at step " +
                               std::to_string(step));
    t.backward(l);
    adam_step(adam, bp.tensors, bp.gradients(t));
    result.train_loss.push_back(lv);
  }

  // Enroll one held-out clip per speaker, identify the rest.
  std::vector<SpeakerRecord> registry;
  std::vector<bool> enrolled(speakers, false);
  std::vector<std::size_t> queries;
  for (std::size_t c : val_clips) {
    const std::size_t s = clips[c].speaker;
    if (!enrolled[s]) {
      registry.push_back(speaker_enroll(clips[c].audio, result.extractor,
                                        "speaker" + std::to_string(s)));
      enrolled[s] = true;
    } else {
      queries.push_back(c);
    }
  }
  std::size_t correct = 0;
  for (std::size_t c : queries) {
    IdentifyResult r = speaker_identify(clips[c].audio, registry,
                                        result.extractor, -1.0);
    if (r.matched &&
        r.id == "speaker" + std::to_string(clips[c].speaker))
      ++correct;
  }
  result.top1_accuracy =
      queries.empty() ? 0.0 : double(correct) / double(queries.size());
  return result;
}

// ---------------------------------------------------------------------------
// DOA estimation
// ---------------------------------------------------------------------------

enum class DoaMethod { spatial_spectrum, correlation, network };

struct DoaEstimate {
  Tensor posterior;  // J x blocks, each block normalized to sum 1
  std::vector<std::size_t> block_argmax;
  spatial::Direction direction;  // argmax over the pooled posterior
};

inline DoaEstimate summarize_map(const Tensor& map,
                                 const std::vector<spatial::Direction>& grid) {
  DoaEstimate out;
  out.posterior = map;
  const std::size_t J = map.rows(), B = map.cols();
  Tensor pooled({J}, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    double sum = 0.0;
    for (std::size_t j = 0; j < J; ++j) sum += map.at(j, b);
    std::size_t arg = 0;
    for (std::size_t j = 0; j < J; ++j) {
      if (sum > 0.0) out.posterior.at(j, b) = map.at(j, b) / sum;
      pooled[j] += map.at(j, b);
      if (map.at(j, b) > map.at(arg, b)) arg = j;
    }
    out.block_argmax.push_back(arg);
  }
  std::size_t arg = 0;
  for (std::size_t j = 1; j < J; ++j)
    if (pooled[j] > pooled[arg]) arg = j;
  out.direction = grid[arg];
  return out;
}

inline DoaEstimate estimate_doa(const spatial::MultiSpectrogram& obs,
                                const spatial::ArrayGeometry& geometry,
                                DoaMethod method,
                                const std::vector<spatial::Direction>& grid,
                                const spatial::SpatialSpectrumOptions& opt = {},
                                const nn::Sequential* net = nullptr) {
  Tensor map;
  switch (method) {
    case DoaMethod::spatial_spectrum:
      map = spatial::spatial_spectrum(obs, geometry, grid, opt);
      break;
    case DoaMethod::correlation:
      map = spatial::correlation_feature(obs, geometry, grid,
                                         spatial::CorrelationWeighting::phat,
                                         opt);
      // Shift to nonnegative for the posterior normalization.
      {
        double lo = map[0];
        for (std::size_t i = 0; i < map.size(); ++i) lo = std::min(lo, map[i]);
        for (std::size_t i = 0; i < map.size(); ++i) map[i] -= lo;
      }
      break;
    case DoaMethod::network: {
      if (!net) throw std::invalid_argument("estimate_doa: missing network");
      Tensor classical =
          spatial::spatial_spectrum(obs, geometry, grid, opt);
      // Per-block normalized map through the net (J -> J probabilities).
      map = Tensor({grid.size(), classical.cols()});
      for (std::size_t b = 0; b < classical.cols(); ++b) {
        Tensor col({grid.size(), 1});
        double sum = 0.0;
        for (std::size_t j = 0; j < grid.size(); ++j) sum += classical.at(j, b);
        for (std::size_t j = 0; j < grid.size(); ++j)
          col.at(j, 0) = sum > 0.0 ? classical.at(j, b) / sum * double(grid.size())
                                   : 0.0;
        Tensor probs = net->evaluate(col);
        for (std::size_t j = 0; j < grid.size(); ++j)
          map.at(j, b) = probs.at(j, 0);
      }
      break;
    }
  }
  return summarize_map(map, grid);
}

struct DoaNetworkResult {
  nn::Sequential net;
  std::vector<double> train_loss;
};

/// Multi-source-capable DOA network on smoothed labels: input is the
/// per-block normalized classical map, output per-cell probabilities.
inline DoaNetworkResult train_doa_network(
    const std::vector<DoaSceneSample>& scenes,
    const std::vector<spatial::Direction>& grid, const dsp::FrameConfig& cfg,
    double label_sigma, std::uint64_t seed, std::size_t epochs = 30,
    const spatial::SpatialSpectrumOptions& opt = {}) {
  Rng init = Rng::stream(seed, "doa-init");
  DoaNetworkResult result;
  const std::size_t J = grid.size();
  std::ostringstream desc;
  desc << "dense in=" << J << " out=64 act=relu\n";
  desc << "dense in=64 out=" << J << " act=sigmoid\n";
  result.net = nn::Sequential::from_descriptor(desc.str(), init);

  // Features: per-block normalized classical maps; labels: smoothed.
  std::vector<Tensor> features;
  std::vector<Tensor> labels;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    Rng srng = Rng::stream(seed, "doa-sim", s);
    spatial::SimulatedScene sim =
        spatial::simulate_scene(scenes[s].scene, cfg, srng);
    Tensor map = spatial::spatial_spectrum(sim.observation,
                                           scenes[s].scene.geometry, grid, opt);
    Tensor label = spatial::smoothed_labels(grid, {scenes[s].truth},
                                            label_sigma);
    for (std::size_t b = 0; b < map.cols(); ++b) {
      Tensor col({J, 1});
      double sum = 0.0;
      for (std::size_t j = 0; j < J; ++j) sum += map.at(j, b);
      for (std::size_t j = 0; j < J; ++j)
        col.at(j, 0) = sum > 0.0 ? map.at(j, b) / sum * double(J) : 0.0;
      features.push_back(col);
      labels.push_back(label.reshape({J, 1}));
    }
  }

  AdamState adam;
  adam.alpha = 3e-3;
  Rng shuffle_rng = Rng::stream(seed, "doa-shuffle");
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
    for (std::size_t i : order) {
      Tape t;
      nn::BoundParams bp;
      Var probs = result.net.forward(t, t.constant(features[i]), &bp);
      Var l = loss::bce(t, probs, labels[i]);
      epoch_loss += t.val(l).item();
      t.backward(l);
      adam_step(adam, bp.tensors, bp.gradients(t));
    }
    result.train_loss.push_back(epoch_loss / double(features.size()));
  }
  return result;
}

}  // namespace dasp::pipe
