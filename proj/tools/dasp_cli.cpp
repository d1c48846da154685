// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Command-line front end: synthetic end-to-end recipes (denoise, separate,
// sed, speaker, doa, diffuse), classical transforms (visualize, ot), and the
// finite-difference gradient suite (gradcheck).
//
// Exit codes: 0 success, 1 config schema violation (field path in the
// message), 2 malformed WAV/CSV input (location in the message), 3 any other
// failure. Same config + seed => byte-identical artifacts.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "dasp/csv.hpp"
#include "dasp/detection.hpp"
#include "dasp/generative.hpp"
#include "dasp/gradcheck.hpp"
#include "dasp/io.hpp"
#include "dasp/pipelines.hpp"
#include "dasp/transforms.hpp"
#include "dasp/wav.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dasp;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Context {
  json config;
  std::uint64_t seed = 0;
  fs::path out_dir = "out";
  bool dry_run = false;
  unsigned threads = 1;
  std::vector<std::string> planned;  // artifact paths for --dry-run

  fs::path artifact(const std::string& name) {
    planned.push_back((out_dir / name).string());
    return out_dir / name;
  }

  void ensure_out() const {
    if (!dry_run) fs::create_directories(out_dir);
  }
};

/// Rejects unknown keys; `path` names the config location for messages.
void require_keys(const json& obj, const std::string& path,
                  const std::vector<std::string>& allowed) {
  if (!obj.is_object())
    throw ConfigError("config " + path + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("config: unknown field " + path + "/" + key);
  }
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback,
         const std::string& path = "") {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field " + path + "/" + key +
                      " has the wrong type");
  }
}

wav::Audio read_wav_checked(const std::string& path) {
  try {
    return wav::read(path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

csv::Table read_csv_checked(const std::string& path) {
  try {
    return csv::read(path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

void write_metric_rows(const fs::path& path,
                       const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& rows) {
  csv::write(path.string(), header, rows);
}

pipe::SynthSpec spec_from_config(Context& ctx, const std::string& task,
                                 double default_clip_seconds,
                                 std::size_t default_clips) {
  pipe::SynthSpec spec;
  spec.task = task;
  spec.seed = ctx.seed;
  spec.sample_rate = get_or<double>(ctx.config, "sample_rate", 8000.0);
  spec.clip_seconds =
      get_or<double>(ctx.config, "clip_seconds", default_clip_seconds);
  spec.clips = get_or<std::size_t>(ctx.config, "clips", default_clips);
  spec.snr_db = get_or<double>(ctx.config, "snr_db", 0.0);
  spec.sources = get_or<std::size_t>(ctx.config, "sources", 2);
  spec.event_density = get_or<double>(ctx.config, "event_density", 0.5);
  spec.event_min_len = get_or<double>(ctx.config, "event_min_len", 0.25);
  spec.event_max_len = get_or<double>(ctx.config, "event_max_len", 0.6);
  return spec;
}

pipe::TrainOptions train_options(const Context& ctx, std::size_t epochs) {
  pipe::TrainOptions opt;
  opt.epochs = get_or<std::size_t>(ctx.config, "epochs", epochs);
  opt.batch = get_or<std::size_t>(ctx.config, "batch", 128);
  opt.learning_rate = get_or<double>(ctx.config, "learning_rate", 1e-3);
  opt.patience = get_or<std::size_t>(ctx.config, "patience", 10);
  return opt;
}

dsp::FrameConfig frame_config(const Context& ctx) {
  const auto length = get_or<std::size_t>(ctx.config, "frame_length", 256);
  const auto hop = get_or<std::size_t>(ctx.config, "frame_hop", 128);
  return dsp::FrameConfig(length, hop);
}

void save_mono_wav(const fs::path& path, const std::vector<double>& samples,
                   double rate) {
  wav::Audio audio;
  audio.sample_rate = static_cast<std::uint32_t>(rate);
  audio.channels = {samples};
  wav::write(path.string(), audio);
}

// ---------------------------------------------------------------------------

int cmd_denoise(Context& ctx) {
  require_keys(ctx.config, "",
               {"sample_rate", "clip_seconds", "clips", "snr_db", "context",
                "frame_length", "frame_hop", "epochs", "batch",
                "learning_rate", "patience", "loss", "net", "seed"});
  pipe::SynthSpec spec = spec_from_config(ctx, "denoise", 2.0, 60);
  dsp::FrameConfig cfg = frame_config(ctx);
  const auto context = get_or<std::size_t>(ctx.config, "context", 2);
  const std::string loss_kind =
      get_or<std::string>(ctx.config, "loss", "bce_mask");
  if (loss_kind != "bce_mask" && loss_kind != "spectral")
    throw ConfigError("config: field /loss must be bce_mask or spectral");
  const std::size_t in_dim = (2 * context + 1) * cfg.bins();
  std::string net = get_or<std::string>(
      ctx.config, "net",
      "dense in=" + std::to_string(in_dim) +
          " out=128 act=relu\ndense in=128 out=128 act=relu\n"
          "dense in=128 out=" +
          std::to_string(cfg.bins()) + " act=sigmoid\n");
  pipe::TrainOptions opt = train_options(ctx, 3);

  auto metrics_path = ctx.artifact("denoise_metrics.csv");
  auto enhanced_path = ctx.artifact("denoise_enhanced.wav");
  auto noisy_path = ctx.artifact("denoise_noisy.wav");
  auto clean_path = ctx.artifact("denoise_clean.wav");
  auto model_path = ctx.artifact("denoise_model.bin");
  if (ctx.dry_run) return 0;

  auto clips = pipe::synth_denoise(spec);
  pipe::DenoiseResult result = pipe::train_denoiser(
      clips, context, net,
      loss_kind == "bce_mask" ? pipe::DenoiseLoss::bce_mask
                              : pipe::DenoiseLoss::spectral,
      cfg, spec.sample_rate, spec.seed, opt);

  std::vector<std::vector<double>> rows;
  for (std::size_t e = 0; e < result.train_loss.size(); ++e)
    rows.push_back({double(e), result.train_loss[e],
                    result.validation_loss[e], result.si_sdr_noisy,
                    result.si_sdr_enhanced, result.si_sdr_oracle});
  write_metric_rows(metrics_path,
                    {"epoch", "train_loss", "val_loss", "si_sdr_noisy",
                     "si_sdr_enhanced", "si_sdr_oracle"},
                    rows);
  std::vector<std::size_t> train_idx, val_idx;
  pipe::split_clips(clips.size(), spec.seed, &train_idx, &val_idx);
  const auto& demo = clips[val_idx[0]];
  save_mono_wav(noisy_path, demo.mixture, spec.sample_rate);
  save_mono_wav(clean_path, demo.clean, spec.sample_rate);
  save_mono_wav(enhanced_path,
                pipe::denoise_signal(result.net, demo.mixture, cfg,
                                     spec.sample_rate, context),
                spec.sample_rate);
  io::save_checkpoint(model_path.string(), result.net.to_checkpoint());
  std::cout << "denoise: si-sdr noisy " << result.si_sdr_noisy
            << " dB, enhanced " << result.si_sdr_enhanced << " dB, oracle "
            << result.si_sdr_oracle << " dB\n";
  return 0;
}

int cmd_separate(Context& ctx) {
  require_keys(ctx.config, "",
               {"sample_rate", "clip_seconds", "clips", "sources",
                "frame_length", "frame_hop", "epochs", "batch",
                "learning_rate", "patience", "net", "seed"});
  pipe::SynthSpec spec = spec_from_config(ctx, "separate", 1.0, 40);
  dsp::FrameConfig cfg = frame_config(ctx);
  const std::size_t K = cfg.bins();
  std::string net = get_or<std::string>(
      ctx.config, "net",
      "dense in=" + std::to_string(K) + " out=128 act=relu\ndense in=128 out=" +
          std::to_string(spec.sources * K) + " act=sigmoid\n");
  pipe::TrainOptions opt = train_options(ctx, 6);

  auto metrics_path = ctx.artifact("separate_metrics.csv");
  auto model_path = ctx.artifact("separate_model.bin");
  std::vector<fs::path> stem_paths;
  for (std::size_t j = 0; j < spec.sources; ++j)
    stem_paths.push_back(
        ctx.artifact("separate_estimate" + std::to_string(j) + ".wav"));
  if (ctx.dry_run) return 0;

  auto clips = pipe::synth_separation(spec);
  pipe::SeparatorResult result = pipe::train_separator(
      clips, net, cfg, spec.sample_rate, spec.seed, opt);

  std::vector<std::vector<double>> rows;
  for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
    std::vector<double> row{double(e), result.train_loss[e]};
    for (double v : result.si_sdr_per_source) row.push_back(v);
    row.push_back(result.si_sdr_oracle);
    rows.push_back(row);
  }
  std::vector<std::string> header{"epoch", "pit_loss"};
  for (std::size_t j = 0; j < spec.sources; ++j)
    header.push_back("si_sdr_source" + std::to_string(j));
  header.push_back("si_sdr_oracle");
  write_metric_rows(metrics_path, header, rows);

  std::vector<std::size_t> train_idx, val_idx;
  pipe::split_clips(clips.size(), spec.seed, &train_idx, &val_idx);
  const auto& demo = clips[val_idx[0]];
  dsp::Spectrogram mix = dsp::stft(demo.mixture, cfg, spec.sample_rate);
  Tensor feats({K, mix.frames});
  Tensor mm = mix.magnitude();
  for (std::size_t f = 0; f < mix.frames; ++f)
    for (std::size_t k = 0; k < K; ++k)
      feats.at(k, f) = pipe::log_magnitude(mm.at(f, k));
  Tensor masks = result.net.evaluate(feats);
  for (std::size_t j = 0; j < spec.sources; ++j) {
    Tensor mask({mix.frames, K});
    for (std::size_t f = 0; f < mix.frames; ++f)
      for (std::size_t k = 0; k < K; ++k)
        mask.at(f, k) = masks.at(j * K + k, f);
    dsp::MaskSeq ms(std::move(mask));
    save_mono_wav(stem_paths[j], dsp::istft(mix, &ms), spec.sample_rate);
  }
  io::save_checkpoint(model_path.string(), result.net.to_checkpoint());
  std::cout << "separate: pit loss " << result.pit_loss_final
            << ", si-sdr per source";
  for (double v : result.si_sdr_per_source) std::cout << " " << v;
  std::cout << " dB (oracle " << result.si_sdr_oracle << " dB)\n";
  return 0;
}

int cmd_sed(Context& ctx) {
  require_keys(ctx.config, "",
               {"sample_rate", "clip_seconds", "clips", "event_density",
                "event_min_len", "event_max_len", "frame_length", "frame_hop",
                "mel_filters", "aggregation", "tau", "top_n", "lambda",
                "loss", "epochs", "batch", "learning_rate", "patience", "net",
                "thresholds", "seed"});
  pipe::SynthSpec spec = spec_from_config(ctx, "sed", 1.0, 80);
  dsp::FrameConfig cfg = frame_config(ctx);
  const auto mel_filters = get_or<std::size_t>(ctx.config, "mel_filters", 24);
  sed::Aggregation aggregation = sed::aggregation_from_string(
      get_or<std::string>(ctx.config, "aggregation", "linear_softmax"));
  sed::AggregationParams agg_params;
  agg_params.tau = get_or<double>(ctx.config, "tau", 1.0);
  agg_params.top_n = get_or<std::size_t>(ctx.config, "top_n", 1);
  agg_params.lambda = get_or<double>(ctx.config, "lambda", 0.5);
  pipe::SedLossSpec loss_spec;
  if (ctx.config.contains("loss")) {
    const json& lj = ctx.config.at("loss");
    require_keys(lj, "/loss", {"kind", "beta", "c0", "eta", "kappa0", "alpha"});
    loss_spec.kind = get_or<std::string>(lj, "kind", "bce", "/loss");
    loss_spec.beta = get_or<double>(lj, "beta", 1.0, "/loss");
    loss_spec.c0 = get_or<double>(lj, "c0", 1.0, "/loss");
    loss_spec.eta = get_or<double>(lj, "eta", 0.0, "/loss");
    loss_spec.kappa0 = get_or<double>(lj, "kappa0", 0.0, "/loss");
    loss_spec.alpha = get_or<double>(lj, "alpha", 0.5, "/loss");
  }
  sed::DecisionThresholds thresholds;
  if (ctx.config.contains("thresholds")) {
    const json& tj = ctx.config.at("thresholds");
    require_keys(tj, "/thresholds",
                 {"eps_g", "eps_low", "eps_high", "min_duration"});
    thresholds.eps_g = get_or<double>(tj, "eps_g", 0.5, "/thresholds");
    thresholds.eps_low = get_or<double>(tj, "eps_low", 0.2, "/thresholds");
    thresholds.eps_high = get_or<double>(tj, "eps_high", 0.75, "/thresholds");
    thresholds.min_duration =
        get_or<std::size_t>(tj, "min_duration", 5, "/thresholds");
  }
  std::string net = get_or<std::string>(
      ctx.config, "net",
      "dense in=" + std::to_string(mel_filters) +
          " out=32 act=relu\ndense in=32 out=" +
          std::to_string(pipe::kSedClasses) + " act=sigmoid\n");
  pipe::TrainOptions opt = train_options(ctx, 15);
  opt.learning_rate = get_or<double>(ctx.config, "learning_rate", 5e-3);

  auto metrics_path = ctx.artifact("sed_metrics.csv");
  auto decisions_path = ctx.artifact("sed_decisions.csv");
  auto roc_path = ctx.artifact("sed_roc.csv");
  auto model_path = ctx.artifact("sed_model.bin");
  if (ctx.dry_run) return 0;

  auto clips = pipe::synth_sed(spec, cfg);
  pipe::SedResult result =
      pipe::train_sed(clips, aggregation, agg_params, loss_spec, net, cfg,
                      spec.sample_rate, mel_filters, spec.seed, opt);

  std::vector<std::vector<double>> rows;
  for (std::size_t e = 0; e < result.train_loss.size(); ++e)
    rows.push_back({double(e), result.train_loss[e], result.frame_auc,
                    result.clip_auc});
  write_metric_rows(metrics_path,
                    {"epoch", "train_loss", "frame_auc", "clip_auc"}, rows);

  // Decisions for one held-out clip through the triple-threshold automaton.
  std::vector<std::size_t> train_idx, val_idx;
  pipe::split_clips(clips.size(), spec.seed, &train_idx, &val_idx);
  dsp::MelBank bank = dsp::mel_bank(mel_filters, cfg.bins(), spec.sample_rate);
  const auto& demo = clips[val_idx[0]];
  Tensor probs = result.net.evaluate(
      pipe::sed_features(demo, cfg, bank, spec.sample_rate));
  std::vector<std::vector<double>> decision_rows;
  sed::ScoredSet frame_scores;
  for (std::size_t l = 0; l < probs.rows(); ++l) {
    std::vector<double> row(probs.cols());
    for (std::size_t f = 0; f < probs.cols(); ++f)
      row[f] = std::clamp(probs.at(l, f), 0.0, 1.0);
    const double clip_score = sed::aggregate(row, aggregation, agg_params);
    std::vector<int> decisions = sed::decide(row, thresholds, clip_score);
    for (std::size_t f = 0; f < probs.cols(); ++f)
      decision_rows.push_back(
          {double(f), double(l), row[f], double(decisions[f])});
  }
  write_metric_rows(decisions_path,
                    {"frame", "class", "probability", "decision"},
                    decision_rows);
  // ROC of held-out frame probabilities against the hidden truth.
  for (std::size_t c : val_idx) {
    Tensor p = result.net.evaluate(
        pipe::sed_features(clips[c], cfg, bank, spec.sample_rate));
    for (std::size_t l = 0; l < p.rows(); ++l)
      for (std::size_t f = 0; f < p.cols(); ++f) {
        if (clips[c].frame_truth.at(l, f) > 0.5)
          frame_scores.positives.push_back(p.at(l, f));
        else
          frame_scores.negatives.push_back(p.at(l, f));
      }
  }
  std::vector<std::vector<double>> roc_rows;
  for (const auto& pt : sed::roc_points(frame_scores))
    roc_rows.push_back({pt.fpr, pt.recall, pt.threshold});
  write_metric_rows(roc_path, {"fpr", "recall", "threshold"}, roc_rows);
  io::save_checkpoint(model_path.string(), result.net.to_checkpoint());
  std::cout << "sed: frame auc " << result.frame_auc << ", clip auc "
            << result.clip_auc << "\n";
  return 0;
}

int cmd_speaker(Context& ctx) {
  require_keys(ctx.config, "",
               {"sample_rate", "clip_seconds", "clips", "speakers", "steps",
                "tau", "learning_rate", "seed"});
  pipe::SynthSpec spec = spec_from_config(ctx, "speaker", 1.0, 60);
  spec.sources = get_or<std::size_t>(ctx.config, "speakers", 5);
  const auto steps = get_or<std::size_t>(ctx.config, "steps", 60);
  const double tau = get_or<double>(ctx.config, "tau", 0.2);
  const double lr = get_or<double>(ctx.config, "learning_rate", 3e-3);

  auto metrics_path = ctx.artifact("speaker_metrics.csv");
  auto embeddings_path = ctx.artifact("speaker_embeddings.csv");
  if (ctx.dry_run) return 0;

  auto clips = pipe::synth_speaker(spec);
  pipe::SpeakerTrainResult result = pipe::train_speaker_extractor(
      clips, spec.sources, spec.seed, steps, tau, lr);

  std::vector<std::vector<double>> rows;
  for (std::size_t s = 0; s < result.train_loss.size(); ++s)
    rows.push_back({double(s), result.train_loss[s], result.top1_accuracy});
  write_metric_rows(metrics_path, {"step", "ntxent_loss", "top1_accuracy"},
                    rows);

  std::vector<std::vector<double>> embed_rows;
  for (std::size_t c = 0; c < clips.size(); ++c) {
    Tensor z = result.extractor.embedding(clips[c].audio);
    std::vector<double> row{double(c), double(clips[c].speaker)};
    for (std::size_t i = 0; i < z.size(); ++i) row.push_back(z[i]);
    embed_rows.push_back(row);
  }
  std::vector<std::string> header{"clip", "speaker"};
  for (std::size_t i = 0; i < 16; ++i)
    header.push_back("z" + std::to_string(i));
  write_metric_rows(embeddings_path, header, embed_rows);
  std::cout << "speaker: top-1 accuracy " << result.top1_accuracy << "\n";
  return 0;
}

int cmd_doa(Context& ctx) {
  require_keys(ctx.config, "",
               {"sample_rate", "clip_seconds", "clips", "snr_db", "method",
                "grid_size", "frame_length", "frame_hop", "block_frames",
                "scene_file", "label_sigma", "epochs", "seed"});
  dsp::FrameConfig cfg = frame_config(ctx);
  const std::string method_name =
      get_or<std::string>(ctx.config, "method", "spatial_spectrum");
  pipe::DoaMethod method;
  if (method_name == "spatial_spectrum") method = pipe::DoaMethod::spatial_spectrum;
  else if (method_name == "correlation") method = pipe::DoaMethod::correlation;
  else if (method_name == "network") method = pipe::DoaMethod::network;
  else throw ConfigError("config: field /method must be spatial_spectrum, "
                         "correlation, or network");
  const auto grid_size = get_or<std::size_t>(ctx.config, "grid_size", 72);
  spatial::SpatialSpectrumOptions opt;
  opt.block_frames = get_or<std::size_t>(ctx.config, "block_frames", 100);

  auto results_path = ctx.artifact("doa_results.csv");
  auto map_path = ctx.artifact("doa_posterior.csv");
  if (ctx.dry_run) return 0;

  auto grid = spatial::azimuth_ring_grid(grid_size);
  std::vector<pipe::DoaSceneSample> scenes;
  if (ctx.config.contains("scene_file")) {
    spatial::SceneFile file = spatial::parse_scene_file(
        ctx.config.at("scene_file").get<std::string>());
    pipe::DoaSceneSample sample;
    sample.scene.geometry = file.geometry;
    sample.scene.sample_rate = file.sample_rate;
    sample.scene.noise_std = file.noise_std;
    for (const auto& [wav_path, direction] : file.sources) {
      wav::Audio audio = read_wav_checked(wav_path);
      sample.scene.sources.push_back({direction, audio.mono()});
    }
    sample.truth = file.sources[0].second;
    scenes.push_back(std::move(sample));
  } else {
    pipe::SynthSpec spec = spec_from_config(ctx, "doa", 2.0, 20);
    if (!ctx.config.contains("snr_db")) spec.snr_db = 20.0;
    scenes = pipe::synth_doa(spec);
  }

  const nn::Sequential* net_ptr = nullptr;
  pipe::DoaNetworkResult trained;
  if (method == pipe::DoaMethod::network) {
    trained = pipe::train_doa_network(
        scenes, grid, cfg, get_or<double>(ctx.config, "label_sigma", 0.35),
        ctx.seed, get_or<std::size_t>(ctx.config, "epochs", 30), opt);
    net_ptr = &trained.net;
  }

  std::vector<std::vector<double>> rows;
  Tensor first_map;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    Rng rng = Rng::stream(ctx.seed, "doa-sim", s);
    spatial::SimulatedScene sim =
        spatial::simulate_scene(scenes[s].scene, cfg, rng);
    pipe::DoaEstimate est = pipe::estimate_doa(
        sim.observation, scenes[s].scene.geometry, method, grid, opt, net_ptr);
    const double err_deg =
        est.direction.angle_to(scenes[s].truth) * 180.0 / dsp::kPi;
    rows.push_back({double(s),
                    scenes[s].truth.azimuth * 180.0 / dsp::kPi,
                    est.direction.azimuth * 180.0 / dsp::kPi, err_deg});
    if (s == 0) first_map = est.posterior;
  }
  write_metric_rows(results_path,
                    {"scene", "true_azimuth_deg", "estimated_azimuth_deg",
                     "error_deg"},
                    rows);
  csv::write_matrix(map_path.string(), first_map);
  double worst = 0.0;
  for (const auto& row : rows) worst = std::max(worst, row[3]);
  std::cout << "doa: " << rows.size() << " scenes, worst error " << worst
            << " deg\n";
  return 0;
}

int cmd_visualize(Context& ctx) {
  require_keys(ctx.config, "",
               {"method", "input_csv", "dims", "iterations", "step",
                "momentum", "perplexity", "zeta", "neighbors", "ridge",
                "seed"});
  const std::string method = get_or<std::string>(ctx.config, "method", "tsne");
  if (!ctx.config.contains("input_csv"))
    throw ConfigError("config: field /input_csv is required");
  const std::string input = ctx.config.at("input_csv").get<std::string>();
  const auto dims = get_or<std::size_t>(ctx.config, "dims", 2);

  auto scatter_path = ctx.artifact("visualize_" + method + ".csv");
  if (ctx.dry_run) return 0;

  // Rows of the input CSV are samples; internal layout is column-major.
  Tensor rows_matrix = read_csv_checked(input).to_tensor();
  Tensor X = rows_matrix.transpose();  // D x N
  xform::EmbeddingResult result;
  if (method == "tsne") {
    xform::TsneOptions opt;
    opt.dims = dims;
    opt.iterations = get_or<std::size_t>(ctx.config, "iterations", 400);
    opt.step = get_or<double>(ctx.config, "step", 5.0);
    opt.momentum = get_or<double>(ctx.config, "momentum", 0.5);
    opt.perplexity = get_or<double>(ctx.config, "perplexity", 10.0);
    opt.zeta = get_or<double>(ctx.config, "zeta", 1.0);
    Rng rng = Rng::stream(ctx.seed, "visualize-tsne");
    result = xform::tsne_embed(X, false, opt, rng);
  } else if (method == "mds") {
    result = xform::mds_embed(xform::pairwise_squared_distances(X), dims);
  } else if (method == "lle") {
    result = xform::lle_embed(X, get_or<std::size_t>(ctx.config, "neighbors", 8),
                              get_or<double>(ctx.config, "ridge", 1e-6), dims);
  } else {
    throw ConfigError("config: field /method must be tsne, mds, or lle");
  }

  std::vector<std::vector<double>> rows;
  for (std::size_t n = 0; n < result.coordinates.cols(); ++n) {
    std::vector<double> row{double(n)};
    for (std::size_t l = 0; l < dims; ++l)
      row.push_back(result.coordinates.at(l, n));
    rows.push_back(row);
  }
  std::vector<std::string> header{"id"};
  for (std::size_t l = 0; l < dims; ++l)
    header.push_back("y" + std::to_string(l + 1));
  write_metric_rows(scatter_path, header, rows);
  std::cout << "visualize: wrote " << rows.size() << " points ("
            << method << ")\n";
  return 0;
}

int cmd_ot(Context& ctx) {
  require_keys(ctx.config, "",
               {"cost_csv", "p_csv", "q_csv", "source_csv", "target_csv",
                "seed"});
  auto plan_path = ctx.artifact("ot_plan.csv");
  auto summary_path = ctx.artifact("ot_summary.csv");
  if (ctx.dry_run) return 0;

  Tensor C;
  Tensor p, q;
  if (ctx.config.contains("cost_csv")) {
    C = read_csv_checked(ctx.config.at("cost_csv").get<std::string>())
            .to_tensor();
  } else if (ctx.config.contains("source_csv") &&
             ctx.config.contains("target_csv")) {
    Tensor src = read_csv_checked(
                     ctx.config.at("source_csv").get<std::string>())
                     .to_tensor();
    Tensor dst = read_csv_checked(
                     ctx.config.at("target_csv").get<std::string>())
                     .to_tensor();
    C = Tensor({src.rows(), dst.rows()});
    for (std::size_t i = 0; i < src.rows(); ++i)
      for (std::size_t j = 0; j < dst.rows(); ++j) {
        double acc = 0.0;
        for (std::size_t d = 0; d < src.cols(); ++d) {
          const double diff = src.at(i, d) - dst.at(j, d);
          acc += diff * diff;
        }
        C.at(i, j) = acc;
      }
  } else {
    throw ConfigError(
        "config: need /cost_csv or both /source_csv and /target_csv");
  }
  auto load_marginal = [&](const char* key, std::size_t n) {
    if (!ctx.config.contains(key)) return Tensor({n}, 1.0 / double(n));
    Tensor m = read_csv_checked(ctx.config.at(key).get<std::string>())
                   .to_tensor();
    return m.reshape({m.size()});
  };
  p = load_marginal("p_csv", C.rows());
  q = load_marginal("q_csv", C.cols());
  xform::TransportPlan plan = xform::ot_solve(C, p, q);
  csv::write_matrix(plan_path.string(), plan.plan);
  write_metric_rows(summary_path, {"total_cost"}, {{plan.total_cost}});
  std::cout << "ot: total cost " << plan.total_cost << "\n";
  return 0;
}

int cmd_diffuse(Context& ctx) {
  require_keys(ctx.config, "",
               {"steps", "train_steps", "samples", "alpha_start", "alpha_end",
                "batch", "learning_rate", "hidden", "seed"});
  const auto T = get_or<std::size_t>(ctx.config, "steps", 50);
  const auto train_steps = get_or<std::size_t>(ctx.config, "train_steps", 2000);
  const auto sample_count = get_or<std::size_t>(ctx.config, "samples", 1000);
  const double alpha_start = get_or<double>(ctx.config, "alpha_start", 0.995);
  const double alpha_end = get_or<double>(ctx.config, "alpha_end", 0.75);
  const auto batch = get_or<std::size_t>(ctx.config, "batch", 64);
  const double lr = get_or<double>(ctx.config, "learning_rate", 2e-3);
  const auto hidden = get_or<std::size_t>(ctx.config, "hidden", 64);

  auto samples_path = ctx.artifact("diffuse_samples.csv");
  auto loss_path = ctx.artifact("diffuse_loss.csv");
  auto trajectory_path = ctx.artifact("diffuse_trajectory.csv");
  if (ctx.dry_run) return 0;

  gen::DiffusionSchedule schedule =
      gen::diffusion_schedule(T, gen::AlphaCurve::linear, alpha_start,
                              alpha_end);
  // Two-cluster toy in 2-D.
  const double cluster_std = 0.1;
  auto draw_x0 = [&](Rng& rng) {
    const double cx = rng.uniform() < 0.5 ? 1.0 : -1.0;
    return Tensor::vector({cx + cluster_std * rng.gaussian(),
                           cx + cluster_std * rng.gaussian()});
  };
  Rng init = Rng::stream(ctx.seed, "diffuse-init");
  nn::Sequential net = nn::Sequential::from_descriptor(
      "dense in=3 out=" + std::to_string(hidden) +
          " act=swish\ndense in=" + std::to_string(hidden) + " out=" +
          std::to_string(hidden) + " act=swish\ndense in=" +
          std::to_string(hidden) + " out=2 act=identity\n",
      init);
  gen::DiffusionPredictor predictor;  // defined per tape below

  AdamState adam;
  adam.alpha = lr;
  Rng train_rng = Rng::stream(ctx.seed, "diffuse-train");
  std::vector<std::vector<double>> loss_rows;
  for (std::size_t step = 0; step < train_steps; ++step) {
    std::vector<Tensor> x0_batch;
    for (std::size_t b = 0; b < batch; ++b) x0_batch.push_back(draw_x0(train_rng));
    ad::Tape t;
    nn::BoundParams bp;
    auto pred = [&](ad::Tape& tt, ad::Var x_t, double tn) {
      ad::Var with_time =
          tt.concat({x_t, tt.constant(Tensor::vector({tn}))}, 0);
      return net.forward(tt, with_time, &bp);
    };
    ad::Var l = gen::diffusion_train_loss(t, pred, x0_batch, schedule,
                                          train_rng);
    const double lv = t.val(l).item() / double(batch);
    t.backward(l);
    adam_step(adam, bp.tensors, bp.gradients(t));
    if (step % 50 == 0 || step + 1 == train_steps)
      loss_rows.push_back({double(step), lv});
  }
  write_metric_rows(loss_path, {"step", "loss_per_sample"}, loss_rows);

  // Reverse sampling with a trajectory snapshot of the first sample.
  Rng sample_rng = Rng::stream(ctx.seed, "diffuse-sample");
  std::vector<std::vector<double>> sample_rows, trajectory_rows;
  for (std::size_t s = 0; s < sample_count; ++s) {
    Tensor x({2});
    x[0] = sample_rng.gaussian();
    x[1] = sample_rng.gaussian();
    for (std::size_t step = T; step >= 1; --step) {
      Tensor with_time({3, 1});
      with_time.at(0, 0) = x[0];
      with_time.at(1, 0) = x[1];
      with_time.at(2, 0) = double(step) / double(T);
      Tensor x0_hat = net.evaluate(with_time).reshape({2});
      x = gen::posterior_step(x, x0_hat, step, schedule, sample_rng);
      if (s == 0)
        trajectory_rows.push_back({double(step), x[0], x[1]});
    }
    sample_rows.push_back({x[0], x[1]});
  }
  write_metric_rows(samples_path, {"x", "y"}, sample_rows);
  write_metric_rows(trajectory_path, {"step", "x", "y"}, trajectory_rows);

  std::size_t near = 0;
  for (const auto& row : sample_rows) {
    for (double c : {1.0, -1.0}) {
      const double dx = row[0] - c, dy = row[1] - c;
      if (std::sqrt(dx * dx + dy * dy) <= 3.0 * cluster_std) {
        ++near;
        break;
      }
    }
  }
  std::cout << "diffuse: " << near << "/" << sample_rows.size()
            << " samples within 3 sigma of a cluster center\n";
  return 0;
}

int cmd_gradcheck(Context& ctx) {
  require_keys(ctx.config, "", {"seeds", "tolerance", "seed"});
  const auto tolerance = get_or<double>(ctx.config, "tolerance", 1e-5);
  std::vector<std::uint64_t> seeds{1, 2, 3};
  if (ctx.config.contains("seeds"))
    seeds = ctx.config.at("seeds").get<std::vector<std::uint64_t>>();
  if (ctx.dry_run) return 0;
  bool all_pass = true;
  for (std::uint64_t seed : seeds) {
    auto results = gradcheck::run_suite(seed);
    for (const auto& r : results) {
      const bool ok = r.max_err < tolerance;
      all_pass = all_pass && ok;
      std::printf("seed %llu  %-32s %10.3e  %s\n",
                  static_cast<unsigned long long>(seed), r.name.c_str(),
                  r.max_err, ok ? "pass" : "FAIL");
    }
  }
  std::cout << (all_pass ? "gradcheck: all checks passed\n"
                         : "gradcheck: FAILURES\n");
  return all_pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dasp: data-driven acoustic signal processing toolkit (synthetic "
      "end-to-end recipes, classical transforms, gradient checks)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool dry_run = false;
  unsigned threads = 1;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_dir, "output directory for artifacts");
  auto* seed_opt = app.add_option("--seed", seed, "root seed (overrides config)");
  app.add_flag("--dry-run", dry_run,
               "validate the config and print the plan, touch nothing");
  app.add_option("--threads", threads, "worker cap for independent clips")
      ->check(CLI::PositiveNumber);

  std::map<std::string, int (*)(Context&)> commands{
      {"denoise", cmd_denoise},   {"separate", cmd_separate},
      {"doa", cmd_doa},           {"sed", cmd_sed},
      {"speaker", cmd_speaker},   {"visualize", cmd_visualize},
      {"ot", cmd_ot},             {"diffuse", cmd_diffuse},
      {"gradcheck", cmd_gradcheck}};
  for (auto& [name, fn] : commands)
    app.add_subcommand(name)->fallthrough();

  CLI11_PARSE(app, argc, argv);
  seed_given = seed_opt->count() > 0;

  Context ctx;
  ctx.out_dir = out_dir;
  ctx.dry_run = dry_run;
  ctx.threads = threads;
  try {
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw ConfigError("config: cannot open " + config_path);
      try {
        is >> ctx.config;
      } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
      }
    } else {
      ctx.config = json::object();
    }
    ctx.seed = seed_given
                   ? seed
                   : get_or<std::uint64_t>(ctx.config, "seed", 0);

    const std::string name = app.get_subcommands().front()->get_name();
    ctx.ensure_out();
    const int rc = commands.at(name)(ctx);
    if (ctx.dry_run) {
      std::cout << "dry run: command " << name << ", seed " << ctx.seed
                << ", threads " << ctx.threads << "; would write:\n";
      for (const auto& path : ctx.planned) std::cout << "  " << path << "\n";
    }
    return rc;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
