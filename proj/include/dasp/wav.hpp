// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dasp::wav {

/// Interleaved-free audio buffer: one vector per channel, unit full scale.
struct Audio {
  std::uint32_t sample_rate = 0;
  std::vector<std::vector<double>> channels;

  std::size_t frames() const {
    return channels.empty() ? 0 : channels[0].size();
  }
  std::size_t channel_count() const { return channels.size(); }
  const std::vector<double>& mono() const {
    if (channels.size() != 1)
      throw std::runtime_error("wav: expected mono audio");
    return channels[0];
  }
};

enum class SampleFormat { pcm16, float32 };

namespace detail {

template <class T>
T read_le(std::istream& is, const std::string& path, const char* what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (is.gcount() != sizeof(T))
    throw std::runtime_error(path + ": truncated WAV (" + what + ")");
  return v;
}

template <class T>
void write_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace detail

/// Reads little-endian RIFF/WAVE, PCM16 or IEEE float32, any channel count.
inline Audio read(const std::string& path) {
  using detail::read_le;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for read: " + path);

  char tag[4];
  is.read(tag, 4);
  if (is.gcount() != 4 || std::memcmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error(path + ": not a RIFF file (offset 0)");
  read_le<std::uint32_t>(is, path, "riff size");
  is.read(tag, 4);
  if (is.gcount() != 4 || std::memcmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error(path + ": not a WAVE file (offset 8)");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  Audio audio;

  while (is.read(tag, 4)) {
    const auto chunk_size = read_le<std::uint32_t>(is, path, "chunk size");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(is, path, "fmt.format");
      channels = read_le<std::uint16_t>(is, path, "fmt.channels");
      rate = read_le<std::uint32_t>(is, path, "fmt.rate");
      read_le<std::uint32_t>(is, path, "fmt.byterate");
      read_le<std::uint16_t>(is, path, "fmt.align");
      bits = read_le<std::uint16_t>(is, path, "fmt.bits");
      if (chunk_size > 16)
        is.seekg(chunk_size - 16, std::ios::cur);
      if (channels == 0)
        throw std::runtime_error(path + ": zero channels in fmt chunk");
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt)
        throw std::runtime_error(path + ": data chunk before fmt chunk");
      const bool pcm16 = (format == 1 && bits == 16);
      const bool f32 = (format == 3 && bits == 32);
      if (!pcm16 && !f32)
        throw std::runtime_error(
            path + ": unsupported encoding (format=" + std::to_string(format) +
            ", bits=" + std::to_string(bits) +
            "); only PCM16 and IEEE float32 are supported");
      const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
      const std::size_t total = chunk_size / (bytes_per_sample * channels);
      audio.sample_rate = rate;
      audio.channels.assign(channels, std::vector<double>(total));
      for (std::size_t i = 0; i < total; ++i) {
        for (std::size_t c = 0; c < channels; ++c) {
          if (pcm16) {
            auto s = read_le<std::int16_t>(is, path, "sample");
            audio.channels[c][i] = static_cast<double>(s) / 32767.0;
          } else {
            auto s = read_le<float>(is, path, "sample");
            audio.channels[c][i] = static_cast<double>(s);
          }
        }
      }
      return audio;
    } else {
      // Skip unknown chunk (word-aligned).
      is.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw std::runtime_error(path + ": no data chunk found");
}

inline void write(const std::string& path, const Audio& audio,
                  SampleFormat fmt = SampleFormat::pcm16) {
  using detail::write_le;
  if (audio.channels.empty() || audio.sample_rate == 0)
    throw std::invalid_argument("wav: empty audio or zero sample rate");
  const std::size_t frames = audio.frames();
  for (const auto& ch : audio.channels)
    if (ch.size() != frames)
      throw std::invalid_argument("wav: ragged channel lengths");

  const std::uint16_t channels =
      static_cast<std::uint16_t>(audio.channels.size());
  const std::uint16_t bits = (fmt == SampleFormat::pcm16) ? 16 : 32;
  const std::uint16_t bytes_per = bits / 8;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(frames * channels * bytes_per);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write("RIFF", 4);
  write_le<std::uint32_t>(os, 36 + data_size);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_le<std::uint32_t>(os, 16);
  write_le<std::uint16_t>(os, fmt == SampleFormat::pcm16 ? 1 : 3);
  write_le<std::uint16_t>(os, channels);
  write_le<std::uint32_t>(os, audio.sample_rate);
  write_le<std::uint32_t>(os, audio.sample_rate * channels * bytes_per);
  write_le<std::uint16_t>(os, static_cast<std::uint16_t>(channels * bytes_per));
  write_le<std::uint16_t>(os, bits);
  os.write("data", 4);
  write_le<std::uint32_t>(os, data_size);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = audio.channels[c][i];
      if (fmt == SampleFormat::pcm16) {
        const double clamped = std::clamp(v, -1.0, 1.0);
        const double scaled = clamped * 32767.0;
        write_le<std::int16_t>(
            os, static_cast<std::int16_t>(std::lrint(scaled)));
      } else {
        write_le<float>(os, static_cast<float>(v));
      }
    }
  }
}

}  // namespace dasp::wav
