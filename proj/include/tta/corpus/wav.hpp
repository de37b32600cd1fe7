#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tta/error.hpp"

namespace tta {

inline constexpr int kCanonicalSampleRate = 16000;

struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = kCanonicalSampleRate;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

struct WavInfo {
  int channels = 0;
  int sample_rate_hz = 0;
  int bits_per_sample = 0;
  bool is_float = false;
  std::size_t frames = 0;

  double duration_s() const { return sample_rate_hz > 0 ? static_cast<double>(frames) / sample_rate_hz : 0.0; }
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

struct ParsedWav {
  WavInfo info;
  std::vector<unsigned char> bytes;
  std::size_t data_offset = 0;
};

inline ParsedWav parse_wav(const std::filesystem::path& path, bool need_data) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open " + path.string());
  ParsedWav out;
  out.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  const auto& b = out.bytes;
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    throw Error(ErrorKind::UnsupportedFormat, path.string() + " is not a RIFF/WAVE file");

  bool have_fmt = false;
  bool have_data = false;
  std::size_t data_size = 0;
  int format_tag = 0;
  int block_align = 0;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::uint32_t size = le32(&b[pos + 4]);
    const std::size_t body = pos + 8;
    if (std::memcmp(&b[pos], "fmt ", 4) == 0) {
      if (size < 16 || body + size > b.size()) throw Error(ErrorKind::CorruptFile, path.string() + ": short fmt chunk");
      format_tag = le16(&b[body]);
      out.info.channels = le16(&b[body + 2]);
      out.info.sample_rate_hz = static_cast<int>(le32(&b[body + 4]));
      block_align = le16(&b[body + 12]);
      out.info.bits_per_sample = le16(&b[body + 14]);
      if (format_tag == 0xFFFE && size >= 26) format_tag = le16(&b[body + 24]);
      have_fmt = true;
    } else if (std::memcmp(&b[pos], "data", 4) == 0) {
      out.data_offset = body;
      data_size = std::min<std::size_t>(size, b.size() - body);
      if (need_data && body + size > b.size() && size != 0xFFFFFFFFu)
        throw Error(ErrorKind::CorruptFile, path.string() + ": truncated data chunk");
      have_data = true;
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw Error(ErrorKind::CorruptFile, path.string() + ": missing fmt chunk");
  if (!have_data) throw Error(ErrorKind::CorruptFile, path.string() + ": missing data chunk");

  const int bits = out.info.bits_per_sample;
  out.info.is_float = format_tag == 3;
  const bool pcm_ok = format_tag == 1 && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool float_ok = format_tag == 3 && (bits == 32 || bits == 64);
  if (!pcm_ok && !float_ok)
    throw Error(ErrorKind::UnsupportedFormat,
                path.string() + ": format tag " + std::to_string(format_tag) + " with " + std::to_string(bits) + " bits");
  if (out.info.channels <= 0 || out.info.sample_rate_hz <= 0)
    throw Error(ErrorKind::CorruptFile, path.string() + ": invalid channel count or sample rate");
  const int expected_align = out.info.channels * (bits / 8);
  if (block_align != expected_align) block_align = expected_align;
  out.info.frames = data_size / static_cast<std::size_t>(block_align);
  return out;
}

inline double decode_sample(const unsigned char* p, int bits, bool is_float) {
  if (is_float) {
    if (bits == 32) {
      float f;
      std::memcpy(&f, p, 4);
      return f;
    }
    double d;
    std::memcpy(&d, p, 8);
    return d;
  }
  switch (bits) {
    case 8: return (static_cast<int>(p[0]) - 128) / 128.0;
    case 16: return static_cast<std::int16_t>(le16(p)) / 32768.0;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | p[1] << 8 | p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    default: return static_cast<std::int32_t>(le32(p)) / 2147483648.0;
  }
}

}  // namespace detail

/// Band-limited resampling with a Hann-windowed sinc kernel. Output length is
/// round(n * target / source).
inline std::vector<double> resample(std::span<const double> in, int source_hz, int target_hz) {
  if (source_hz == target_hz) return {in.begin(), in.end()};
  const double ratio = static_cast<double>(target_hz) / source_hz;
  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(in.size()) * ratio));
  const double cutoff = std::min(1.0, ratio);
  const double half_width = 16.0 / cutoff;
  std::vector<double> out(n_out, 0.0);
  const auto n_in = static_cast<std::ptrdiff_t>(in.size());
  for (std::size_t k = 0; k < n_out; ++k) {
    const double x = static_cast<double>(k) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(x - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(x + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      const double u = x - static_cast<double>(j);
      const double arg = std::numbers::pi * cutoff * u;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
      const double window = 0.5 + 0.5 * std::cos(std::numbers::pi * u / half_width);
      acc += in[static_cast<std::size_t>(j)] * cutoff * sinc * window;
    }
    out[k] = acc;
  }
  return out;
}

inline WavInfo probe_wav(const std::filesystem::path& path) { return detail::parse_wav(path, false).info; }

/// Reads a PCM or IEEE-float WAV, mean-downmixes to mono, resamples to 16 kHz
/// and clamps to [-1, 1].
inline Waveform read_audio(const std::filesystem::path& path) {
  auto parsed = detail::parse_wav(path, true);
  const auto& info = parsed.info;
  const int bytes = info.bits_per_sample / 8;
  const std::size_t stride = static_cast<std::size_t>(bytes) * static_cast<std::size_t>(info.channels);
  if (info.frames == 0) throw Error(ErrorKind::CorruptFile, path.string() + ": no audio frames");

  std::vector<double> mono(info.frames, 0.0);
  const unsigned char* base = parsed.bytes.data() + parsed.data_offset;
  for (std::size_t f = 0; f < info.frames; ++f) {
    double acc = 0.0;
    for (int c = 0; c < info.channels; ++c)
      acc += detail::decode_sample(base + f * stride + static_cast<std::size_t>(c * bytes), info.bits_per_sample,
                                   info.is_float);
    mono[f] = acc / info.channels;
  }
  Waveform w;
  w.sample_rate_hz = kCanonicalSampleRate;
  w.samples = resample(mono, info.sample_rate_hz, kCanonicalSampleRate);
  for (auto& s : w.samples) {
    if (!std::isfinite(s)) throw Error(ErrorKind::CorruptFile, path.string() + ": non-finite sample");
    s = std::clamp(s, -1.0, 1.0);
  }
  if (w.samples.empty()) throw Error(ErrorKind::CorruptFile, path.string() + ": empty after resampling");
  return w;
}

/// Writes interleaved samples as integer PCM (8/16/24/32 bit).
inline void write_wav(const std::filesystem::path& path, std::span<const double> interleaved, int sample_rate_hz,
                      int channels = 1, int bits_per_sample = 16) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::UnreadableFile, "cannot write " + path.string());
  const int bytes = bits_per_sample / 8;
  const auto data_size = static_cast<std::uint32_t>(interleaved.size() * static_cast<std::size_t>(bytes));
  auto put32 = [&](std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  auto put16 = [&](std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
  };
  out.write("RIFF", 4);
  put32(36 + data_size);
  out.write("WAVEfmt ", 8);
  put32(16);
  put16(1);
  put16(static_cast<std::uint16_t>(channels));
  put32(static_cast<std::uint32_t>(sample_rate_hz));
  put32(static_cast<std::uint32_t>(sample_rate_hz * channels * bytes));
  put16(static_cast<std::uint16_t>(channels * bytes));
  put16(static_cast<std::uint16_t>(bits_per_sample));
  out.write("data", 4);
  put32(data_size);
  for (double s : interleaved) {
    const double c = std::clamp(s, -1.0, 1.0);
    switch (bits_per_sample) {
      case 8: {
        const auto v = static_cast<unsigned char>(std::clamp<long>(std::lround(c * 128.0) + 128, 0, 255));
        out.put(static_cast<char>(v));
        break;
      }
      case 16: put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp<long>(std::lround(c * 32768.0), -32768, 32767)))); break;
      case 24: {
        const auto v = static_cast<std::int32_t>(std::clamp<long>(std::lround(c * 8388608.0), -8388608, 8388607));
        const unsigned char b[3] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v >> 16)};
        out.write(reinterpret_cast<const char*>(b), 3);
        break;
      }
      default:
        put32(static_cast<std::uint32_t>(static_cast<std::int32_t>(
            std::clamp<long long>(std::llround(c * 2147483648.0), -2147483648LL, 2147483647LL))));
    }
  }
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w, int bits_per_sample = 16) {
  write_wav(path, w.samples, w.sample_rate_hz, 1, bits_per_sample);
}

}  // namespace tta
