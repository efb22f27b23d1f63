// Copyright 2026 The melsvc Authors
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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "melsvc/core/error.hpp"

namespace melsvc::wav {

/// Decoded interleaved PCM converted to [-1, 1] doubles.
struct Decoded {
  int sample_rate = 0;
  int channels = 0;
  std::vector<std::vector<double>> channel_data;
};

namespace detail {

inline std::uint32_t u32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace detail

/// Reads RIFF/WAVE with PCM 8/16/24/32-bit or IEEE float 32/64-bit samples.
inline Decoded read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("ingestion", "cannot open audio file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) {
    return data_error("ingestion", "cannot decode " + path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  int format = 0, channels = 0, rate = 0, bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = detail::u32(chunk + 4);
    const std::size_t avail = std::min(size, bytes.size() - pos - 8);
    if (std::memcmp(chunk, "fmt ", 4) == 0 && avail >= 16) {
      format = detail::u16(chunk + 8);
      channels = detail::u16(chunk + 10);
      rate = static_cast<int>(detail::u32(chunk + 12));
      bits = detail::u16(chunk + 22);
      if (format == 0xFFFE && avail >= 26) format = detail::u16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = avail;
    }
    pos += 8 + size + (size & 1);
  }
  if (channels <= 0 || rate <= 0) throw fail("missing fmt chunk");
  if (!data) throw fail("missing data chunk");
  const bool is_float = format == 3;
  if (!(format == 1 || is_float)) throw fail("unsupported encoding " + std::to_string(format));
  if (is_float ? (bits != 32 && bits != 64) : (bits != 8 && bits != 16 && bits != 24 && bits != 32)) {
    throw fail("unsupported bit depth " + std::to_string(bits));
  }
  const std::size_t width = static_cast<std::size_t>(bits / 8);
  const std::size_t frames = data_size / (width * channels);
  Decoded out;
  out.sample_rate = rate;
  out.channels = channels;
  out.channel_data.assign(channels, std::vector<double>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    for (int c = 0; c < channels; ++c) {
      const unsigned char* p = data + (f * channels + c) * width;
      double v = 0.0;
      if (is_float) {
        if (bits == 32) {
          float x;
          std::memcpy(&x, p, 4);
          v = x;
        } else {
          std::memcpy(&v, p, 8);
        }
      } else if (bits == 8) {
        v = (static_cast<int>(p[0]) - 128) / 128.0;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(detail::u16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t x = p[0] | (p[1] << 8) | (p[2] << 16);
        if (x & 0x800000) x |= ~0xFFFFFF;
        v = x / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(detail::u32(p)) / 2147483648.0;
      }
      out.channel_data[c][f] = v;
    }
  }
  return out;
}

/// Quantizes one sample to 16-bit PCM with rounding and saturation.
inline std::int16_t to_pcm16(double v) {
  const double scaled = std::round(std::clamp(v, -1.0, 1.0) * 32767.0);
  return static_cast<std::int16_t>(scaled);
}

/// Writes 16-bit PCM mono.
inline void write_pcm16(const std::filesystem::path& path, const std::vector<double>& samples,
                        int sample_rate) {
  std::vector<unsigned char> out;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(sample_rate * 2));
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(out, data_bytes);
  for (double v : samples) detail::put_u16(out, static_cast<std::uint16_t>(to_pcm16(v)));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw data_error("io", "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

/// Writes interleaved multi-channel 16-bit PCM. Used for fixtures.
inline void write_pcm16_multi(const std::filesystem::path& path,
                              const std::vector<std::vector<double>>& channels, int sample_rate) {
  const std::size_t n = channels.empty() ? 0 : channels[0].size();
  const auto nch = static_cast<std::uint16_t>(channels.size());
  std::vector<unsigned char> out;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(n * nch * 2);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, nch);
  detail::put_u32(out, static_cast<std::uint32_t>(sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(sample_rate * 2 * nch));
  detail::put_u16(out, static_cast<std::uint16_t>(2 * nch));
  detail::put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(out, data_bytes);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& ch : channels) detail::put_u16(out, static_cast<std::uint16_t>(to_pcm16(ch[i])));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw data_error("io", "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace melsvc::wav
