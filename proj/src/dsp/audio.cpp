#include "flowvc/dsp/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "flowvc/errors.hpp"

namespace flowvc::dsp {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

std::int16_t encode(double x) {
  const double scaled = std::round(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

}  // namespace

void Waveform::validate() const {
  if (!(sample_rate > 0.0)) throw InputError("waveform sample rate must be positive");
  for (double s : samples) {
    if (!(std::abs(s) <= 1.0)) throw InputError("waveform sample outside [-1, 1]");
  }
}

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto fail = [&path](const std::string& why) { return InputError(path.string() + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw fail("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw fail("malformed fmt chunk");
      const std::uint16_t format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format != 1) throw fail("unsupported encoding (only PCM is accepted)");
      if (bits != 16) throw fail("unsupported sample width " + std::to_string(bits) + " bits");
      if (channels != 1) throw fail("expected mono audio, got " + std::to_string(channels) + " channels");
      if (rate == 0) throw fail("zero sample rate");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw fail("data chunk before fmt chunk");
      if (size % 2 != 0) throw fail("odd data chunk size");
      Waveform w;
      w.sample_rate = rate;
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        w.samples[i] = static_cast<double>(raw) / 32768.0;
      }
      return w;
    }
    pos = body + size + (size & 1u);
  }
  throw fail("missing data chunk");
}

void save_wav(const std::filesystem::path& path, const Waveform& w) {
  w.validate();
  const auto rate = static_cast<std::uint32_t>(std::lround(w.sample_rate));
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : w.samples) put_u16(out, static_cast<std::uint16_t>(encode(s)));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Waveform limit_peak(Waveform w, double ceiling) {
  if (!(ceiling > 0.0)) throw InputError("limit_peak: ceiling must be positive");
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak > ceiling) {
    const double g = ceiling / peak;
    for (auto& s : w.samples) s *= g;
  }
  return w;
}

Waveform quantize_pcm16(Waveform w) {
  for (auto& s : w.samples) s = static_cast<double>(encode(s)) / 32768.0;
  return w;
}

}  // namespace flowvc::dsp
