#include "vnca/pnm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "vnca/tensor.hpp"

namespace vnca {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(char(ch));
  }
  return tok;
}

std::uint8_t quantize(float v, float lo, float scale, float offset) {
  // byte = round half up of v*scale + offset, clamped to [0,255]
  if (v < lo) v = lo;
  if (v > 1.0f) v = 1.0f;
  float b = std::floor(v * scale + offset + 0.5f);
  if (b < 0.0f) b = 0.0f;
  if (b > 255.0f) b = 255.0f;
  return std::uint8_t(b);
}

}  // namespace

PnmImage read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::string magic = next_token(in);
  int channels;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw FormatError(path + ": expected P5 or P6, got '" + magic + "'");
  }
  PnmImage img;
  img.c = channels;
  try {
    img.w = std::stoi(next_token(in));
    img.h = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw FormatError(path + ": malformed dimensions");
  }
  std::string maxval = next_token(in);
  if (maxval != "255")
    throw FormatError(path + ": maxval must be 255, got '" + maxval + "'");
  if (img.w < 1 || img.h < 1) throw FormatError(path + ": bad dimensions");
  // Exactly one whitespace byte separates the header from the raster; the
  // token reader has already consumed it.
  std::size_t n = std::size_t(img.w) * std::size_t(img.h) * channels;
  img.bytes.resize(n);
  in.read(reinterpret_cast<char*>(img.bytes.data()), std::streamsize(n));
  if (std::size_t(in.gcount()) != n)
    throw FormatError(path + ": raster truncated, expected " +
                      std::to_string(n) + " bytes, got " +
                      std::to_string(in.gcount()));
  return img;
}

void write_pnm(const std::string& path, int c, int h, int w,
               const float* data) {
  if (c != 1 && c != 3)
    throw ContractError("write_pnm: channels must be 1 or 3");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << (c == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
  std::vector<std::uint8_t> bytes(std::size_t(c) * h * w);
  std::int64_t plane = std::int64_t(h) * w;
  for (std::int64_t i = 0; i < plane; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      float v = data[ch * plane + i];
      bytes[std::size_t(i * c + ch)] =
          c == 1 ? quantize(v, 0.0f, 255.0f, 0.0f)
                 : quantize(v, -1.0f, 127.5f, 127.5f);
    }
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) throw FormatError("short write to " + path);
}

std::vector<float> pnm_to_floats(const PnmImage& img) {
  std::int64_t plane = std::int64_t(img.h) * img.w;
  std::vector<float> out(std::size_t(img.c) * plane);
  for (std::int64_t i = 0; i < plane; ++i) {
    for (int ch = 0; ch < img.c; ++ch) {
      float k = float(img.bytes[std::size_t(i * img.c + ch)]);
      out[std::size_t(ch * plane + i)] =
          img.c == 1 ? k / 255.0f : 2.0f * k / 255.0f - 1.0f;
    }
  }
  return out;
}

Montage make_montage(const std::vector<const float*>& tiles, int c, int h,
                     int w, int cols) {
  if (tiles.empty()) throw ContractError("make_montage: no tiles");
  if (cols < 1) throw ContractError("make_montage: cols < 1");
  int n = int(tiles.size());
  int rows = (n + cols - 1) / cols;
  const int gap = 2;
  Montage m;
  m.c = c;
  m.h = rows * h + (rows - 1) * gap;
  m.w = cols * w + (cols - 1) * gap;
  float fill = c == 1 ? 0.5f : 0.0f;  // mid-gray separators
  m.data.assign(std::size_t(c) * m.h * m.w, fill);
  for (int i = 0; i < n; ++i) {
    int r = i / cols, col = i % cols;
    int y0 = r * (h + gap), x0 = col * (w + gap);
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h; ++y) {
        const float* src = tiles[std::size_t(i)] +
                           (std::int64_t(ch) * h + y) * w;
        float* dst = m.data.data() +
                     (std::int64_t(ch) * m.h + y0 + y) * m.w + x0;
        std::copy(src, src + w, dst);
      }
    }
  }
  return m;
}

}  // namespace vnca
