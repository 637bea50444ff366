#include "vnca/synth.hpp"

#include <array>

#include "vnca/rng.hpp"

namespace vnca {

namespace {

// 5x7 digit glyphs.
constexpr std::array<std::array<const char*, 7>, 10> kGlyphs = {{
    {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},  // 0
    {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},  // 1
    {"01110", "10001", "00001", "00110", "01000", "10000", "11111"},  // 2
    {"11111", "00010", "00100", "00010", "00001", "10001", "01110"},  // 3
    {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},  // 4
    {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},  // 5
    {"00110", "01000", "10000", "11110", "10001", "10001", "01110"},  // 6
    {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},  // 7
    {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},  // 8
    {"01110", "10001", "10001", "01111", "00001", "00010", "01100"},  // 9
}};

}  // namespace

Dataset synth_digits(std::int64_t n, std::uint64_t seed) {
  Dataset ds;
  ds.c = 1;
  ds.h = 28;
  ds.w = 28;
  ds.images.assign(std::size_t(n) * 28 * 28, 0.0f);
  ds.labels.resize(std::size_t(n));
  Rng rng(seed, "synth");
  for (std::int64_t i = 0; i < n; ++i) {
    int label = int(rng.uniform_int(0, 9));
    int scale = int(rng.uniform_int(2, 3));
    bool thick = rng.uniform() < 0.25;
    int gw = 5 * scale, gh = 7 * scale;
    int x0 = int(rng.uniform_int(2, 28 - gw - 2));
    int y0 = int(rng.uniform_int(2, 28 - gh - 2));

    bool cells[7][5];
    for (int r = 0; r < 7; ++r)
      for (int c = 0; c < 5; ++c)
        cells[r][c] = kGlyphs[std::size_t(label)][std::size_t(r)][c] == '1';
    if (thick) {
      bool fat[7][5];
      for (int r = 0; r < 7; ++r) {
        for (int c = 0; c < 5; ++c) {
          fat[r][c] = cells[r][c] || (r > 0 && cells[r - 1][c]) ||
                      (c > 0 && cells[r][c - 1]);
        }
      }
      std::copy(&fat[0][0], &fat[0][0] + 35, &cells[0][0]);
    }

    float* img = ds.images.data() + i * 28 * 28;
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x)
        if (cells[y / scale][x / scale])
          img[(y0 + y) * 28 + (x0 + x)] = 1.0f;
    ds.labels[std::size_t(i)] = label;
  }
  return ds;
}

}  // namespace vnca
