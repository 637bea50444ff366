#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vnca {

// Binary PGM (P5) or PPM (P6), maxval 255. bytes are row-major, interleaved
// for color.
struct PnmImage {
  int c = 0, h = 0, w = 0;
  std::vector<std::uint8_t> bytes;
};

PnmImage read_pnm(const std::string& path);

// data is planar [C,H,W]. Grayscale (c=1) maps [0,1] linearly to 0..255;
// color (c=3) maps [-1,1] so that the 256-level grid value 2k/255 - 1 writes
// back byte k exactly. Values are clamped, rounding is half-up.
void write_pnm(const std::string& path, int c, int h, int w,
               const float* data);

// Inverse of the write mapping, returning planar floats.
std::vector<float> pnm_to_floats(const PnmImage& img);

// Lays out n tiles (planar [C,H,W] each, same float conventions as
// write_pnm) in a grid with `cols` columns and a 2px separator.
struct Montage {
  int c = 0, h = 0, w = 0;
  std::vector<float> data;
};
Montage make_montage(const std::vector<const float*>& tiles, int c, int h,
                     int w, int cols);

}  // namespace vnca
