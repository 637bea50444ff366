#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vnca/rng.hpp"

namespace vnca {

// Images stored planar: [N,C,H,W] floats. Grayscale loaders produce [0,1]
// (binary sources produce exactly {0,1}); RGB loaders produce the 256-level
// grid in [-1,1].
struct Dataset {
  int c = 0, h = 0, w = 0;
  std::vector<float> images;
  std::vector<int> labels;  // empty, or one per image

  std::int64_t image_size() const { return std::int64_t(c) * h * w; }
  std::int64_t count() const {
    return image_size() ? std::int64_t(images.size()) / image_size() : 0;
  }
  const float* image(std::int64_t i) const {
    return images.data() + i * image_size();
  }
};

// IDX (big-endian) image file, magic 0x00000803; bytes scaled to [0,1].
// Optional companion label file, magic 0x00000801, same count.
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path = "");

// Text format: one image per line, 784 space-separated tokens, each 0 or 1,
// row-major 28x28.
Dataset load_amat(const std::string& path);

// v >= thresh -> 1, else 0 (threshold itself maps to 1).
Dataset binarize_threshold(const Dataset& ds, float thresh = 0.5f);

// Centers each image on a larger zero canvas.
Dataset pad_center(const Dataset& ds, int out_h, int out_w);

// Directory of binary PGM (c=1) or PPM (c=3) files, each exactly h x w,
// maxval 255, read in sorted filename order.
Dataset load_image_dir(const std::string& dir, int h, int w, int c);

// Splits [0,n) into consecutive batches; training drops a trailing partial
// batch, evaluation keeps it.
std::vector<std::pair<std::int64_t, std::int64_t>> batch_ranges(
    std::int64_t n, int batch, bool drop_last);

// Deterministic epoch iterator: indices reshuffled at each epoch boundary
// from Rng(seed, "shuffle/<epoch>"), so the sequence of batches is a pure
// function of (n, batch, seed) and can be repositioned for resume.
class Batcher {
 public:
  Batcher(std::int64_t n, int batch, std::uint64_t seed);

  std::vector<std::int64_t> next();
  std::int64_t batches_per_epoch() const { return n_ / batch_; }
  // Fast-forwards to the state after `batches_done` next() calls.
  void skip_to(std::int64_t batches_done);

 private:
  void start_epoch(std::int64_t epoch);

  std::int64_t n_;
  int batch_;
  std::uint64_t seed_;
  std::int64_t epoch_ = 0;
  std::int64_t pos_ = 0;
  std::vector<std::int64_t> order_;
};

// Gathers a batch into one [B,C,H,W] buffer.
std::vector<float> gather(const Dataset& ds,
                          const std::vector<std::int64_t>& idx);

}  // namespace vnca
