#include "vnca/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "vnca/pnm.hpp"
#include "vnca/tensor.hpp"

namespace vnca {

namespace {

std::uint32_t read_be_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw FormatError(path + ": truncated header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

std::vector<std::uint8_t> read_exact(std::ifstream& in, std::int64_t n,
                                     const std::string& path) {
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(n));
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n));
  if (in.gcount() != std::streamsize(n))
    throw FormatError(path + ": truncated payload, expected " +
                      std::to_string(n) + " bytes, missing " +
                      std::to_string(n - in.gcount()));
  if (in.get() != EOF)
    throw FormatError(path + ": trailing bytes after payload");
  return buf;
}

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream in(images_path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + images_path);
  std::uint32_t magic = read_be_u32(in, images_path);
  if (magic != 0x00000803u)
    throw FormatError(images_path + ": bad image magic 0x" +
                      [&] {
                        char buf[16];
                        std::snprintf(buf, sizeof buf, "%08x", magic);
                        return std::string(buf);
                      }());
  std::int64_t n = read_be_u32(in, images_path);
  int h = int(read_be_u32(in, images_path));
  int w = int(read_be_u32(in, images_path));
  if (n < 1 || h < 1 || w < 1)
    throw FormatError(images_path + ": degenerate dimensions");
  auto bytes = read_exact(in, n * h * w, images_path);

  Dataset ds;
  ds.c = 1;
  ds.h = h;
  ds.w = w;
  ds.images.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    ds.images[i] = float(bytes[i]) / 255.0f;

  if (!labels_path.empty()) {
    std::ifstream lin(labels_path, std::ios::binary);
    if (!lin) throw FormatError("cannot open " + labels_path);
    std::uint32_t lmagic = read_be_u32(lin, labels_path);
    if (lmagic != 0x00000801u)
      throw FormatError(labels_path + ": bad label magic");
    std::int64_t ln = read_be_u32(lin, labels_path);
    if (ln != n)
      throw FormatError(labels_path + ": " + std::to_string(ln) +
                        " labels for " + std::to_string(n) + " images");
    auto lbytes = read_exact(lin, ln, labels_path);
    ds.labels.assign(lbytes.begin(), lbytes.end());
  }
  return ds;
}

Dataset load_amat(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  Dataset ds;
  ds.c = 1;
  ds.h = 28;
  ds.w = 28;
  std::string line;
  std::int64_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const char* p = line.c_str();
    int col = 0;
    while (true) {
      char* end;
      float v = std::strtof(p, &end);
      if (end == p) break;
      ++col;
      if (v != 0.0f && v != 1.0f)
        throw FormatError(path + ": row " + std::to_string(row) + " column " +
                          std::to_string(col) + ": value " +
                          std::to_string(v) + " is not 0 or 1");
      if (col > 784)
        throw FormatError(path + ": row " + std::to_string(row) +
                          " has more than 784 values");
      ds.images.push_back(v);
      p = end;
    }
    if (col != 784)
      throw FormatError(path + ": row " + std::to_string(row) + " has " +
                        std::to_string(col) + " values, expected 784");
  }
  if (row == 0) throw FormatError(path + ": no data rows");
  return ds;
}

Dataset binarize_threshold(const Dataset& ds, float thresh) {
  Dataset out = ds;
  for (float& v : out.images) v = v >= thresh ? 1.0f : 0.0f;
  return out;
}

Dataset pad_center(const Dataset& ds, int out_h, int out_w) {
  if (out_h < ds.h || out_w < ds.w)
    throw ContractError("pad_center: target " + std::to_string(out_h) + "x" +
                        std::to_string(out_w) + " smaller than source");
  int top = (out_h - ds.h) / 2;
  int left = (out_w - ds.w) / 2;
  Dataset out;
  out.c = ds.c;
  out.h = out_h;
  out.w = out_w;
  out.labels = ds.labels;
  std::int64_t n = ds.count();
  out.images.assign(std::size_t(n * out.image_size()), 0.0f);
  for (std::int64_t i = 0; i < n; ++i) {
    const float* src = ds.image(i);
    float* dst = out.images.data() + i * out.image_size();
    for (int ch = 0; ch < ds.c; ++ch)
      for (int y = 0; y < ds.h; ++y)
        std::memcpy(dst + (std::int64_t(ch) * out_h + top + y) * out_w + left,
                    src + (std::int64_t(ch) * ds.h + y) * ds.w,
                    std::size_t(ds.w) * sizeof(float));
  }
  return out;
}

Dataset load_image_dir(const std::string& dir, int h, int w, int c) {
  if (c != 1 && c != 3)
    throw ContractError("load_image_dir: channels must be 1 or 3");
  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    if (ext == ".ppm" || ext == ".pgm") files.push_back(entry.path().string());
  }
  if (files.empty()) throw FormatError(dir + ": no .ppm/.pgm files");
  std::sort(files.begin(), files.end());

  Dataset ds;
  ds.c = c;
  ds.h = h;
  ds.w = w;
  ds.images.reserve(std::size_t(files.size()) * std::size_t(ds.image_size()));
  for (const auto& f : files) {
    PnmImage img = read_pnm(f);
    if (img.c != c || img.h != h || img.w != w)
      throw FormatError(f + ": is " + std::to_string(img.c) + "x" +
                        std::to_string(img.h) + "x" + std::to_string(img.w) +
                        ", expected " + std::to_string(c) + "x" +
                        std::to_string(h) + "x" + std::to_string(w));
    auto vals = pnm_to_floats(img);
    ds.images.insert(ds.images.end(), vals.begin(), vals.end());
  }
  return ds;
}

std::vector<std::pair<std::int64_t, std::int64_t>> batch_ranges(
    std::int64_t n, int batch, bool drop_last) {
  if (batch < 1) throw ContractError("batch_ranges: batch < 1");
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (std::int64_t lo = 0; lo < n; lo += batch) {
    std::int64_t hi = std::min(n, lo + batch);
    if (hi - lo < batch && drop_last) break;
    out.emplace_back(lo, hi);
  }
  return out;
}

Batcher::Batcher(std::int64_t n, int batch, std::uint64_t seed)
    : n_(n), batch_(batch), seed_(seed) {
  if (batch < 1) throw ContractError("Batcher: batch < 1");
  if (n < batch)
    throw ContractError("Batcher: dataset of " + std::to_string(n) +
                        " smaller than batch " + std::to_string(batch));
  start_epoch(0);
}

void Batcher::start_epoch(std::int64_t epoch) {
  epoch_ = epoch;
  pos_ = 0;
  order_.resize(std::size_t(n_));
  for (std::int64_t i = 0; i < n_; ++i) order_[std::size_t(i)] = i;
  Rng rng(seed_, "shuffle/" + std::to_string(epoch));
  for (std::int64_t i = n_ - 1; i > 0; --i) {
    std::int64_t j = rng.uniform_int(0, i);
    std::swap(order_[std::size_t(i)], order_[std::size_t(j)]);
  }
}

std::vector<std::int64_t> Batcher::next() {
  if (pos_ + batch_ > n_) start_epoch(epoch_ + 1);
  std::vector<std::int64_t> out(order_.begin() + pos_,
                                order_.begin() + pos_ + batch_);
  pos_ += batch_;
  return out;
}

void Batcher::skip_to(std::int64_t batches_done) {
  std::int64_t bpe = batches_per_epoch();
  start_epoch(batches_done / bpe);
  pos_ = (batches_done % bpe) * batch_;
}

std::vector<float> gather(const Dataset& ds,
                          const std::vector<std::int64_t>& idx) {
  std::vector<float> out;
  out.reserve(idx.size() * std::size_t(ds.image_size()));
  for (std::int64_t i : idx) {
    const float* p = ds.image(i);
    out.insert(out.end(), p, p + ds.image_size());
  }
  return out;
}

}  // namespace vnca
