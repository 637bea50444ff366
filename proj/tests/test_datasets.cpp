#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "vnca/dataset.hpp"
#include "vnca/pnm.hpp"
#include "vnca/synth.hpp"
#include "vnca/tensor.hpp"

using namespace vnca;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("vnca-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void put_be32(std::string& s, std::uint32_t v) {
  s.push_back(char(v >> 24));
  s.push_back(char(v >> 16));
  s.push_back(char(v >> 8));
  s.push_back(char(v));
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), std::streamsize(bytes.size()));
}

std::string idx_images(int n, int h, int w) {
  std::string s;
  put_be32(s, 0x00000803);
  put_be32(s, std::uint32_t(n));
  put_be32(s, std::uint32_t(h));
  put_be32(s, std::uint32_t(w));
  for (int i = 0; i < n * h * w; ++i) s.push_back(char(i % 256));
  return s;
}

std::string idx_labels(int n) {
  std::string s;
  put_be32(s, 0x00000801);
  put_be32(s, std::uint32_t(n));
  for (int i = 0; i < n; ++i) s.push_back(char(i % 10));
  return s;
}

}  // namespace

TEST_CASE("idx loader is field-exact") {
  TempDir tmp;
  write_file(tmp.file("img.idx"), idx_images(3, 4, 5));
  write_file(tmp.file("lab.idx"), idx_labels(3));

  Dataset ds = load_idx(tmp.file("img.idx"), tmp.file("lab.idx"));
  CHECK(ds.count() == 3);
  CHECK(ds.c == 1);
  CHECK(ds.h == 4);
  CHECK(ds.w == 5);
  REQUIRE(ds.labels.size() == 3);
  CHECK(ds.labels[2] == 2);
  for (int i = 0; i < 60; ++i)
    CHECK(ds.images[size_t(i)] == float(i % 256) / 255.0f);

  SUBCASE("no labels requested") {
    Dataset plain = load_idx(tmp.file("img.idx"));
    CHECK(plain.labels.empty());
    CHECK(plain.count() == 3);
  }
  SUBCASE("bad magic") {
    std::string bad = idx_images(1, 2, 2);
    bad[2] = 0x09;
    write_file(tmp.file("bad.idx"), bad);
    CHECK_THROWS_AS(load_idx(tmp.file("bad.idx")), FormatError);
  }
  SUBCASE("truncated pixel data") {
    std::string cut = idx_images(3, 4, 5);
    cut.resize(cut.size() - 7);
    write_file(tmp.file("cut.idx"), cut);
    CHECK_THROWS_AS(load_idx(tmp.file("cut.idx")), FormatError);
  }
  SUBCASE("label count mismatch") {
    write_file(tmp.file("lab2.idx"), idx_labels(2));
    CHECK_THROWS_AS(load_idx(tmp.file("img.idx"), tmp.file("lab2.idx")),
                    FormatError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_idx(tmp.file("absent.idx")), FormatError);
  }
}

TEST_CASE("amat loader") {
  TempDir tmp;
  std::string line0, line1;
  for (int i = 0; i < 784; ++i) {
    line0 += (i % 3 == 0) ? "1 " : "0 ";
    line1 += (i % 2 == 0) ? "0.0000 " : "1.0000 ";  // float spellings are fine
  }
  write_file(tmp.file("d.amat"), line0 + "\n\n" + line1 + "\n");
  Dataset ds = load_amat(tmp.file("d.amat"));
  CHECK(ds.count() == 2);
  CHECK(ds.h == 28);
  CHECK(ds.w == 28);
  CHECK(ds.images[0] == 1.0f);
  CHECK(ds.images[1] == 0.0f);
  CHECK(ds.images[784] == 0.0f);
  CHECK(ds.images[785] == 1.0f);

  SUBCASE("rejects non-binary values") {
    write_file(tmp.file("bad.amat"), "0 1 0.5\n");
    CHECK_THROWS_AS(load_amat(tmp.file("bad.amat")), FormatError);
  }
  SUBCASE("rejects short rows") {
    write_file(tmp.file("short.amat"), "0 1 0 1\n");
    CHECK_THROWS_AS(load_amat(tmp.file("short.amat")), FormatError);
  }
}

TEST_CASE("binarize threshold maps the threshold itself to one") {
  Dataset ds;
  ds.c = 1;
  ds.h = 1;
  ds.w = 4;
  ds.images = {0.0f, 0.499f, 0.5f, 1.0f};
  Dataset out = binarize_threshold(ds, 0.5f);
  CHECK(out.images == std::vector<float>{0.0f, 0.0f, 1.0f, 1.0f});
}

TEST_CASE("pad_center centers on a zero canvas") {
  Dataset ds;
  ds.c = 1;
  ds.h = ds.w = 2;
  ds.images = {1.0f, 2.0f, 3.0f, 4.0f};
  Dataset out = pad_center(ds, 4, 4);
  CHECK(out.h == 4);
  std::vector<float> want = {0, 0, 0, 0, 0, 1, 2, 0, 0, 3, 4, 0, 0, 0, 0, 0};
  CHECK(out.images == want);
  CHECK_THROWS_AS(pad_center(ds, 1, 4), ContractError);
}

TEST_CASE("pnm round trip preserves all 256 levels") {
  TempDir tmp;
  SUBCASE("grayscale") {
    std::vector<float> grid(256);
    for (int i = 0; i < 256; ++i) grid[size_t(i)] = float(i) / 255.0f;
    write_pnm(tmp.file("g.pgm"), 1, 16, 16, grid.data());
    PnmImage img = read_pnm(tmp.file("g.pgm"));
    CHECK(img.c == 1);
    CHECK(img.h == 16);
    CHECK(img.w == 16);
    for (int i = 0; i < 256; ++i) REQUIRE(img.bytes[size_t(i)] == i);
    CHECK(pnm_to_floats(img) == grid);
    // a second write is byte-identical
    write_pnm(tmp.file("g2.pgm"), 1, 16, 16, pnm_to_floats(img).data());
    std::ifstream a(tmp.file("g.pgm"), std::ios::binary);
    std::ifstream b(tmp.file("g2.pgm"), std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {});
    std::string sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
  }
  SUBCASE("color uses the [-1,1] grid") {
    std::vector<float> img(3 * 256);
    for (int ch = 0; ch < 3; ++ch)
      for (int i = 0; i < 256; ++i) {
        int k = (i + ch * 85) % 256;
        img[size_t(ch * 256 + i)] = 2.0f * float(k) / 255.0f - 1.0f;
      }
    write_pnm(tmp.file("c.ppm"), 3, 16, 16, img.data());
    PnmImage back = read_pnm(tmp.file("c.ppm"));
    CHECK(back.c == 3);
    CHECK(pnm_to_floats(back) == img);
  }
  SUBCASE("clamping out-of-range values") {
    std::vector<float> v = {-0.5f, 1.5f, 0.5f, 0.25f};
    write_pnm(tmp.file("x.pgm"), 1, 2, 2, v.data());
    PnmImage img = read_pnm(tmp.file("x.pgm"));
    CHECK(img.bytes[0] == 0);
    CHECK(img.bytes[1] == 255);
    CHECK(img.bytes[2] == 128);  // 127.5 rounds half-up
  }
  SUBCASE("malformed header") {
    write_file(tmp.file("bad.pgm"), "P5\n4 4\n254\n");
    CHECK_THROWS_AS(read_pnm(tmp.file("bad.pgm")), FormatError);
  }
}

TEST_CASE("image directory loader reads sorted pgm files") {
  TempDir tmp;
  std::vector<float> a = {0.0f, 1.0f, 0.0f, 1.0f};
  std::vector<float> b = {1.0f, 1.0f, 0.0f, 0.0f};
  write_pnm(tmp.file("b.pgm"), 1, 2, 2, b.data());
  write_pnm(tmp.file("a.pgm"), 1, 2, 2, a.data());
  Dataset ds = load_image_dir(tmp.path.string(), 2, 2, 1);
  CHECK(ds.count() == 2);
  CHECK(ds.images[0] == 0.0f);  // a.pgm first despite later creation
  CHECK(ds.images[4] == 1.0f);

  write_pnm(tmp.file("c.pgm"), 1, 3, 3,
            std::vector<float>(9, 0.0f).data());
  CHECK_THROWS_AS(load_image_dir(tmp.path.string(), 2, 2, 1), FormatError);
}

TEST_CASE("batch ranges") {
  auto drop = batch_ranges(10, 3, true);
  REQUIRE(drop.size() == 3);
  CHECK(drop[2] == std::pair<std::int64_t, std::int64_t>{6, 9});
  auto keep = batch_ranges(10, 3, false);
  REQUIRE(keep.size() == 4);
  CHECK(keep[3] == std::pair<std::int64_t, std::int64_t>{9, 10});
  CHECK(batch_ranges(2, 3, true).empty());
}

TEST_CASE("batcher shuffles per epoch and repositions exactly") {
  Batcher b(10, 3, 99);
  CHECK(b.batches_per_epoch() == 3);

  std::vector<std::vector<std::int64_t>> seen;
  for (int i = 0; i < 9; ++i) seen.push_back(b.next());

  // each epoch's three batches never repeat an index
  for (int e = 0; e < 3; ++e) {
    std::set<std::int64_t> uniq;
    for (int k = 0; k < 3; ++k)
      for (auto v : seen[size_t(e * 3 + k)]) {
        CHECK(v >= 0);
        CHECK(v < 10);
        uniq.insert(v);
      }
    CHECK(uniq.size() == 9);
  }
  // epochs are differently ordered
  CHECK(seen[0] != seen[3]);

  SUBCASE("skip_to matches stepping") {
    for (int target : {0, 2, 3, 7}) {
      Batcher fresh(10, 3, 99);
      fresh.skip_to(target);
      CHECK(fresh.next() == seen[size_t(target)]);
    }
  }
  SUBCASE("same seed reproduces") {
    Batcher again(10, 3, 99);
    CHECK(again.next() == seen[0]);
  }
}

TEST_CASE("gather packs selected images") {
  Dataset ds;
  ds.c = 1;
  ds.h = 1;
  ds.w = 2;
  ds.images = {0, 1, 2, 3, 4, 5};
  auto out = gather(ds, {2, 0});
  CHECK(out == std::vector<float>{4, 5, 0, 1});
}

TEST_CASE("synthetic digits are deterministic binary 28x28 glyphs") {
  Dataset a = synth_digits(24, 7);
  Dataset b = synth_digits(24, 7);
  Dataset c = synth_digits(24, 8);
  CHECK(a.images == b.images);
  CHECK(a.images != c.images);
  CHECK(a.count() == 24);
  CHECK(a.h == 28);
  CHECK(a.w == 28);
  CHECK(a.labels.size() == 24);
  double on = 0;
  for (float v : a.images) {
    REQUIRE((v == 0.0f || v == 1.0f));
    on += v;
  }
  // glyphs are sparse strokes, not empty and not filled
  CHECK(on / double(a.images.size()) > 0.03);
  CHECK(on / double(a.images.size()) < 0.5);
}
