#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fefet/data.hpp"

using namespace fefet;
namespace fs = std::filesystem;

namespace {

const std::string kImages = std::string(FEFET_DATA_DIR) + "/mnist10k-images-idx3-ubyte.gz";
const std::string kLabels = std::string(FEFET_DATA_DIR) + "/mnist10k-labels-idx1-ubyte.gz";

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("fefet_data_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

Dataset tiny() {
  Dataset d;
  d.rows = 2;
  d.cols = 3;
  d.images = {0, 1, 2, 3, 4, 5, 250, 251, 252, 253, 254, 255, 9, 9, 9, 9, 9, 9};
  d.labels = {7, 0, 9};
  return d;
}

std::vector<unsigned char> slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::string& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST(Idx, BundledSubsetLoads) {
  const auto ds = load_idx(kImages, kLabels);
  EXPECT_EQ(ds.size(), 10000u);
  EXPECT_EQ(ds.rows, 28u);
  EXPECT_EQ(ds.cols, 28u);
  EXPECT_EQ(ds.images.size(), 10000u * 784u);
  std::size_t total = 0;
  for (auto c : ds.class_counts()) {
    EXPECT_GT(c, 800u);
    total += c;
  }
  EXPECT_EQ(total, 10000u);
  // digits are mostly background with a bright stroke
  const auto img = ds.image(0);
  EXPECT_EQ(*std::max_element(img.begin(), img.end()), 255);
  EXPECT_EQ(img[0], 0);
}

TEST(Idx, RoundTripPlainAndGzip) {
  TempDir tmp;
  const auto d = tiny();
  for (const std::string ext : {"", ".gz"}) {
    write_idx(d, tmp / ("img" + ext), tmp / ("lbl" + ext));
    const auto back = load_idx(tmp / ("img" + ext), tmp / ("lbl" + ext));
    EXPECT_EQ(back.images, d.images);
    EXPECT_EQ(back.labels, d.labels);
    EXPECT_EQ(back.rows, 2u);
    EXPECT_EQ(back.cols, 3u);
  }
  // plain output is the bare format: 16-byte header then pixels
  const auto raw = slurp(tmp / "img");
  ASSERT_EQ(raw.size(), 16u + 18u);
  EXPECT_EQ(raw[2], 0x08);
  EXPECT_EQ(raw[3], 0x03);
  EXPECT_EQ(raw[7], 3);
}

TEST(Idx, SubsetRoundTripKeepsBytes) {
  TempDir tmp;
  const auto ds = load_idx(kImages, kLabels);
  const std::vector<std::size_t> pick{5, 17, 9999, 0};
  const auto sub = subset(ds, pick, "x");
  write_idx(sub, tmp / "i.gz", tmp / "l.gz");
  const auto back = load_idx(tmp / "i.gz", tmp / "l.gz");
  ASSERT_EQ(back.size(), 4u);
  for (std::size_t k = 0; k < pick.size(); ++k) {
    const auto a = back.image(k);
    const auto b = ds.image(pick[k]);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
    EXPECT_EQ(back.labels[k], ds.labels[pick[k]]);
  }
}

TEST(Idx, ByteSwappedMagicIsBadMagic) {
  TempDir tmp;
  write_idx(tiny(), tmp / "img", tmp / "lbl");
  auto raw = slurp(tmp / "img");
  std::reverse(raw.begin(), raw.begin() + 4);
  spit(tmp / "img", raw);
  try {
    load_idx(tmp / "img", tmp / "lbl");
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::BadMagic);
  }
}

TEST(Idx, TruncatedLabelsNameExpectedLength) {
  TempDir tmp;
  write_idx(tiny(), tmp / "img", tmp / "lbl");
  auto raw = slurp(tmp / "lbl");
  raw.pop_back();
  spit(tmp / "lbl", raw);
  try {
    load_idx(tmp / "img", tmp / "lbl");
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::Truncated);
    EXPECT_NE(std::string(e.what()).find("expected 11 bytes"), std::string::npos) << e.what();
  }
}

TEST(Idx, CountMismatch) {
  TempDir tmp;
  auto d = tiny();
  write_idx(d, tmp / "img", tmp / "lbl");
  d.labels.pop_back();
  d.images.resize(12);
  write_idx(d, tmp / "img2", tmp / "lbl2");
  try {
    load_idx(tmp / "img", tmp / "lbl2");
    FAIL() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::CountMismatch);
  }
}

TEST(Idx, MissingFileAndBadLabel) {
  TempDir tmp;
  EXPECT_THROW(load_idx(tmp / "nope", tmp / "nope2"), DataError);
  auto d = tiny();
  d.labels[1] = 12;
  write_idx(d, tmp / "img", tmp / "lbl");
  EXPECT_THROW(load_idx(tmp / "img", tmp / "lbl"), DataError);
}

TEST(Split, SizesDisjointAndDeterministic) {
  const auto ds = load_idx(kImages, kLabels);
  const auto [tr, te] = take_split(ds, 1900, 500, 42);
  EXPECT_EQ(tr.size(), 1900u);
  EXPECT_EQ(te.size(), 500u);
  const auto [tr2, te2] = take_split(ds, 1900, 500, 42);
  EXPECT_EQ(tr.images, tr2.images);
  EXPECT_EQ(te.labels, te2.labels);
  const auto [tr3, te3] = take_split(ds, 1900, 500, 43);
  EXPECT_NE(tr.images, tr3.images);
  EXPECT_EQ(tr.split, "train");
  EXPECT_EQ(te.split, "test");
}

TEST(Split, MatchesReferenceShuffle) {
  // the split is defined as mt19937_64(seed), Fisher-Yates from the end with
  // unbiased rejection sampling; reproduce it from the standard engine alone
  Dataset d;
  d.rows = d.cols = 1;
  const std::size_t n = 50;
  for (std::size_t i = 0; i < n; ++i) {
    d.images.push_back(static_cast<std::uint8_t>(i));
    d.labels.push_back(static_cast<std::uint8_t>(i % 10));
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 eng(2024);
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t m = i, threshold = (0 - m) % m;
    std::uint64_t x;
    do x = eng();
    while (x < threshold);
    std::swap(order[i - 1], order[x % m]);
  }
  const auto [tr, te] = take_split(d, 30, 20, 2024);
  for (std::size_t k = 0; k < 30; ++k) EXPECT_EQ(tr.images[k], order[k]);
  for (std::size_t k = 0; k < 20; ++k) EXPECT_EQ(te.images[k], order[30 + k]);
}

TEST(Split, EngineIsTheStandardOne) {
  // the standard fixes the 10000th output of a default-seeded mt19937_64
  Rng rng(5489u);
  std::uint64_t x = 0;
  for (int i = 0; i < 10000; ++i) x = rng.next_u64();
  EXPECT_EQ(x, 9981545732273789042ULL);
}

TEST(Split, Insufficient) {
  const auto d = tiny();
  EXPECT_THROW(take_split(d, 3, 1, 1), DataError);
  try {
    take_split(d, 2, 2, 1);
  } catch (const DataError& e) {
    EXPECT_EQ(e.kind(), DataError::Kind::Insufficient);
  }
  EXPECT_NO_THROW(take_split(d, 2, 1, 1));
}
