#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bst/bsr.hpp"
#include "bst/error.hpp"

using namespace bst;

namespace {

Tensor with_zeroed_blocks(Rng& rng, std::size_t r, std::size_t c, std::size_t br, std::size_t bc, double frac) {
  Tensor x = rng_normal(rng, {r, c}, 0.0f, 1.0f);
  for (std::size_t i = 0; i < r / br; ++i)
    for (std::size_t j = 0; j < c / bc; ++j) {
      if (rng.uniform() >= frac) continue;
      for (std::size_t u = 0; u < br; ++u)
        for (std::size_t v = 0; v < bc; ++v) x.at(i * br + u, j * bc + v) = 0.0f;
    }
  return x;
}

bool has(const std::vector<std::string>& v, const std::string& s) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& e) { return e.find(s) != std::string::npos; });
}

}  // namespace

TEST(Bsr, AllZeroEncodesEmpty) {
  BsrMatrix m = bsr_encode(Tensor({4, 8}), 4, 4);
  EXPECT_EQ(m.nnzb(), 0u);
  EXPECT_EQ(m.crow, (std::vector<std::int32_t>{0, 0}));
  EXPECT_TRUE(m.col.empty());
  EXPECT_EQ(bsr_decode(m), Tensor({4, 8}));
}

TEST(Bsr, FullyDenseRowBlocks) {
  BsrMatrix m = bsr_encode(Tensor({4, 8}, 1.0f), 1, 4);
  EXPECT_EQ(m.nnzb(), 8u);
  EXPECT_EQ(m.crow, (std::vector<std::int32_t>{0, 2, 4, 6, 8}));
}

TEST(Bsr, SingleBlockPosition) {
  Tensor x({8, 8});
  x.at(5, 6) = 2.0f;  // block row 1, block col 1 for 4x4 blocks
  BsrMatrix m = bsr_encode(x, 4, 4);
  EXPECT_EQ(m.crow, (std::vector<std::int32_t>{0, 0, 1}));
  EXPECT_EQ(m.col, (std::vector<std::int32_t>{1}));
  EXPECT_EQ(m.values.size(), 16u);
  EXPECT_EQ(m.values[1 * 4 + 2], 2.0f);
}

TEST(Bsr, DecodeSingleBlockOfOnes) {
  BsrMatrix m;
  m.rows = 1;
  m.cols = 8;
  m.block_rows = 1;
  m.block_cols = 4;
  m.crow = {0, 1};
  m.col = {1};
  m.values = {1, 1, 1, 1};
  Tensor d = bsr_decode(m);
  EXPECT_EQ(d, Tensor({1, 8}, std::vector<float>{0, 0, 0, 0, 1, 1, 1, 1}));
}

TEST(Bsr, RoundTripHalfBlocksZeroed) {
  Rng rng(12);
  for (auto [br, bc] : {std::pair<std::size_t, std::size_t>{1, 4}, {2, 8}, {4, 4}, {1, 1}}) {
    Tensor x = with_zeroed_blocks(rng, 16, 32, br, bc, 0.5);
    BsrMatrix m = bsr_encode(x, br, bc);
    EXPECT_TRUE(bsr_validate(m).empty());
    EXPECT_EQ(bsr_decode(m), x);
    EXPECT_EQ(m.values.size(), m.nnzb() * br * bc);
  }
}

TEST(Bsr, EncodeRejectsNonDivisible) {
  EXPECT_THROW(bsr_encode(Tensor({4, 6}), 1, 4), DimensionError);
  EXPECT_THROW(bsr_encode(Tensor({3, 8}), 2, 4), DimensionError);
}

TEST(Bsr, NnzbInRow) {
  BsrMatrix empty = bsr_encode(Tensor({2, 4}), 1, 2);
  EXPECT_EQ(nnzb_in_row(empty, 0), 0u);
  BsrMatrix m;
  m.rows = 2;
  m.cols = 6;
  m.block_rows = 1;
  m.block_cols = 2;
  m.crow = {0, 2, 3};
  m.col = {0, 2, 1};
  m.values.assign(6, 1.0f);
  EXPECT_EQ(nnzb_in_row(m, 0), 2u);
  EXPECT_EQ(nnzb_in_row(m, 1), 1u);
  EXPECT_THROW(nnzb_in_row(m, 2), InvalidArgument);

  Rng rng(13);
  BsrMatrix r = bsr_encode(with_zeroed_blocks(rng, 32, 64, 2, 8, 0.4), 2, 8);
  std::size_t total = 0;
  for (std::size_t i = 0; i < r.block_row_count(); ++i) total += nnzb_in_row(r, i);
  EXPECT_EQ(total, r.nnzb());
}

TEST(Bsr, ValidateReportsEveryViolation) {
  BsrMatrix m;
  m.rows = 2;
  m.cols = 8;
  m.block_rows = 1;
  m.block_cols = 4;
  m.crow = {0, 2, 2};
  m.col = {0, 1};
  m.values.assign(8, 1.0f);
  EXPECT_TRUE(bsr_validate(m).empty());

  BsrMatrix bad = m;
  bad.crow = {0, 2, 1};
  auto v = bsr_validate(bad);
  EXPECT_TRUE(has(v, "crow non-monotone"));

  BsrMatrix dup = m;
  dup.col = {1, 1};
  EXPECT_TRUE(has(bsr_validate(dup), "col not strictly increasing"));

  BsrMatrix multi = m;
  multi.crow = {0, 2, 1};
  multi.col = {1, 1};
  multi.values.resize(3);
  EXPECT_GE(bsr_validate(multi).size(), 3u);
  EXPECT_THROW(bsr_decode(multi), FormatError);
}

TEST(Bsr, BinaryRoundTrip) {
  Rng rng(14);
  BsrMatrix m = bsr_encode(with_zeroed_blocks(rng, 8, 16, 2, 4, 0.5), 2, 4);
  std::stringstream ss;
  bsr_write(ss, m);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 4), "BSR1");
  // header 4 + 4 + 5*8, then indices and values
  EXPECT_EQ(bytes.size(), 48 + 4 * (m.crow.size() + m.col.size() + m.values.size()));
  EXPECT_EQ(bsr_read(ss), m);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(bsr_read(truncated), FormatError);
  std::stringstream wrong("XXXX" + bytes.substr(4));
  EXPECT_THROW(bsr_read(wrong), FormatError);

  const auto path = (std::filesystem::temp_directory_path() / "bst_test_bsr.bin").string();
  bsr_save(path, m);
  EXPECT_EQ(bsr_load(path), m);
  std::remove(path.c_str());
  EXPECT_THROW(bsr_load("/nonexistent/dir/x.bin"), IoError);
}

// --- compression accounting ---------------------------------------------------

TEST(Compression, TableCornerCells) {
  auto pct = [](std::size_t b, double s) { return 100.0 * compression_report(196, 384, 1, b, s).excess_over_ideal; };
  EXPECT_NEAR(pct(4, 0.0), 25.26, 0.005);
  EXPECT_NEAR(pct(64, 0.0), 1.82, 0.005);
  EXPECT_NEAR(pct(1, 0.0), 100.26, 0.005);
  EXPECT_NEAR(pct(384, 0.0), 0.52, 0.005);
  for (std::size_t b : {1, 4, 8, 16, 32, 64, 128, 384}) EXPECT_NEAR(pct(b, 1.0), 0.26, 0.005);
  // s = 1 stores the crow array only
  auto r = compression_report(196, 384, 1, 64, 1.0);
  EXPECT_EQ(r.index_bytes, 197u * 4u);
  EXPECT_EQ(r.value_bytes, 0u);
}

TEST(Compression, ReportFieldsConsistent) {
  for (double s : {0.0, 0.2, 0.5, 0.8, 1.0}) {
    auto r = compression_report(196, 384, 1, 16, s);
    EXPECT_EQ(r.total_bytes, r.value_bytes + r.index_bytes);
    EXPECT_EQ(r.dense_bytes, 196u * 384u * 4u);
    EXPECT_GE(r.overhead_fraction, 0.0);
    EXPECT_DOUBLE_EQ(r.overhead_fraction, static_cast<double>(r.index_bytes) / static_cast<double>(r.dense_bytes));
    EXPECT_EQ(r.value_bytes, r.stored_blocks * 16u * 4u);
  }
}

TEST(Compression, ValueBytesExactWhenIntegral) {
  // 196*384/16 = 4704 blocks; s = 0.25 prunes exactly 1176
  auto r = compression_report(196, 384, 1, 16, 0.25);
  EXPECT_EQ(r.value_bytes, static_cast<std::size_t>(0.75 * 196 * 384 * 4));
  EXPECT_DOUBLE_EQ(r.realized_sparsity, 0.25);
}

TEST(Compression, OverheadMonotone) {
  const std::vector<std::size_t> blocks{1, 2, 4, 8, 16, 32, 64, 128, 384};
  for (double s : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    for (std::size_t i = 1; i < blocks.size(); ++i) {
      EXPECT_LE(compression_report(196, 384, 1, blocks[i], s).overhead_fraction,
                compression_report(196, 384, 1, blocks[i - 1], s).overhead_fraction);
    }
  }
  for (std::size_t b : blocks) {
    double prev = 1e9;
    for (int si = 0; si <= 20; ++si) {
      const double o = compression_report(196, 384, 1, b, si / 20.0).overhead_fraction;
      EXPECT_LE(o, prev);
      prev = o;
    }
  }
}

TEST(Compression, ClosedFormAgreesAtIntegralCounts) {
  for (std::size_t b : {1, 4, 8, 16, 32, 64, 128, 384}) {
    for (double s : {0.0, 1.0}) {
      auto r = compression_report(196, 384, 1, b, s);
      EXPECT_NEAR(r.overhead_fraction, closed_form_overhead(196, 384, 1, b, s), 1e-12);
    }
  }
}

TEST(Compression, RejectsBadInput) {
  EXPECT_THROW(compression_report(196, 384, 1, 5, 0.5), DimensionError);
  EXPECT_THROW(compression_report(196, 384, 1, 4, 1.5), InvalidArgument);
  EXPECT_THROW(pruned_block_count(-0.1, 10), InvalidArgument);
}

TEST(Compression, PrunedBlockCountRoundsHalfUp) {
  EXPECT_EQ(pruned_block_count(0.5, 3), 2u);
  EXPECT_EQ(pruned_block_count(0.35, 10), 4u);
  EXPECT_EQ(pruned_block_count(0.25, 2), 1u);
  EXPECT_EQ(pruned_block_count(0.2, 4), 1u);
  EXPECT_EQ(pruned_block_count(1.0, 7), 7u);
}
