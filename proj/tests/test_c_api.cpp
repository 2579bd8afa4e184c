#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "bst/bst.h"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  bst_string_free(s);
  return out;
}

}  // namespace

TEST(CApi, StatusNames) {
  EXPECT_STREQ(bst_status_name(BST_OK), "ok");
  EXPECT_STREQ(bst_status_name(BST_ERR_CONFIG), "config");
  EXPECT_NE(std::string(bst_version()), "");
}

TEST(CApi, EncodeDecodeRoundTrip) {
  std::vector<float> dense(4 * 8, 0.0f);
  dense[0] = 1.0f;
  dense[2 * 8 + 6] = -3.0f;
  bst_bsr* m = nullptr;
  ASSERT_EQ(bst_bsr_encode(dense.data(), 4, 8, 2, 2, &m), BST_OK);
  bst_bsr_info info{};
  ASSERT_EQ(bst_bsr_get_info(m, &info), BST_OK);
  EXPECT_EQ(info.nnzb, 2u);
  EXPECT_EQ(info.value_bytes, 2u * 4u * 4u);
  EXPECT_EQ(info.index_bytes, (3u + 2u) * 4u);
  size_t row1 = 0;
  ASSERT_EQ(bst_bsr_nnzb_in_row(m, 1, &row1), BST_OK);
  EXPECT_EQ(row1, 1u);
  std::vector<float> back(32, 9.0f);
  ASSERT_EQ(bst_bsr_decode(m, back.data(), back.size()), BST_OK);
  EXPECT_EQ(back, dense);
  EXPECT_EQ(bst_bsr_decode(m, back.data(), 5), BST_ERR_DIMENSION);
  EXPECT_NE(std::string(bst_last_error_message()), "");

  const auto path = (std::filesystem::temp_directory_path() / "bst_capi.bsr").string();
  ASSERT_EQ(bst_bsr_save(m, path.c_str()), BST_OK);
  bst_bsr* loaded = nullptr;
  ASSERT_EQ(bst_bsr_load(path.c_str(), &loaded), BST_OK);
  std::vector<float> again(32);
  ASSERT_EQ(bst_bsr_decode(loaded, again.data(), again.size()), BST_OK);
  EXPECT_EQ(again, dense);
  bst_bsr_free(loaded);
  bst_bsr_free(m);
  std::remove(path.c_str());
}

TEST(CApi, ErrorsMapToStatus) {
  bst_bsr* m = nullptr;
  float x[6] = {};
  EXPECT_EQ(bst_bsr_encode(x, 2, 3, 1, 2, &m), BST_ERR_DIMENSION);
  EXPECT_EQ(m, nullptr);
  EXPECT_EQ(bst_bsr_encode(nullptr, 2, 3, 1, 1, &m), BST_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(bst_bsr_load("/nonexistent/x.bsr", &m), BST_ERR_IO);
  bst_config* cfg = nullptr;
  EXPECT_EQ(bst_config_parse("[model]\ndepth = two\n", &cfg), BST_ERR_CONFIG);
  EXPECT_NE(std::string(bst_last_error_message()).find(":2"), std::string::npos);
  EXPECT_EQ(bst_config_load("/nonexistent.cfg", &cfg), BST_ERR_IO);
}

TEST(CApi, PruneAndMultiply) {
  const size_t rows = 4, cols = 16, n = 3;
  std::vector<float> x(rows * cols), b(cols * n, 0.5f);
  for (size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>((i * 7) % 11) - 5.0f;
  bst_bsr* m = nullptr;
  ASSERT_EQ(bst_prune_to_bsr(x.data(), 1, rows, cols, 0.5, 4, &m), BST_OK);
  bst_bsr_info info{};
  bst_bsr_get_info(m, &info);
  EXPECT_EQ(info.nnzb, 8u);
  std::vector<float> decoded(rows * cols), out(rows * n), ref(rows * n, 0.0f);
  bst_bsr_decode(m, decoded.data(), decoded.size());
  for (size_t i = 0; i < rows; ++i)
    for (size_t k = 0; k < cols; ++k)
      for (size_t j = 0; j < n; ++j) ref[i * n + j] += decoded[i * cols + k] * b[k * n + j];
  bst_bspmm_stats st{};
  ASSERT_EQ(bst_bspmm(m, b.data(), n, out.data(), out.size(), &st), BST_OK);
  EXPECT_EQ(out, ref);
  EXPECT_EQ(st.macs_executed * 2, st.macs_dense_equivalent);
  bst_bsr_free(m);
}

TEST(CApi, CompressionReport) {
  bst_compression c{};
  ASSERT_EQ(bst_compression_report(196, 384, 1, 64, 0.0, &c), BST_OK);
  EXPECT_NEAR(c.excess_over_ideal * 100.0, 1.82, 0.005);
  EXPECT_EQ(bst_compression_report(196, 384, 1, 7, 0.0, &c), BST_ERR_DIMENSION);
}

TEST(CApi, ConfigEchoAndOverride) {
  bst_config* cfg = nullptr;
  ASSERT_EQ(bst_config_parse("[train]\nepochs = 2\n", &cfg), BST_OK);
  ASSERT_EQ(bst_config_set(cfg, "train.epochs=4"), BST_OK);
  EXPECT_EQ(bst_config_set(cfg, "train.epochs=zero"), BST_ERR_CONFIG);
  char* echo = nullptr;
  ASSERT_EQ(bst_config_echo(cfg, &echo), BST_OK);
  EXPECT_NE(take(echo).find("train.epochs=4;"), std::string::npos);
  // switching to sparse needs both keys before validation
  EXPECT_EQ(bst_config_set(cfg, "prune.sparsity=0.5"), BST_ERR_CONFIG);
  const char* both[] = {"prune.sparsity=0.5", "prune.block=8"};
  ASSERT_EQ(bst_config_set_many(cfg, both, 2), BST_OK);
  const char* bad[] = {"train.epochs=9", "prune.block=x"};
  EXPECT_EQ(bst_config_set_many(cfg, bad, 2), BST_ERR_CONFIG);
  ASSERT_EQ(bst_config_echo(cfg, &echo), BST_OK);
  const auto text = take(echo);
  EXPECT_NE(text.find("prune.sparsity=0.5;prune.block=8"), std::string::npos);
  EXPECT_NE(text.find("train.epochs=4;"), std::string::npos);
  bst_config_free(cfg);
}

TEST(CApi, OverheadTable) {
  char* csv = nullptr;
  ASSERT_EQ(bst_overhead_table_csv(196, 384, nullptr, 0, nullptr, 0, &csv), BST_OK);
  EXPECT_NE(take(csv).find("0,100.26,25.26,12.76,6.51,3.39,1.82,1.04,0.52"), std::string::npos);
}

TEST(CApi, TrainAndMemoryReport) {
  bst_config* cfg = nullptr;
  ASSERT_EQ(bst_config_parse("[model]\nimage = 3,8,8\npatch_size = 4\nhidden_dim = 16\ndepth = 1\nnum_classes = 4\n"
                             "[prune]\nsparsity = 0.5\nblock = 8\n"
                             "[train]\nepochs = 1\nbatch_size = 16\n"
                             "[data]\ntrain_samples = 64\ntest_samples = 16\n",
                             &cfg),
            BST_OK);
  const auto dir = (std::filesystem::temp_directory_path() / "bst_capi_train").string();
  bst_train_summary s{};
  ASSERT_EQ(bst_train(cfg, dir.c_str(), &s), BST_OK) << bst_last_error_message();
  EXPECT_EQ(s.steps, 4u);
  EXPECT_GT(s.peak_activation_bytes, 0u);
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(dir) / "checkpoint.bin"));
  char* report = nullptr;
  ASSERT_EQ(bst_memory_report(cfg, 0, 1, &report), BST_OK);
  EXPECT_NE(take(report).find("bst.memory_report/1"), std::string::npos);
  bst_config_free(cfg);
  std::filesystem::remove_all(dir);
}
