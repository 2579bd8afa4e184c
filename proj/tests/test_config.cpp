#include <gtest/gtest.h>

#include "bst/config.hpp"
#include "bst/error.hpp"

using namespace bst;

namespace {

std::string error_of(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_run_config(text, overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kSmall = R"(# comment
[model]
image = 3,16,16
patch_size = 4
hidden_dim = 32   # trailing comment
depth = 2
num_classes = 10

[prune]
sparsity = 0.5
block = 8

[train]
epochs = 3
)";

}  // namespace

TEST(Config, ParsesTypedValues) {
  auto rc = parse_run_config(kSmall);
  EXPECT_EQ(rc.model.height, 16u);
  EXPECT_EQ(rc.model.hidden_dim, 32u);
  ASSERT_TRUE(rc.model.prune.has_value());
  EXPECT_EQ(rc.model.prune->sparsity, 0.5);
  EXPECT_EQ(rc.model.prune->block_cols, 8u);
  EXPECT_EQ(rc.train.epochs, 3u);
  EXPECT_EQ(rc.optim.name, "sgd");
}

TEST(Config, ErrorsNameTheLine) {
  EXPECT_NE(error_of("[model]\ndepth = two\n").find("<string>:2"), std::string::npos);
  EXPECT_NE(error_of("[model]\n\n\nnonsense\n").find(":4"), std::string::npos);
  EXPECT_NE(error_of("depth = 2\n").find(":1"), std::string::npos);
  EXPECT_NE(error_of("[model\n").find(":1"), std::string::npos);
  EXPECT_NE(error_of("[model]\ndepth = 2\ndepth = 3\n").find(":3"), std::string::npos);
  EXPECT_NE(error_of("[model]\ndepth = 2\n[optim]\nbogus = 1\n").find(":4"), std::string::npos);
  EXPECT_NE(error_of("[prune]\nsparsity = 1.5\nblock = 8\n").find(":2"), std::string::npos);
}

TEST(Config, ValidatesModel) {
  EXPECT_THROW(parse_run_config("[model]\nimage = 3,16,16\npatch_size = 5\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[prune]\nsparsity = 0.5\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[data]\nsource = cifar10\n"), ConfigError);
  EXPECT_THROW(parse_run_config("[optim]\nname = rmsprop\n"), ConfigError);
}

TEST(Config, OverridesWin) {
  auto rc = parse_run_config(kSmall, {"train.epochs=7", "model.depth = 0", "prune.mode=dense"});
  EXPECT_EQ(rc.train.epochs, 7u);
  EXPECT_EQ(rc.model.depth, 0u);
  EXPECT_FALSE(rc.model.prune.has_value());
  EXPECT_THROW(parse_run_config(kSmall, {"noequals"}), ConfigError);
  EXPECT_NE(error_of(kSmall, {"train.bogus=1"}).find("override"), std::string::npos);
}

TEST(Config, AdamDefaults) {
  auto rc = parse_run_config("[optim]\nname = adam\n");
  EXPECT_FLOAT_EQ(rc.optim.lr, 1e-3f);
  EXPECT_EQ(rc.optim.momentum, 0.0f);
}

TEST(Config, EchoRoundTrips) {
  auto rc = parse_run_config(kSmall, {"optim.lr=0.1"});
  const auto echo = rc.echo();
  EXPECT_NE(echo.find("optim.lr=0.1;"), std::string::npos) << echo;
  EXPECT_NE(echo.find("prune.sparsity=0.5;prune.block=8"), std::string::npos) << echo;
  // the echo is itself a valid override list
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= echo.size()) {
    auto end = echo.find(';', start);
    if (end == std::string::npos) end = echo.size();
    parts.push_back(echo.substr(start, end - start));
    start = end + 1;
  }
  auto again = parse_run_config("", parts);
  EXPECT_EQ(again.echo(), echo);
}

TEST(Config, ListHelpers) {
  EXPECT_EQ(parse_size_list("4, 8,16", "blocks"), (std::vector<std::size_t>{4, 8, 16}));
  EXPECT_EQ(parse_double_list("0,0.5", "s"), (std::vector<double>{0.0, 0.5}));
  EXPECT_THROW(parse_size_list("4,x", "blocks"), InvalidArgument);
  EXPECT_THROW(parse_double_list("", "s"), InvalidArgument);
}

TEST(Config, MissingFileIsIoError) { EXPECT_THROW(load_run_config("/nonexistent/bst.cfg"), IoError); }
