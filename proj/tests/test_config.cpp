#include "pessim/config.hpp"

#include "pessim/common.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace pessim {
namespace {

TEST(Config, ParsesTypedValues) {
  const Config c = Config::parse(R"(
# top comment
name = "scaling # not a comment"
[study]
seed = 42
ratio = 0.25   # trailing
big = 1e3
flag = true
sizes = [250, 500, 1000]
mixed = [1, 2.5]
labels = ["a", "b"]
)");
  EXPECT_EQ(c.get_string("name", ""), "scaling # not a comment");
  EXPECT_EQ(c.get_int("study.seed", 0), 42);
  EXPECT_DOUBLE_EQ(c.get_double("study.ratio", 0), 0.25);
  EXPECT_DOUBLE_EQ(c.get_double("study.big", 0), 1000.0);
  EXPECT_DOUBLE_EQ(c.get_double("study.seed", 0), 42.0);
  EXPECT_TRUE(c.get_bool("study.flag", false));
  EXPECT_EQ(c.get_int_list("study.sizes", {}), (std::vector<std::int64_t>{250, 500, 1000}));
  EXPECT_EQ(c.get_double_list("study.mixed", {}), (std::vector<double>{1.0, 2.5}));
  EXPECT_EQ(c.get_double_list("study.ratio", {}), (std::vector<double>{0.25}));
  EXPECT_EQ(c.get_int("missing", 7), 7);
  EXPECT_TRUE(c.has("study.labels"));
  EXPECT_EQ(c.keys().size(), 8u);
}

TEST(Config, TypeMismatchesThrow) {
  const Config c = Config::parse("a = 1.5\nb = \"x\"\nc = [1, 2]\n");
  EXPECT_THROW(c.get_int("a", 0), InvalidInput);
  EXPECT_THROW(c.get_double("b", 0), InvalidInput);
  EXPECT_THROW(c.get_bool("a", false), InvalidInput);
  EXPECT_THROW(c.get_int("c", 0), InvalidInput);
  EXPECT_THROW(c.get_int_list("b", {}), InvalidInput);
}

TEST(Config, MalformedInputThrows) {
  for (const char* text : {"a = 1\na = 2\n", "just words\n", "[unclosed\n", "a = \"open\n",
                           "a = [1, 2\n", "a = [1, ]\n", "a b = 1\n", "a = 1x\n", "a =\n",
                           "[bad name]\n"}) {
    EXPECT_THROW(Config::parse(text), InvalidInput) << text;
  }
  try {
    Config::parse("a = 1\n\nb = ?\n");
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  EXPECT_THROW(Config::load("/nonexistent/file.toml"), InvalidInput);
}

TEST(Config, SameKeyInDifferentSectionsIsDistinct) {
  const Config c = Config::parse("[x]\nk = 1\n[y]\nk = 2\n");
  EXPECT_EQ(c.get_int("x.k", 0), 1);
  EXPECT_EQ(c.get_int("y.k", 0), 2);
}

TEST(Config, RequireKnown) {
  const Config c = Config::parse("[s]\na = 1\nb = 2\n");
  EXPECT_NO_THROW(c.require_known({"s.a", "s.b", "s.c"}));
  try {
    c.require_known({"s.a"});
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("s.b"), std::string::npos);
  }
}

TEST(Config, CanonicalJsonIgnoresOrderAndComments) {
  const Config a = Config::parse("[s]\nb = 2\na = [1, \"x\"]\n");
  const Config b = Config::parse("# c\n[s]\na = [1, \"x\"]   # c\nb = 2\n");
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(a.to_json()["s.a"][1], "x");
}

TEST(Hash, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
  EXPECT_EQ(hex64(fnv1a64("")), "cbf29ce484222325");
}

}  // namespace
}  // namespace pessim
