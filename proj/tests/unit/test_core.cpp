#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/io.hpp"
#include "mitosyn/core/kvconfig.hpp"
#include "mitosyn/core/random.hpp"
#include "support.hpp"

using namespace mitosyn;

TEST(KvConfig, ParsesTrimsAndSkipsComments) {
  const auto kv = KvConfig::parse("# header\n\n  train.epochs = 25 \nmodel.family=native128_conv\n");
  EXPECT_EQ(kv.get_int("train.epochs"), 25);
  EXPECT_EQ(kv.get_string("model.family"), "native128_conv");
  EXPECT_EQ(kv.entries().size(), 2u);
}

TEST(KvConfig, RejectsDuplicateAndMalformedLines) {
  EXPECT_THROW(KvConfig::parse("a=1\na=2\n"), ValidationError);
  EXPECT_THROW(KvConfig::parse("just text\n"), ValidationError);
  EXPECT_THROW(KvConfig::parse("=3\n"), ValidationError);
}

TEST(KvConfig, RenderIsSortedAndRoundTrips) {
  KvConfig kv;
  kv.set("z.last", 1);
  kv.set("a.first", 0.1);
  kv.set("m.flag", true);
  kv.set("m.name", "text");
  EXPECT_EQ(kv.render(), "a.first=0.1\nm.flag=true\nm.name=text\nz.last=1\n");
  EXPECT_EQ(KvConfig::parse(kv.render()).render(), kv.render());
}

TEST(KvConfig, TypedGettersValidate) {
  const auto kv = KvConfig::parse("n=12x\nd=abc\nb=maybe\n");
  EXPECT_THROW(kv.get_int("n"), ValidationError);
  EXPECT_THROW(kv.get_double("d"), ValidationError);
  EXPECT_THROW(kv.get_bool("b"), ValidationError);
  EXPECT_THROW(kv.get_string("missing"), ValidationError);
  EXPECT_EQ(kv.get_int("missing", 4), 4);
}

TEST(KvConfig, DoublesRoundTripExactly) {
  for (double v : {0.1, 1e-5, 3.0000000000000004, 7667.0, -2.5e-300}) {
    KvConfig kv;
    kv.set("x", v);
    EXPECT_EQ(KvConfig::parse(kv.render()).get_double("x"), v);
  }
}

TEST(KvConfig, SubtreeAndMerge) {
  const auto kv = KvConfig::parse("train.a=1\ntrain.b=2\ntrainx.c=3\nmodel.a=4\n");
  const auto t = kv.subtree("train");
  EXPECT_EQ(t.entries().size(), 2u);
  KvConfig merged;
  merged.merge("train", t);
  EXPECT_EQ(merged.render(), "train.a=1\ntrain.b=2\n");
}

TEST(Rng, EngineMatchesStandardSequence) {
  // The standard fixes the 10000th output of a default-seeded mt19937_64.
  Rng rng(5489u);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  EXPECT_EQ(v, 9981545732273789042ULL);
}

TEST(Rng, UniformAndBelowStayInRange) {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(rng.below(7), 7u);
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(11);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  const double mean = s / n, var = s2 / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 3.0 / std::sqrt(n) * 1.5);
  EXPECT_NEAR(var, 1.0, 3.0 * std::sqrt(2.0 / n) * 1.5);
}

TEST(Rng, DerivedSeedsAreDistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 100; ++s) seen.insert(derive_seed(7, s));
  EXPECT_EQ(seen.size(), 100u);
  EXPECT_EQ(derive_seed(7, "fold"), derive_seed(7, "fold"));
  EXPECT_NE(derive_seed(7, "fold"), derive_seed(8, "fold"));
  EXPECT_NE(derive_seed(7, "a"), derive_seed(7, "b"));
}

TEST(Io, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Io, AtomicWriteLeavesNoTempFile) {
  fixtures::TempDir dir("io");
  const auto path = dir / "sub/file.txt";
  write_file_atomic(path, "one");
  write_file_atomic(path, "two");
  EXPECT_EQ(read_file(path), "two");
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  EXPECT_THROW(read_file(dir / "missing"), ValidationError);
}

TEST(Io, SplitCsvLine) {
  const auto f = split_csv_line("a,b,,d");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[2], "");
  EXPECT_EQ(f[3], "d");
}
