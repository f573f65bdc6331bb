#include <doctest.h>

#include <atomic>

#include "twopass/util.hpp"

using namespace twopass;

TEST_CASE("base64 known vectors") {
  CHECK(base64_encode("") == "");
  CHECK(base64_encode("f") == "Zg==");
  CHECK(base64_encode("fo") == "Zm8=");
  CHECK(base64_encode("foo") == "Zm9v");
  CHECK(base64_encode("foobar") == "Zm9vYmFy");
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, -0.001, 11.4, 26.8, 0.5113, 1e-9, 12345.6789}) {
    auto s = format_double(v);
    CHECK(*parse_strict_double(s) == v);
  }
}

TEST_CASE("format_tag_seconds") {
  CHECK(format_tag_seconds(0.0, false) == "0");
  CHECK(format_tag_seconds(7.0, false) == "7");
  CHECK(format_tag_seconds(1.5, false) == "1.5");
  CHECK(format_tag_seconds(7.0, true) == "7.0");
  CHECK(format_tag_seconds(7.2, true) == "7.2");
}

TEST_CASE("parse_strict_double rejects junk") {
  CHECK(!parse_strict_double(""));
  CHECK(!parse_strict_double("12abc"));
  CHECK(!parse_strict_double("nan"));
  CHECK(!parse_strict_double("inf"));
  CHECK(*parse_strict_double(" 12 ") == 12.0);
  CHECK(*parse_strict_double("-1") == -1.0);
}

TEST_CASE("csv split handles quotes") {
  auto fields = split_csv_line(R"(a,"b,c",d)");
  REQUIRE(fields.size() == 3);
  CHECK(fields[1] == "b,c");
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
}

TEST_CASE("hash_unit01 is deterministic and in range") {
  const double a = hash_unit01(42, "v001");
  CHECK(a == hash_unit01(42, "v001"));
  CHECK(a >= 0.0);
  CHECK(a < 1.0);
  CHECK(hash_unit01(42, "v001") != hash_unit01(43, "v001"));
  CHECK(hash_unit01(42, "v001") != hash_unit01(42, "v002"));
}

TEST_CASE("DetRng reproduces sequences per seed") {
  DetRng a(7), b(7), c(8);
  for (int i = 0; i < 100; ++i) {
    auto va = a.next_index(1000);
    CHECK(va == b.next_index(1000));
    CHECK(va < 1000);
  }
  bool differs = false;
  DetRng a2(7);
  for (int i = 0; i < 100; ++i) differs |= a2.next_index(1000) != c.next_index(1000);
  CHECK(differs);
}

TEST_CASE("ThreadPool runs all tasks") {
  ThreadPool pool(4);
  std::atomic<int> count{0};
  CountdownLatch latch(100);
  for (int i = 0; i < 100; ++i) {
    pool.submit([&] {
      count.fetch_add(1);
      latch.count_down();
    });
  }
  latch.wait();
  CHECK(count.load() == 100);
}
