#include <doctest.h>

#include <string>

#include "twopass/parser.hpp"
#include "twopass/util.hpp"

using namespace twopass;

TEST_CASE("extract_json_block on bare object") {
  const std::string text = R"({"time": 12, "x": 640, "y": 380, "type": "t-bone"})";
  auto r = extract_json_block(text);
  REQUIRE(r.ok());
  CHECK(*r == text);
}

TEST_CASE("extract_json_block strips fences and prose") {
  auto r = extract_json_block("Sure! ```json\n{\"time\": 12.3, \"x\": 500, \"y\": 500}\n```");
  REQUIRE(r.ok());
  CHECK(*r == R"({"time": 12.3, "x": 500, "y": 500})");
}

TEST_CASE("extract_json_block without an object fails") {
  CHECK(!extract_json_block("no json here").ok());
  CHECK(!extract_json_block("").ok());
  CHECK(!extract_json_block("{unterminated").ok());
}

TEST_CASE("extract_json_block skips balanced non-JSON braces") {
  auto r = extract_json_block(R"(set {x} then {"time": 1, "x": 2, "y": 3})");
  REQUIRE(r.ok());
  CHECK(*r == R"({"time": 1, "x": 2, "y": 3})");
}

TEST_CASE("extract_json_block is idempotent") {
  const std::string samples[] = {
      R"(prose {"a": 1} more prose)",
      "```json\n{\"a\": {\"nested\": [1,2,3]}}\n```",
      R"({"s": "brace } in string"})",
  };
  for (const auto& text : samples) {
    auto once = extract_json_block(text);
    REQUIRE(once.ok());
    auto twice = extract_json_block(*once);
    REQUIRE(twice.ok());
    CHECK(*once == *twice);
  }
}

TEST_CASE("parse_pass1 happy path") {
  auto r = parse_pass1(R"({"time": 12, "x": 640, "y": 380, "type": "t-bone"})", 26.8);
  REQUIRE(r.ok());
  CHECK(r->t1 == 12.0);
  CHECK(r->raw_x1 == 640.0);
  CHECK(r->raw_y1 == 380.0);
  CHECK(r->c1 == CollisionType::TBone);
}

TEST_CASE("parse_pass1 clamps out-of-range values") {
  auto r = parse_pass1(R"({"time": 99, "x": 1200, "y": -5, "type": "single"})", 26.8);
  REQUIRE(r.ok());
  CHECK(r->t1 == 26.8);
  CHECK(r->raw_x1 == 1000.0);
  CHECK(r->raw_y1 == 0.0);
  CHECK(r->c1 == CollisionType::Single);
}

TEST_CASE("parse_pass1 error paths") {
  CHECK(!parse_pass1(R"({"time": 12, "x": 640, "y": 380})", 26.8).ok());  // missing type
  CHECK(!parse_pass1(R"({"time": "noon", "x": 1, "y": 2, "type": "single"})", 26.8).ok());
  CHECK(!parse_pass1(R"({"time": 1, "x": 2, "y": 3, "type": "collision"})", 26.8).ok());
  CHECK(!parse_pass1("total garbage", 26.8).ok());
}

TEST_CASE("parse_pass1 accepts numeric strings") {
  auto r = parse_pass1(R"({"time": "12", "x": "640.5", "y": "380", "type": "rear_end"})", 26.8);
  REQUIRE(r.ok());
  CHECK(r->t1 == 12.0);
  CHECK(r->raw_x1 == 640.5);
  CHECK(r->c1 == CollisionType::RearEnd);
}

TEST_CASE("parse_pass1 output satisfies invariants for fuzzed inputs") {
  DetRng rng(2024);
  int parsed_count = 0;
  for (int i = 0; i < 2000; ++i) {
    const double t = (rng.next_unit() - 0.25) * 200.0;
    const double x = (rng.next_unit() - 0.5) * 4000.0;
    const double y = (rng.next_unit() - 0.5) * 4000.0;
    const char* types[] = {"head-on", "rear_end", "T-Bone", "sideswipe", "single", "junk"};
    const std::string text = "{\"time\": " + format_double(t) + ", \"x\": " + format_double(x) +
                             ", \"y\": " + format_double(y) + ", \"type\": \"" +
                             types[rng.next_index(6)] + "\"}";
    const double duration = 1.0 + rng.next_unit() * 59.0;
    auto r = parse_pass1(text, duration);
    if (!r.ok()) continue;
    ++parsed_count;
    CHECK(r->t1 >= 0.0);
    CHECK(r->t1 <= duration);
    CHECK(r->raw_x1 >= 0.0);
    CHECK(r->raw_x1 <= 1000.0);
    CHECK(r->raw_y1 >= 0.0);
    CHECK(r->raw_y1 <= 1000.0);
  }
  CHECK(parsed_count > 1000);
}

TEST_CASE("parse_pass2 passes values through untouched") {
  auto r = parse_pass2(R"({"time": 11.4, "x": 512, "y": 488})");
  REQUIRE(r.ok());
  CHECK(r->t2 == 11.4);
  CHECK(r->raw_x2 == 512.0);
  CHECK(r->raw_y2 == 488.0);

  auto sentinel = parse_pass2(R"({"time": -1, "x": 0, "y": 0})");
  REQUIRE(sentinel.ok());
  CHECK(sentinel->t2 == -1.0);

  auto invalid_coords = parse_pass2(R"({"time": 11.4, "x": -1, "y": -1})");
  REQUIRE(invalid_coords.ok());
  CHECK(invalid_coords->raw_x2 == -1.0);
  CHECK(invalid_coords->raw_y2 == -1.0);
}

TEST_CASE("parse_pass2 exact numeric round-trip") {
  DetRng rng(7);
  for (int i = 0; i < 500; ++i) {
    const double t = (rng.next_unit() - 0.2) * 100.0;
    const double x = (rng.next_unit() - 0.5) * 3000.0;
    const double y = (rng.next_unit() - 0.5) * 3000.0;
    const std::string text = "{\"time\": " + format_double(t) + ", \"x\": " + format_double(x) +
                             ", \"y\": " + format_double(y) + "}";
    auto r = parse_pass2(text);
    REQUIRE(r.ok());
    CHECK(r->t2 == t);
    CHECK(r->raw_x2 == x);
    CHECK(r->raw_y2 == y);
  }
}

TEST_CASE("parse_pass2 error paths") {
  CHECK(!parse_pass2(R"({"time": 11.4, "x": 512})").ok());
  CHECK(!parse_pass2(R"({"time": true, "x": 1, "y": 2})").ok());
  CHECK(!parse_pass2("nothing").ok());
}

TEST_CASE("normalize_type accepts the case/separator closure and nothing else") {
  CHECK(*normalize_type("head_on") == CollisionType::HeadOn);
  CHECK(*normalize_type("T-Bone") == CollisionType::TBone);
  CHECK(*normalize_type("REAR END") == CollisionType::RearEnd);
  CHECK(*normalize_type(" sideswipe ") == CollisionType::Sideswipe);
  CHECK(*normalize_type("Single") == CollisionType::Single);

  const char* separators[] = {"-", "_", " "};
  const char* pieces[][2] = {{"head", "on"}, {"rear", "end"}, {"t", "bone"}};
  const CollisionType expected[] = {CollisionType::HeadOn, CollisionType::RearEnd,
                                    CollisionType::TBone};
  for (int p = 0; p < 3; ++p) {
    for (const char* sep : separators) {
      std::string lower = std::string(pieces[p][0]) + sep + pieces[p][1];
      std::string upper = to_lower(lower);
      for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      CHECK(*normalize_type(lower) == expected[p]);
      CHECK(*normalize_type(upper) == expected[p]);
    }
  }

  CHECK(!normalize_type("collision").ok());
  CHECK(!normalize_type("headon").ok());
  CHECK(!normalize_type("t bone crash").ok());
  CHECK(!normalize_type("").ok());
}

TEST_CASE("scan_type_response tolerant matching") {
  CHECK(*scan_type_response("t_bone") == CollisionType::TBone);
  CHECK(*scan_type_response("  T-Bone\n") == CollisionType::TBone);
  CHECK(*scan_type_response("The collision type is rear-end.") == CollisionType::RearEnd);
  CHECK(*scan_type_response(R"({"type": "sideswipe"})") == CollisionType::Sideswipe);
  CHECK(*scan_type_response("I think head_on, though t_bone is possible") ==
        CollisionType::HeadOn);  // earliest occurrence wins
  CHECK(!scan_type_response("mock garbage response with no usable answer").has_value());
}
