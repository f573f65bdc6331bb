#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "twopass/util.hpp"

namespace twopass {

// Closed class set. Order is fixed; confusion-matrix axes and CSV output
// depend on it.
enum class CollisionType { HeadOn, RearEnd, TBone, Sideswipe, Single };

inline constexpr std::array<CollisionType, 5> kCollisionTypes = {
    CollisionType::HeadOn, CollisionType::RearEnd, CollisionType::TBone,
    CollisionType::Sideswipe, CollisionType::Single};

// Canonical hyphenated spelling ("head-on", ..., "single").
std::string_view to_string(CollisionType t);

// Coarse-pass answer. Time is clamped to [0, duration], raw coordinates to
// [0,1000]; this tuple must always be usable as an anchor downstream.
struct Pass1Result {
  double t1 = 0.0;
  double raw_x1 = 0.0;
  double raw_y1 = 0.0;
  CollisionType c1 = CollisionType::Single;
};

// Fine-pass answer. Values pass through exactly as returned: -1 (either the
// model's "no collision" answer or the failure sentinel) and out-of-range
// coordinates must stay visible to the gates.
struct Pass2Result {
  double t2 = -1.0;
  double raw_x2 = 0.0;
  double raw_y2 = 0.0;
};

// Returns the first balanced JSON object embedded in `text`, ignoring
// surrounding prose and markdown fences. Idempotent.
Outcome<std::string> extract_json_block(const std::string& text);

Outcome<Pass1Result> parse_pass1(const std::string& text, double duration);
Outcome<Pass2Result> parse_pass2(const std::string& text);

// Exact match against the five classes after case/separator normalization
// ("head_on", "Head On", "HEAD-ON" all map to HeadOn). Everything else fails.
Outcome<CollisionType> normalize_type(const std::string& text);

// Tolerant reading of a free-form typing reply: exact normalization first,
// then a "type" key in an embedded JSON object, then an earliest-occurrence
// scan for the class names. nullopt when nothing matches.
std::optional<CollisionType> scan_type_response(const std::string& text);

}  // namespace twopass
