#include "twopass/parser.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace twopass {

namespace {

using nlohmann::json;

// Lowercase and collapse runs of '-', '_' and whitespace into single '-'.
std::string canonical_type_key(std::string_view s) {
  std::string out;
  bool pending_sep = false;
  for (char ch : s) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (c == '-' || c == '_' || std::isspace(c)) {
      if (!out.empty()) pending_sep = true;
      continue;
    }
    if (pending_sep) {
      out += '-';
      pending_sep = false;
    }
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

// Scans from `start` (which must point at '{') for the matching close brace,
// honoring strings and escapes. Returns npos when unbalanced.
std::size_t find_balanced_end(const std::string& text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}') {
      --depth;
      if (depth == 0) return i;
    }
  }
  return std::string::npos;
}

Outcome<double> numeric_field(const json& obj, const char* key) {
  if (!obj.contains(key))
    return Outcome<double>::failure(std::string("missing key: ") + key);
  const json& v = obj.at(key);
  if (v.is_number()) {
    double d = v.get<double>();
    if (!std::isfinite(d)) return Outcome<double>::failure(std::string(key) + " is not finite");
    return Outcome<double>::success(d);
  }
  if (v.is_string()) {
    auto parsed = parse_strict_double(v.get<std::string>());
    if (parsed) return Outcome<double>::success(*parsed);
    return Outcome<double>::failure(std::string(key) + " is not numeric: " + v.get<std::string>());
  }
  return Outcome<double>::failure(std::string(key) + " is not numeric");
}

double clamp(double v, double lo, double hi) { return std::max(lo, std::min(hi, v)); }

}  // namespace

std::string_view to_string(CollisionType t) {
  switch (t) {
    case CollisionType::HeadOn: return "head-on";
    case CollisionType::RearEnd: return "rear-end";
    case CollisionType::TBone: return "t-bone";
    case CollisionType::Sideswipe: return "sideswipe";
    case CollisionType::Single: return "single";
  }
  return "single";
}

Outcome<std::string> extract_json_block(const std::string& text) {
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string::npos) {
    std::size_t end = find_balanced_end(text, pos);
    if (end == std::string::npos) break;
    std::string candidate = text.substr(pos, end - pos + 1);
    if (json::accept(candidate))
      return Outcome<std::string>::success(std::move(candidate));
    ++pos;  // balanced but not valid JSON; keep looking
  }
  return Outcome<std::string>::failure("no JSON object found in model output");
}

Outcome<Pass1Result> parse_pass1(const std::string& text, double duration) {
  auto block = extract_json_block(text);
  if (!block.ok()) return Outcome<Pass1Result>::failure(block.error);
  json obj = json::parse(*block);

  auto t = numeric_field(obj, "time");
  if (!t.ok()) return Outcome<Pass1Result>::failure(t.error);
  auto x = numeric_field(obj, "x");
  if (!x.ok()) return Outcome<Pass1Result>::failure(x.error);
  auto y = numeric_field(obj, "y");
  if (!y.ok()) return Outcome<Pass1Result>::failure(y.error);

  if (!obj.contains("type") || !obj.at("type").is_string())
    return Outcome<Pass1Result>::failure("missing key: type");
  auto type = normalize_type(obj.at("type").get<std::string>());
  if (!type.ok()) return Outcome<Pass1Result>::failure(type.error);

  Pass1Result r;
  r.t1 = clamp(*t, 0.0, duration);
  r.raw_x1 = clamp(*x, 0.0, 1000.0);
  r.raw_y1 = clamp(*y, 0.0, 1000.0);
  r.c1 = *type;
  return Outcome<Pass1Result>::success(r);
}

Outcome<Pass2Result> parse_pass2(const std::string& text) {
  auto block = extract_json_block(text);
  if (!block.ok()) return Outcome<Pass2Result>::failure(block.error);
  json obj = json::parse(*block);

  auto t = numeric_field(obj, "time");
  if (!t.ok()) return Outcome<Pass2Result>::failure(t.error);
  auto x = numeric_field(obj, "x");
  if (!x.ok()) return Outcome<Pass2Result>::failure(x.error);
  auto y = numeric_field(obj, "y");
  if (!y.ok()) return Outcome<Pass2Result>::failure(y.error);

  // No clamping and no window check here; the gates own both.
  return Outcome<Pass2Result>::success(Pass2Result{*t, *x, *y});
}

Outcome<CollisionType> normalize_type(const std::string& text) {
  std::string key = canonical_type_key(text);
  for (CollisionType t : kCollisionTypes) {
    if (key == to_string(t)) return Outcome<CollisionType>::success(t);
  }
  return Outcome<CollisionType>::failure("unknown collision type: " + trim(text));
}

std::optional<CollisionType> scan_type_response(const std::string& text) {
  if (auto direct = normalize_type(text); direct.ok()) return *direct;

  if (auto block = extract_json_block(text); block.ok()) {
    auto obj = nlohmann::json::parse(*block);
    if (obj.contains("type") && obj.at("type").is_string()) {
      if (auto t = normalize_type(obj.at("type").get<std::string>()); t.ok()) return *t;
    }
  }

  std::string haystack = canonical_type_key(text);
  std::size_t best_pos = std::string::npos;
  std::optional<CollisionType> best;
  for (CollisionType t : kCollisionTypes) {
    std::size_t pos = haystack.find(to_string(t));
    if (pos != std::string::npos && pos < best_pos) {
      best_pos = pos;
      best = t;
    }
  }
  return best;
}

}  // namespace twopass
