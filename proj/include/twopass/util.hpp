#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace twopass {

// Bad user input (flags, manifests, preconditions).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing or inconsistent configuration (endpoints, credentials, plugins).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem / subprocess trouble.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Error-as-value result for operations whose failure is an expected outcome
// (model text that does not parse, frames that cannot be extracted).
template <typename T>
struct Outcome {
  std::optional<T> value;
  std::string error;

  bool ok() const { return value.has_value(); }
  const T& operator*() const { return *value; }
  T& operator*() { return *value; }
  const T* operator->() const { return &*value; }

  static Outcome success(T v) { return Outcome{std::move(v), {}}; }
  static Outcome failure(std::string msg) { return Outcome{std::nullopt, std::move(msg)}; }
};

// ---- string / number formatting ----

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Shortest decimal string that round-trips through strtod.
std::string format_double(double v);
// Fixed one-decimal rendering ("7.0", "12.8").
std::string format_fixed1(double v);
// Frame-tag seconds: whole values render as integers, others at one decimal.
std::string format_tag_seconds(double t, bool force_decimal);

std::optional<double> parse_strict_double(std::string_view s);

// ---- csv ----

std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);

// ---- files ----

std::string read_file(const std::string& path);           // throws IoError
void write_file(const std::string& path, std::string_view data);
bool file_exists(const std::string& path);

// ---- encoding / hashing ----

std::string base64_encode(std::string_view data);

std::uint64_t fnv1a64(std::string_view data);
std::uint64_t splitmix64(std::uint64_t x);
// Deterministic hash of (seed, key) onto [0,1). Stable across platforms.
double hash_unit01(std::uint64_t seed, std::string_view key);

// ---- deterministic RNG ----

// Thin wrapper around mt19937_64 with platform-independent uniform draws
// (std::uniform_*_distribution is implementation-defined, so not used).
class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next_u64() { return engine_(); }
  double next_unit();                     // [0,1)
  std::size_t next_index(std::size_t n);  // [0,n)

 private:
  std::mt19937_64 engine_;
};

// ---- worker pool ----

class ThreadPool {
 public:
  explicit ThreadPool(int workers);
  ~ThreadPool();
  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  void submit(std::function<void()> task);
  void shutdown();  // drain queue, join workers

 private:
  std::vector<std::thread> threads_;
  std::queue<std::function<void()>> queue_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
};

class CountdownLatch {
 public:
  explicit CountdownLatch(std::size_t count) : count_(count) {}
  void count_down();
  void wait();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t count_;
};

}  // namespace twopass
