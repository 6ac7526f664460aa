#pragma once

// Shared primitives: error taxonomy, 2-d geometry, a pinned deterministic
// RNG and a small thread-pool helper whose output never depends on
// scheduling order.

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace dmt {

inline constexpr std::uint64_t kDefaultSeed = 7;

// --------------------------------------------------------------- errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input violates a structural precondition (too small, empty, degenerate).
struct DegenerateInputError : Error {
  using Error::Error;
};

// Models cannot be combined (window size, extractor settings, landmark count).
struct IncompatibleModelsError : Error {
  using Error::Error;
};

// Dataset content unusable for the requested operation.
struct TrainingDataError : Error {
  using Error::Error;
};

// Malformed or inconsistent external data (files, annotations, blobs, args).
struct ValidationError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(const std::string& msg, int line_number)
      : Error(msg + " (line " + std::to_string(line_number) + ")"),
        line(line_number) {}
  int line;
};

// Pool/service failures; the CLI maps these to exit code 3.
struct PoolError : Error {
  using Error::Error;
};
struct PoolNetworkError : PoolError {
  using PoolError::PoolError;
};
struct PoolNotFoundError : PoolError {
  using PoolError::PoolError;
};
struct PoolIntegrityError : PoolError {
  using PoolError::PoolError;
};
struct PoolRejectedError : PoolError {
  using PoolError::PoolError;
};

// -------------------------------------------------------------- geometry

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  Vec2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  friend Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
  friend Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
  friend Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend Vec2 operator/(Vec2 a, double s) { return a *= (1.0 / s); }
  friend bool operator==(const Vec2&, const Vec2&) = default;

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm2()); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Axis-aligned box, (x, y) = top-left corner.
struct Rect {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w > 0 && h > 0 ? w * h : 0.0; }
  Vec2 center() const { return {x + w / 2.0, y + h / 2.0}; }
  bool contains(const Vec2& p) const {
    return p.x >= x && p.x < right() && p.y >= y && p.y < bottom();
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

inline double intersection_area(const Rect& a, const Rect& b) {
  const double iw =
      std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih =
      std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  return iw > 0 && ih > 0 ? iw * ih : 0.0;
}

inline double iou(const Rect& a, const Rect& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

// ------------------------------------------------------------------- rng

// mt19937_64 with hand-rolled distributions so that values never depend on
// the standard library's (unspecified) distribution algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return state_(); }

  // Uniform in [0, 1).
  double uniform() {
    return double(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
  }

  // Uniform index in [0, n); n must be positive.
  std::size_t index(std::size_t n) {
    return std::size_t((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    return lo + int(index(std::size_t(hi - lo) + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 state_;
};

// ---------------------------------------------------------------- threads

inline unsigned worker_count() {
  if (const char* env = std::getenv("DMT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return unsigned(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

// Runs fn(i) for i in [0, n). Callers write results into pre-sized,
// index-addressed slots, so the outcome is independent of scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load(std::memory_order_relaxed)) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ------------------------------------------------------------- formatting

// Shortest decimal form that round-trips the exact double.
inline std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string to_hex(const unsigned char* data, std::size_t len) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (std::size_t i = 0; i < len; ++i) {
    out.push_back(digits[data[i] >> 4]);
    out.push_back(digits[data[i] & 0xf]);
  }
  return out;
}

}  // namespace dmt
