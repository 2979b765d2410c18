#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "zonescan/error.hpp"

namespace zonescan {

// Seeded RNG wrapper. mt19937_64 raw draws are pinned by the standard, but the
// <random> distributions are not, so the few distributions we need are derived
// here by hand and stay reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of entropy.
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n > 0. Modulo bias is irrelevant at our scales
  // but documented: n is always tiny compared to 2^64.
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

  int range(int lo, int hi) {  // inclusive bounds
    return lo + int(below(std::uint64_t(hi - lo + 1)));
  }

  // Box-Muller; one value per call, the pair's second half is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {  // Fisher-Yates
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = std::size_t(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// --- small string/CSV helpers -----------------------------------------------

std::string trim(const std::string& s);
std::vector<std::string> split_csv_line(const std::string& line);
std::string lowercase(std::string s);

int parse_int(const std::string& s, const std::string& what);
double parse_double(const std::string& s, const std::string& what);

// Deterministic float formatting for report files.
std::string fmt_g(double v, int digits = 10);

// --- filesystem helpers ------------------------------------------------------

void ensure_dir(const std::string& dir);
std::string path_join(const std::string& a, const std::string& b);
std::string path_stem(const std::string& path);
bool file_exists(const std::string& path);

// Writes to <path>.tmp and renames on success, so a failed stage never leaves
// a partially written file behind.
void atomic_write_file(const std::string& path, const std::string& contents);

std::string read_text_file(const std::string& path);

// Runs fn(begin..end) chunks on `threads` workers. Chunks are contiguous and
// disjoint; callers are responsible for making writes disjoint as well.
void parallel_for(int begin, int end, int threads,
                  const std::function<void(int, int)>& fn);

}  // namespace zonescan
