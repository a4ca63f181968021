#pragma once

// Shared test fixtures and independent reference implementations.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "epimark/core.hpp"
#include "epimark/stats.hpp"

namespace epimark::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("epimark_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline ResponseRecord marker_record(std::string dataset, Split split, std::string id, std::string marker, bool correct,
                                    std::string model = "m") {
  ResponseRecord r;
  r.item = {std::move(dataset), split, std::move(id)};
  r.model_id = std::move(model);
  r.prompt_mode = PromptMode::marker;
  r.raw_response = (correct ? "yes, " : "no, ") + marker;
  r.extracted_answer = correct ? "yes" : "no";
  r.correct = correct;
  r.marker = marker.empty() ? Marker::none() : Marker::from_text(marker);
  return r;
}

inline ResponseRecord numeric_record(std::string dataset, Split split, std::string id, double conf, bool correct,
                                     std::string model = "m") {
  ResponseRecord r;
  r.item = {std::move(dataset), split, std::move(id)};
  r.model_id = std::move(model);
  r.prompt_mode = PromptMode::numeric;
  r.raw_response = "yes";
  r.extracted_answer = correct ? "yes" : "no";
  r.correct = correct;
  r.numeric_confidence = NumericConfidence::of(conf);
  return r;
}

/// `count` records of one marker with `correct` of them correct.
inline void add_marker(std::vector<ResponseRecord>& out, const std::string& dataset, Split split,
                       const std::string& marker, int count, int correct, const std::string& model = "m") {
  for (int i = 0; i < count; ++i)
    out.push_back(marker_record(dataset, split, marker + "-" + std::to_string(out.size()), marker, i < correct, model));
}

// ---------------------------------------------------------------------------
// Reference implementations, written from the textbook definitions in long
// double and without sharing code with the library.
// ---------------------------------------------------------------------------

namespace oracle {

/// Bins scanned one at a time: each bin's mean confidence and accuracy,
/// weighted by its share of the samples.
inline double ece(const std::vector<stats::EceSample>& s, std::size_t bins) {
  long double total = 0;
  const auto n = static_cast<long double>(s.size());
  for (std::size_t b = 0; b < bins; ++b) {
    long double conf = 0, acc = 0, members = 0;
    for (const auto& x : s) {
      std::size_t bin = static_cast<std::size_t>(std::floor(x.confidence * static_cast<double>(bins)));
      if (bin >= bins) bin = bins - 1;
      if (bin != b) continue;
      conf += x.confidence;
      acc += x.correct ? 1 : 0;
      members += 1;
    }
    if (members == 0) continue;
    total += members / n * std::fabs(acc / members - conf / members);
  }
  return static_cast<double>(total);
}

inline double mean_abs_deviation(const std::vector<stats::EceSample>& s) {
  long double t = 0;
  for (const auto& x : s) t += std::fabs(static_cast<long double>(x.confidence) - (x.correct ? 1 : 0));
  return static_cast<double>(t / s.size());
}

inline double cv(const std::vector<double>& v) {
  long double m = 0;
  for (double x : v) m += x;
  m /= v.size();
  long double var = 0;
  for (double x : v) var += (x - m) * (x - m);
  var /= v.size();
  return static_cast<double>(std::sqrt(var) / m);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<long double>(x.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double cov = 0, vx = 0, vy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(cov / std::sqrt(vx * vy));
}

/// rank = 1 + (number smaller) + (ties - 1) / 2, by direct counting.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<double> r;
  for (double a : v) {
    int less = 0, equal = 0;
    for (double b : v) {
      less += b < a;
      equal += b == a;
    }
    r.push_back(1.0 + less + (equal - 1) / 2.0);
  }
  return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

/// z quantiles quoted to full double precision.
inline double z_for(double level) {
  if (level == 0.90) return 1.6448536269514722;
  if (level == 0.95) return 1.959963984540054;
  if (level == 0.99) return 2.5758293035489004;
  return NAN;
}

/// Wilson bounds written as (2np + z^2 -+ z sqrt(z^2 + 4np(1-p))) / (2(n + z^2)).
inline Interval wilson(std::int64_t k, std::int64_t n, double level) {
  const long double z = z_for(level);
  const long double nn = n;
  const long double p = static_cast<long double>(k) / nn;
  const long double root = z * std::sqrt(z * z + 4 * nn * p * (1 - p));
  const long double den = 2 * (nn + z * z);
  long double lo = (2 * nn * p + z * z - root) / den;
  long double hi = (2 * nn * p + z * z + root) / den;
  lo = std::clamp<long double>(lo, 0, 1);
  hi = std::clamp<long double>(hi, 0, 1);
  return {static_cast<double>(std::min(lo, p)), static_cast<double>(std::max(hi, p))};
}

}  // namespace oracle

}  // namespace epimark::testing
