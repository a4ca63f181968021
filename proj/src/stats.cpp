#include "epimark/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

namespace epimark::stats {

EceBins EceBins::fixed(int b) {
  if (b < 1) throw UsageError("fixed ECE binning needs at least one bin");
  return {Kind::fixed, b};
}

EceBins EceBins::parse(std::string_view text) {
  if (text == "per_prediction") return per_prediction();
  if (text.starts_with("fixed:")) {
    text.remove_prefix(6);
    int b = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), b);
    if (ec == std::errc{} && p == text.data() + text.size()) return fixed(b);
  }
  throw UsageError("ECE binning must be per_prediction or fixed:B, got '" + std::string(text) + "'");
}

std::string EceBins::to_string() const {
  return kind == Kind::per_prediction ? "per_prediction" : "fixed:" + std::to_string(bins);
}

double ece(std::span<const EceSample> samples, EceBins bins) {
  if (samples.empty()) throw DataError("ece of an empty sample");
  const std::size_t n = samples.size();
  const std::size_t b = bins.kind == EceBins::Kind::per_prediction ? n : static_cast<std::size_t>(bins.bins);
  std::vector<double> gap(b, 0.0);  // sum of (outcome - confidence) per bin
  for (const auto& s : samples) {
    if (!(s.confidence >= 0.0 && s.confidence <= 1.0)) throw DataError("ece confidence outside [0,1]");
    auto k = static_cast<std::size_t>(std::floor(s.confidence * static_cast<double>(b)));
    k = std::min(k, b - 1);
    gap[k] += (s.correct ? 1.0 : 0.0) - s.confidence;
  }
  double total = 0.0;
  for (double g : gap) total += std::abs(g);
  return total / static_cast<double>(n);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw DataError("mean of an empty list");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double cv(std::span<const double> values) {
  const double mu = mean(values);
  if (!(mu > 0.0)) throw DataError("coefficient of variation needs a positive mean");
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(values.size())) / mu;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("correlation inputs differ in length");
  if (x.size() < 2) throw DataError("correlation needs at least two points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("correlation undefined for zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("correlation inputs differ in length");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

Interval binomial_interval(std::int64_t correct, std::int64_t count, double level) {
  if (count < 1) throw DataError("binomial interval needs count >= 1");
  if (correct < 0 || correct > count) throw DataError("binomial interval needs 0 <= correct <= count");
  if (!(level > 0.0 && level < 1.0)) throw UsageError("interval level must lie in (0,1)");
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - (1.0 - level) / 2.0);
  const double n = static_cast<double>(count);
  const double p = static_cast<double>(correct) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  Interval out{std::clamp(center - half, 0.0, 1.0), std::clamp(center + half, 0.0, 1.0)};
  out.lo = std::min(out.lo, p);
  out.hi = std::max(out.hi, p);
  return out;
}

}  // namespace epimark::stats
