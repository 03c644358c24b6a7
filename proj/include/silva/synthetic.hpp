#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "silva/cky.hpp"
#include "silva/core.hpp"
#include "silva/rng.hpp"

namespace silva {

// Random document with uniform sentiments in [-1, 1] and attentions
// normalized to a distribution; used by oracle-check, bench and tests.
inline Document synthesize_document(int n_edus, Rng& rng, std::string doc_id) {
  Document doc;
  doc.doc_id = std::move(doc_id);
  doc.gold_polarity = rng.uniform_range(-1.0, 1.0);
  doc.edus.reserve(static_cast<std::size_t>(n_edus));
  double sum = 0.0;
  for (int i = 1; i <= n_edus; ++i) {
    double weight = rng.uniform_open();
    sum += weight;
    doc.edus.push_back({i, "", rng.uniform_range(-1.0, 1.0), weight});
  }
  for (Edu& edu : doc.edus) edu.attention /= sum;
  return doc;
}

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw Error("loglog_slope: need at least two points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    const double lx = std::log(x);
    const double ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double count = static_cast<double>(points.size());
  return (count * sxy - sx * sy) / (count * sxx - sx * sx);
}

struct BenchRow {
  int n_edus = 0;
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
};

// Wall-clock timing of beam_generate over `reps` identical runs.
inline BenchRow time_beam_generate(const Document& doc,
                                   const GenerationConfig& cfg, int reps) {
  if (reps < 1) throw Error("time_beam_generate: reps must be >= 1");
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(reps));
  beam_generate(doc, cfg);  // warmup, untimed
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    ScoredTree result = beam_generate(doc, cfg);
    const auto stop = std::chrono::steady_clock::now();
    (void)result;
    samples.push_back(
        std::chrono::duration<double, std::milli>(stop - start).count());
  }
  BenchRow row;
  row.n_edus = doc.n_edus();
  for (double s : samples) row.mean_ms += s;
  row.mean_ms /= static_cast<double>(reps);
  if (reps > 1) {
    double ss = 0.0;
    for (double s : samples) ss += (s - row.mean_ms) * (s - row.mean_ms);
    row.stddev_ms = std::sqrt(ss / static_cast<double>(reps - 1));
  }
  return row;
}

}  // namespace silva
