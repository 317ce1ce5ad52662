#pragma once

// Reference implementations used only by tests. Each one is written from
// the definition, independently of the library code it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rank_reward/geometry.hpp"
#include "rank_reward/perception_metrics.hpp"

namespace oracle {

// IoU by counting unit pixels on an integer grid.
inline double raster_iou(const rank_reward::BBox& a, const rank_reward::BBox& b) {
  const int lo_x = static_cast<int>(std::min(a.x1, b.x1));
  const int hi_x = static_cast<int>(std::max(a.x2, b.x2));
  const int lo_y = static_cast<int>(std::min(a.y1, b.y1));
  const int hi_y = static_cast<int>(std::max(a.y2, b.y2));
  const auto inside = [](const rank_reward::BBox& r, int px, int py) {
    return px >= r.x1 && px + 1 <= r.x2 && py >= r.y1 && py + 1 <= r.y2;
  };
  long inter = 0;
  long uni = 0;
  for (int px = lo_x; px < hi_x; ++px) {
    for (int py = lo_y; py < hi_y; ++py) {
      const bool ia = inside(a, px, py);
      const bool ib = inside(b, px, py);
      inter += (ia && ib) ? 1 : 0;
      uni += (ia || ib) ? 1 : 0;
    }
  }
  if (uni == 0) return a == b ? 1.0 : 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Enumerates every permutation of the zero-padded square problem in
// lexicographic order and keeps the first one within 1e-9 of the optimum.
inline std::vector<rank_reward::metrics::MatchPair> brute_force_match(
    const std::vector<rank_reward::ObjectPrediction>& preds,
    const rank_reward::GroundTruth& gt) {
  const std::size_t np = preds.size();
  const std::size_t ng = gt.boxes.size();
  if (np == 0 || ng == 0) return {};
  const std::size_t n = std::max(np, ng);
  const auto weight = [&](std::size_t i, std::size_t j) {
    return (i < np && j < ng) ? raster_iou(preds[i].bbox, gt.boxes[j]) : 0.0;
  };
  std::vector<std::vector<double>> w(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w[i][j] = weight(i, j);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = -1.0;
  do {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) t += w[i][perm[i]];
    best = std::max(best, t);
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  do {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) t += w[i][perm[i]];
    if (t >= best - 1e-9) break;
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::vector<rank_reward::metrics::MatchPair> out;
  for (std::size_t i = 0; i < np; ++i)
    if (perm[i] < ng) out.push_back({i, perm[i]});
  return out;
}

inline double best_total_iou(const std::vector<rank_reward::ObjectPrediction>& preds,
                             const rank_reward::GroundTruth& gt) {
  double t = 0.0;
  for (const auto& [i, j] : brute_force_match(preds, gt)) t += raster_iou(preds[i].bbox, gt.boxes[j]);
  return t;
}

// Counts 5-grams with a std::map keyed on the joined tokens.
inline double duplicated_fraction(std::string_view text, std::size_t n) {
  std::vector<std::string> tok;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      if (!cur.empty()) tok.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) tok.push_back(cur);
  if (tok.size() < n) return 0.0;
  std::map<std::vector<std::string>, int> counts;
  for (std::size_t i = 0; i + n <= tok.size(); ++i) {
    counts[std::vector<std::string>(tok.begin() + i, tok.begin() + i + n)]++;
  }
  const double total = static_cast<double>(tok.size() - n + 1);
  return 1.0 - static_cast<double>(counts.size()) / total;
}

// Hand grammar: returns (think, answer, garbage, look spans) by directly
// scanning for the literal tags.
struct HandParse {
  std::optional<std::string> think;
  std::optional<std::string> answer;
  bool garbage = false;
  std::vector<std::string> looks;
};

inline HandParse hand_parse(const std::string& s) {
  HandParse r;
  std::vector<bool> used(s.size(), false);
  auto block = [&](const std::string& o, const std::string& c, std::size_t from,
                   std::size_t& b, std::size_t& e) -> std::optional<std::string> {
    const auto p = s.find(o, from);
    if (p == std::string::npos) return std::nullopt;
    const auto q = s.find(c, p + o.size());
    if (q == std::string::npos) return std::nullopt;
    std::string inner = s.substr(p + o.size(), q - p - o.size());
    if (inner.find(o) != std::string::npos) return std::nullopt;
    b = p;
    e = q + c.size();
    return inner;
  };
  std::size_t tb = 0, te = 0, ab = 0, ae = 0;
  r.think = block("<think>", "</think>", 0, tb, te);
  std::size_t from = 0;
  if (r.think) {
    const auto first_answer = s.find("<answer>");
    if (first_answer != std::string::npos && first_answer >= tb && first_answer < te) from = te;
  }
  r.answer = block("<answer>", "</answer>", from, ab, ae);
  if (r.answer && r.think && ab < te && tb < ae) r.answer.reset();
  if (r.think) std::fill(used.begin() + tb, used.begin() + te, true);
  if (r.answer) std::fill(used.begin() + ab, used.begin() + ae, true);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!used[i] && !std::isspace(static_cast<unsigned char>(s[i]))) r.garbage = true;
  if (r.think && r.answer && ab < tb) r.garbage = true;
  if (r.think) {
    const std::string& t = *r.think;
    std::size_t p = 0;
    while ((p = t.find("<look>", p)) != std::string::npos) {
      const auto q = t.find("</look>", p + 6);
      if (q == std::string::npos) break;
      const auto inner = t.substr(p + 6, q - p - 6);
      if (inner.find("<look>") == std::string::npos) r.looks.push_back(inner);
      p = q + 7;
    }
  }
  return r;
}

// q = #{s <= x} / M by direct counting.
inline double indicator_quantile(const std::vector<double>& history, double x) {
  std::size_t c = 0;
  for (double s : history) c += (s <= x) ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(history.size());
}

// Advantages by the textbook two-pass formula in long double.
inline std::vector<double> direct_advantages(const std::vector<double>& r, double floor_std) {
  long double mean = 0;
  for (double v : r) mean += v;
  mean /= static_cast<long double>(r.size());
  long double var = 0;
  for (double v : r) var += (v - mean) * (v - mean);
  var /= static_cast<long double>(r.size());
  const long double sd = std::sqrt(var);
  std::vector<double> a(r.size(), 0.0);
  if (sd < floor_std) return a;
  for (std::size_t i = 0; i < r.size(); ++i) a[i] = static_cast<double>((r[i] - mean) / sd);
  return a;
}

// Pearson chi-square statistic of observed counts against probabilities.
inline double chi_square(const std::vector<long>& counts, const std::vector<double>& probs) {
  long n = 0;
  for (long c : counts) n += c;
  double chi = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double e = probs[k] * static_cast<double>(n);
    if (e <= 0.0) continue;
    chi += (counts[k] - e) * (counts[k] - e) / e;
  }
  return chi;
}

}  // namespace oracle
