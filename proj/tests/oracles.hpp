// Brute-force reference implementations used only by the tests. They share
// no code with the library beyond plain data types.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

// Belief recursion written directly from the definitions: predict with the
// slot's matrix (from-state rows), weight by the emission column, normalize;
// a zero total resets to uniform.
struct FilterInstance {
  std::size_t n = 0;
  std::vector<int> slot_k;                  // slot of day of each slot
  std::map<int, Matrix> trans;              // k -> [from][to]
  Matrix emit;                              // [state][op]
  std::vector<std::vector<int>> slot_ops;   // ops per slot
  std::vector<double> initial;
};

inline std::vector<double> normalized(std::vector<double> v) {
  long double s = 0;
  for (double x : v) s += x;
  if (s <= 0) return std::vector<double>(v.size(), 1.0 / static_cast<double>(v.size()));
  for (double& x : v) x = static_cast<double>(x / s);
  return v;
}

// Every belief in order: at each slot entry, then after each op.
inline std::vector<std::vector<double>> filter(const FilterInstance& in) {
  std::vector<std::vector<double>> out;
  std::vector<double> alpha = in.initial;
  for (std::size_t s = 0; s < in.slot_k.size(); ++s) {
    if (s > 0) {
      const Matrix& a = in.trans.at(in.slot_k[s]);
      std::vector<double> next(in.n, 0.0);
      for (std::size_t to = 0; to < in.n; ++to)
        for (std::size_t from = 0; from < in.n; ++from) next[to] += a[from][to] * alpha[from];
      alpha = normalized(next);
    }
    out.push_back(alpha);
    for (int x : in.slot_ops[s]) {
      std::vector<double> next(in.n);
      for (std::size_t i = 0; i < in.n; ++i) next[i] = in.emit[i][static_cast<std::size_t>(x)] * alpha[i];
      alpha = normalized(next);
      out.push_back(alpha);
    }
  }
  return out;
}

// Cyclic distance between 0-based slot-of-day positions.
inline int slot_distance(int a, int b, int period = 1440) {
  const int d = std::abs(a - b) % period;
  return std::min(d, period - d);
}

struct LabeledStep {
  int k;           // 1..1440
  std::int64_t t;  // slot of data
  int state;
  bool usable = true;
};

// Transition rows for slot of day k (transitions into k), from scratch.
inline Matrix transitions_into(const std::vector<LabeledStep>& seq, std::size_t n, int k, int max_hw,
                               const std::vector<bool>& required, int* chosen_hw = nullptr) {
  const int center = (k - 2 + 1440) % 1440;
  auto in_window = [&](int f, int hw) { return 2 * hw + 1 >= 1440 || slot_distance(f, center) <= hw; };
  auto supported = [&](int hw) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!required[i]) continue;
      bool found = false;
      for (const auto& st : seq)
        if (st.usable && st.state == static_cast<int>(i) && in_window(st.k - 1, hw)) found = true;
      if (!found) return false;
    }
    return true;
  };
  int hw = max_hw;
  for (int h = 0; h <= max_hw; ++h)
    if (supported(h)) {
      hw = h;
      break;
    }
  if (chosen_hw) *chosen_hw = hw;
  Matrix a(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0;
    std::vector<double> pairs(n, 0.0);
    for (std::size_t s = 0; s < seq.size(); ++s) {
      const auto& cur = seq[s];
      if (!cur.usable || cur.state != static_cast<int>(i) || !in_window(cur.k - 1, hw)) continue;
      denom += 1;
      if (s + 1 < seq.size() && seq[s + 1].usable && seq[s + 1].t == cur.t + 1)
        pairs[static_cast<std::size_t>(seq[s + 1].state)] += 1;
    }
    double total = 0;
    for (double p : pairs) total += p;
    if (denom == 0 || total == 0) continue;
    for (std::size_t j = 0; j < n; ++j) a[i][j] = pairs[j] / total;
  }
  return a;
}

// All non-empty order-preserving subsets of positions [0, n).
inline std::vector<std::vector<int>> power_set(int n) {
  std::vector<std::vector<int>> out;
  for (int mask = 1; mask < (1 << n); ++mask) {
    std::vector<int> pick;
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) pick.push_back(i);
    out.push_back(pick);
  }
  return out;
}

// Frontier coordinates by definition: for each achieved misdetection x, the
// best detection at or below x, kept only if it beats everything strictly below x.
inline std::vector<std::pair<double, double>> frontier(const std::vector<std::pair<double, double>>& pts) {
  std::set<double> levels;
  for (const auto& p : pts) levels.insert(p.first);
  std::vector<std::pair<double, double>> out;
  for (double x : levels) {
    double best = -1, below = -1;
    for (const auto& p : pts) {
      if (p.first <= x) best = std::max(best, p.second);
      if (p.first < x) below = std::max(below, p.second);
    }
    if (best > below) out.push_back({x, best});
  }
  return out;
}

}  // namespace oracle
