#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "occ/model.hpp"

namespace occ {

/// All lattice points of the simplex with denominator resolution - 1.
/// Points are ordered lexicographically by decreasing count of state 0, so
/// for two states index i is the composition (1 - i/N, i/N).
class SimplexGrid {
 public:
  SimplexGrid() = default;
  SimplexGrid(std::size_t num_states, std::size_t resolution) : num_states_(num_states), resolution_(resolution) {
    if (num_states == 0) throw InputError("grid needs at least one state");
    if (resolution < 2) throw InputError("grid resolution must be >= 2");
    if (num_states == 1) {
      add({0});
      return;
    }
    std::vector<int> counts(num_states, 0);
    enumerate(counts, 0, static_cast<int>(denominator()));
  }

  std::size_t num_states() const { return num_states_; }
  std::size_t resolution() const { return resolution_; }
  std::size_t denominator() const { return resolution_ - 1; }
  std::size_t size() const { return points_.size(); }
  const Composition& point(std::size_t i) const { return points_.at(i); }
  const std::vector<Composition>& points() const { return points_; }
  const std::vector<int>& counts(std::size_t i) const { return counts_.at(i); }

  std::optional<std::size_t> index_of_counts(const std::vector<int>& c) const {
    auto it = index_.find(c);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> find(const Composition& f, double tol = 1e-9) const {
    if (f.size() != num_states_) return std::nullopt;
    if (num_states_ == 1) return 0;
    std::vector<int> c(num_states_);
    const double n = static_cast<double>(denominator());
    for (std::size_t s = 0; s < num_states_; ++s) {
      const double scaled = f[s] * n;
      c[s] = static_cast<int>(std::llround(scaled));
      if (std::abs(scaled - c[s]) > tol * n) return std::nullopt;
    }
    return index_of_counts(c);
  }

  std::size_t vertex(std::size_t s) const {
    if (num_states_ == 1) return 0;
    std::vector<int> c(num_states_, 0);
    c.at(s) = static_cast<int>(denominator());
    return *index_of_counts(c);
  }

  /// Neighbors of point i one lattice step along e_plus - e_minus, in both senses.
  std::optional<std::pair<std::size_t, std::size_t>> line_neighbors(std::size_t i, std::size_t plus,
                                                                    std::size_t minus) const {
    auto c = counts_.at(i);
    if (c[plus] < 1 || c[minus] < 1) return std::nullopt;
    auto fwd = c, back = c;
    ++fwd[plus];
    --fwd[minus];
    --back[plus];
    ++back[minus];
    return std::make_pair(*index_of_counts(fwd), *index_of_counts(back));
  }

 private:
  void enumerate(std::vector<int>& c, std::size_t pos, int remaining) {
    if (pos + 1 == c.size()) {
      c[pos] = remaining;
      add(c);
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      c[pos] = k;
      enumerate(c, pos + 1, remaining - k);
    }
  }

  void add(const std::vector<int>& c) {
    std::vector<double> w(num_states_);
    if (num_states_ == 1) {
      w[0] = 1.0;
    } else {
      const double n = static_cast<double>(denominator());
      for (std::size_t s = 0; s < num_states_; ++s) w[s] = c[s] / n;
    }
    index_.emplace(c, points_.size());
    counts_.push_back(c);
    points_.emplace_back(std::move(w), 1e-12);
  }

  std::size_t num_states_ = 0;
  std::size_t resolution_ = 0;
  std::vector<Composition> points_;
  std::vector<std::vector<int>> counts_;
  std::map<std::vector<int>, std::size_t> index_;
};

}  // namespace occ
