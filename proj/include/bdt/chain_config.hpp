#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "bdt/tree.hpp"

namespace bdt {

enum class MoveKind : std::size_t { birth = 0, death = 1, change_split = 2, change_rule = 3 };
inline constexpr std::size_t kMoveKinds = 4;

const char* to_string(MoveKind kind);

struct ChainConfig {
  std::size_t burn_in_steps = 200'000;
  std::size_t collect_count = 10'000;
  std::size_t thin = 7;
  std::size_t min_leaf = 3;
  std::size_t s_max = 0;  // 0: floor(n / min_leaf) - 1 for n training rows
  double dirichlet_alpha = 1.0;
  std::uint64_t seed = 1;
  std::array<double, kMoveKinds> move_probs{0.25, 0.25, 0.25, 0.25};

  void validate() const;
  std::size_t effective_s_max(std::size_t train_rows) const;
  TreePrior prior_for(std::size_t train_rows) const;

  // Burn-in 200,000, 10,000 trees, thinning 7, min_leaf 3.
  static ChainConfig paper_scale() { return {}; }
  // Burn-in 20,000, 1,000 trees; otherwise as paper_scale().
  static ChainConfig desk_scale() {
    ChainConfig c;
    c.burn_in_steps = 20'000;
    c.collect_count = 1'000;
    return c;
  }
};

struct MoveCounters {
  std::array<std::size_t, kMoveKinds> proposed{};
  std::array<std::size_t, kMoveKinds> accepted{};

  std::size_t total_proposed() const;
  std::size_t total_accepted() const;
  double rate(MoveKind kind) const;
  double overall_rate() const;

  friend bool operator==(const MoveCounters&, const MoveCounters&) = default;
};

}  // namespace bdt
