#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "et/data.hpp"
#include "et/probe.hpp"

namespace et {

/// counts[origin][branch], index 0 = source, 1 = target.
struct RoutingConfusion {
  std::array<std::array<std::size_t, 2>, 2> counts{};

  bool operator==(const RoutingConfusion&) const = default;
};

struct MembershipCounts {
  std::size_t source_only = 0;
  std::size_t target_only = 0;
  std::size_t both = 0;
  std::size_t neither = 0;

  bool operator==(const MembershipCounts&) const = default;
};

struct Metrics {
  std::size_t count = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double routing_accuracy = 0.0;
  RoutingConfusion confusion;
  MembershipCounts membership;

  bool operator==(const Metrics&) const = default;
};

/// Unweighted mean of per-class F1 over class_count classes; a class with no
/// true and no predicted samples contributes 0.
double macro_f1(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                std::size_t class_count);

Metrics compute_metrics(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                        std::size_t class_count, std::span<const Domain> branches,
                        std::span<const Domain> origins, std::span<const Membership> memberships);

}  // namespace et
