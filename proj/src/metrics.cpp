#include "et/metrics.hpp"

#include "et/error.hpp"

namespace et {

double macro_f1(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                std::size_t class_count) {
  if (predictions.size() != labels.size()) throw Error("macro_f1: length mismatch");
  if (class_count == 0) return 0.0;
  std::vector<std::size_t> tp(class_count, 0), fp(class_count, 0), fn(class_count, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= class_count || predictions[i] >= class_count)
      throw Error("macro_f1: class index out of range");
    if (predictions[i] == labels[i]) {
      ++tp[labels[i]];
    } else {
      ++fp[predictions[i]];
      ++fn[labels[i]];
    }
  }
  double total = 0.0;
  for (std::size_t k = 0; k < class_count; ++k) {
    const std::size_t denom = 2 * tp[k] + fp[k] + fn[k];
    if (denom > 0) total += 2.0 * static_cast<double>(tp[k]) / static_cast<double>(denom);
  }
  return total / static_cast<double>(class_count);
}

Metrics compute_metrics(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                        std::size_t class_count, std::span<const Domain> branches,
                        std::span<const Domain> origins, std::span<const Membership> memberships) {
  const std::size_t n = labels.size();
  if (predictions.size() != n || branches.size() != n || origins.size() != n || memberships.size() != n)
    throw Error("compute_metrics: length mismatch");
  Metrics m;
  m.count = n;
  if (n == 0) return m;
  std::size_t correct = 0;
  std::size_t routed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    correct += predictions[i] == labels[i];
    routed += branches[i] == origins[i];
    ++m.confusion.counts[origins[i] == Domain::source ? 0 : 1][branches[i] == Domain::source ? 0 : 1];
    const auto& mem = memberships[i];
    if (mem.in_source && mem.in_target) {
      ++m.membership.both;
    } else if (mem.in_source) {
      ++m.membership.source_only;
    } else if (mem.in_target) {
      ++m.membership.target_only;
    } else {
      ++m.membership.neither;
    }
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  m.routing_accuracy = static_cast<double>(routed) / static_cast<double>(n);
  m.macro_f1 = macro_f1(predictions, labels, class_count);
  return m;
}

}  // namespace et
