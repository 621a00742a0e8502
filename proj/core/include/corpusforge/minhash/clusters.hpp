#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace corpusforge::minhash {

/// Disjoint-set forest with path compression and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n);

  std::uint32_t find(std::uint32_t x);
  /// Returns true if a and b were in different sets.
  bool unite(std::uint32_t a, std::uint32_t b);
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> size_;
};

using IndexPair = std::pair<std::uint32_t, std::uint32_t>;

/// Connected components of the candidate-pair graph over a fixed id list.
/// representative[i] is the index of the lexicographically smallest id in
/// i's component, so the structure does not depend on pair order.
struct DuplicateClusters {
  std::vector<std::string> ids;
  std::vector<std::uint32_t> representative;

  std::size_t num_clusters() const;
  bool is_kept(std::size_t i) const { return representative[i] == i; }
  /// Members grouped by component, each group sorted by id, groups ordered
  /// by representative id.
  std::vector<std::vector<std::string>> members() const;
};

DuplicateClusters cluster(std::vector<std::string> ids, std::span<const IndexPair> pairs);

/// Id-pair convenience overload. Throws Error on an unknown id.
DuplicateClusters cluster_ids(std::vector<std::string> ids,
                              std::span<const std::pair<std::string, std::string>> pairs);

}  // namespace corpusforge::minhash
