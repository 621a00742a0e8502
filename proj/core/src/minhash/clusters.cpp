#include "corpusforge/minhash/clusters.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_map>

#include "corpusforge/util/error.hpp"

namespace corpusforge::minhash {

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
  std::iota(parent_.begin(), parent_.end(), 0u);
}

std::uint32_t UnionFind::find(std::uint32_t x) {
  std::uint32_t root = x;
  while (parent_[root] != root) root = parent_[root];
  while (parent_[x] != root) {
    const std::uint32_t next = parent_[x];
    parent_[x] = root;
    x = next;
  }
  return root;
}

bool UnionFind::unite(std::uint32_t a, std::uint32_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (size_[a] < size_[b]) std::swap(a, b);
  parent_[b] = a;
  size_[a] += size_[b];
  return true;
}

std::size_t DuplicateClusters::num_clusters() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < representative.size(); ++i) n += is_kept(i) ? 1 : 0;
  return n;
}

std::vector<std::vector<std::string>> DuplicateClusters::members() const {
  std::map<std::string, std::vector<std::string>> groups;
  for (std::size_t i = 0; i < ids.size(); ++i) groups[ids[representative[i]]].push_back(ids[i]);
  std::vector<std::vector<std::string>> out;
  out.reserve(groups.size());
  for (auto& [rep, group] : groups) {
    std::sort(group.begin(), group.end());
    out.push_back(std::move(group));
  }
  return out;
}

DuplicateClusters cluster(std::vector<std::string> ids, std::span<const IndexPair> pairs) {
  const auto n = ids.size();
  UnionFind uf(n);
  for (const auto& [a, b] : pairs) {
    if (a >= n || b >= n) throw Error("candidate pair references an unknown document index");
    uf.unite(a, b);
  }
  std::vector<std::uint32_t> best(n);
  std::iota(best.begin(), best.end(), 0u);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t root = uf.find(i);
    if (ids[i] < ids[best[root]]) best[root] = i;
  }
  DuplicateClusters out;
  out.representative.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) out.representative[i] = best[uf.find(i)];
  out.ids = std::move(ids);
  return out;
}

DuplicateClusters cluster_ids(std::vector<std::string> ids,
                              std::span<const std::pair<std::string, std::string>> pairs) {
  std::unordered_map<std::string, std::uint32_t> index;
  for (std::uint32_t i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);
  std::vector<IndexPair> idx;
  idx.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    auto ia = index.find(a);
    auto ib = index.find(b);
    if (ia == index.end() || ib == index.end()) throw Error("candidate pair references unknown id");
    idx.emplace_back(ia->second, ib->second);
  }
  return cluster(std::move(ids), idx);
}

}  // namespace corpusforge::minhash
