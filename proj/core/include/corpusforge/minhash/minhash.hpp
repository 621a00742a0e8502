#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace corpusforge::minhash {

struct MinHashParams {
  int bands = 20;
  int rows_per_band = 20;
  int shingle_size = 5;
  std::uint64_t hash_seed = 0;

  std::size_t num_hashes() const {
    return static_cast<std::size_t>(bands) * static_cast<std::size_t>(rows_per_band);
  }
  void validate() const;
  friend bool operator==(const MinHashParams&, const MinHashParams&) = default;
};

/// Sorted, de-duplicated 64-bit hashes of the lowercased, whitespace-joined
/// word n-grams of text. Texts with fewer than n words give one shingle: the
/// hash of the whole normalized text.
std::vector<std::uint64_t> shingle(std::string_view text, int n);

struct MinHashSignature {
  std::string doc_id;
  std::vector<std::uint64_t> values;  // bands x rows, band-major
  int bands = 0;
  int rows_per_band = 0;
  std::uint64_t hash_seed = 0;

  friend bool operator==(const MinHashSignature&, const MinHashSignature&) = default;
};

/// The b x r hash family: h_i(x) = (a_i * (x mod p) + b_i) mod p with
/// p = 2^61 - 1 and (a_i, b_i) drawn from a generator seeded by hash_seed.
class MinHasher {
 public:
  explicit MinHasher(MinHashParams params);

  /// Throws Error on an empty shingle set.
  MinHashSignature sign(std::span<const std::uint64_t> shingles, std::string doc_id = {}) const;
  MinHashSignature sign_text(std::string_view text, std::string doc_id = {}) const;

  const MinHashParams& params() const { return params_; }

 private:
  MinHashParams params_;
  std::vector<std::uint64_t> a_;
  std::vector<std::uint64_t> b_;
};

/// Fraction of equal components. Throws Error if the signatures were built
/// with different parameters.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

/// One key per band: FNV-1a over the band's r values and the band index.
std::vector<std::uint64_t> bucket_keys(const MinHashSignature& sig);

/// Probability that a pair with Jaccard s shares at least one full band.
double band_collision_probability(double s, int bands, int rows_per_band);

}  // namespace corpusforge::minhash
