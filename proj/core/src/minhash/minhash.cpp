#include "corpusforge/minhash/minhash.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "corpusforge/util/error.hpp"
#include "corpusforge/util/hash.hpp"
#include "corpusforge/util/rng.hpp"
#include "corpusforge/util/utf8.hpp"

namespace corpusforge::minhash {

namespace {

constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;

inline std::uint64_t mod61(std::uint64_t x) {
  std::uint64_t r = (x & kMersenne61) + (x >> 61);
  return r >= kMersenne61 ? r - kMersenne61 : r;
}

__extension__ using u128 = unsigned __int128;

inline std::uint64_t mul_add_mod61(std::uint64_t a, std::uint64_t x, std::uint64_t b) {
  const u128 prod = static_cast<u128>(a) * x + b;
  const std::uint64_t lo = static_cast<std::uint64_t>(prod) & kMersenne61;
  const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 61);
  std::uint64_t r = lo + hi;
  if (r >= kMersenne61) r -= kMersenne61;
  return r;
}

}  // namespace

void MinHashParams::validate() const {
  if (bands < 1 || rows_per_band < 1) throw ConfigError("MinHash bands and rows must be >= 1");
  if (shingle_size < 1) throw ConfigError("shingle size must be >= 1");
}

std::vector<std::uint64_t> shingle(std::string_view text, int n) {
  if (n < 1) throw ConfigError("shingle size must be >= 1");
  std::vector<std::string> words;
  for (const auto& span : utf8::split_whitespace(text)) {
    words.push_back(utf8::ascii_lower(text.substr(span.offset, span.length)));
  }
  const auto width = static_cast<std::size_t>(n);
  std::vector<std::uint64_t> out;
  if (words.size() < width) {
    std::string whole;
    for (const auto& w : words) {
      if (!whole.empty()) whole.push_back(' ');
      whole += w;
    }
    out.push_back(fnv1a64(whole));
    return out;
  }
  out.reserve(words.size() - width + 1);
  for (std::size_t i = 0; i + width <= words.size(); ++i) {
    std::uint64_t h = fnv1a64(words[i]);
    for (std::size_t k = 1; k < width; ++k) {
      h = fnv1a64_extend(h, " ");
      h = fnv1a64_extend(h, words[i + k]);
    }
    out.push_back(h);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

MinHasher::MinHasher(MinHashParams params) : params_(params) {
  params_.validate();
  Rng rng(params_.hash_seed);
  const std::size_t k = params_.num_hashes();
  a_.resize(k);
  b_.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    a_[i] = 1 + rng.uniform_index(kMersenne61 - 1);
    b_[i] = rng.uniform_index(kMersenne61);
  }
}

MinHashSignature MinHasher::sign(std::span<const std::uint64_t> shingles,
                                 std::string doc_id) const {
  if (shingles.empty()) throw Error("cannot sign an empty shingle set");
  MinHashSignature sig;
  sig.doc_id = std::move(doc_id);
  sig.bands = params_.bands;
  sig.rows_per_band = params_.rows_per_band;
  sig.hash_seed = params_.hash_seed;
  const std::size_t k = a_.size();
  sig.values.assign(k, std::numeric_limits<std::uint64_t>::max());
  for (std::uint64_t s : shingles) {
    const std::uint64_t x = mod61(s);
    for (std::size_t i = 0; i < k; ++i) {
      const std::uint64_t h = mul_add_mod61(a_[i], x, b_[i]);
      if (h < sig.values[i]) sig.values[i] = h;
    }
  }
  return sig;
}

MinHashSignature MinHasher::sign_text(std::string_view text, std::string doc_id) const {
  const auto shingles = shingle(text, params_.shingle_size);
  return sign(shingles, std::move(doc_id));
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
  if (a.bands != b.bands || a.rows_per_band != b.rows_per_band || a.hash_seed != b.hash_seed ||
      a.values.size() != b.values.size()) {
    throw Error("signatures built with different MinHash parameters");
  }
  if (a.values.empty()) return 0.0;
  std::size_t equal = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] == b.values[i]) ++equal;
  }
  return static_cast<double>(equal) / static_cast<double>(a.values.size());
}

std::vector<std::uint64_t> bucket_keys(const MinHashSignature& sig) {
  const auto rows = static_cast<std::size_t>(sig.rows_per_band);
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(sig.bands));
  for (std::size_t band = 0; band < keys.size(); ++band) {
    std::uint64_t h = kFnvOffset;
    for (std::size_t r = 0; r < rows; ++r) h = fnv1a64_extend_u64(h, sig.values[band * rows + r]);
    keys[band] = fnv1a64_extend_u64(h, band);
  }
  return keys;
}

double band_collision_probability(double s, int bands, int rows_per_band) {
  return 1.0 - std::pow(1.0 - std::pow(s, rows_per_band), bands);
}

}  // namespace corpusforge::minhash
