#include "corpusforge/embedding/vector_store.hpp"

#include <nlohmann/json.hpp>

#include "corpusforge/util/binary.hpp"
#include "corpusforge/util/error.hpp"

namespace corpusforge::embedding {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr binary::Magic kVectorMagic = binary::make_magic("CFVECF32");
constexpr std::uint32_t kVersion = 1;
constexpr std::streamoff kHeaderBytes = 8 + 4 + 4 + 8;
constexpr std::streamoff kCountOffset = 8 + 4 + 4;

std::string key_line(const VectorKey& key) {
  json j{{"id", key.id}, {"doc", key.doc}};
  if (key.chunk) j["chunk"] = *key.chunk;
  return j.dump();
}

VectorKey parse_key(const std::string& line) {
  try {
    const auto j = json::parse(line);
    VectorKey k;
    k.id = j.at("id").get<std::string>();
    k.doc = j.value("doc", k.id);
    if (j.contains("chunk")) k.chunk = j.at("chunk").get<std::uint64_t>();
    return k;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed vector id index: ") + e.what());
  }
}

}  // namespace

void VectorSet::append(VectorKey key, std::span<const float> values) {
  if (keys.empty() && dim == 0) dim = values.size();
  if (values.size() != dim) throw Error("vector dimension mismatch in VectorSet");
  keys.push_back(std::move(key));
  data.insert(data.end(), values.begin(), values.end());
}

fs::path ids_path(const fs::path& vectors_file) {
  fs::path p = vectors_file;
  p += ".ids.jsonl";
  return p;
}

VectorWriter::VectorWriter(fs::path path, std::size_t dim, std::optional<std::uint64_t> resume_rows)
    : path_(std::move(path)), dim_(dim) {
  if (dim_ < 1) throw Error("vector dimension must be >= 1");
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  const auto row_bytes = static_cast<std::uintmax_t>(dim_ * sizeof(float));

  if (resume_rows && fs::exists(path_) && fs::exists(ids_path(path_))) {
    rows_ = *resume_rows;
    {
      std::ifstream in(path_, std::ios::binary);
      binary::read_header(in, kVectorMagic, "vector shard");
      const auto file_dim = binary::read_pod<std::uint32_t>(in);
      if (file_dim != dim_) throw Error("cannot resume: vector shard has a different dimension");
    }
    const auto want = static_cast<std::uintmax_t>(kHeaderBytes) + rows_ * row_bytes;
    if (fs::file_size(path_) < want) throw IoError("cannot resume: vector shard is truncated");
    fs::resize_file(path_, want);

    std::uintmax_t id_bytes = 0;
    {
      std::ifstream in(ids_path(path_), std::ios::binary);
      std::string line;
      for (std::uint64_t i = 0; i < rows_; ++i) {
        if (!std::getline(in, line)) throw IoError("cannot resume: id index is truncated");
        id_bytes += line.size() + 1;
      }
    }
    fs::resize_file(ids_path(path_), id_bytes);
    data_.open(path_, std::ios::binary | std::ios::in | std::ios::out);
    data_.seekp(0, std::ios::end);
    ids_.open(ids_path(path_), std::ios::binary | std::ios::app);
  } else {
    data_.open(path_, std::ios::binary | std::ios::in | std::ios::out | std::ios::trunc);
    binary::write_header(data_, kVectorMagic, kVersion);
    binary::write_pod<std::uint32_t>(data_, static_cast<std::uint32_t>(dim_));
    binary::write_pod<std::uint64_t>(data_, 0);
    ids_.open(ids_path(path_), std::ios::binary | std::ios::trunc);
  }
  if (!data_ || !ids_) throw IoError("cannot open vector shard " + path_.string());
}

VectorWriter::~VectorWriter() = default;

void VectorWriter::append(const VectorKey& key, std::span<const float> values) {
  if (values.size() != dim_) throw Error("vector dimension mismatch while writing");
  binary::write_array<float>(data_, values);
  ids_ << key_line(key) << '\n';
  ++rows_;
}

void VectorWriter::commit() {
  data_.flush();
  const auto end = data_.tellp();
  data_.seekp(kCountOffset);
  binary::write_pod<std::uint64_t>(data_, rows_);
  data_.seekp(end);
  data_.flush();
  ids_.flush();
  if (!data_ || !ids_) throw IoError("failed writing vector shard " + path_.string());
}

VectorSet read_vectors(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vector shard " + path.string());
  if (binary::read_header(in, kVectorMagic, "vector shard") != kVersion) {
    throw IoError("unsupported vector shard version");
  }
  VectorSet set;
  set.dim = binary::read_pod<std::uint32_t>(in);
  const auto count = binary::read_pod<std::uint64_t>(in);
  set.data.resize(count * set.dim);
  binary::read_array<float>(in, set.data);

  std::ifstream ids(ids_path(path), std::ios::binary);
  if (!ids) throw IoError("missing id index for " + path.string());
  std::string line;
  set.keys.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    if (!std::getline(ids, line)) throw IoError("id index shorter than vector shard");
    set.keys.push_back(parse_key(line));
  }
  return set;
}

void write_vectors(const VectorSet& set, const fs::path& path) {
  VectorWriter writer(path, set.dim);
  for (std::size_t i = 0; i < set.size(); ++i) writer.append(set.keys[i], set.row(i));
  writer.commit();
}

}  // namespace corpusforge::embedding
