#include "corpusforge/io/shards.hpp"

#include <cstdio>

#include <zlib.h>

#include "corpusforge/util/error.hpp"

namespace corpusforge::io {

namespace fs = std::filesystem;

namespace {

bool is_gzip_path(const fs::path& p) { return p.extension() == ".gz"; }

bool is_blank(const std::string& s) {
  for (char c : s) {
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

}  // namespace

std::optional<Document> VectorSource::next() {
  if (pos_ >= docs_.size()) return std::nullopt;
  return std::move(docs_[pos_++]);
}

LineReader::LineReader(const fs::path& path) : path_(path) {
  if (is_gzip_path(path)) {
    gz_ = gzopen(path.c_str(), "rb");
    if (gz_ == nullptr) throw IoError("cannot open " + path.string());
    gzbuffer(static_cast<gzFile>(gz_), 1 << 17);
  } else {
    plain_.open(path, std::ios::binary);
    if (!plain_) throw IoError("cannot open " + path.string());
  }
}

LineReader::~LineReader() {
  if (gz_ != nullptr) gzclose(static_cast<gzFile>(gz_));
}

bool LineReader::getline(std::string& line) {
  if (gz_ == nullptr) {
    if (!std::getline(plain_, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }
  line.clear();
  char buf[8192];
  auto* gz = static_cast<gzFile>(gz_);
  bool any = false;
  while (gzgets(gz, buf, sizeof(buf)) != nullptr) {
    any = true;
    line.append(buf);
    if (!line.empty() && line.back() == '\n') {
      line.pop_back();
      break;
    }
  }
  int err = 0;
  gzerror(gz, &err);
  if (err != Z_OK && err != Z_STREAM_END) throw IoError("corrupt gzip stream in " + path_.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return any;
}

ShardReader::ShardReader(std::vector<fs::path> paths) : paths_(std::move(paths)) {
  for (const auto& p : paths_) {
    if (!fs::exists(p)) throw IoError("shard not found: " + p.string());
  }
}

std::optional<Document> ShardReader::next() {
  for (;;) {
    if (!reader_) {
      if (current_ >= paths_.size()) return std::nullopt;
      reader_ = std::make_unique<LineReader>(paths_[current_]);
    }
    if (!reader_->getline(line_)) {
      reader_.reset();
      ++current_;
      continue;
    }
    if (is_blank(line_)) continue;
    ++stats_.records;
    if (auto doc = parse_record(line_)) return doc;
    ++stats_.malformed;
  }
}

std::vector<Document> read_all(DocumentSource& source) {
  std::vector<Document> out;
  while (auto doc = source.next()) out.push_back(std::move(*doc));
  return out;
}

ShardWriter::ShardWriter(fs::path dir, ShardWriterOptions options, const Tokenizer& tokenizer)
    : dir_(std::move(dir)), options_(std::move(options)), tokenizer_(tokenizer) {
  if (options_.max_per_shard < 1) throw ConfigError("max_per_shard must be >= 1");
  fs::create_directories(dir_);
}

ShardWriter::~ShardWriter() {
  if (finished_) return;
  if (gz_ != nullptr) gzclose(static_cast<gzFile>(gz_));
  if (plain_.is_open()) plain_.close();
  std::error_code ec;
  for (const auto& p : created_) fs::remove(p, ec);
}

void ShardWriter::open_next_shard() {
  char name[64];
  std::snprintf(name, sizeof(name), "%s-%05zu.jsonl%s", options_.prefix.c_str(),
                manifest_.shards.size(), options_.compress ? ".gz" : "");
  const fs::path path = dir_ / name;
  created_.push_back(path);
  if (options_.compress) {
    gz_ = gzopen(path.c_str(), "wb6");
    if (gz_ == nullptr) throw IoError("cannot create " + path.string());
  } else {
    plain_.open(path, std::ios::binary | std::ios::trunc);
    if (!plain_) throw IoError("cannot create " + path.string());
  }
  manifest_.shards.push_back({name, 0, 0});
  in_shard_ = 0;
  open_ = true;
}

void ShardWriter::close_shard() {
  if (!open_) return;
  if (gz_ != nullptr) {
    const int rc = gzclose(static_cast<gzFile>(gz_));
    gz_ = nullptr;
    if (rc != Z_OK) throw IoError("failed closing " + created_.back().string());
  } else {
    plain_.flush();
    const bool ok = static_cast<bool>(plain_);
    plain_.close();
    if (!ok) throw IoError("failed writing " + created_.back().string());
  }
  open_ = false;
}

void ShardWriter::write(Document doc) {
  if (finished_) throw Error("ShardWriter already finished");
  if (open_ && in_shard_ >= options_.max_per_shard) close_shard();
  if (!open_) open_next_shard();

  const std::uint64_t tokens = ensure_token_count(doc, tokenizer_);
  std::string line = to_record(doc);
  line.push_back('\n');
  if (gz_ != nullptr) {
    const int n = gzwrite(static_cast<gzFile>(gz_), line.data(), static_cast<unsigned>(line.size()));
    if (n != static_cast<int>(line.size())) throw IoError("gzip write failed");
  } else {
    plain_.write(line.data(), static_cast<std::streamsize>(line.size()));
    if (!plain_) throw IoError("write failed in " + created_.back().string());
  }
  ++in_shard_;
  auto& shard = manifest_.shards.back();
  ++shard.docs;
  shard.tokens += tokens;
  ++manifest_.doc_count;
  manifest_.token_count += tokens;
}

CorpusManifest ShardWriter::finish(std::vector<ProvenanceEntry> provenance) {
  close_shard();
  manifest_.provenance = std::move(provenance);
  const fs::path manifest_path = dir_ / kManifestFile;
  created_.push_back(manifest_path);
  save_manifest(manifest_, manifest_path);
  finished_ = true;
  return manifest_;
}

CorpusManifest write_shards(DocumentSource& source, const fs::path& dir,
                            const ShardWriterOptions& options, const Tokenizer& tokenizer,
                            std::vector<ProvenanceEntry> provenance) {
  ShardWriter writer(dir, options, tokenizer);
  while (auto doc = source.next()) writer.write(std::move(*doc));
  return writer.finish(std::move(provenance));
}

}  // namespace corpusforge::io
