#include "corpusforge/io/manifest.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "corpusforge/util/error.hpp"

namespace corpusforge::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

void CorpusManifest::validate() const {
  std::uint64_t docs = 0;
  std::uint64_t tokens = 0;
  for (const auto& s : shards) {
    docs += s.docs;
    tokens += s.tokens;
  }
  if (docs != doc_count || tokens != token_count) {
    throw IoError("manifest counts disagree with shard list");
  }
}

std::vector<fs::path> Corpus::shard_paths() const {
  std::vector<fs::path> out;
  out.reserve(manifest.shards.size());
  for (const auto& s : manifest.shards) {
    fs::path p(s.path);
    out.push_back(p.is_absolute() ? p : base_dir / p);
  }
  return out;
}

std::string manifest_to_json(const CorpusManifest& m) {
  json j;
  j["doc_count"] = m.doc_count;
  j["token_count"] = m.token_count;
  j["shards"] = json::array();
  for (const auto& s : m.shards) {
    j["shards"].push_back({{"path", s.path}, {"docs", s.docs}, {"tokens", s.tokens}});
  }
  j["provenance"] = json::array();
  for (const auto& p : m.provenance) {
    j["provenance"].push_back({{"stage", p.stage}, {"config_hash", p.config_hash}});
  }
  return j.dump(2) + "\n";
}

CorpusManifest manifest_from_json(const std::string& text) {
  CorpusManifest m;
  try {
    const json j = json::parse(text);
    m.doc_count = j.at("doc_count").get<std::uint64_t>();
    m.token_count = j.at("token_count").get<std::uint64_t>();
    for (const auto& s : j.at("shards")) {
      m.shards.push_back({s.at("path").get<std::string>(), s.at("docs").get<std::uint64_t>(),
                          s.at("tokens").get<std::uint64_t>()});
    }
    if (j.contains("provenance")) {
      for (const auto& p : j.at("provenance")) {
        m.provenance.push_back(
            {p.at("stage").get<std::string>(), p.at("config_hash").get<std::string>()});
      }
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

void write_file_atomic(const fs::path& file, const std::string& contents) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << contents;
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  fs::rename(tmp, file);
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_manifest(const CorpusManifest& manifest, const fs::path& file) {
  write_file_atomic(file, manifest_to_json(manifest));
}

CorpusManifest load_manifest(const fs::path& file) { return manifest_from_json(read_file(file)); }

Corpus load_corpus(const fs::path& manifest_or_dir) {
  fs::path file = manifest_or_dir;
  if (fs::is_directory(file)) file /= kManifestFile;
  if (!fs::exists(file)) throw IoError("manifest not found: " + file.string());
  return Corpus{load_manifest(file), file.parent_path()};
}

}  // namespace corpusforge::io
