#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "corpusforge/embedding/embedder.hpp"
#include "corpusforge/embedding/remote_embedder.hpp"
#include "corpusforge/embedding/stage.hpp"
#include "corpusforge/embedding/vector_store.hpp"
#include "corpusforge/io/tokenizer.hpp"
#include "corpusforge/util/error.hpp"
#include "synthetic.hpp"

using namespace corpusforge;
using namespace corpusforge::embedding;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

class TestServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit TestServer(Handler h) : handler_(std::move(h)) {
    server_.Get(".*", [this](const auto& req, auto& res) { handler_(req, res); });
    server_.Post(".*", [this](const auto& req, auto& res) { handler_(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~TestServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

// Plays back recorded exchanges in order and checks every request the
// client sends against the recording.
class Replay {
 public:
  explicit Replay(json exchanges) : exchanges_(std::move(exchanges)) {}

  void handle(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu_);
    if (next_ >= exchanges_.size()) {
      problems_.push_back("unexpected extra request " + req.method + " " + req.path);
      res.status = 418;
      return;
    }
    const auto& ex = exchanges_[next_++];
    const auto& want = ex.at("request");
    if (req.method != want.at("method").get<std::string>() || req.path != want.at("path").get<std::string>()) {
      problems_.push_back("expected " + want.at("method").get<std::string>() + " " +
                          want.at("path").get<std::string>() + ", got " + req.method + " " + req.path);
    }
    if (want.contains("body")) {
      json got;
      try {
        got = json::parse(req.body);
      } catch (const json::exception&) {
        problems_.push_back("request body is not JSON: " + req.body);
      }
      if (got != want.at("body")) problems_.push_back("body " + got.dump() + " != " + want.at("body").dump());
      if (req.get_header_value("Content-Type").find("application/json") == std::string::npos) {
        problems_.push_back("missing JSON content type");
      }
    }
    const auto& resp = ex.at("response");
    res.status = resp.at("status").get<int>();
    res.set_content(resp.at("body").dump(), "application/json");
  }

  std::size_t served() const { return next_; }
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  json exchanges_;
  std::size_t next_ = 0;
  std::mutex mu_;
  std::vector<std::string> problems_;
};

EmbedderSpec fast_spec(const std::string& endpoint, std::size_t dim = 0) {
  EmbedderSpec s;
  s.kind = EmbedderSpec::Kind::RemoteService;
  s.endpoint = endpoint;
  s.dim = dim;
  s.max_retries = 3;
  s.initial_backoff_ms = 1;
  s.timeout_seconds = 5;
  return s;
}

std::vector<fs::path> fixture_files() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(fs::path(CF_FIXTURE_DIR) / "protocol")) {
    if (e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

class ProtocolFixture : public ::testing::TestWithParam<fs::path> {};

TEST_P(ProtocolFixture, ClientMatchesRecording) {
  std::ifstream in(GetParam());
  const json fx = json::parse(in);
  Replay replay(fx.at("exchanges"));
  TestServer server([&](const auto& req, auto& res) { replay.handle(req, res); });
  RemoteEmbedder client(fast_spec(server.endpoint(), fx.value("configured_dim", std::size_t{0})));
  const auto& expect = fx.at("expect");

  auto run = [&]() -> json {
    if (fx.at("call") == "health") {
      const auto h = client.health();
      return {{"status", h.status}, {"dim", h.dim}, {"model", h.model}};
    }
    const auto texts = fx.at("texts").get<std::vector<std::string>>();
    const auto vectors = client.embed(texts);
    EXPECT_EQ(vectors.size(), texts.size());
    return {{"vectors", vectors}};
  };

  if (expect.contains("error")) {
    const std::string kind = expect.at("error");
    try {
      run();
      ADD_FAILURE() << "expected an error";
    } catch (const EmbedderUnavailable& e) {
      EXPECT_EQ(kind, "unavailable") << e.what();
    } catch (const StageError& e) {
      EXPECT_EQ(kind, "fatal") << e.what();
      EXPECT_NE(std::string(e.what()).find(expect.at("message").get<std::string>()), std::string::npos) << e.what();
    } catch (const Error& e) {
      EXPECT_EQ(kind, "dimension") << e.what();
      EXPECT_NE(std::string(e.what()).find(expect.at("message").get<std::string>()), std::string::npos) << e.what();
    }
  } else {
    const json got = run();
    if (expect.contains("vectors")) {
      const auto want = expect.at("vectors").get<std::vector<std::vector<double>>>();
      const auto have = got.at("vectors").get<std::vector<std::vector<double>>>();
      ASSERT_EQ(have.size(), want.size());
      for (std::size_t i = 0; i < want.size(); ++i) {
        ASSERT_EQ(have[i].size(), want[i].size());
        double norm = 0;
        for (std::size_t j = 0; j < want[i].size(); ++j) {
          EXPECT_NEAR(have[i][j], want[i][j], 1e-6);
          norm += have[i][j] * have[i][j];
        }
        EXPECT_NEAR(norm, 1.0, 1e-6);
      }
    } else {
      EXPECT_EQ(got, expect);
    }
  }
  for (const auto& p : replay.problems()) ADD_FAILURE() << p;
  EXPECT_EQ(replay.served(), fx.at("exchanges").size()) << "not every recorded exchange was replayed";
  EXPECT_EQ(client.requests_sent(), replay.served());
}

INSTANTIATE_TEST_SUITE_P(Recorded, ProtocolFixture, ::testing::ValuesIn(fixture_files()),
                         [](const auto& info) { return info.param.stem().string(); });

namespace {

// A live stand-in for the sidecar that serves the hashing embedder.
class HashingService {
 public:
  explicit HashingService(std::size_t dim, int fail_first = 0)
      : embedder_(dim, 5), fail_left_(fail_first), server_([this](const auto& req, auto& res) { handle(req, res); }) {}

  std::string endpoint() const { return server_.endpoint(); }
  std::size_t embed_calls() const { return embed_calls_; }
  std::size_t max_batch() const { return max_batch_; }
  int peak_concurrency() const { return peak_; }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    if (req.path == "/health") {
      res.set_content(json{{"status", "ok"}, {"dim", embedder_.dim()}, {"model", "hashing"}}.dump(), "application/json");
      return;
    }
    const int now = ++active_;
    int prev = peak_.load();
    while (now > prev && !peak_.compare_exchange_weak(prev, now)) {}
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    if (fail_left_.fetch_sub(1) > 0) {
      --active_;
      res.status = 503;
      return;
    }
    const auto texts = json::parse(req.body).at("texts").get<std::vector<std::string>>();
    ++embed_calls_;
    std::size_t seen = max_batch_;
    while (texts.size() > seen && !max_batch_.compare_exchange_weak(seen, texts.size())) {}
    json vectors = json::array();
    for (const auto& t : texts) vectors.push_back(embedder_.embed_one(t));
    res.set_content(json{{"vectors", vectors}, {"dim", embedder_.dim()}}.dump(), "application/json");
    --active_;
  }

  HashingEmbedder embedder_;
  std::atomic<int> fail_left_;
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
  std::atomic<std::size_t> embed_calls_{0};
  std::atomic<std::size_t> max_batch_{0};
  TestServer server_;
};

}  // namespace

TEST(RemoteEmbedder, BatchesPreserveOrderUnderConcurrency) {
  HashingService service(32);
  auto spec = fast_spec(service.endpoint(), 32);
  spec.batch_size = 3;
  spec.max_in_flight = 4;
  RemoteEmbedder client(spec);
  std::vector<std::string> texts;
  for (int i = 0; i < 40; ++i) texts.push_back("doc number " + std::to_string(i) + " about lathes");
  const auto got = client.embed(texts);
  HashingEmbedder local(32, 5);
  ASSERT_EQ(got.size(), texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto want = local.embed_one(texts[i]);
    for (std::size_t j = 0; j < 32; ++j) EXPECT_NEAR(got[i][j], want[j], 1e-6);
  }
  EXPECT_EQ(service.embed_calls(), 14u);
  EXPECT_LE(service.max_batch(), 3u);
  EXPECT_LE(service.peak_concurrency(), 4);
}

TEST(RemoteEmbedder, TransientFailuresAreRetried) {
  HashingService service(8, 2);
  RemoteEmbedder client(fast_spec(service.endpoint(), 8));
  const auto got = client.embed(std::vector<std::string>{"boring bar"});
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(client.requests_sent(), 1u + 3u);  // health + two 503s + success
}

TEST(RemoteEmbedder, UnreachableAfterRetriesIsUnavailable) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto spec = fast_spec("http://127.0.0.1:" + std::to_string(port), 8);
  spec.max_retries = 2;
  spec.timeout_seconds = 1;
  RemoteEmbedder client(spec);
  EXPECT_THROW(client.health(), EmbedderUnavailable);
  EXPECT_EQ(client.requests_sent(), 3u);
}

TEST(RemoteEmbedder, PersistentServerErrorExhaustsRetries) {
  TestServer server([](const auto& req, auto& res) {
    if (req.path == "/health") {
      res.set_content(R"({"status":"ok","dim":2,"model":"m"})", "application/json");
    } else {
      res.status = 500;
    }
  });
  RemoteEmbedder client(fast_spec(server.endpoint()));
  EXPECT_THROW(client.embed(std::vector<std::string>{"x"}), EmbedderUnavailable);
  EXPECT_EQ(client.requests_sent(), 1u + 4u);
}

TEST(RemoteEmbedder, EndpointWithBasePath) {
  std::vector<std::string> paths;
  std::mutex mu;
  TestServer server([&](const auto& req, auto& res) {
    std::lock_guard lock(mu);
    paths.push_back(req.path);
    if (req.path == "/v1/health") {
      res.set_content(R"({"status":"ok","dim":1,"model":"m"})", "application/json");
    } else {
      res.set_content(R"({"vectors":[[2.0]],"dim":1})", "application/json");
    }
  });
  RemoteEmbedder client(fast_spec(server.endpoint() + "/v1/"));
  EXPECT_EQ(client.embed(std::vector<std::string>{"x"})[0][0], 1.0f);
  EXPECT_EQ(paths, (std::vector<std::string>{"/v1/health", "/v1/embed"}));
  EXPECT_EQ(client.name(), "remote:m:1");
}

TEST(RemoteEmbedder, MissingEndpointRejected) {
  EmbedderSpec s;
  s.kind = EmbedderSpec::Kind::RemoteService;
  EXPECT_THROW(make_embedder(s), ConfigError);
}

TEST(RemoteEmbedder, InterchangeableWithLocalEmbedderInStage) {
  cftest::TempDir dir;
  Rng rng(3);
  std::vector<io::Document> docs;
  for (int i = 0; i < 60; ++i) {
    docs.push_back({"d" + std::to_string(i), cftest::join(cftest::random_words(rng, i % 3, 50, 5 + rng.uniform_index(40))), {}, std::nullopt});
  }
  auto corpus = cftest::write_corpus(docs, dir / "in", 25);
  io::WhitespaceTokenizer tok;
  EmbedStageOptions opt;
  opt.max_tokens = 16;
  opt.docs_per_batch = 7;

  HashingEmbedder local(16, 5);
  embed_corpus(corpus, local, tok, dir / "local", opt);
  HashingService service(16);
  RemoteEmbedder remote(fast_spec(service.endpoint(), 16));
  embed_corpus(corpus, remote, tok, dir / "remote", opt);

  const auto a = read_vectors(dir / "local" / kVectorsFile);
  const auto b = read_vectors(dir / "remote" / kVectorsFile);
  ASSERT_EQ(a.keys, b.keys);
  for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(a.data[i], b.data[i], 1e-6);
}
