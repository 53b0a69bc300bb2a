#include <doctest.h>

#include <chrono>
#include <cmath>
#include <thread>

#include "fake_server.hpp"
#include "ragsc/providers.hpp"
#include "support.hpp"

using namespace ragsc;
using nlohmann::json;

namespace {

std::vector<float> unit_vector(std::size_t dim, std::size_t hot) {
  std::vector<float> v(dim, 0.0f);
  v[hot] = 1.0f;
  return v;
}

void serve_info(test::FakeServer& s, std::size_t dim = 4) {
  s.reply("/info", {{"embedding_dim", dim}, {"generator_id", "sdxl"}, {"caption_model_id", "blip"}});
}

RasterImage gradient(std::uint32_t w, std::uint32_t h) {
  RasterImage img(w, h, 3);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      for (std::uint32_t c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(x * 20 + y * 7 + c * 50);
    }
  }
  return img;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

}  // namespace

TEST_SUITE("providers") {
  TEST_CASE("histogram embedding") {
    const Embedding flat = histogram_embedding(RasterImage(4, 4, 1, 100));
    REQUIRE(flat.dim() == kMockEmbeddingDim);
    CHECK(flat.values[25] == doctest::Approx(1.0));
    CHECK(l2_norm(flat) == doctest::Approx(1.0));

    RasterImage two(2, 1, 1);
    two.at(0, 0) = 0;
    two.at(1, 0) = 255;
    const Embedding e = histogram_embedding(two);
    CHECK(e.values[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(e.values[63] == doctest::Approx(1.0 / std::sqrt(2.0)));
    // RGB goes through the grayscale conversion first.
    CHECK(histogram_embedding(RasterImage(3, 3, 3, 100)) == flat);
  }

  TEST_CASE("hashed text embedding") {
    CHECK(l2_norm(hashed_text_embedding("")) == 0.0);
    CHECK(hashed_text_embedding("!!").dim() == kMockEmbeddingDim);
    const Embedding a = hashed_text_embedding("a");
    CHECK(a.values[fnv1a("a") % 64] == doctest::Approx(1.0));
    CHECK(hashed_text_embedding("Stone, bridge!") == hashed_text_embedding("stone bridge"));
    CHECK(hashed_text_embedding("bridge stone") == hashed_text_embedding("stone bridge"));
    const Embedding twice = hashed_text_embedding("sky sky", 8);
    CHECK(twice.values[fnv1a("sky") % 8] == doctest::Approx(1.0));
    CHECK(test::code_of([] { hashed_text_embedding("x", 0); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("mock provider shares captions and images") {
    MockEmbeddingProvider mock;
    const RasterImage img = gradient(16, 16);
    const Embedding ie = mock.embed_image(img);
    mock.register_caption("a gradient", ie);
    CHECK(cosine(mock.embed_text("a gradient"), ie) == doctest::Approx(1.0));
    CHECK(mock.embed_text("something else") == hashed_text_embedding("something else"));
    CHECK(mock.dim() == kMockEmbeddingDim);
  }

  TEST_CASE("mock provider on the fixture images") {
    KnowledgeBase kb;
    MockEmbeddingProvider probe;
    std::vector<std::pair<std::string, RasterImage>> pairs;
    for (const char* name : {"astronaut_512", "camera_256", "coffee_256", "rocket_256"}) {
      const auto path = test::fixture(std::string("images/") + name + ".png");
      const Bytes cap = read_file(test::fixture(std::string("images/") + name + ".txt"));
      std::string caption(cap.begin(), cap.end());
      while (!caption.empty() && (caption.back() == '\n' || caption.back() == '\r')) caption.pop_back();
      KnowledgeEntry e{name, Modality::IMAGE, caption, path};
      e.image_embedding = probe.embed_image(read_image(path));
      kb.insert(e);
      pairs.emplace_back(caption, read_image(path));
    }
    MockEmbeddingProvider mock(kb);
    MockCaptioner captioner(kb);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const Embedding image = mock.embed_image(pairs[i].second);
      const double own = cosine(mock.embed_text(pairs[i].first), image);
      const double unrelated = cosine(mock.embed_text("an unrelated sentence about tax forms"), image);
      CHECK(own > unrelated);
      for (std::size_t j = 0; j < pairs.size(); ++j) {
        if (j != i) CHECK(own > cosine(mock.embed_text(pairs[j].first), image));
      }
      CHECK(captioner.caption(pairs[i].second) == pairs[i].first);
    }
    CHECK(MockCaptioner(KnowledgeBase{}).caption(pairs[0].second) == "a photograph");
    CHECK(MockCaptioner(kb, 1.01, "fallback").caption(pairs[0].second) == "fallback");
  }

  TEST_CASE("info is fetched once") {
    test::FakeServer s;
    serve_info(s, 4);
    ModelServerClient client(s.endpoint());
    CHECK(client.info().embedding_dim == 4);
    CHECK(client.info().generator_id == "sdxl");
    CHECK(client.info().caption_model_id == "blip");
    CHECK(client.dim() == 4);
    CHECK(s.calls("/info") == 1);

    test::FakeServer bad;
    bad.reply("/info", {{"embedding_dim", 0}, {"generator_id", "g"}, {"caption_model_id", "c"}});
    CHECK(test::code_of([&] { ModelServerClient(bad.endpoint()).info(); }) == ErrorCode::MalformedResponse);
    bad.reply("/info", {{"embedding_dim", 3}});
    CHECK(test::code_of([&] { ModelServerClient(bad.endpoint()).info(); }) == ErrorCode::MalformedResponse);
  }

  TEST_CASE("caption request carries the image") {
    test::FakeServer s;
    s.reply("/caption", {{"caption", "a colourful gradient"}});
    ModelServerClient client(s.endpoint());
    const RasterImage img = gradient(5, 3);
    CHECK(client.caption(img) == "a colourful gradient");
    const auto body = s.last_body("/caption");
    const Bytes png = base64_decode(body["image_png_b64"].get<std::string>());
    CHECK(decode_png(png) == img);

    const RasterImage gray(4, 4, 1, 9);
    client.caption(gray);
    CHECK(decode_png(base64_decode(s.last_body("/caption")["image_png_b64"].get<std::string>())) == to_rgb(gray));

    s.reply("/caption", {{"caption", ""}});
    CHECK(test::code_of([&] { client.caption(img); }) == ErrorCode::MalformedResponse);
    s.reply("/caption", {{"caption", 5}});
    CHECK(test::code_of([&] { client.caption(img); }) == ErrorCode::MalformedResponse);
  }

  TEST_CASE("embeddings are validated") {
    test::FakeServer s;
    serve_info(s, 4);
    s.reply("/embed_text", {{"embedding", unit_vector(4, 1)}});
    s.reply("/embed_image", {{"embedding", std::vector<float>{0.5f, 0.5f, 0.5f, 0.5f}}});
    ModelServerClient client(s.endpoint());

    const Embedding t = client.embed_text("stone bridge");
    CHECK(t.values == unit_vector(4, 1));
    CHECK(t.normalized);
    CHECK(s.last_body("/embed_text") == json{{"text", "stone bridge"}});
    CHECK(l2_norm(client.embed_image(gradient(3, 3))) == doctest::Approx(1.0));
    CHECK(s.last_body("/embed_image").contains("image_png_b64"));

    CHECK(test::code_of([&] { client.embed_text(""); }) == ErrorCode::InvalidArgument);
    CHECK(s.calls("/embed_text") == 1);

    s.reply("/embed_text", {{"embedding", unit_vector(5, 1)}});
    CHECK(test::code_of([&] { client.embed_text("x"); }) == ErrorCode::MalformedResponse);
    s.reply("/embed_text", {{"embedding", std::vector<float>{1, 1, 0, 0}}});
    CHECK(test::code_of([&] { client.embed_text("x"); }) == ErrorCode::MalformedResponse);
    s.reply("/embed_text", {{"embedding", std::vector<float>{1.0005f, 0, 0, 0}}});
    CHECK_NOTHROW(client.embed_text("x"));
    s.reply("/embed_text", {{"embedding", json::array({1, "x", 0, 0})}});
    CHECK(test::code_of([&] { client.embed_text("x"); }) == ErrorCode::MalformedResponse);
    s.reply("/embed_text", {{"vector", unit_vector(4, 0)}});
    CHECK(test::code_of([&] { client.embed_text("x"); }) == ErrorCode::MalformedResponse);
  }

  TEST_CASE("rewrite") {
    test::FakeServer s;
    s.reply("/rewrite", {{"prompt", "a calm lake"}});
    ModelServerClient client(s.endpoint());
    CHECK(client.rewrite("a lake Context: calm; ", {"calm"}, 64) == "a calm lake");
    CHECK(s.last_body("/rewrite") ==
          json{{"prompt", "a lake Context: calm; "}, {"documents", {"calm"}}, {"budget", 64}});
    CHECK(test::code_of([&] { client.rewrite("p", {}, 5); }) == ErrorCode::MalformedResponse);
    s.reply("/rewrite", {{"prompt", ""}});
    CHECK(test::code_of([&] { client.rewrite("p", {}, 64); }) == ErrorCode::MalformedResponse);
  }

  TEST_CASE("review") {
    test::FakeServer s;
    s.reply("/review", {{"keep", {"b"}}});
    ModelServerClient client(s.endpoint());
    const std::vector<ReviewCandidate> c{{"a", "first", 0.5}, {"b", "second", 0.25}};
    CHECK(client.review("query", c) == std::vector<std::string>{"b"});
    const auto body = s.last_body("/review");
    CHECK(body["query"] == "query");
    CHECK(body["documents"][1] == json{{"id", "b"}, {"text", "second"}, {"score", 0.25}});

    s.reply("/review", {{"error", "busy"}}, 503);
    CHECK(test::code_of([&] { client.review("q", c); }) == ErrorCode::ReviewerUnavailable);
    s.reply("/review", {{"keep", "b"}});
    CHECK(test::code_of([&] { client.review("q", c); }) == ErrorCode::ReviewerUnavailable);
  }

  TEST_CASE("transport errors map to error codes") {
    test::FakeServer s;
    ModelServerClient client(s.endpoint(std::chrono::milliseconds(300)));
    const RasterImage img = gradient(2, 2);

    s.reply("/caption", {{"error", "model crashed"}}, 500);
    try {
      client.caption(img);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ServiceUnavailable);
      CHECK(std::string(e.what()).find("model crashed") != std::string::npos);
    }
    s.reply("/caption", {{"error", "bad png"}}, 400);
    CHECK(test::code_of([&] { client.caption(img); }) == ErrorCode::MalformedResponse);
    s.on("/caption", [](const httplib::Request&, httplib::Response& res) { res.set_content("not json", "text/plain"); });
    CHECK(test::code_of([&] { client.caption(img); }) == ErrorCode::MalformedResponse);
    s.reply("/caption", json::array({1, 2}));
    CHECK(test::code_of([&] { client.caption(img); }) == ErrorCode::MalformedResponse);

    s.on("/caption", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(900));
      res.set_content(R"({"caption":"late"})", "application/json");
    });
    const auto start = std::chrono::steady_clock::now();
    CHECK(test::code_of([&] { client.caption(img); }) == ErrorCode::ServiceTimeout);
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::milliseconds(850));

    std::string closed_url;
    {
      test::FakeServer gone;
      closed_url = gone.url();
    }
    ModelServerClient offline(ServiceEndpoint{closed_url, std::chrono::milliseconds(500)});
    CHECK(test::code_of([&] { offline.caption(img); }) == ErrorCode::ServiceUnavailable);
    CHECK(test::code_of([&] { offline.info(); }) == ErrorCode::ServiceUnavailable);
  }
}
