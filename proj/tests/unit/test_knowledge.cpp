#include <doctest.h>

#include <fstream>

#include "ragsc/knowledge.hpp"
#include "support.hpp"

using namespace ragsc;
namespace fs = std::filesystem;

namespace {

Embedding random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> n;
  std::vector<float> v(dim);
  for (auto& x : v) x = n(rng);
  return Embedding::unit(std::move(v));
}

KnowledgeEntry random_entry(std::mt19937_64& rng, std::size_t i) {
  KnowledgeEntry e;
  e.id = "entry-" + std::to_string(i);
  e.inserted_at = static_cast<std::int64_t>(1700000000000 + i);
  if (i % 3 == 0) {
    e.modality = Modality::IMAGE;
    e.image_path = fs::path("does/not/exist") / (std::to_string(i) + ".png");
    e.text = "caption " + std::to_string(i);
    e.image_embedding = random_unit(rng, 16);
  } else {
    e.modality = Modality::DOCUMENT;
    e.text = "document body " + std::to_string(rng() % 1000) + " \xc3\xa9t\xc3\xa9 \"quoted\"\n";
    if (i % 2 == 0) e.text_embedding = random_unit(rng, 8);
  }
  if (i % 5 == 0) e.tags = {"tag" + std::to_string(i % 7), "shared"};
  return e;
}

void overwrite(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

std::string slurp(const fs::path& p) {
  const Bytes b = read_file(p);
  return std::string(b.begin(), b.end());
}

}  // namespace

TEST_SUITE("knowledge") {
  TEST_CASE("insert, get, replace and dimension checks") {
    KnowledgeBase kb;
    KnowledgeEntry doc{"d1", Modality::DOCUMENT, std::string("a stone bridge")};
    doc.text_embedding = Embedding::unit({1, 0, 0});
    CHECK(kb.insert(doc) == "d1");
    REQUIRE(kb.get("d1"));
    CHECK(*kb.get("d1") == doc);
    CHECK(kb.text_dim() == 3);

    KnowledgeEntry wrong = doc;
    wrong.id = "d2";
    wrong.text_embedding = Embedding::unit({1, 0});
    CHECK(test::code_of([&] { kb.insert(wrong); }) == ErrorCode::DimensionMismatch);
    CHECK(kb.get("d2") == nullptr);

    doc.text = "replaced";
    kb.insert(doc);
    kb.insert(doc);
    CHECK(kb.size() == 1);
    CHECK(*kb.get("d1")->text == "replaced");

    CHECK(test::code_of([] { KnowledgeBase().insert({"x", Modality::DOCUMENT}); }) == ErrorCode::InvalidArgument);
    CHECK(test::code_of([] { KnowledgeBase().insert({"y", Modality::IMAGE, std::string("c")}); }) ==
          ErrorCode::InvalidArgument);
    KnowledgeEntry not_unit{"z", Modality::DOCUMENT, std::string("t")};
    not_unit.text_embedding = Embedding{{3, 4, 0}, true};
    CHECK(test::code_of([&] { KnowledgeBase().insert(not_unit); }) == ErrorCode::InvalidArgument);

    KnowledgeBase fixed(4, 0);
    CHECK(test::code_of([&] {
            KnowledgeEntry e{"q", Modality::DOCUMENT, std::string("t")};
            e.text_embedding = Embedding::unit({1, 0, 0});
            fixed.insert(e);
          }) == ErrorCode::DimensionMismatch);
    CHECK(kb.erase("d1"));
    CHECK_FALSE(kb.erase("d1"));
  }

  TEST_CASE("ten thousand inserts") {
    KnowledgeBase kb;
    for (int i = 0; i < 10000; ++i) kb.insert({"doc" + std::to_string(i), Modality::DOCUMENT, std::string("t")});
    CHECK(kb.size() == 10000);
  }

  TEST_CASE("content hash covers caption and raw edge bits") {
    EdgeMap e(4, 4);
    e.set(5, true);
    const ContentHash h = content_hash("a lake", e);
    Bytes expect{'a', ' ', 'l', 'a', 'k', 'e'};
    const Bytes raw = raw_encode(e);
    expect.insert(expect.end(), raw.begin(), raw.end());
    CHECK(h == sha256(expect));
    CHECK(to_hex(sha256(Bytes{})) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(content_hash_from_hex(to_hex(h)) == h);
    EdgeMap other = e;
    other.set(6, true);
    CHECK(content_hash("a lake", other) != h);
    CHECK(content_hash("a lake!", e) != h);
  }

  TEST_CASE("cache put and lookup") {
    KnowledgeBase kb;
    CacheRecord rec;
    rec.content_hash = sha256(Bytes{1, 2, 3});
    rec.frames = {Bytes{1, 2}, Bytes{3}};
    rec.reconstruction = RasterImage(2, 2, 3, 40);
    kb.cache_put(rec);
    const auto hit = kb.cache_lookup(rec.content_hash);
    REQUIRE(hit);
    CHECK(*hit == rec);
    CHECK_FALSE(kb.cache_lookup(sha256(Bytes{9})));
  }

  TEST_CASE("empty store round trip") {
    const auto dir = test::scratch_dir("kb_empty");
    KnowledgeBase().persist(dir);
    const KnowledgeBase back = KnowledgeBase::load(dir);
    CHECK(back.size() == 0);
    CHECK(back.cache_size() == 0);
    fs::remove_all(dir);
  }

  TEST_CASE("thousand entry round trip is lossless") {
    std::mt19937_64 rng(31);
    KnowledgeBase kb;
    for (std::size_t i = 0; i < 1000; ++i) kb.insert(random_entry(rng, i));
    for (int i = 0; i < 5; ++i) {
      CacheRecord rec;
      rec.content_hash = sha256(Bytes{static_cast<std::uint8_t>(i)});
      rec.frames = {test::random_bytes(rng, 30), test::random_bytes(rng, 7)};
      if (i % 2 == 0) rec.reconstruction = RasterImage(3, 2, 3, static_cast<std::uint8_t>(i * 20));
      MetricsReport m;
      m.ms_ssim = 0.1 * i + 1e-17;
      m.clip_similarity = 1.0 / 3.0;
      m.measured_ber = 1e-4;
      m.compression_ratio = 123.456789012345;
      if (i == 1) m.lpips = 0.4388;
      rec.metrics = m;
      kb.cache_put(rec);
    }
    const auto dir = test::scratch_dir("kb_round");
    kb.persist(dir);
    const KnowledgeBase back = KnowledgeBase::load(dir);
    REQUIRE(back.size() == kb.size());
    CHECK(back.text_dim() == kb.text_dim());
    CHECK(back.image_dim() == kb.image_dim());
    std::size_t mismatches = 0;
    for (const auto& [id, entry] : kb.entries()) {
      const KnowledgeEntry* other = back.get(id);
      if (!other || !(*other == entry)) ++mismatches;
    }
    CHECK(mismatches == 0);
    REQUIRE(back.cache_size() == kb.cache_size());
    for (const auto& [hash, rec] : kb.cache()) {
      const auto got = back.cache_lookup(hash);
      REQUIRE(got);
      CHECK(got->frames == rec.frames);
      CHECK(got->reconstruction == rec.reconstruction);
      CHECK(got->metrics == rec.metrics);
    }
    // A second persist of the loaded store is byte-identical.
    const auto dir2 = test::scratch_dir("kb_round2");
    back.persist(dir2);
    CHECK(slurp(dir / "manifest.jsonl") == slurp(dir2 / "manifest.jsonl"));
    CHECK(slurp(dir / "embeddings.f32") == slurp(dir2 / "embeddings.f32"));
    fs::remove_all(dir);
    fs::remove_all(dir2);
  }

  TEST_CASE("embedding file layout") {
    KnowledgeBase kb;
    KnowledgeEntry e{"a", Modality::DOCUMENT, std::string("x")};
    e.text_embedding = Embedding{{1.0f, -2.5f}, false};
    kb.insert(e);
    const auto dir = test::scratch_dir("kb_layout");
    kb.persist(dir);
    CHECK(read_file(dir / "embeddings.f32") == Bytes{0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x20, 0xc0});
    const std::string manifest = slurp(dir / "manifest.jsonl");
    const auto header = nlohmann::json::parse(manifest.substr(0, manifest.find('\n')));
    CHECK(header["entry_count"] == 1);
    CHECK(header["embedding_floats"] == 2);
    CHECK(header["text_dim"] == 2);
    const Bytes body_and_blob = [&] {
      const std::string body = manifest.substr(manifest.find('\n') + 1);
      Bytes b(body.begin(), body.end());
      const Bytes blob = read_file(dir / "embeddings.f32");
      b.insert(b.end(), blob.begin(), blob.end());
      return b;
    }();
    CHECK(header["checksum"] == to_hex(sha256(body_and_blob)));
    fs::remove_all(dir);
  }

  TEST_CASE("image files are copied into the store") {
    const auto src_dir = test::scratch_dir("kb_src");
    const RasterImage img(5, 4, 3, 77);
    write_image(img, src_dir / "pic.png");
    KnowledgeBase kb;
    kb.insert({"img/1", Modality::IMAGE, std::string("a picture"), src_dir / "pic.png"});
    const auto dir = test::scratch_dir("kb_images");
    kb.persist(dir);
    fs::remove_all(src_dir);
    const KnowledgeBase back = KnowledgeBase::load(dir);
    const KnowledgeEntry* e = back.get("img/1");
    REQUIRE(e);
    REQUIRE(e->image_path);
    CHECK(e->image_path->is_relative());
    CHECK(read_image(back.resolve(*e->image_path)) == img);
    fs::remove_all(dir);
  }

  TEST_CASE("damaged stores are rejected as corrupt") {
    std::mt19937_64 rng(41);
    KnowledgeBase kb;
    for (std::size_t i = 0; i < 20; ++i) kb.insert(random_entry(rng, i));
    const auto dir = test::scratch_dir("kb_corrupt");
    kb.persist(dir);
    const std::string manifest = slurp(dir / "manifest.jsonl");
    const std::string blob = slurp(dir / "embeddings.f32");

    SUBCASE("truncated manifest") { overwrite(dir / "manifest.jsonl", manifest.substr(0, manifest.size() / 2)); }
    SUBCASE("truncated embeddings") { overwrite(dir / "embeddings.f32", blob.substr(0, blob.size() - 4)); }
    SUBCASE("flipped embedding byte") {
      std::string b = blob;
      b[b.size() / 2] ^= 1;
      overwrite(dir / "embeddings.f32", b);
    }
    SUBCASE("edited entry") {
      std::string m = manifest;
      m[m.find("document body") + 2] = 'X';
      overwrite(dir / "manifest.jsonl", m);
    }
    SUBCASE("missing embeddings file") { fs::remove(dir / "embeddings.f32"); }
    SUBCASE("missing manifest") { fs::remove(dir / "manifest.jsonl"); }
    SUBCASE("garbage header") { overwrite(dir / "manifest.jsonl", "not json\n" + manifest.substr(manifest.find('\n') + 1)); }
    SUBCASE("empty manifest") { overwrite(dir / "manifest.jsonl", ""); }

    CHECK(test::code_of([&] { KnowledgeBase::load(dir); }) == ErrorCode::CorruptStore);
    fs::remove_all(dir);
  }
}
