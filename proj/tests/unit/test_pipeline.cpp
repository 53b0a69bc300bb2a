#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "ragsc/pipeline.hpp"
#include "support.hpp"

using namespace ragsc;
namespace fs = std::filesystem;

namespace {

const char* const kImages[] = {"astronaut_512", "camera_256", "coffee_256", "rocket_256"};

fs::path image_fixture(const std::string& name) { return test::fixture("images/" + name + ".png"); }

// IMAGE entries for the fixture images plus a few documents, with mock embeddings.
KnowledgeBase fixture_kb(bool include_images = true) {
  KnowledgeBase kb;
  if (include_images) {
    for (const char* n : kImages) kb.insert({n, Modality::IMAGE, *sidecar_caption(image_fixture(n)), image_fixture(n)});
  }
  kb.insert({"doc-astronaut", Modality::DOCUMENT, std::string("an astronaut in a white space suit beside a flag")});
  kb.insert({"doc-coffee", Modality::DOCUMENT, std::string("a cup of coffee with latte art on a saucer")});
  kb.insert({"doc-camera", Modality::DOCUMENT, std::string("a photographer holding a camera on a tripod")});
  MockEmbeddingProvider embedder;
  ensure_embeddings(kb, embedder);
  return kb;
}

class CountingGenerator final : public Generator {
 public:
  int calls = 0;
  ReconstructionResult generate(const GenerationRequest& r) override {
    ++calls;
    return StubGenerator().generate(r);
  }
};

class FailingGenerator final : public Generator {
 public:
  ErrorCode code = ErrorCode::ServiceUnavailable;
  ReconstructionResult generate(const GenerationRequest&) override { fail(code, "generator down"); }
};

struct Rig {
  KnowledgeBase kb;
  MockCaptioner captioner;
  MockEmbeddingProvider embedder;
  CountingGenerator generator;

  explicit Rig(bool include_images = true) : kb(fixture_kb(include_images)), captioner(kb), embedder(kb) {}

  Providers providers() { return Providers{&captioner, &embedder, &generator}; }
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.inputs = {image_fixture("camera_256"), image_fixture("coffee_256")};
  cfg.ber_sweep = {0.0, 1e-2};
  cfg.seeds = {1, 2};
  return cfg;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("config parsing") {
    const std::string text =
        "# sweep\n"
        "inputs = a.png, /abs/b.png\n"
        "ber_sweep = 0, 1e-4 ,0.01\n"
        "seeds = 1,2,3  # three\n"
        "rag_text = false\n"
        "rag_image = yes\n"
        "ablation = true\n"
        "protect_text = off\n"
        "fec = repetition3\n"
        "k = 3\n"
        "epsilon = 0.25\n"
        "rounds_max = 4\n"
        "k1 = 1.5\n"
        "b = 0.5\n"
        "min_score = 0.05\n"
        "duplicate_threshold = 0.9\n"
        "scorer = tfidf\n"
        "char_budget = 300\n"
        "max_reference_images = 2\n"
        "canny_low = 50\n"
        "canny_high = 150\n"
        "canny_sigma = 2\n"
        "backend = service\n"
        "fallback_to_stub = true\n"
        "providers = service\n"
        "service_url = http://127.0.0.1:9000\n"
        "service_timeout_ms = 2500\n"
        "use_reviewer = true\n"
        "use_rewriter = 1\n"
        "kb_path = kb\n"
        "output_csv = out/results.csv\n"
        "use_cache = true\n"
        "steps = 20\n"
        "threads = 4\n";
    const ExperimentConfig cfg = parse_config(text, "/base");
    CHECK(cfg.inputs == std::vector<fs::path>{"/base/a.png", "/abs/b.png"});
    CHECK(cfg.ber_sweep == std::vector<double>{0.0, 1e-4, 0.01});
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK_FALSE(cfg.rag_text);
    CHECK(cfg.rag_image);
    CHECK(cfg.ablation);
    CHECK_FALSE(cfg.channel.protect_text);
    CHECK(cfg.channel.fec == Fec::REPETITION3);
    CHECK(cfg.retriever.k == 3);
    CHECK(cfg.retriever.epsilon == 0.25);
    CHECK(cfg.retriever.rounds_max == 4);
    CHECK(cfg.retriever.k1 == 1.5);
    CHECK(cfg.retriever.b == 0.5);
    CHECK(cfg.retriever.min_score == 0.05);
    CHECK(cfg.retriever.duplicate_threshold == 0.9);
    CHECK(cfg.retriever.scorer == SparseScorer::TFIDF);
    CHECK(cfg.char_budget == 300);
    CHECK(cfg.max_reference_images == 2);
    CHECK(cfg.canny.low == 50);
    CHECK(cfg.canny.high == 150);
    CHECK(cfg.canny.sigma == 2);
    CHECK(cfg.backend == GeneratorBackend::SERVICE);
    CHECK(cfg.fallback_to_stub);
    CHECK(cfg.providers == ProviderKind::SERVICE);
    REQUIRE(cfg.service);
    CHECK(cfg.service->base_url == "http://127.0.0.1:9000");
    CHECK(cfg.service->timeout == std::chrono::milliseconds(2500));
    CHECK(cfg.use_reviewer);
    CHECK(cfg.use_rewriter);
    CHECK(cfg.kb_path == fs::path("/base/kb"));
    CHECK(cfg.output_csv == fs::path("/base/out/results.csv"));
    CHECK(cfg.use_cache);
    CHECK(cfg.steps == 20);
    CHECK(cfg.threads == 4);
    CHECK_NOTHROW(cfg.validate());

    const ExperimentConfig defaults = parse_config("");
    CHECK(defaults.ber_sweep == std::vector<double>{0.0});
    CHECK(defaults.seeds == std::vector<std::uint64_t>{0});
    CHECK(defaults.backend == GeneratorBackend::STUB);
    CHECK(defaults.channel.protect_text);
    CHECK(defaults.char_budget == 512);

    CHECK(test::code_of([] { parse_config("colour = red"); }) == ErrorCode::InvalidArgument);
    CHECK(test::code_of([] { parse_config("k 3"); }) == ErrorCode::InvalidArgument);
    CHECK(test::code_of([] { parse_config("k = three"); }) == ErrorCode::InvalidArgument);
    CHECK(test::code_of([] { parse_config("epsilon = 0.1x"); }) == ErrorCode::InvalidArgument);
    CHECK(test::code_of([] { parse_config("rag_text = maybe"); }) == ErrorCode::InvalidArgument);
    CHECK(test::code_of([] { parse_config("scorer = dense"); }) == ErrorCode::InvalidArgument);
    CHECK(test::code_of([] { parse_config("fec = hamming"); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("config validation") {
    ExperimentConfig cfg = small_config();
    CHECK_NOTHROW(cfg.validate());
    auto rejects = [](auto mutate) {
      ExperimentConfig c = small_config();
      mutate(c);
      return test::code_of([&] { c.validate(); }) == ErrorCode::InvalidArgument;
    };
    CHECK(rejects([](ExperimentConfig& c) { c.inputs.clear(); }));
    CHECK(rejects([](ExperimentConfig& c) { c.seeds.clear(); }));
    CHECK(rejects([](ExperimentConfig& c) { c.ber_sweep.clear(); }));
    CHECK(rejects([](ExperimentConfig& c) { c.ber_sweep = {0.6}; }));
    CHECK(rejects([](ExperimentConfig& c) { c.ber_sweep = {-0.1}; }));
    CHECK(rejects([](ExperimentConfig& c) { c.retriever.k = 0; }));
    CHECK(rejects([](ExperimentConfig& c) { c.retriever.b = 1.5; }));
    CHECK(rejects([](ExperimentConfig& c) { c.threads = 0; }));
    CHECK(rejects([](ExperimentConfig& c) { c.backend = GeneratorBackend::SERVICE; }));
    CHECK(rejects([](ExperimentConfig& c) { c.use_reviewer = true; }));
  }

  TEST_CASE("load_config resolves paths against the file") {
    const auto dir = test::scratch_dir("cfg");
    {
      std::ofstream out(dir / "exp.cfg");
      out << "inputs = img.png\nkb_path = store\n";
    }
    const ExperimentConfig cfg = load_config(dir / "exp.cfg");
    CHECK(cfg.inputs == std::vector<fs::path>{dir / "img.png"});
    CHECK(cfg.kb_path == dir / "store");
    CHECK(test::code_of([&] { load_config(dir / "missing.cfg"); }) == ErrorCode::Io);
    fs::remove_all(dir);
  }

  TEST_CASE("transmit produces a text and an edge frame") {
    Rig rig;
    const Pipeline p(rig.kb, rig.providers());
    const RasterImage img = read_image(image_fixture("camera_256"));
    const TransmissionRecord rec = p.transmit(img);
    CHECK(rec.caption == *sidecar_caption(image_fixture("camera_256")));
    REQUIRE(rec.frames.size() == 2);
    const DecodedFrame text = frame_decode(rec.frames[0]);
    const DecodedFrame edge = frame_decode(rec.frames[1]);
    CHECK(text.frame.kind() == FrameKind::TEXT);
    CHECK(edge.frame.kind() == FrameKind::EDGE);
    CHECK(rec.text_payload_bytes == text.frame.payload.size());
    CHECK(rec.edge_payload_bytes == edge.frame.payload.size());
    CHECK(rec.frames[0].size() == frame_header_size(FrameKind::TEXT) + rec.text_payload_bytes);
    CHECK(rec.frames[1].size() == frame_header_size(FrameKind::EDGE) + rec.edge_payload_bytes);
    CHECK(rec.frame_bytes() == rec.frames[0].size() + rec.frames[1].size());
    CHECK(rec.source_bytes == img.byte_size());
    CHECK(rec.edges == canny(to_grayscale(img)));
    CHECK(rec.scheme == select_encoding(rec.edges).scheme);
    CHECK(rec.content_hash == content_hash(rec.caption, rec.edges));
    CHECK_FALSE(rec.cache_hit);

    const TransmissionRecord given = p.transmit(img, std::string("custom caption"));
    CHECK(given.caption == "custom caption");
  }

  TEST_CASE("compression ratio on a 512x512 photo") {
    Rig rig;
    const Pipeline p(rig.kb, rig.providers());
    const RasterImage img = read_image(image_fixture("astronaut_512"));
    const TransmissionRecord rec = p.transmit(img);
    const auto out = p.run(img, rec, ChannelConfig{}, {});
    REQUIRE(out.metrics);
    CHECK(out.metrics->compression_ratio > 20.0);
    CHECK(out.metrics->compression_ratio ==
          doctest::Approx(static_cast<double>(img.byte_size()) / static_cast<double>(rec.frame_bytes())));
  }

  TEST_CASE("clean channel with the source in the store reconstructs exactly") {
    Rig rig;
    const Pipeline p(rig.kb, rig.providers());
    for (const char* n : kImages) {
      const RasterImage img = read_image(image_fixture(n));
      const auto rec = p.transmit(img);
      const auto out = p.run(img, rec, ChannelConfig{}, {.rag_text = true, .rag_image = true});
      REQUIRE(out.metrics);
      CHECK(out.metrics->ms_ssim == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(std::abs(out.metrics->clip_similarity - 1.0) <= 1e-6);
      CHECK(out.metrics->measured_ber == 0.0);
      CHECK_FALSE(out.degraded);
      CHECK(out.text_integrity);
      CHECK(out.edge_integrity);
      CHECK(out.prompt.reference_image_ids == std::vector<std::string>{n});
      CHECK(out.reconstruction.generator_id == "stub");
    }
  }

  TEST_CASE("without retrieval the prompt is the received caption") {
    Rig rig;
    const Pipeline p(rig.kb, rig.providers());
    const RasterImage img = read_image(image_fixture("coffee_256"));
    const auto rec = p.transmit(img);
    const auto out = p.run(img, rec, ChannelConfig{}, {.rag_text = false, .rag_image = false});
    CHECK(out.prompt.text_prompt == rec.caption);
    CHECK(out.prompt.reference_image_ids.empty());
    CHECK(out.text_retrieval.documents.empty());
    // The stub then renders the received edge map.
    CHECK(out.reconstruction.image == render_edges(rec.edges, img.width(), img.height()));

    const auto text_only = p.run(img, rec, ChannelConfig{}, {.rag_text = true, .rag_image = false});
    CHECK(text_only.prompt.text_prompt.starts_with(rec.caption + " Context: "));
    CHECK(text_only.prompt.text_prompt.find("coffee with latte art") != std::string::npos);
  }

  TEST_CASE("heavy corruption of a 512x512 edge map is flagged") {
    Rig rig;
    const Pipeline p(rig.kb, rig.providers());
    const RasterImage img = read_image(image_fixture("astronaut_512"));
    const auto rec = p.transmit(img);
    // P(edge payload untouched) = (1 - p)^bits.
    const double bits = 8.0 * static_cast<double>(rec.edge_payload_bytes);
    const double p_clean = std::pow(1.0 - 0.1, bits);
    CHECK(1.0 - p_clean >= 0.99);
    int degraded = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      ChannelConfig ch{.ber = 0.1, .seed = seed};
      const auto out = p.run(img, rec, ch, {.rag_text = false, .rag_image = false, .seed = seed});
      degraded += out.degraded ? 1 : 0;
      CHECK(out.text_integrity);
      CHECK_FALSE(out.edge_integrity);
      CHECK(out.edges.width() == 512);
      CHECK(out.edges.height() == 512);
      if (out.edge_decode_failed) CHECK(out.edges.count() == 0);
      CHECK(out.metrics->measured_ber == doctest::Approx(0.1).epsilon(0.1));
    }
    CHECK(degraded >= 50 * 0.99);
  }

  TEST_CASE("exposed text under heavy corruption") {
    Rig rig;
    const Pipeline p(rig.kb, rig.providers());
    const RasterImage img = read_image(image_fixture("camera_256"));
    const auto rec = p.transmit(img);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const ChannelConfig ch{.ber = 0.1, .seed = seed, .protect_text = false};
      try {
        const auto out = p.run(img, rec, ch, {});
        CHECK_FALSE(out.text_integrity);
        CHECK(out.degraded);
      } catch (const Error& e) {
        CHECK(e.code() != ErrorCode::InvalidArgument);
      }
    }
  }

  TEST_CASE("cache short-circuits repeat transmissions") {
    Rig rig;
    PipelineOptions opts;
    opts.use_cache = true;
    const Pipeline p(rig.kb, rig.providers(), opts);
    const RasterImage img = read_image(image_fixture("rocket_256"));
    const auto first_rec = p.transmit(img);
    CHECK_FALSE(first_rec.cache_hit);
    const auto first = p.run(img, first_rec, ChannelConfig{}, {});
    CHECK(rig.generator.calls == 1);
    CHECK(rig.kb.cache_size() == 1);

    const auto again = p.transmit(img);
    CHECK(again.cache_hit);
    CHECK(again.frames == first_rec.frames);
    REQUIRE(again.cached_reconstruction);
    CHECK(*again.cached_reconstruction == first.reconstruction.image);

    const auto second = p.run(img, again, ChannelConfig{}, {});
    CHECK(rig.generator.calls == 1);
    CHECK(second.reconstruction.generator_id == "cache");
    CHECK(second.reconstruction.image == first.reconstruction.image);
    CHECK(second.metrics->ms_ssim == first.metrics->ms_ssim);

    // Degraded runs are not cached.
    const RasterImage other = read_image(image_fixture("camera_256"));
    const auto other_rec = p.transmit(other);
    p.run(other, other_rec, ChannelConfig{.ber = 0.1, .seed = 3}, {});
    CHECK(rig.kb.cache_size() == 1);
  }

  TEST_CASE("generator failure and fallback") {
    Rig rig;
    FailingGenerator down;
    StubGenerator stub;
    const RasterImage img = read_image(image_fixture("camera_256"));

    const Pipeline strict(rig.kb, Providers{&rig.captioner, &rig.embedder, &down});
    const auto rec = strict.transmit(img);
    CHECK(test::code_of([&] { strict.run(img, rec, ChannelConfig{}, {}); }) == ErrorCode::ServiceUnavailable);

    const Pipeline lenient(rig.kb, Providers{&rig.captioner, &rig.embedder, &down, &stub});
    const auto out = lenient.run(img, rec, ChannelConfig{}, {});
    CHECK(out.generator_fallback);
    CHECK(out.degraded);
    CHECK(out.reconstruction.degraded);
    CHECK(out.reconstruction.generator_id == "stub");

    down.code = ErrorCode::InvalidArgument;
    CHECK(test::code_of([&] { lenient.run(img, rec, ChannelConfig{}, {}); }) == ErrorCode::InvalidArgument);

    CHECK(test::code_of([&] { Pipeline(rig.kb, Providers{&rig.captioner, nullptr, &stub}); }) ==
          ErrorCode::InvalidArgument);
  }

  TEST_CASE("receive needs both frames") {
    Rig rig;
    const Pipeline p(rig.kb, rig.providers());
    const auto rec = p.transmit(read_image(image_fixture("camera_256")));
    CHECK(test::code_of([&] { p.receive({rec.frames[0]}, {}); }) == ErrorCode::MalformedStream);
    const auto out = p.receive(rec.frames, {});
    CHECK_FALSE(out.metrics);
    CHECK(out.caption == rec.caption);
    CHECK(out.edges == rec.edges);
  }

  TEST_CASE("payload ber counts edge payload bits") {
    const Bytes text = frame_encode(make_frame(compress_text(std::string_view("a lake"))));
    const Bytes edge = frame_encode(make_frame(select_encoding(EdgeMap(64, 64))));
    std::vector<Bytes> sent{text, edge}, recv = sent;
    recv[0].back() ^= 0xff;
    recv[1].back() ^= 0x01;
    const double edge_bits = 8.0 * static_cast<double>(edge.size() - frame_header_size(FrameKind::EDGE));
    const double text_bits = 8.0 * static_cast<double>(text.size() - frame_header_size(FrameKind::TEXT));
    CHECK(payload_ber(sent, recv) == doctest::Approx(1.0 / edge_bits));
    CHECK(payload_ber(sent, recv, true) == doctest::Approx(9.0 / (edge_bits + text_bits)));
    CHECK(payload_ber(sent, sent) == 0.0);
  }

  TEST_CASE("run seeds") {
    CHECK(run_seed(7, 1, 2, 3) == SplitMix64::at(SplitMix64::at(SplitMix64::at(7, 1), 2), 3));
    std::set<std::uint64_t> seen;
    for (std::size_t b = 0; b < 4; ++b) {
      for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t i = 0; i < 4; ++i) seen.insert(run_seed(1, b, c, i));
      }
    }
    CHECK(seen.size() == 64);
  }

  TEST_CASE("experiment rows") {
    Rig rig;
    ExperimentConfig cfg = small_config();
    cfg.ablation = true;
    cfg.seeds = {1};
    cfg.ber_sweep = {0.0};
    const auto rows = run_experiment(cfg, rig.kb, rig.providers());
    REQUIRE(rows.size() == 4);
    const auto configs = ablation_configs();
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(rows[i].config_id == configs[i].id);
      CHECK(rows[i].rag_text == configs[i].rag_text);
      CHECK(rows[i].rag_image == configs[i].rag_image);
      CHECK(rows[i].seed == 1);
      CHECK(rows[i].error.empty());
      CHECK(rows[i].ms_ssim);
    }
    CHECK(configs[0].id == "no_rag");
    CHECK(configs[3].id == "both");

    const auto csv = lines_of(format_csv(rows));
    const auto summary = std::find(csv.begin(), csv.end(), "# summary");
    REQUIRE(summary != csv.end());
    CHECK(summary - csv.begin() == 5);
    CHECK(csv.end() - summary == 6);

    cfg.ablation = false;
    cfg.rag_text = false;
    cfg.rag_image = true;
    cfg.seeds = {1, 2, 3};
    cfg.ber_sweep = {0.0, 1e-3};
    const auto plain = run_experiment(cfg, rig.kb, rig.providers());
    REQUIRE(plain.size() == 6);
    CHECK(plain[0].config_id == "image_rag");
    CHECK(plain[0].ber == 0.0);
    CHECK(plain[2].seed == 3);
    CHECK(plain[3].ber == 1e-3);
  }

  TEST_CASE("failed inputs are recorded and the sweep continues") {
    Rig rig;
    ExperimentConfig cfg = small_config();
    cfg.inputs.push_back("/nonexistent/missing.png");
    cfg.ber_sweep = {0.0};
    cfg.seeds = {0};
    const auto rows = run_experiment(cfg, rig.kb, rig.providers());
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].error.find("missing.png") != std::string::npos);
    CHECK(rows[0].ms_ssim);
  }

  TEST_CASE("experiments are deterministic across thread counts") {
    Rig rig;
    ExperimentConfig cfg = small_config();
    cfg.ablation = true;
    cfg.ber_sweep = {0.0, 1e-3, 1e-1};
    cfg.seeds = {1, 2, 3};
    cfg.threads = 1;
    const std::string serial = format_csv(run_experiment(cfg, rig.kb, rig.providers()));
    CHECK(serial == format_csv(run_experiment(cfg, rig.kb, rig.providers())));
    cfg.threads = 6;
    CHECK(serial == format_csv(run_experiment(cfg, rig.kb, rig.providers())));
  }

  TEST_CASE("full experiment from a stored knowledge base") {
    const auto dir = test::scratch_dir("exp");
    fixture_kb().persist(dir / "kb");
    ExperimentConfig cfg = small_config();
    cfg.kb_path = dir / "kb";
    cfg.output_csv = dir / "out.csv";
    cfg.ablation = true;
    const auto rows = run_experiment(cfg);
    REQUIRE(rows.size() == 2 * 4 * 2);
    const Bytes written = read_file(dir / "out.csv");
    CHECK(std::string(written.begin(), written.end()) == format_csv(rows));
    run_experiment(cfg);
    CHECK(read_file(dir / "out.csv") == written);
    fs::remove_all(dir);
  }

  TEST_CASE("csv format") {
    ExperimentRow a;
    a.config_id = "no_rag";
    a.ber = 1e-4;
    a.seed = 7;
    a.ms_ssim = 0.5;
    a.clip_similarity = 0.25;
    a.measured_ber = 0.0;
    a.compression_ratio = 100.0;
    ExperimentRow b = a;
    b.seed = 8;
    b.ms_ssim = 0.7;
    b.degraded = true;
    b.error = "x.png: bad, \"very\"";
    const auto lines = lines_of(format_csv({a, b}));
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] ==
          "config_id,ber,seed,rag_text,rag_image,ms_ssim,clip_similarity,measured_ber,compression_ratio,lpips,pieapp,"
          "degraded,error");
    CHECK(lines[1] == "no_rag,0.0001,7,false,false,0.500000,0.250000,0.000000,100.000000,,,false,");
    CHECK(lines[2] == "no_rag,0.0001,8,false,false,0.700000,0.250000,0.000000,100.000000,,,true,"
                      "\"x.png: bad, \"\"very\"\"\"");
    CHECK(lines[3] == "# summary");
    // Sample standard deviation of {0.5, 0.7} is 0.141421.
    CHECK(lines[5] == "no_rag,0.0001,2,0.600000,0.141421,0.250000,0.000000,0.000000,0.000000,100.000000,0.000000,"
                      "0.500000,1");
  }

  TEST_CASE("reported reference rows fixture") {
    std::ifstream in(test::fixture("reference/ablation_reported.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == lines_of(format_csv({}))[0]);
    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(in, line);) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
      rows.push_back(cells);
    }
    REQUIRE(rows.size() == 4);
    const auto configs = ablation_configs();
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(rows[i][0] == configs[i].id);
      CHECK(rows[i][3] == (configs[i].rag_text ? "true" : "false"));
      CHECK(rows[i][4] == (configs[i].rag_image ? "true" : "false"));
    }
    const auto& base = rows[0];
    CHECK(std::stod(base[1]) == 1e-4);
    CHECK(std::stod(base[9]) == 0.4388);
    CHECK(std::stod(base[10]) == 3.1318);
    CHECK(std::stod(base[5]) == 0.5981);
    CHECK(std::stod(base[6]) == 0.8752);
    // Image retrieval rows lead the no-retrieval row in MS-SSIM.
    CHECK(std::stod(rows[2][5]) > std::stod(base[5]));
    CHECK(std::stod(rows[3][5]) > std::stod(base[5]));
  }

  TEST_CASE("sidecar captions") {
    CHECK(sidecar_caption(image_fixture("camera_256")).has_value());
    CHECK_FALSE(sidecar_caption("/nonexistent/x.png"));
  }
}
