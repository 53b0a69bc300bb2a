#include "ragsc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <thread>

#include <fmt/format.h>

#include "ragsc/error.hpp"

namespace ragsc {

namespace fs = std::filesystem;

std::vector<RagConfig> ablation_configs() {
  return {{"no_rag", false, false}, {"text_rag", true, false}, {"image_rag", false, true}, {"both", true, true}};
}

namespace {

std::string_view config_id_for(bool rag_text, bool rag_image) {
  if (rag_text && rag_image) return "both";
  if (rag_text) return "text_rag";
  if (rag_image) return "image_rag";
  return "no_rag";
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view value) {
  std::vector<std::string_view> items;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto comma = value.find(',', start);
    const auto item = trim(value.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) items.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return items;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  fail(ErrorCode::InvalidArgument, "bad value for " + std::string(key) + ": '" + std::string(value) + "'");
}

double parse_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value);
  return out;
}

template <typename T>
T parse_integer(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value);
}

fs::path resolve_path(std::string_view value, const fs::path& base_dir) {
  fs::path p{std::string(value)};
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return p;
}

ServiceEndpoint& service_of(ExperimentConfig& cfg) {
  if (!cfg.service) cfg.service.emplace();
  return *cfg.service;
}

}  // namespace

void apply_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value,
                        const fs::path& base_dir) {
  key = trim(key);
  value = trim(value);
  if (key == "inputs") {
    cfg.inputs.clear();
    for (const auto item : split_list(value)) cfg.inputs.push_back(resolve_path(item, base_dir));
  } else if (key == "ber_sweep") {
    cfg.ber_sweep.clear();
    for (const auto item : split_list(value)) cfg.ber_sweep.push_back(parse_double(key, item));
  } else if (key == "seeds") {
    cfg.seeds.clear();
    for (const auto item : split_list(value)) cfg.seeds.push_back(parse_integer<std::uint64_t>(key, item));
  } else if (key == "rag_text") {
    cfg.rag_text = parse_bool(key, value);
  } else if (key == "rag_image") {
    cfg.rag_image = parse_bool(key, value);
  } else if (key == "ablation") {
    cfg.ablation = parse_bool(key, value);
  } else if (key == "protect_text") {
    cfg.channel.protect_text = parse_bool(key, value);
  } else if (key == "fec") {
    cfg.channel.fec = parse_fec(value);
  } else if (key == "k") {
    cfg.retriever.k = parse_integer<std::size_t>(key, value);
  } else if (key == "epsilon") {
    cfg.retriever.epsilon = parse_double(key, value);
  } else if (key == "rounds_max") {
    cfg.retriever.rounds_max = parse_integer<int>(key, value);
  } else if (key == "k1") {
    cfg.retriever.k1 = parse_double(key, value);
  } else if (key == "b") {
    cfg.retriever.b = parse_double(key, value);
  } else if (key == "min_score") {
    cfg.retriever.min_score = parse_double(key, value);
  } else if (key == "duplicate_threshold") {
    cfg.retriever.duplicate_threshold = parse_double(key, value);
  } else if (key == "scorer") {
    if (value == "bm25") {
      cfg.retriever.scorer = SparseScorer::BM25;
    } else if (value == "tfidf") {
      cfg.retriever.scorer = SparseScorer::TFIDF;
    } else {
      bad_value(key, value);
    }
  } else if (key == "char_budget") {
    cfg.char_budget = parse_integer<std::size_t>(key, value);
  } else if (key == "max_reference_images") {
    cfg.max_reference_images = parse_integer<std::size_t>(key, value);
  } else if (key == "canny_low") {
    cfg.canny.low = parse_double(key, value);
  } else if (key == "canny_high") {
    cfg.canny.high = parse_double(key, value);
  } else if (key == "canny_sigma") {
    cfg.canny.sigma = parse_double(key, value);
  } else if (key == "backend") {
    cfg.backend = parse_generator_backend(value);
  } else if (key == "fallback_to_stub") {
    cfg.fallback_to_stub = parse_bool(key, value);
  } else if (key == "providers") {
    if (value == "mock") {
      cfg.providers = ProviderKind::MOCK;
    } else if (value == "service") {
      cfg.providers = ProviderKind::SERVICE;
    } else {
      bad_value(key, value);
    }
  } else if (key == "service_url") {
    service_of(cfg).base_url = std::string(value);
  } else if (key == "service_timeout_ms") {
    service_of(cfg).timeout = std::chrono::milliseconds(parse_integer<std::int64_t>(key, value));
  } else if (key == "use_reviewer") {
    cfg.use_reviewer = parse_bool(key, value);
  } else if (key == "use_rewriter") {
    cfg.use_rewriter = parse_bool(key, value);
  } else if (key == "kb_path") {
    cfg.kb_path = resolve_path(value, base_dir);
  } else if (key == "output_csv") {
    cfg.output_csv = resolve_path(value, base_dir);
  } else if (key == "use_cache") {
    cfg.use_cache = parse_bool(key, value);
  } else if (key == "steps") {
    cfg.steps = parse_integer<int>(key, value);
  } else if (key == "threads") {
    cfg.threads = parse_integer<unsigned>(key, value);
  } else {
    fail(ErrorCode::InvalidArgument, "unknown config key: " + std::string(key));
  }
}

ExperimentConfig parse_config(std::string_view text, const fs::path& base_dir) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::InvalidArgument, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_config_value(cfg, line.substr(0, eq), line.substr(eq + 1), base_dir);
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  const Bytes bytes = read_file(path);
  return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                      path.parent_path());
}

void ExperimentConfig::validate() const {
  if (inputs.empty()) fail(ErrorCode::InvalidArgument, "no inputs");
  if (ber_sweep.empty()) fail(ErrorCode::InvalidArgument, "ber_sweep is empty");
  if (seeds.empty()) fail(ErrorCode::InvalidArgument, "seeds is empty");
  for (const double p : ber_sweep) {
    ChannelConfig c = channel;
    c.ber = p;
    c.validate();
  }
  if (retriever.k < 1) fail(ErrorCode::InvalidArgument, "k must be >= 1");
  if (retriever.rounds_max < 1) fail(ErrorCode::InvalidArgument, "rounds_max must be >= 1");
  if (!(retriever.epsilon >= 0.0)) fail(ErrorCode::InvalidArgument, "epsilon must be >= 0");
  if (retriever.k1 < 0.0 || retriever.b < 0.0 || retriever.b > 1.0) {
    fail(ErrorCode::InvalidArgument, "BM25 needs k1 >= 0 and b in [0, 1]");
  }
  if (steps < 1) fail(ErrorCode::InvalidArgument, "steps must be >= 1");
  if (threads < 1) fail(ErrorCode::InvalidArgument, "threads must be >= 1");
  const bool needs_service = backend == GeneratorBackend::SERVICE || providers == ProviderKind::SERVICE ||
                             use_reviewer || use_rewriter;
  if (needs_service && (!service || service->base_url.empty())) {
    fail(ErrorCode::InvalidArgument, "service_url is required by the configured backend or providers");
  }
  if (service && service->timeout.count() <= 0) fail(ErrorCode::InvalidArgument, "service timeout must be positive");
}

ProviderSet::ProviderSet(const ExperimentConfig& cfg, const KnowledgeBase& kb) {
  if (cfg.service && !cfg.service->base_url.empty()) client_ = std::make_unique<ModelServerClient>(*cfg.service);
  if (cfg.providers == ProviderKind::MOCK) {
    captioner_ = std::make_unique<MockCaptioner>(kb);
    embedder_ = std::make_unique<MockEmbeddingProvider>(kb);
  } else if (!client_) {
    fail(ErrorCode::InvalidArgument, "service providers need service_url");
  }
  if (cfg.backend == GeneratorBackend::SERVICE) {
    if (!cfg.service) fail(ErrorCode::InvalidArgument, "SERVICE backend needs service_url");
    generator_ = std::make_unique<ServiceGenerator>(*cfg.service);
    if (cfg.fallback_to_stub) fallback_ = std::make_unique<StubGenerator>();
  } else {
    generator_ = std::make_unique<StubGenerator>();
  }
  reviewer_ = cfg.use_reviewer && client_;
  rewriter_ = cfg.use_rewriter && client_;
}

Providers ProviderSet::view() const {
  Providers p;
  p.captioner = captioner_ ? captioner_.get() : static_cast<Captioner*>(client_.get());
  p.embedder = embedder_ ? embedder_.get() : static_cast<EmbeddingProvider*>(client_.get());
  p.generator = generator_.get();
  p.fallback = fallback_.get();
  p.reviewer = reviewer_ ? client_.get() : nullptr;
  p.rewriter = rewriter_ ? client_.get() : nullptr;
  return p;
}

std::size_t ensure_embeddings(KnowledgeBase& kb, EmbeddingProvider& embedder) {
  std::vector<KnowledgeEntry> updated;
  for (const auto& [id, entry] : kb.entries()) {
    KnowledgeEntry e = entry;
    bool changed = false;
    if (e.modality == Modality::IMAGE && !e.image_embedding && e.image_path) {
      e.image_embedding = embedder.embed_image(read_image(kb.resolve(*e.image_path)));
      changed = true;
    }
    if (e.modality == Modality::DOCUMENT && !e.text_embedding && e.text && !e.text->empty()) {
      e.text_embedding = embedder.embed_text(*e.text);
      changed = true;
    }
    if (changed) updated.push_back(std::move(e));
  }
  for (auto& e : updated) kb.insert(std::move(e));
  return updated.size();
}

std::size_t TransmissionRecord::frame_bytes() const {
  std::size_t total = 0;
  for (const auto& f : frames) total += f.size();
  return total;
}

PipelineOptions pipeline_options(const ExperimentConfig& cfg) {
  PipelineOptions o;
  o.canny = cfg.canny;
  o.retriever = cfg.retriever;
  o.char_budget = cfg.char_budget;
  o.max_reference_images = cfg.max_reference_images;
  o.steps = cfg.steps;
  o.use_cache = cfg.use_cache;
  return o;
}

Pipeline::Pipeline(KnowledgeBase& kb, Providers providers, PipelineOptions options)
    : kb_(kb),
      providers_(providers),
      options_(options),
      retriever_(kb, options.retriever.scorer, Bm25Params{options.retriever.k1, options.retriever.b}) {
  if (!providers_.captioner || !providers_.embedder || !providers_.generator) {
    fail(ErrorCode::InvalidArgument, "pipeline needs a captioner, an embedder and a generator");
  }
}

TransmissionRecord Pipeline::transmit(const RasterImage& image, std::optional<std::string> caption) const {
  TransmissionRecord rec;
  rec.caption = caption ? std::move(*caption) : providers_.captioner->caption(image);
  rec.edges = canny(to_grayscale(image), options_.canny);
  rec.content_hash = content_hash(rec.caption, rec.edges);
  rec.source_bytes = image.byte_size();

  if (options_.use_cache) {
    std::lock_guard lock(cache_mutex_);
    if (auto hit = kb_.cache_lookup(rec.content_hash); hit && !hit->frames.empty()) {
      rec.frames = std::move(hit->frames);
      rec.cached_reconstruction = std::move(hit->reconstruction);
      rec.cache_hit = true;
    }
  }
  if (!rec.cache_hit) {
    const CompressedText text = compress_text(rec.caption);
    const EncodedEdgeMap edges = select_encoding(rec.edges);
    rec.frames.push_back(frame_encode(make_frame(text)));
    rec.frames.push_back(frame_encode(make_frame(edges)));
  }
  for (const auto& bytes : rec.frames) {
    const DecodedFrame d = frame_decode(bytes);
    if (d.frame.kind() == FrameKind::TEXT) {
      rec.text_payload_bytes = d.frame.payload.size();
      rec.text_codec = std::get<TextMeta>(d.frame.meta).codec;
    } else {
      rec.edge_payload_bytes = d.frame.payload.size();
      rec.scheme = std::get<EdgeMeta>(d.frame.meta).scheme;
    }
  }
  return rec;
}

std::vector<Bytes> Pipeline::send(const std::vector<Bytes>& frames, const ChannelConfig& channel) const {
  std::vector<Bytes> out;
  out.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) out.push_back(transmit_frame(frames[i], channel, i));
  return out;
}

double payload_ber(const std::vector<Bytes>& sent, const std::vector<Bytes>& received, bool include_text) {
  std::size_t flips = 0, bits = 0;
  for (std::size_t i = 0; i < std::min(sent.size(), received.size()); ++i) {
    const Bytes& a = sent[i];
    const Bytes& b = received[i];
    if (a.size() != b.size() || a.size() < kFramePrefix) continue;
    const auto kind = static_cast<FrameKind>(a[5]);
    if (kind == FrameKind::TEXT && !include_text) continue;
    const std::size_t header = frame_header_size(kind);
    if (a.size() < header) continue;
    const ByteView pa(a.data() + header, a.size() - header);
    const ByteView pb(b.data() + header, b.size() - header);
    flips += static_cast<std::size_t>(std::llround(measured_ber(pa, pb) * 8.0 * static_cast<double>(pa.size())));
    bits += 8 * pa.size();
  }
  return bits == 0 ? 0.0 : static_cast<double>(flips) / static_cast<double>(bits);
}

MetricsReport Pipeline::measure(const RasterImage& reconstruction, const RasterImage& reference,
                                const std::string& caption, const std::vector<Bytes>& received,
                                const std::vector<Bytes>* sent, std::size_t source_bytes, bool text_exposed) const {
  MetricsReport m;
  const RasterImage recon = reconstruction.width() == reference.width() && reconstruction.height() == reference.height()
                                ? reconstruction
                                : resize_nearest(reconstruction, reference.width(), reference.height());
  m.ms_ssim = ms_ssim(recon, reference);
  const Embedding recon_embedding = providers_.embedder->embed_image(recon);
  m.clip_similarity = clip_similarity(recon_embedding, providers_.embedder->embed_image(reference));
  if (!caption.empty()) {
    try {
      m.clip_text_similarity = cosine(recon_embedding, providers_.embedder->embed_text(caption));
    } catch (const Error&) {
    }
  }
  if (sent) m.measured_ber = payload_ber(*sent, received, text_exposed);
  std::size_t frame_bytes = 0;
  for (const auto& f : received) frame_bytes += f.size();
  if (frame_bytes > 0) {
    m.compression_ratio = compression_ratio(source_bytes ? source_bytes : reference.byte_size(), frame_bytes);
  }
  return m;
}

ReceiveOutcome Pipeline::receive(const std::vector<Bytes>& frames, const ReceiveOptions& options,
                                 const RasterImage* reference, const std::vector<Bytes>* sent,
                                 std::size_t source_bytes) const {
  ReceiveOutcome out;
  std::optional<DecodedFrame> text_frame, edge_frame;
  for (const auto& bytes : frames) {
    DecodedFrame d = frame_decode(bytes);
    auto& slot = d.frame.kind() == FrameKind::TEXT ? text_frame : edge_frame;
    if (!slot) slot = std::move(d);
  }
  if (!text_frame || !edge_frame) fail(ErrorCode::MalformedStream, "expected one TEXT and one EDGE frame");

  out.text_integrity = text_frame->integrity;
  try {
    const Bytes text = decompress_text(text_from_frame(text_frame->frame));
    out.caption.assign(text.begin(), text.end());
  } catch (const Error& e) {
    fail(e.code(), std::string("caption frame undecodable: ") + e.what());
  }

  out.edge_integrity = edge_frame->integrity;
  const auto& meta = std::get<EdgeMeta>(edge_frame->frame.meta);
  try {
    out.edges = decode_edges(edges_from_frame(edge_frame->frame));
  } catch (const Error& e) {
    const auto code = e.code();
    if (code != ErrorCode::MalformedStream && code != ErrorCode::LengthMismatch &&
        code != ErrorCode::IndexOutOfRange) {
      throw;
    }
    out.edges = EdgeMap(meta.width, meta.height);
    out.edge_decode_failed = true;
  }

  StopExplorationOptions explore;
  explore.rounds_max = options_.retriever.rounds_max;
  explore.epsilon = options_.retriever.epsilon;
  explore.k_per_round = options_.retriever.k;
  explore.review.min_score = options_.retriever.min_score;
  explore.review.duplicate_threshold = options_.retriever.duplicate_threshold;

  if (options.rag_text && !retriever_.index().empty() && !out.caption.empty()) {
    Query q;
    q.text = out.caption;
    q.mode = QueryMode::SPARSE;
    out.text_retrieval = retriever_.retrieve(q, explore, providers_.reviewer);
  }
  if (options.rag_image && !out.caption.empty()) {
    Query q;
    q.text = out.caption;
    q.text_embedding = providers_.embedder->embed_text(out.caption);
    q.mode = QueryMode::CROSS_MODAL;
    out.image_retrieval = retriever_.retrieve(q, explore, providers_.reviewer);
  }

  if (options.rag_text || options.rag_image) {
    RetrievalBundle merged;
    merged.documents = out.text_retrieval.documents;
    merged.images = out.image_retrieval.images;
    out.prompt = enhance_prompt(out.caption, merged, kb_,
                                PromptOptions{options_.char_budget, options_.max_reference_images},
                                providers_.rewriter);
  } else {
    out.prompt.text_prompt = out.caption;
    out.prompt.char_budget = options_.char_budget;
  }

  GenerationRequest req;
  req.text_prompt = out.prompt.text_prompt;
  req.edge_map = out.edges;
  req.output_width = meta.width;
  req.output_height = meta.height;
  req.seed = options.seed;
  req.steps = options_.steps;
  for (const auto& id : out.prompt.reference_image_ids) {
    const KnowledgeEntry* entry = kb_.get(id);
    if (!entry || !entry->image_path) continue;
    try {
      req.reference_images.push_back(read_image(kb_.resolve(*entry->image_path)));
    } catch (const Error&) {
    }
  }

  try {
    out.reconstruction = providers_.generator->generate(req);
  } catch (const Error& e) {
    const auto code = e.code();
    const bool service_failure = code == ErrorCode::ServiceUnavailable || code == ErrorCode::ServiceTimeout ||
                                 code == ErrorCode::MalformedResponse;
    if (!providers_.fallback || !service_failure) throw;
    out.reconstruction = providers_.fallback->generate(req);
    out.reconstruction.degraded = true;
    out.generator_fallback = true;
  }

  out.degraded = !out.text_integrity || !out.edge_integrity || out.edge_decode_failed || out.generator_fallback;
  if (reference) {
    out.metrics =
        measure(out.reconstruction.image, *reference, out.caption, frames, sent, source_bytes, options.text_exposed);
  }
  return out;
}

ReceiveOutcome Pipeline::run(const RasterImage& image, const TransmissionRecord& record, const ChannelConfig& channel,
                             const ReceiveOptions& options) const {
  if (options_.use_cache) {
    std::optional<CacheRecord> hit;
    {
      std::lock_guard lock(cache_mutex_);
      hit = kb_.cache_lookup(record.content_hash);
    }
    if (hit && hit->reconstruction) {
      ReceiveOutcome out;
      out.caption = record.caption;
      out.edges = record.edges;
      out.prompt.text_prompt = record.caption;
      out.prompt.char_budget = options_.char_budget;
      out.text_integrity = out.edge_integrity = true;
      out.reconstruction.image = std::move(*hit->reconstruction);
      out.reconstruction.generator_id = "cache";
      out.metrics = measure(out.reconstruction.image, image, record.caption, record.frames, &record.frames,
                            record.source_bytes, false);
      return out;
    }
  }

  const auto received = send(record.frames, channel);
  ReceiveOptions opts = options;
  opts.text_exposed = !channel.protect_text;
  ReceiveOutcome out = receive(received, opts, &image, &record.frames, record.source_bytes);

  if (options_.use_cache && !out.degraded) {
    CacheRecord rec;
    rec.content_hash = record.content_hash;
    rec.frames = record.frames;
    rec.reconstruction = out.reconstruction.image;
    rec.metrics = out.metrics;
    std::lock_guard lock(cache_mutex_);
    kb_.cache_put(std::move(rec));
  }
  return out;
}

std::uint64_t run_seed(std::uint64_t seed, std::size_t ber_index, std::size_t config_index, std::size_t input_index) {
  return SplitMix64::at(SplitMix64::at(SplitMix64::at(seed, ber_index), config_index), input_index);
}

std::optional<std::string> sidecar_caption(const fs::path& image_path) {
  fs::path txt = image_path;
  txt.replace_extension(".txt");
  std::error_code ec;
  if (!fs::is_regular_file(txt, ec)) return std::nullopt;
  const Bytes bytes = read_file(txt);
  std::string text(bytes.begin(), bytes.end());
  const auto t = trim(text);
  if (t.empty()) return std::nullopt;
  return std::string(t);
}

namespace {

struct PreparedInput {
  RasterImage image;
  std::optional<TransmissionRecord> record;
  std::string error;
};

struct Task {
  std::size_t ber_index;
  std::size_t config_index;
  std::size_t seed_index;
};

ExperimentRow run_task(const ExperimentConfig& cfg, const Pipeline& pipeline, const std::vector<PreparedInput>& inputs,
                       const std::vector<RagConfig>& configs, const Task& task) {
  const RagConfig& rag = configs[task.config_index];
  ExperimentRow row;
  row.config_id = rag.id;
  row.ber = cfg.ber_sweep[task.ber_index];
  row.seed = cfg.seeds[task.seed_index];
  row.rag_text = rag.rag_text;
  row.rag_image = rag.rag_image;

  double ms = 0.0, clip = 0.0, ber = 0.0, cr = 0.0;
  std::size_t done = 0;
  std::vector<std::string> errors;
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    const PreparedInput& in = inputs[j];
    if (!in.record) {
      errors.push_back(cfg.inputs[j].filename().string() + ": " + in.error);
      continue;
    }
    ChannelConfig channel = cfg.channel;
    channel.ber = row.ber;
    channel.seed = run_seed(row.seed, task.ber_index, task.config_index, j);
    ReceiveOptions opts{rag.rag_text, rag.rag_image, row.seed};
    try {
      const ReceiveOutcome out = pipeline.run(in.image, *in.record, channel, opts);
      ms += out.metrics->ms_ssim;
      clip += out.metrics->clip_similarity;
      ber += out.metrics->measured_ber;
      cr += out.metrics->compression_ratio;
      row.degraded = row.degraded || out.degraded;
      ++done;
    } catch (const std::exception& e) {
      errors.push_back(cfg.inputs[j].filename().string() + ": " + e.what());
    }
  }
  if (done > 0) {
    const double n = static_cast<double>(done);
    row.ms_ssim = ms / n;
    row.clip_similarity = clip / n;
    row.measured_ber = ber / n;
    row.compression_ratio = cr / n;
  }
  for (std::size_t i = 0; i < errors.size(); ++i) row.error += (i ? "; " : "") + errors[i];
  return row;
}

void prepare_kb(const ExperimentConfig& cfg, KnowledgeBase& kb) {
  if (cfg.providers == ProviderKind::MOCK) {
    MockEmbeddingProvider embedder;
    ensure_embeddings(kb, embedder);
  } else {
    ModelServerClient client(*cfg.service);
    ensure_embeddings(kb, client);
  }
}

}  // namespace

std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg, KnowledgeBase& kb, const Providers& providers) {
  cfg.validate();
  const Pipeline pipeline(kb, providers, pipeline_options(cfg));

  std::vector<PreparedInput> inputs(cfg.inputs.size());
  for (std::size_t j = 0; j < cfg.inputs.size(); ++j) {
    try {
      inputs[j].image = read_image(cfg.inputs[j]);
      inputs[j].record = pipeline.transmit(inputs[j].image, sidecar_caption(cfg.inputs[j]));
    } catch (const std::exception& e) {
      inputs[j].error = e.what();
    }
  }

  const std::vector<RagConfig> configs =
      cfg.ablation ? ablation_configs()
                   : std::vector<RagConfig>{{std::string(config_id_for(cfg.rag_text, cfg.rag_image)), cfg.rag_text,
                                             cfg.rag_image}};
  std::vector<Task> tasks;
  for (std::size_t b = 0; b < cfg.ber_sweep.size(); ++b) {
    for (std::size_t c = 0; c < configs.size(); ++c) {
      for (std::size_t s = 0; s < cfg.seeds.size(); ++s) tasks.push_back({b, c, s});
    }
  }

  std::vector<ExperimentRow> rows(tasks.size());
  // Cache state depends on run order, so cached experiments stay sequential.
  const unsigned workers = cfg.use_cache ? 1u : std::min<unsigned>(cfg.threads, static_cast<unsigned>(tasks.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) rows[i] = run_task(cfg, pipeline, inputs, configs, tasks[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
          rows[i] = run_task(cfg, pipeline, inputs, configs, tasks[i]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  return rows;
}

std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  KnowledgeBase kb;
  if (cfg.kb_path) kb = KnowledgeBase::load(*cfg.kb_path);
  prepare_kb(cfg, kb);
  const ProviderSet providers(cfg, kb);
  auto rows = run_experiment(cfg, kb, providers.view());
  if (cfg.output_csv) {
    const std::string csv = format_csv(rows);
    write_file(*cfg.output_csv, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
  }
  return rows;
}

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string num(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string(); }

struct Stat {
  std::vector<double> values;

  void add(const std::optional<double>& v) {
    if (v) values.push_back(*v);
  }
  std::string mean() const {
    if (values.empty()) return {};
    double s = 0.0;
    for (const double v : values) s += v;
    return fmt::format("{:.6f}", s / static_cast<double>(values.size()));
  }
  std::string stddev() const {
    if (values.empty()) return {};
    if (values.size() == 1) return fmt::format("{:.6f}", 0.0);
    double s = 0.0;
    for (const double v : values) s += v;
    const double m = s / static_cast<double>(values.size());
    double sq = 0.0;
    for (const double v : values) sq += (v - m) * (v - m);
    return fmt::format("{:.6f}", std::sqrt(sq / static_cast<double>(values.size() - 1)));
  }
};

struct Cell {
  std::string config_id;
  double ber = 0.0;
  std::size_t runs = 0;
  std::size_t degraded = 0;
  std::size_t errors = 0;
  Stat ms_ssim, clip, measured_ber, compression;
};

}  // namespace

std::string format_csv(const std::vector<ExperimentRow>& rows) {
  std::string out =
      "config_id,ber,seed,rag_text,rag_image,ms_ssim,clip_similarity,measured_ber,compression_ratio,lpips,pieapp,"
      "degraded,error\n";
  std::vector<Cell> cells;
  for (const auto& r : rows) {
    out += fmt::format("{},{:g},{},{},{},{},{},{},{},{},{},{},{}\n", csv_field(r.config_id), r.ber, r.seed,
                       r.rag_text, r.rag_image, num(r.ms_ssim), num(r.clip_similarity), num(r.measured_ber),
                       num(r.compression_ratio), num(r.lpips), num(r.pieapp), r.degraded, csv_field(r.error));
    auto it = std::find_if(cells.begin(), cells.end(),
                           [&](const Cell& c) { return c.config_id == r.config_id && c.ber == r.ber; });
    if (it == cells.end()) {
      Cell cell;
      cell.config_id = r.config_id;
      cell.ber = r.ber;
      cells.push_back(std::move(cell));
      it = cells.end() - 1;
    }
    ++it->runs;
    it->degraded += r.degraded ? 1 : 0;
    it->errors += r.error.empty() ? 0 : 1;
    it->ms_ssim.add(r.ms_ssim);
    it->clip.add(r.clip_similarity);
    it->measured_ber.add(r.measured_ber);
    it->compression.add(r.compression_ratio);
  }
  out += "# summary\n";
  out +=
      "config_id,ber,runs,ms_ssim_mean,ms_ssim_std,clip_similarity_mean,clip_similarity_std,measured_ber_mean,"
      "measured_ber_std,compression_ratio_mean,compression_ratio_std,degraded_rate,errors\n";
  for (const auto& c : cells) {
    out += fmt::format("{},{:g},{},{},{},{},{},{},{},{},{},{:.6f},{}\n", csv_field(c.config_id), c.ber, c.runs,
                       c.ms_ssim.mean(), c.ms_ssim.stddev(), c.clip.mean(), c.clip.stddev(), c.measured_ber.mean(),
                       c.measured_ber.stddev(), c.compression.mean(), c.compression.stddev(),
                       static_cast<double>(c.degraded) / static_cast<double>(c.runs), c.errors);
  }
  return out;
}

}  // namespace ragsc
