#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragsc/channel.hpp"
#include "ragsc/codec.hpp"
#include "ragsc/edgemap.hpp"
#include "ragsc/genclient.hpp"
#include "ragsc/knowledge.hpp"
#include "ragsc/metrics.hpp"
#include "ragsc/prompter.hpp"
#include "ragsc/providers.hpp"
#include "ragsc/retriever.hpp"
#include "ragsc/service.hpp"

namespace ragsc {

struct RetrieverParams {
  std::size_t k = 2;  // hits admitted per exploration round
  double epsilon = 0.1;
  int rounds_max = 3;
  double k1 = 1.2;
  double b = 0.75;
  double min_score = 0.0;
  double duplicate_threshold = 0.95;
  SparseScorer scorer = SparseScorer::BM25;
};

struct RagConfig {
  std::string id;
  bool rag_text = false;
  bool rag_image = false;
};

// no_rag, text_rag, image_rag, both.
std::vector<RagConfig> ablation_configs();

enum class ProviderKind : std::uint8_t { MOCK, SERVICE };

struct ExperimentConfig {
  std::vector<std::filesystem::path> inputs;
  ChannelConfig channel;  // ber and seed are overridden per run
  std::vector<double> ber_sweep{0.0};
  bool rag_text = true;
  bool rag_image = true;
  bool ablation = false;
  RetrieverParams retriever;
  std::size_t char_budget = 512;
  std::size_t max_reference_images = 1;
  CannyParams canny;
  GeneratorBackend backend = GeneratorBackend::STUB;
  bool fallback_to_stub = false;
  ProviderKind providers = ProviderKind::MOCK;
  std::optional<ServiceEndpoint> service;
  bool use_reviewer = false;
  bool use_rewriter = false;
  std::optional<std::filesystem::path> kb_path;
  std::vector<std::uint64_t> seeds{0};
  std::optional<std::filesystem::path> output_csv;
  bool use_cache = false;
  int steps = 30;
  unsigned threads = 1;

  void validate() const;
};

// UTF-8 "key = value" lines; '#' starts a comment; lists are comma separated.
// Relative paths resolve against base_dir. Unknown keys are rejected.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
// Applies one key/value pair, as from the config file or a CLI override.
void apply_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value,
                        const std::filesystem::path& base_dir = {});

// Generators and model adapters used by a pipeline. Borrowed pointers; any
// may be null except captioner, embedder and generator.
struct Providers {
  Captioner* captioner = nullptr;
  EmbeddingProvider* embedder = nullptr;
  Generator* generator = nullptr;
  Generator* fallback = nullptr;  // used, and flagged degraded, when generator fails
  Reviewer* reviewer = nullptr;
  Rewriter* rewriter = nullptr;
};

// Owning set of providers built from a config. Mock providers read the KB,
// so it must outlive this object and be fully populated first.
class ProviderSet {
 public:
  ProviderSet(const ExperimentConfig& cfg, const KnowledgeBase& kb);
  ProviderSet(const ProviderSet&) = delete;
  ProviderSet& operator=(const ProviderSet&) = delete;

  Providers view() const;

 private:
  std::unique_ptr<Captioner> captioner_;
  std::unique_ptr<EmbeddingProvider> embedder_;
  std::unique_ptr<ModelServerClient> client_;
  std::unique_ptr<Generator> generator_;
  std::unique_ptr<Generator> fallback_;
  bool reviewer_ = false;
  bool rewriter_ = false;
};

// Computes missing image embeddings (from image_path) and document text
// embeddings. Returns the number of entries updated.
std::size_t ensure_embeddings(KnowledgeBase& kb, EmbeddingProvider& embedder);

struct TransmissionRecord {
  ContentHash content_hash{};
  std::vector<Bytes> frames;  // TEXT, EDGE
  std::string caption;
  EdgeMap edges;
  EdgeScheme scheme = EdgeScheme::RAW;
  TextCodec text_codec = TextCodec::IDENTITY;
  std::size_t text_payload_bytes = 0;
  std::size_t edge_payload_bytes = 0;
  std::size_t source_bytes = 0;  // width * height * channels of the input
  bool cache_hit = false;
  std::optional<RasterImage> cached_reconstruction;

  std::size_t frame_bytes() const;
};

struct ReceiveOptions {
  bool rag_text = true;
  bool rag_image = true;
  std::uint64_t seed = 0;
  bool text_exposed = false;  // TEXT payload went through the channel
};

struct ReceiveOutcome {
  ReconstructionResult reconstruction;
  std::optional<MetricsReport> metrics;  // present when a reference image was given
  std::string caption;
  EdgeMap edges;
  PromptBundle prompt;
  RetrievalBundle text_retrieval;
  RetrievalBundle image_retrieval;
  bool text_integrity = false;
  bool edge_integrity = false;
  bool edge_decode_failed = false;
  bool generator_fallback = false;
  bool degraded = false;
};

struct PipelineOptions {
  CannyParams canny;
  RetrieverParams retriever;
  std::size_t char_budget = 512;
  std::size_t max_reference_images = 1;
  int steps = 30;
  bool use_cache = false;
};

PipelineOptions pipeline_options(const ExperimentConfig& cfg);

// transmit -> channel -> receive. Thread-safe for concurrent runs as long as
// the providers are; cache access is serialized internally.
class Pipeline {
 public:
  Pipeline(KnowledgeBase& kb, Providers providers, PipelineOptions options = {});

  // Captions the image (unless a caption is given), extracts and encodes the
  // edge map and compresses the caption. A cache hit returns the stored frames.
  TransmissionRecord transmit(const RasterImage& image, std::optional<std::string> caption = std::nullopt) const;

  // Frame i is corrupted with seed channel.seed ^ i.
  std::vector<Bytes> send(const std::vector<Bytes>& frames, const ChannelConfig& channel) const;

  // Decodes, retrieves, builds the prompt and reconstructs. An undecodable
  // EDGE payload is replaced by an empty map. With a reference, metrics are
  // measured against it; `sent` frames enable measured BER and compression.
  ReceiveOutcome receive(const std::vector<Bytes>& frames, const ReceiveOptions& options,
                         const RasterImage* reference = nullptr, const std::vector<Bytes>* sent = nullptr,
                         std::size_t source_bytes = 0) const;

  // One full run; writes the cache when enabled and the frames arrived intact.
  ReceiveOutcome run(const RasterImage& image, const TransmissionRecord& record, const ChannelConfig& channel,
                     const ReceiveOptions& options) const;

  const KnowledgeBase& kb() const noexcept { return kb_; }

 private:
  MetricsReport measure(const RasterImage& reconstruction, const RasterImage& reference, const std::string& caption,
                        const std::vector<Bytes>& received, const std::vector<Bytes>* sent,
                        std::size_t source_bytes, bool text_exposed) const;

  KnowledgeBase& kb_;
  Providers providers_;
  PipelineOptions options_;
  Retriever retriever_;
  mutable std::mutex cache_mutex_;
};

// Bit error rate over the EDGE payloads (and TEXT payloads when include_text)
// of frame pairs with equal length.
double payload_ber(const std::vector<Bytes>& sent, const std::vector<Bytes>& received, bool include_text = false);

struct ExperimentRow {
  std::string config_id;
  double ber = 0.0;
  std::uint64_t seed = 0;
  bool rag_text = false;
  bool rag_image = false;
  // Means over the inputs of the run that completed.
  std::optional<double> ms_ssim;
  std::optional<double> clip_similarity;
  std::optional<double> measured_ber;
  std::optional<double> compression_ratio;
  std::optional<double> lpips;
  std::optional<double> pieapp;
  bool degraded = false;
  std::string error;
};

// Channel seed for one (seed, ber index, config index, input index) run.
std::uint64_t run_seed(std::uint64_t seed, std::size_t ber_index, std::size_t config_index, std::size_t input_index);

// All runs of the sweep, ordered by ber, then config, then seed. Same config
// and providers give the same rows whatever the thread count.
std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg, KnowledgeBase& kb, const Providers& providers);
// Loads the KB from cfg.kb_path (or starts empty), builds providers, runs.
std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg);

// Data rows, then a "# summary" block with mean and sample standard deviation
// per (config, ber) cell.
std::string format_csv(const std::vector<ExperimentRow>& rows);

// Caption from "<stem>.txt" next to the image, when present.
std::optional<std::string> sidecar_caption(const std::filesystem::path& image_path);

}  // namespace ragsc
