#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <nlohmann/json.hpp>

#include "ragsc/error.hpp"
#include "ragsc/pipeline.hpp"

using namespace ragsc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ProviderFlags {
  std::string providers = "mock";
  std::string backend = "stub";
  std::string service_url;
  long timeout_ms = 120000;
  bool fallback = false;

  void add(CLI::App* app) {
    app->add_option("--providers", providers, "Caption/embedding providers: mock or service");
    app->add_option("--backend", backend, "Generator backend: stub or service");
    app->add_option("--service-url", service_url, "Model server base URL");
    app->add_option("--service-timeout-ms", timeout_ms, "Model server timeout");
    app->add_flag("--fallback-to-stub", fallback, "Use the stub when the generator service fails");
  }

  ExperimentConfig config() const {
    ExperimentConfig cfg;
    apply_config_value(cfg, "providers", providers);
    apply_config_value(cfg, "backend", backend);
    if (!service_url.empty()) {
      apply_config_value(cfg, "service_url", service_url);
      apply_config_value(cfg, "service_timeout_ms", std::to_string(timeout_ms));
    }
    cfg.fallback_to_stub = fallback;
    return cfg;
  }
};

struct ChannelFlags {
  double ber = 0.0;
  std::uint64_t seed = 0;
  bool expose_text = false;
  std::string fec = "none";

  void add(CLI::App* app) {
    app->add_option("--ber", ber, "Bit error probability of the channel")->check(CLI::Range(0.0, 0.5));
    app->add_option("--seed", seed, "Channel seed");
    app->add_flag("--expose-text", expose_text, "Send the caption frame through the noisy channel too");
    app->add_option("--fec", fec, "Forward error correction: none or repetition3");
  }

  ChannelConfig config() const {
    ChannelConfig c;
    c.ber = ber;
    c.seed = seed;
    c.protect_text = !expose_text;
    c.fec = parse_fec(fec);
    c.validate();
    return c;
  }
};

KnowledgeBase open_kb(const std::string& dir) {
  if (dir.empty()) return KnowledgeBase();
  if (!fs::exists(fs::path(dir) / "manifest.jsonl")) {
    KnowledgeBase kb;
    kb.set_root(dir);
    return kb;
  }
  return KnowledgeBase::load(dir);
}

// Mock providers read KB embeddings at construction, so fill them in first.
void prepare(KnowledgeBase& kb, const ExperimentConfig& cfg) {
  const ProviderSet providers(cfg, kb);
  ensure_embeddings(kb, *providers.view().embedder);
}

Bytes concat(const std::vector<Bytes>& frames) {
  Bytes out;
  for (const auto& f : frames) out.insert(out.end(), f.begin(), f.end());
  return out;
}

std::vector<Bytes> split_frames(const Bytes& stream) {
  std::vector<Bytes> out;
  std::size_t pos = 0;
  for (const auto& d : decode_frame_stream(stream)) {
    out.emplace_back(stream.begin() + static_cast<std::ptrdiff_t>(pos),
                     stream.begin() + static_cast<std::ptrdiff_t>(pos + d.consumed));
    pos += d.consumed;
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

json metrics_json(const MetricsReport& m) {
  json j{{"ms_ssim", m.ms_ssim},
         {"clip_similarity", m.clip_similarity},
         {"measured_ber", m.measured_ber},
         {"compression_ratio", m.compression_ratio}};
  if (m.clip_text_similarity) j["clip_text_similarity"] = *m.clip_text_similarity;
  return j;
}

json hits_json(const std::vector<ScoredHit>& hits) {
  json out = json::array();
  for (const auto& h : hits) out.push_back({{"id", h.entry_id}, {"score", h.score}});
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented semantic image transmission"};
  app.require_subcommand(1);

  // transmit
  auto* transmit = app.add_subcommand("transmit", "Caption and encode an image into frames");
  std::string tx_image, tx_out, tx_caption, tx_kb;
  ProviderFlags tx_providers;
  ChannelFlags tx_channel;
  transmit->add_option("image", tx_image, "Input image (PNG or PNM)")->required();
  transmit->add_option("-o,--out", tx_out, "Frame stream output file")->required();
  transmit->add_option("--caption", tx_caption, "Caption to send instead of the captioner's");
  transmit->add_option("--kb", tx_kb, "Knowledge base directory (mock captioner source)");
  tx_providers.add(transmit);
  tx_channel.add(transmit);

  // receive
  auto* receive = app.add_subcommand("receive", "Decode frames and reconstruct the image");
  std::string rx_frames, rx_out, rx_kb, rx_reference;
  bool rx_no_text = false, rx_no_image = false;
  std::uint64_t rx_seed = 0;
  std::size_t rx_budget = 512;
  ProviderFlags rx_providers;
  receive->add_option("frames", rx_frames, "Frame stream file")->required();
  receive->add_option("-o,--out", rx_out, "Reconstructed image output (PNG)")->required();
  receive->add_option("--kb", rx_kb, "Knowledge base directory");
  receive->add_option("--reference", rx_reference, "Source image to measure against");
  receive->add_option("--seed", rx_seed, "Generation seed");
  receive->add_option("--char-budget", rx_budget, "Prompt budget in bytes");
  receive->add_flag("--no-rag-text", rx_no_text, "Skip document retrieval");
  receive->add_flag("--no-rag-image", rx_no_image, "Skip image retrieval");
  rx_providers.add(receive);

  // experiment
  auto* experiment = app.add_subcommand("experiment", "Run a BER sweep from a config file");
  std::string ex_config, ex_output;
  std::vector<std::string> ex_overrides;
  experiment->add_option("-c,--config", ex_config, "Config file (key = value lines)")->required();
  experiment->add_option("--set", ex_overrides, "Override a config key: key=value");
  experiment->add_option("-o,--output", ex_output, "CSV output (default: config output_csv or stdout)");

  // kb
  auto* kb_cmd = app.add_subcommand("kb", "Manage a knowledge base directory");
  kb_cmd->require_subcommand(1);
  auto* kb_insert = kb_cmd->add_subcommand("insert", "Insert a document or image entry");
  std::string kb_dir, kb_id, kb_text, kb_image;
  std::vector<std::string> kb_tags;
  kb_insert->add_option("--kb", kb_dir, "Knowledge base directory")->required();
  kb_insert->add_option("--id", kb_id, "Entry id")->required();
  kb_insert->add_option("--text", kb_text, "Document text, or image caption");
  kb_insert->add_option("--image", kb_image, "Image file for an IMAGE entry");
  kb_insert->add_option("--tag", kb_tags, "Tag (repeatable)");
  auto* kb_list = kb_cmd->add_subcommand("list", "List entries as JSON lines");
  kb_list->add_option("--kb", kb_dir, "Knowledge base directory")->required();
  auto* kb_persist = kb_cmd->add_subcommand("persist", "Load, embed and write a knowledge base");
  std::string kb_out;
  ProviderFlags kb_providers;
  kb_persist->add_option("--kb", kb_dir, "Source knowledge base directory")->required();
  kb_persist->add_option("-o,--out", kb_out, "Destination directory (default: in place)");
  kb_providers.add(kb_persist);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*transmit) {
      KnowledgeBase kb = open_kb(tx_kb);
      const ExperimentConfig cfg = tx_providers.config();
      prepare(kb, cfg);
      const ProviderSet providers(cfg, kb);
      const Pipeline pipeline(kb, providers.view());
      const RasterImage image = read_image(tx_image);
      std::optional<std::string> caption;
      if (!tx_caption.empty()) caption = tx_caption;
      const TransmissionRecord rec = pipeline.transmit(image, caption);
      const auto sent = pipeline.send(rec.frames, tx_channel.config());
      const Bytes stream = concat(sent);
      write_file(tx_out, stream);
      std::cout << json{{"caption", rec.caption},
                        {"content_hash", to_hex(rec.content_hash)},
                        {"edge_scheme", to_string(rec.scheme)},
                        {"edge_count", rec.edges.count()},
                        {"text_payload_bytes", rec.text_payload_bytes},
                        {"edge_payload_bytes", rec.edge_payload_bytes},
                        {"frame_bytes", stream.size()},
                        {"source_bytes", rec.source_bytes},
                        {"compression_ratio", compression_ratio(rec.source_bytes, stream.size())}}
                       .dump()
                << "\n";
    } else if (*receive) {
      KnowledgeBase kb = open_kb(rx_kb);
      const ExperimentConfig cfg = rx_providers.config();
      prepare(kb, cfg);
      const ProviderSet providers(cfg, kb);
      PipelineOptions opts;
      opts.char_budget = rx_budget;
      const Pipeline pipeline(kb, providers.view(), opts);
      const auto frames = split_frames(read_file(rx_frames));
      std::optional<RasterImage> reference;
      if (!rx_reference.empty()) reference = read_image(rx_reference);
      const ReceiveOptions ro{!rx_no_text, !rx_no_image, rx_seed};
      const ReceiveOutcome out = pipeline.receive(frames, ro, reference ? &*reference : nullptr);
      write_image(out.reconstruction.image, rx_out);
      json j{{"caption", out.caption},
             {"prompt", out.prompt.text_prompt},
             {"reference_image_ids", out.prompt.reference_image_ids},
             {"documents", hits_json(out.text_retrieval.documents)},
             {"images", hits_json(out.image_retrieval.images)},
             {"generator_id", out.reconstruction.generator_id},
             {"text_integrity", out.text_integrity},
             {"edge_integrity", out.edge_integrity},
             {"edge_decode_failed", out.edge_decode_failed},
             {"degraded", out.degraded}};
      if (out.metrics) j["metrics"] = metrics_json(*out.metrics);
      std::cout << j.dump() << "\n";
    } else if (*experiment) {
      ExperimentConfig cfg = load_config(ex_config);
      for (const auto& kv : ex_overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) fail(ErrorCode::InvalidArgument, "--set expects key=value, got " + kv);
        apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1), fs::current_path());
      }
      if (!ex_output.empty()) cfg.output_csv = fs::path(ex_output);
      const bool to_stdout = !cfg.output_csv;
      const auto rows = run_experiment(cfg);
      if (to_stdout) std::cout << format_csv(rows);
    } else if (*kb_insert) {
      KnowledgeBase kb = open_kb(kb_dir);
      KnowledgeEntry e;
      e.id = kb_id;
      e.tags = kb_tags;
      e.inserted_at = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
      if (!kb_image.empty()) {
        e.modality = Modality::IMAGE;
        e.image_path = fs::absolute(kb_image);
        if (!kb_text.empty()) {
          e.text = kb_text;
        } else if (auto c = sidecar_caption(kb_image)) {
          e.text = *c;
        }
      } else {
        e.modality = Modality::DOCUMENT;
        e.text = kb_text;
      }
      kb.insert(std::move(e));
      kb.persist(kb_dir);
      std::cout << kb_id << "\n";
    } else if (*kb_list) {
      const KnowledgeBase kb = KnowledgeBase::load(kb_dir);
      for (const auto& [id, e] : kb.entries()) {
        json j{{"id", id}, {"modality", to_string(e.modality)}, {"tags", e.tags}};
        if (e.text) j["text"] = *e.text;
        if (e.image_path) j["image_path"] = e.image_path->string();
        j["text_embedding"] = e.text_embedding.has_value();
        j["image_embedding"] = e.image_embedding.has_value();
        std::cout << j.dump() << "\n";
      }
    } else if (*kb_persist) {
      KnowledgeBase kb = KnowledgeBase::load(kb_dir);
      const ExperimentConfig cfg = kb_providers.config();
      const ProviderSet providers(cfg, kb);
      const std::size_t updated = ensure_embeddings(kb, *providers.view().embedder);
      kb.persist(kb_out.empty() ? kb_dir : kb_out);
      std::cout << json{{"entries", kb.size()}, {"embedded", updated}}.dump() << "\n";
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error [{}]: {}\n", to_string(e.code()), e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 0;
}
