#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "ragsc/channel.hpp"
#include "ragsc/codec.hpp"
#include "ragsc/edgemap.hpp"
#include "ragsc/error.hpp"
#include "ragsc/metrics.hpp"
#include "ragsc/pipeline.hpp"

namespace py = pybind11;
using namespace ragsc;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

RasterImage image_from_array(const U8Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error("image must be HxW or HxWxC");
  const auto h = static_cast<std::uint32_t>(a.shape(0));
  const auto w = static_cast<std::uint32_t>(a.shape(1));
  const auto c = a.ndim() == 3 ? static_cast<std::uint32_t>(a.shape(2)) : 1u;
  std::vector<std::uint8_t> data(a.data(), a.data() + a.size());
  return RasterImage(w, h, c, std::move(data));
}

U8Array array_from_image(const RasterImage& img) {
  std::vector<py::ssize_t> shape{img.height(), img.width()};
  if (img.channels() != 1) shape.push_back(img.channels());
  U8Array out(shape);
  std::memcpy(out.mutable_data(), img.data().data(), img.byte_size());
  return out;
}

U8Array array_from_edges(const EdgeMap& e) {
  U8Array out({static_cast<py::ssize_t>(e.height()), static_cast<py::ssize_t>(e.width())});
  std::memcpy(out.mutable_data(), e.bits().data(), e.size());
  return out;
}

EdgeMap edges_from_array(const U8Array& a) {
  if (a.ndim() != 2) throw py::value_error("edge map must be HxW");
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(a.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = a.data()[i] != 0;
  return EdgeMap(static_cast<std::uint32_t>(a.shape(1)), static_cast<std::uint32_t>(a.shape(0)), std::move(bits));
}

Bytes to_bytes(const py::bytes& b) {
  const std::string s = b;
  return Bytes(s.begin(), s.end());
}

py::bytes from_bytes(const Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Edge-map semantic transmission with retrieval-augmented reconstruction";

  static py::exception<Error> error_type(m, "RagscError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(std::string(to_string(e.code())), e.what());
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("read_image", [](const std::filesystem::path& p) { return array_from_image(read_image(p)); });
  m.def("write_image", [](const U8Array& a, const std::filesystem::path& p) { write_image(image_from_array(a), p); });
  m.def("to_grayscale", [](const U8Array& a) { return array_from_image(to_grayscale(image_from_array(a))); });

  m.def(
      "canny",
      [](const U8Array& gray, double low, double high, double sigma) {
        return array_from_edges(canny(image_from_array(gray), CannyParams{low, high, sigma}));
      },
      py::arg("gray"), py::arg("low") = 100.0, py::arg("high") = 200.0, py::arg("sigma") = 1.4);

  m.def("encode_edges", [](const U8Array& edges, const std::string& scheme) {
    const EdgeMap e = edges_from_array(edges);
    EncodedEdgeMap enc;
    if (scheme == "auto") {
      enc = select_encoding(e);
    } else if (scheme == "RLE") {
      enc = encode_edges(e, EdgeScheme::RLE);
    } else if (scheme == "SPARSE") {
      enc = encode_edges(e, EdgeScheme::SPARSE);
    } else if (scheme == "RAW") {
      enc = encode_edges(e, EdgeScheme::RAW);
    } else {
      throw py::value_error("scheme must be auto, RLE, SPARSE or RAW");
    }
    return py::make_tuple(std::string(to_string(enc.scheme)), from_bytes(enc.body));
  }, py::arg("edges"), py::arg("scheme") = "auto");

  m.def("decode_edges", [](const std::string& scheme, const py::bytes& body, std::uint32_t width,
                           std::uint32_t height) {
    const Bytes b = to_bytes(body);
    if (scheme == "RLE") return array_from_edges(rle_decode(b, width, height));
    if (scheme == "SPARSE") return array_from_edges(sparse_decode(b, width, height));
    if (scheme == "RAW") return array_from_edges(raw_decode(b, width, height));
    throw py::value_error("scheme must be RLE, SPARSE or RAW");
  });

  m.def("compress_text", [](const std::string& text) {
    const CompressedText c = compress_text(std::string_view(text));
    return py::make_tuple(c.codec == TextCodec::GENERAL ? "GENERAL" : "IDENTITY", from_bytes(c.body));
  });
  m.def("decompress_text", [](const std::string& codec, const py::bytes& body, std::uint32_t original_len) {
    CompressedText c{codec == "GENERAL" ? TextCodec::GENERAL : TextCodec::IDENTITY, original_len, to_bytes(body)};
    const Bytes out = decompress_text(c);
    return std::string(out.begin(), out.end());
  });

  m.def("apply_bsc", [](const py::bytes& data, double p, std::uint64_t seed) {
    return from_bytes(apply_bsc(to_bytes(data), p, seed));
  });
  m.def("crc32", [](const py::bytes& data) { return crc32(to_bytes(data)); });
  m.def("measured_ber", [](const py::bytes& a, const py::bytes& b) { return measured_ber(to_bytes(a), to_bytes(b)); });

  m.def(
      "ms_ssim",
      [](const U8Array& a, const U8Array& b) { return ms_ssim(image_from_array(a), image_from_array(b)); },
      py::arg("a"), py::arg("b"));

  py::class_<KnowledgeBase>(m, "KnowledgeBase")
      .def(py::init<>())
      .def_static("load", &KnowledgeBase::load)
      .def("persist", &KnowledgeBase::persist)
      .def("__len__", &KnowledgeBase::size)
      .def("ids", [](const KnowledgeBase& kb) {
        std::vector<std::string> ids;
        for (const auto& [id, e] : kb.entries()) ids.push_back(id);
        return ids;
      })
      .def(
          "add_document",
          [](KnowledgeBase& kb, std::string id, std::string text, std::vector<std::string> tags) {
            KnowledgeEntry e;
            e.id = std::move(id);
            e.modality = Modality::DOCUMENT;
            e.text = std::move(text);
            e.tags = std::move(tags);
            return kb.insert(std::move(e));
          },
          py::arg("id"), py::arg("text"), py::arg("tags") = std::vector<std::string>{})
      .def(
          "add_image",
          [](KnowledgeBase& kb, std::string id, const std::filesystem::path& path, std::optional<std::string> caption) {
            KnowledgeEntry e;
            e.id = std::move(id);
            e.modality = Modality::IMAGE;
            e.image_path = std::filesystem::absolute(path);
            e.text = caption ? std::move(caption) : sidecar_caption(path);
            return kb.insert(std::move(e));
          },
          py::arg("id"), py::arg("path"), py::arg("caption") = std::nullopt)
      .def("text", [](const KnowledgeBase& kb, std::string_view id) -> std::optional<std::string> {
        const KnowledgeEntry* e = kb.get(id);
        if (!e) throw py::key_error(std::string(id));
        return e->text;
      })
      .def("embed_mock", [](KnowledgeBase& kb) {
        MockEmbeddingProvider embedder;
        return ensure_embeddings(kb, embedder);
      });

  m.def(
      "parse_config",
      [](const std::string& text) {
        const ExperimentConfig cfg = parse_config(text, std::filesystem::current_path());
        cfg.validate();
        return true;
      },
      "Validates config text; raises RagscError when invalid.");

  m.def(
      "run_experiment",
      [](const std::string& config_text, const std::vector<std::string>& overrides) {
        ExperimentConfig cfg = parse_config(config_text, std::filesystem::current_path());
        for (const auto& kv : overrides) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) throw py::value_error("override must be key=value");
          apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1), std::filesystem::current_path());
        }
        std::vector<ExperimentRow> rows;
        {
          py::gil_scoped_release release;
          rows = run_experiment(cfg);
        }
        return format_csv(rows);
      },
      py::arg("config_text"), py::arg("overrides") = std::vector<std::string>{},
      "Runs a sweep and returns the CSV text with its summary block.");
}
