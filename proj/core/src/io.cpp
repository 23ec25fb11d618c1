#include "fnns/io.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "fnns/error.hpp"

namespace fnns::io {

using nlohmann::json;
namespace fs = std::filesystem;

// --- files -----------------------------------------------------------------

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> data) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw FormatError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw FormatError("cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

void write_file_atomic(const fs::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace {

// Bounds-checked little/big-endian reader over a byte span.
class Cursor {
 public:
  Cursor(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::span<const std::uint8_t> take(std::size_t n, std::string_view field) {
    if (n > remaining()) {
      throw FormatError(what_ + ": truncated " + std::string(field) + ": expected " + std::to_string(n) +
                        " bytes at offset " + std::to_string(pos_) + ", have " + std::to_string(remaining()));
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint64_t le(std::size_t width, std::string_view field) {
    auto s = take(width, field);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return v;
  }

  std::uint32_t be32(std::string_view field) {
    auto s = take(4, field);
    return static_cast<std::uint32_t>(s[0]) << 24 | static_cast<std::uint32_t>(s[1]) << 16 |
           static_cast<std::uint32_t>(s[2]) << 8 | static_cast<std::uint32_t>(s[3]);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

void put_le(Bytes& out, std::uint64_t v, std::size_t width) {
  for (std::size_t i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_be32(Bytes& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_floats(Bytes& out, std::span<const float> values) {
  for (float v : values) put_le(out, float_bits(v), 4);
}

}  // namespace

// --- IDX ---------------------------------------------------------------------

namespace {

struct IdxArray {
  std::vector<std::size_t> dims;
  std::span<const std::uint8_t> payload;
};

IdxArray parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic) {
  Cursor c(bytes, "IDX");
  const std::uint32_t magic = c.be32("magic");
  if (magic != expected_magic) {
    std::ostringstream msg;
    msg << "IDX: bad magic 0x" << std::hex << magic << ", expected 0x" << expected_magic;
    throw FormatError(msg.str());
  }
  const std::size_t rank = magic & 0xFF;
  IdxArray a;
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    const std::uint32_t d = c.be32("dimension");
    a.dims.push_back(d);
    total *= d;
    if (total > (std::uint64_t{1} << 40)) throw FormatError("IDX: dimensions overflow");
  }
  if (c.remaining() != total) {
    throw FormatError("IDX: payload has " + std::to_string(c.remaining()) + " bytes, expected " +
                      std::to_string(total) + " from the header");
  }
  a.payload = c.take(static_cast<std::size_t>(total), "payload");
  return a;
}

}  // namespace

std::vector<Tensor> parse_idx_images(std::span<const std::uint8_t> bytes) {
  const auto a = parse_idx(bytes, kIdxImagesMagic);
  const std::size_t n = a.dims[0], h = a.dims[1], w = a.dims[2];
  if (h == 0 || w == 0) throw FormatError("IDX: image dimensions must be positive");
  std::vector<Tensor> images;
  images.reserve(n);
  const std::size_t px = h * w;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> data(px);
    for (std::size_t k = 0; k < px; ++k) data[k] = static_cast<float>(a.payload[i * px + k]) / 255.0f;
    images.emplace_back(Shape{h, w, 1}, std::move(data));
  }
  return images;
}

std::vector<std::size_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  const auto a = parse_idx(bytes, kIdxLabelsMagic);
  return {a.payload.begin(), a.payload.end()};
}

std::vector<Tensor> load_idx_images(const fs::path& path) {
  try {
    return parse_idx_images(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::size_t> load_idx_labels(const fs::path& path) {
  try {
    return parse_idx_labels(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Dataset load_idx_dataset(const fs::path& images, const fs::path& labels) {
  Dataset d;
  d.images = load_idx_images(images);
  d.labels = load_idx_labels(labels);
  if (d.images.size() != d.labels.size()) {
    throw FormatError("IDX: " + std::to_string(d.images.size()) + " images but " + std::to_string(d.labels.size()) +
                      " labels");
  }
  return d;
}

Bytes encode_idx_images(const std::vector<Tensor>& images) {
  Shape shape = images.empty() ? Shape{1, 1, 1} : images.front().shape();
  if (shape.size() != 3 || shape[2] != 1) throw ShapeError("IDX images must be [h, w, 1]");
  Bytes out;
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(images.size()));
  put_be32(out, static_cast<std::uint32_t>(shape[0]));
  put_be32(out, static_cast<std::uint32_t>(shape[1]));
  for (const auto& img : images) {
    if (img.shape() != shape) throw ShapeError("IDX images must share one shape");
    for (float v : img.data()) out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  }
  return out;
}

Bytes encode_idx_labels(const std::vector<std::size_t>& labels) {
  Bytes out;
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (auto l : labels) {
    if (l > 255) throw std::invalid_argument("IDX labels must fit in a byte");
    out.push_back(static_cast<std::uint8_t>(l));
  }
  return out;
}

std::string InputRef::id() const { return path.filename().string() + "#" + std::to_string(index); }

InputRef parse_input_ref(std::string_view text) {
  InputRef r;
  const auto hash = text.rfind('#');
  if (hash == std::string_view::npos) {
    r.path = std::string(text);
    return r;
  }
  r.path = std::string(text.substr(0, hash));
  const auto digits = text.substr(hash + 1);
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char ch) { return ch >= '0' && ch <= '9'; }) ||
      digits.size() > 9) {
    throw std::invalid_argument("--input: index after '#' must be a nonnegative integer, got '" +
                                std::string(digits) + "'");
  }
  r.index = std::stoul(std::string(digits));
  return r;
}

// --- container ---------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'F', 'N', 'N', 'S'};

json shape_json(const Shape& s) { return json(s); }

Bytes pack(std::string_view kind, const json& manifest, const Bytes& blob) {
  Bytes out(kMagic, kMagic + 4);
  put_le(out, kContainerVersion, 2);
  put_le(out, kind.size(), 2);
  out.insert(out.end(), kind.begin(), kind.end());
  const std::string m = manifest.dump();
  put_le(out, m.size(), 4);
  out.insert(out.end(), m.begin(), m.end());
  put_le(out, blob.size(), 8);
  out.insert(out.end(), blob.begin(), blob.end());
  return out;
}

json model_manifest(const Model& model, Bytes& blob) {
  json layers = json::array();
  for (const auto& l : model.layers) {
    json jl{{"kind", std::string(to_string(l.kind))}};
    if (l.has_parameters()) {
      jl["weights"] = shape_json(l.weights.shape());
      jl["bias"] = shape_json(l.bias.shape());
      put_floats(blob, l.weights.data());
      put_floats(blob, l.bias.data());
    }
    layers.push_back(std::move(jl));
  }
  return {{"name", model.name}, {"input_shape", shape_json(model.input_shape)}, {"layers", std::move(layers)}};
}

// Manifest field access that reports FormatError instead of json exceptions.
const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("manifest: missing field '") + key + "'");
  return j.at(key);
}

std::string string_field(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw FormatError(std::string("manifest: field '") + key + "' must be a string");
  return v.get<std::string>();
}

Shape shape_field(const json& j, const char* key, std::uint64_t& budget) {
  const auto& v = field(j, key);
  if (!v.is_array() || v.size() > 8) throw FormatError(std::string("manifest: '") + key + "' must be a short array");
  Shape s;
  std::uint64_t count = 1;
  for (const auto& d : v) {
    if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0 || d.get<std::uint64_t>() > (1u << 30)) {
      throw FormatError(std::string("manifest: '") + key + "' dimensions must be positive integers");
    }
    s.push_back(d.get<std::size_t>());
    count *= d.get<std::uint64_t>();
    if (count > budget) {
      throw FormatError(std::string("manifest: '") + key + "' declares more elements than the blob holds");
    }
  }
  budget -= count;
  return s;
}

class BlobReader {
 public:
  explicit BlobReader(std::span<const std::uint8_t> blob) : blob_(blob) {}

  Tensor next(Shape shape) {
    const std::size_t n = element_count(shape);
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (std::size_t k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(blob_[pos_ + k]) << (8 * k);
      data[i] = bits_float(bits);
      pos_ += 4;
    }
    return Tensor(std::move(shape), std::move(data));
  }
  std::size_t consumed() const { return pos_; }

 private:
  std::span<const std::uint8_t> blob_;
  std::size_t pos_ = 0;
};

Model parse_model_manifest(const json& m, std::span<const std::uint8_t> blob) {
  std::uint64_t budget = blob.size() / 4;
  std::uint64_t input_budget = std::uint64_t{1} << 40;
  Model model;
  model.name = string_field(m, "name");
  model.input_shape = shape_field(m, "input_shape", input_budget);
  const auto& layers = field(m, "layers");
  if (!layers.is_array()) throw FormatError("manifest: 'layers' must be an array");
  BlobReader reader(blob);
  for (const auto& jl : layers) {
    const auto kind_name = string_field(jl, "kind");
    LayerKind kind;
    try {
      kind = layer_kind_from_string(kind_name);
    } catch (const LookupError& e) {
      throw FormatError(std::string("manifest: ") + e.what());
    }
    Layer layer{kind, {}, {}};
    if (layer.has_parameters()) {
      Shape ws = shape_field(jl, "weights", budget);
      Shape bs = shape_field(jl, "bias", budget);
      Tensor w = reader.next(std::move(ws));
      Tensor b = reader.next(std::move(bs));
      try {
        switch (kind) {
          case LayerKind::conv2d: layer = Layer::conv2d(std::move(w), std::move(b)); break;
          case LayerKind::dense: layer = Layer::dense(std::move(w), std::move(b)); break;
          default: layer = Layer::scale(std::move(w), std::move(b)); break;
        }
      } catch (const ShapeError& e) {
        throw FormatError(std::string("manifest: ") + e.what());
      }
    }
    model.layers.push_back(std::move(layer));
  }
  if (reader.consumed() != blob.size()) {
    throw FormatError("blob holds " + std::to_string(blob.size()) + " bytes but manifest declares " +
                      std::to_string(reader.consumed()));
  }
  try {
    model.shape_chain();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("manifest: layers do not chain: ") + e.what());
  }
  return model;
}

}  // namespace

Bytes encode_model(const Model& model) {
  Bytes blob;
  json m = model_manifest(model, blob);
  return pack("model", m, blob);
}

Bytes encode_plan(const ComputePlan& plan) {
  Bytes blob;
  json m = model_manifest(plan.model, blob);
  m["plan"] = {{"source_model", plan.source_model},
               {"plan_profile", plan.plan_profile},
               {"prune_threshold", plan.prune_threshold},
               {"prune_threshold_bits", float_bits(plan.prune_threshold)}};
  return pack("plan", m, blob);
}

Bytes encode_tensor(const Tensor& tensor, std::string_view name) {
  Bytes blob;
  put_floats(blob, tensor.data());
  json m{{"name", std::string(name)}, {"shape", shape_json(tensor.shape())}};
  return pack("tensor", m, blob);
}

Container decode_container(std::span<const std::uint8_t> bytes) {
  Cursor c(bytes, "FNNS");
  auto magic = c.take(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw FormatError("FNNS: bad magic, not an FNNS container");
  const auto version = c.le(2, "version");
  if (version != kContainerVersion) {
    throw FormatError("FNNS: unsupported format version " + std::to_string(version) + " (this build reads " +
                      std::to_string(kContainerVersion) + ")");
  }
  const auto kind_len = c.le(2, "kind length");
  auto kind_bytes = c.take(kind_len, "kind");
  const std::string kind(kind_bytes.begin(), kind_bytes.end());
  const auto manifest_len = c.le(4, "manifest length");
  auto manifest_bytes = c.take(manifest_len, "manifest");
  const auto blob_len = c.le(8, "blob length");
  if (blob_len % 4 != 0) throw FormatError("FNNS: blob length " + std::to_string(blob_len) + " is not a multiple of 4");
  if (blob_len != c.remaining()) {
    throw FormatError("FNNS: blob length field says " + std::to_string(blob_len) + " bytes, file has " +
                      std::to_string(c.remaining()));
  }
  auto blob = c.take(blob_len, "blob");

  json m = json::parse(manifest_bytes.begin(), manifest_bytes.end(), nullptr, false);
  if (m.is_discarded() || !m.is_object()) throw FormatError("FNNS: manifest is not a JSON object");

  try {
    if (kind == "model") return parse_model_manifest(m, blob);
    if (kind == "plan") {
      ComputePlan plan;
      plan.model = parse_model_manifest(m, blob);
      const auto& p = field(m, "plan");
      plan.source_model = string_field(p, "source_model");
      plan.plan_profile = string_field(p, "plan_profile");
      const auto& bits = field(p, "prune_threshold_bits");
      if (!bits.is_number_unsigned() || bits.get<std::uint64_t>() > 0xFFFFFFFFull) {
        throw FormatError("manifest: 'prune_threshold_bits' must be a 32-bit unsigned integer");
      }
      plan.prune_threshold = bits_float(bits.get<std::uint32_t>());
      if (!(plan.prune_threshold >= 0.0f)) throw FormatError("manifest: prune threshold must be nonnegative");
      return plan;
    }
    if (kind == "tensor") {
      std::uint64_t budget = blob.size() / 4;
      Shape s = shape_field(m, "shape", budget);
      if (element_count(s) * 4 != blob.size()) throw FormatError("FNNS: tensor shape does not match blob length");
      BlobReader reader(blob);
      return reader.next(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("FNNS: malformed manifest: ") + e.what());
  }
  throw FormatError("FNNS: unknown container kind '" + kind + "'");
}

void save_model(const fs::path& path, const Model& model) { write_file_atomic(path, encode_model(model)); }
void save_plan(const fs::path& path, const ComputePlan& plan) { write_file_atomic(path, encode_plan(plan)); }
void save_tensor(const fs::path& path, const Tensor& tensor) { write_file_atomic(path, encode_tensor(tensor)); }

Container load_container(const fs::path& path) {
  try {
    return decode_container(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

namespace {

template <typename T>
T load_kind(const fs::path& path, const char* kind) {
  auto c = load_container(path);
  if (auto* v = std::get_if<T>(&c)) return std::move(*v);
  throw FormatError(path.string() + ": container is not a " + kind);
}

}  // namespace

Model load_model(const fs::path& path) { return load_kind<Model>(path, "model"); }
ComputePlan load_plan(const fs::path& path) { return load_kind<ComputePlan>(path, "plan"); }
Tensor load_tensor(const fs::path& path) { return load_kind<Tensor>(path, "tensor"); }

// --- fingerprint DB ----------------------------------------------------------

std::string encode_db_record(const FingerprintKey& key, const OutputDigest& d) {
  return json{{"model", key.model}, {"input", key.input}, {"profile", key.profile}, {"digest", d.hex()}}.dump();
}

FingerprintDB parse_db(std::string_view text) {
  FingerprintDB db;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto where = "fingerprint db line " + std::to_string(line_no) + ": ";
    json j = json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FormatError(where + "not a JSON object");
    try {
      FingerprintKey key{string_field(j, "model"), string_field(j, "input"), string_field(j, "profile")};
      db.enroll(key, OutputDigest::from_hex(string_field(j, "digest")), true);
    } catch (const FormatError& e) {
      throw FormatError(where + e.what());
    }
  }
  return db;
}

std::string encode_db(const FingerprintDB& db) {
  std::string out;
  for (const auto& [key, d] : db.records()) out += encode_db_record(key, d) + "\n";
  return out;
}

FingerprintDB load_db(const fs::path& path) {
  if (!fs::exists(path)) return {};
  const auto bytes = read_file(path);
  try {
    return parse_db(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_db(const fs::path& path, const FingerprintDB& db) { write_file_atomic(path, encode_db(db)); }

void append_db_record(const fs::path& path, const FingerprintKey& key, const OutputDigest& d) {
  const std::string line = encode_db_record(key, d) + "\n";
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw FormatError("cannot open '" + path.string() + "' for appending");
  ::flock(fd, LOCK_EX);
  const auto written = ::write(fd, line.data(), line.size());
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (written != static_cast<ssize_t>(line.size())) throw FormatError("short write to '" + path.string() + "'");
}

// --- reports -----------------------------------------------------------------

BoundaryBlock BoundaryBlock::from(const BoundaryResult& r, const BoundaryParams& params) {
  BoundaryBlock b;
  b.original_label = r.original_label;
  b.iterations = r.iterations;
  b.final_gap = r.final_gap;
  if (std::isfinite(r.psnr_db)) b.psnr_db = r.psnr_db;
  b.flipped = r.flipped;
  b.params = params;
  b.predictions = r.predictions;
  return b;
}

nlohmann::json report_to_json(const ReportDocument& doc) {
  const auto& r = doc.report;
  json classes = json::array();
  json labels = json::array();
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    classes.push_back(r.classes[c]);
    labels.push_back(class_label(c));
  }
  json digests = json::object();
  for (std::size_t i = 0; i < r.subjects.size(); ++i) digests[r.subjects[i]] = r.digests[i].hex();
  json j{{"schema_version", kReportSchemaVersion},
         {"model", doc.model},
         {"input", doc.input},
         {"subjects", r.subjects},
         {"classes", classes},
         {"class_labels", labels},
         {"digests", digests}};
  if (doc.boundary) {
    const auto& b = *doc.boundary;
    json preds = json::array();
    for (const auto& p : b.predictions) {
      preds.push_back({{"profile", p.profile},
                       {"label", p.label},
                       {"confidence", p.confidence},
                       {"second_confidence", p.second_confidence},
                       {"gap", p.gap}});
    }
    j["boundary"] = {{"original_label", b.original_label},
                     {"iterations", b.iterations},
                     {"final_gap", b.final_gap},
                     {"psnr_db", b.psnr_db ? json(*b.psnr_db) : json(nullptr)},
                     {"flipped", b.flipped},
                     {"alpha", b.params.alpha},
                     {"gap_threshold", b.params.gap_threshold},
                     {"max_iter", b.params.max_iter},
                     {"predictions", preds}};
  }
  return j;
}

namespace {

float float_field(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number()) throw FormatError(std::string("report: '") + key + "' must be a number");
  return static_cast<float>(v.get<double>());
}

std::size_t count_field(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_unsigned()) throw FormatError(std::string("report: '") + key + "' must be a nonnegative integer");
  return v.get<std::size_t>();
}

}  // namespace

ReportDocument report_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw FormatError("report: not a JSON object");
    if (field(j, "schema_version") != kReportSchemaVersion) throw FormatError("report: unsupported schema_version");
    ReportDocument doc;
    doc.model = string_field(j, "model");
    doc.input = string_field(j, "input");
    auto& r = doc.report;
    r.subjects = field(j, "subjects").get<std::vector<std::string>>();
    r.classes = field(j, "classes").get<std::vector<std::vector<std::string>>>();
    const auto& digests = field(j, "digests");
    for (const auto& s : r.subjects) r.digests.push_back(OutputDigest::from_hex(string_field(digests, s.c_str())));

    // Partition check: every subject in exactly one nonempty class, equal digests within a class.
    std::set<std::string> seen;
    for (const auto& cls : r.classes) {
      if (cls.empty()) throw FormatError("report: empty class");
      for (const auto& s : cls) {
        if (std::find(r.subjects.begin(), r.subjects.end(), s) == r.subjects.end()) {
          throw FormatError("report: class member '" + s + "' is not a subject");
        }
        if (!seen.insert(s).second) throw FormatError("report: subject '" + s + "' in two classes");
        if (!(r.digest_of(s) == r.digest_of(cls.front()))) {
          throw FormatError("report: class members '" + cls.front() + "' and '" + s + "' have different digests");
        }
      }
    }
    if (seen.size() != r.subjects.size()) throw FormatError("report: classes do not cover all subjects");

    if (j.contains("boundary")) {
      const auto& jb = j.at("boundary");
      BoundaryBlock b;
      b.original_label = count_field(jb, "original_label");
      b.iterations = count_field(jb, "iterations");
      b.final_gap = float_field(jb, "final_gap");
      const auto& p = field(jb, "psnr_db");
      if (!p.is_null()) b.psnr_db = p.get<double>();
      b.flipped = field(jb, "flipped").get<bool>();
      b.params.alpha = float_field(jb, "alpha");
      b.params.gap_threshold = float_field(jb, "gap_threshold");
      b.params.max_iter = count_field(jb, "max_iter");
      for (const auto& jp : field(jb, "predictions")) {
        b.predictions.push_back({string_field(jp, "profile"), count_field(jp, "label"), float_field(jp, "confidence"),
                                 float_field(jp, "second_confidence"), float_field(jp, "gap")});
      }
      doc.boundary = std::move(b);
    }
    return doc;
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

nlohmann::json sweep_to_json(const std::vector<SweepColumn>& sweep, std::string_view input) {
  json columns = json::array();
  for (const auto& col : sweep) {
    ReportDocument doc{col.spec.name(), std::string(input), col.report, std::nullopt};
    auto j = report_to_json(doc);
    j["class_count"] = col.report.class_count();
    columns.push_back(std::move(j));
  }
  return {{"schema_version", kReportSchemaVersion}, {"input", std::string(input)}, {"columns", columns}};
}

bool operator==(const BoundaryBlock& a, const BoundaryBlock& b) {
  return a.original_label == b.original_label && a.iterations == b.iterations &&
         float_bits(a.final_gap) == float_bits(b.final_gap) && a.psnr_db == b.psnr_db && a.flipped == b.flipped &&
         float_bits(a.params.alpha) == float_bits(b.params.alpha) &&
         float_bits(a.params.gap_threshold) == float_bits(b.params.gap_threshold) &&
         a.params.max_iter == b.params.max_iter && a.predictions == b.predictions;
}

bool operator==(const ReportDocument& a, const ReportDocument& b) {
  return a.model == b.model && a.input == b.input && a.report == b.report && a.boundary == b.boundary;
}

// --- previews ----------------------------------------------------------------

Bytes encode_pgm(const Tensor& image) {
  if (image.rank() != 3) throw ShapeError("PGM preview needs an [h, w, c] tensor");
  const std::size_t h = image.shape()[0], w = image.shape()[1], c = image.shape()[2];
  const std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  Bytes out(header.begin(), header.end());
  for (std::size_t i = 0; i < h * w; ++i) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(image[i * c], 0.0f, 1.0f) * 255.0f)));
  }
  return out;
}

}  // namespace fnns::io
