#include "seqclass/model_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace seqclass {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw BundleError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw BundleError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw BundleError("rename " + tmp.string() + " -> " + path.string() +
                      " failed: " + ec.message());
}

std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BundleError(std::string(what) + " missing: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void append_f32_le(std::string& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  out.push_back(static_cast<char>(bits & 0xFF));
  out.push_back(static_cast<char>((bits >> 8) & 0xFF));
  out.push_back(static_cast<char>((bits >> 16) & 0xFF));
  out.push_back(static_cast<char>((bits >> 24) & 0xFF));
}

double read_f32_le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return static_cast<double>(f);
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// The manifest is machine-written with a fixed key order; reads are strict.
class ManifestReader {
 public:
  explicit ManifestReader(std::string_view text) {
    std::size_t start = 0;
    while (start < text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(start, end - start);
      if (!line.empty()) {
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
          throw BundleError("manifest: malformed line '" + std::string(line) + "'");
        pairs_.emplace_back(line.substr(0, eq), line.substr(eq + 1));
      }
      start = end + 1;
    }
  }

  std::string get(const std::string& key) {
    if (next_ >= pairs_.size() || pairs_[next_].first != key)
      throw BundleError("manifest: expected key '" + key + "' at position " +
                        std::to_string(next_ + 1));
    return pairs_[next_++].second;
  }

  std::uint64_t get_u64(const std::string& key) {
    const std::string v = get(key);
    std::uint64_t out = 0;
    for (char c : v) {
      if (c < '0' || c > '9')
        throw BundleError("manifest: bad integer for '" + key + "': " + v);
      out = out * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return out;
  }

  double get_real(const std::string& key) {
    const std::string v = get(key);
    try {
      std::size_t pos = 0;
      const double out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw BundleError("manifest: bad number for '" + key + "': " + v);
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> pairs_;
  std::size_t next_ = 0;
};

}  // namespace

void save_model(const ModelParams& model, const Vocabulary& vocab,
                const std::filesystem::path& dir, const BundleMeta& meta) {
  if (vocab.empty()) throw std::invalid_argument("save_model: empty vocabulary");
  if (model.config.vocab_size != vocab.size())
    throw std::invalid_argument("save_model: model expects vocabulary size " +
                                std::to_string(model.config.vocab_size) +
                                ", got " + std::to_string(vocab.size()));

  std::string blob;
  for (const Tensor* t : model.tensors()) {
    t->require_finite("save_model");
    for (std::size_t i = 0; i < t->size(); ++i) append_f32_le(blob, t->data()[i]);
  }

  const std::string vocab_text = vocab.to_tsv();
  const ModelConfig& c = model.config;
  std::string manifest;
  manifest += "format_version=" + std::to_string(kBundleFormatVersion) + "\n";
  manifest += "vocab_size=" + std::to_string(c.vocab_size) + "\n";
  manifest += "embed_units=" + std::to_string(c.embed_units) + "\n";
  manifest += "lstm_units=" + std::to_string(c.lstm_units) + "\n";
  manifest += "max_len=" + std::to_string(c.max_len) + "\n";
  manifest += "dropout=" + format_real(c.dropout) + "\n";
  manifest += "activation=" + std::string(to_string(c.activation)) + "\n";
  manifest += "optimizer=" + meta.optimizer + "\n";
  manifest += "seed=" + std::to_string(meta.seed) + "\n";
  manifest += "vocab_file=vocab.tsv\n";
  manifest += "vocab_hash=" + hex64(fnv1a64(vocab_text)) + "\n";
  manifest += "weights_file=weights.bin\n";
  manifest += "weights_bytes=" + std::to_string(blob.size()) + "\n";

  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "vocab.tsv", vocab_text);
  write_file_atomic(dir / "weights.bin", blob);
  write_file_atomic(dir / "manifest.txt", manifest);
}

LoadedModel load_model(const std::filesystem::path& dir) {
  ManifestReader manifest(read_file(dir / "manifest.txt", "manifest"));

  const std::uint64_t version = manifest.get_u64("format_version");
  if (version != static_cast<std::uint64_t>(kBundleFormatVersion))
    throw VersionError("bundle format version " + std::to_string(version) +
                       " unsupported (this build reads version " +
                       std::to_string(kBundleFormatVersion) + ")");

  ModelConfig config;
  config.vocab_size = manifest.get_u64("vocab_size");
  config.embed_units = manifest.get_u64("embed_units");
  config.lstm_units = manifest.get_u64("lstm_units");
  config.max_len = manifest.get_u64("max_len");
  config.dropout = manifest.get_real("dropout");
  config.activation = activation_from_string(manifest.get("activation"));

  BundleMeta meta;
  meta.optimizer = manifest.get("optimizer");
  meta.seed = manifest.get_u64("seed");

  const std::string vocab_file = manifest.get("vocab_file");
  const std::string declared_hash = manifest.get("vocab_hash");
  const std::string vocab_text = read_file(dir / vocab_file, "vocabulary");
  if (hex64(fnv1a64(vocab_text)) != declared_hash)
    throw HashError("vocabulary hash mismatch: manifest says " + declared_hash +
                    ", file hashes to " + hex64(fnv1a64(vocab_text)));

  LoadedModel out;
  out.meta = std::move(meta);
  out.vocab = Vocabulary::from_tsv(vocab_text);
  if (out.vocab.size() != config.vocab_size)
    throw BundleError("manifest vocab_size " + std::to_string(config.vocab_size) +
                      " does not match vocabulary of size " +
                      std::to_string(out.vocab.size()));

  const std::string weights_file = manifest.get("weights_file");
  const std::uint64_t declared_bytes = manifest.get_u64("weights_bytes");
  const std::string blob = read_file(dir / weights_file, "weights blob");
  if (blob.size() != declared_bytes)
    throw BlobError("weights blob is " + std::to_string(blob.size()) +
                    " bytes, manifest says " + std::to_string(declared_bytes));

  out.model.config = config;
  {
    Gradients proto = make_gradients(config);
    out.model.embedding = std::move(proto.embedding);
    out.model.lstm = std::move(proto.lstm);
    out.model.dense = std::move(proto.dense);
  }

  std::size_t expected = 0;
  for (const Tensor* t : out.model.tensors()) expected += t->size() * 4;
  if (blob.size() != expected)
    throw BlobError("weights blob is " + std::to_string(blob.size()) +
                    " bytes, architecture needs " + std::to_string(expected));

  const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
  for (Tensor* t : out.model.tensors())
    for (std::size_t i = 0; i < t->size(); ++i, p += 4)
      t->data()[i] = read_f32_le(p);

  for (std::size_t c = 0; c < config.embed_units; ++c)
    if (out.model.embedding.table(0, c) != 0.0)
      throw BlobError("padding row of the embedding table is not zero");
  return out;
}

}  // namespace seqclass
