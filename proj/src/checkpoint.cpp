#include <bit>
#include <cstring>
#include <fstream>

#include "zsca/corpora_io.hpp"
#include "zsca/error.hpp"
#include "zsca/text_util.hpp"

namespace zsca {

namespace {

enum class SectionKind : unsigned char { Matrix = 0, Text = 1 };

class ByteWriter {
 public:
  void u8(unsigned char v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const unsigned char> bytes, std::string_view source)
      : bytes_(bytes), source_(source) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) fail(ErrorCode::TruncatedFile, std::string(source_));
  }
  unsigned char u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const unsigned char> bytes_;
  std::string_view source_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::put_tokens(const std::string& name, const std::vector<std::string>& tokens) {
  put_text(name, join(tokens, "\n"));
}

void Checkpoint::put_scalar(const std::string& name, double value) {
  put(name, Matrix(1, 1, value));
}

bool Checkpoint::has(const std::string& name) const {
  return matrices_.contains(name) || texts_.contains(name);
}

const Matrix& Checkpoint::matrix(const std::string& name) const {
  auto it = matrices_.find(name);
  if (it == matrices_.end()) fail(ErrorCode::MissingSection, name);
  return it->second;
}

const std::string& Checkpoint::text(const std::string& name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) fail(ErrorCode::MissingSection, name);
  return it->second;
}

std::vector<std::string> Checkpoint::tokens(const std::string& name) const {
  const auto& t = text(name);
  if (t.empty()) return {};
  return split_on(t, '\n');
}

double Checkpoint::scalar(const std::string& name) const {
  const auto& m = matrix(name);
  if (m.size() != 1) fail(ErrorCode::ShapeMismatch, name + " is not a scalar");
  return m(0, 0);
}

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt, std::uint32_t version) {
  ByteWriter w;
  w.raw(std::string_view(kCheckpointMagic, 8));
  w.u32(version);
  w.u64(ckpt.fingerprint);
  w.u32(static_cast<std::uint32_t>(ckpt.matrices().size() + ckpt.texts().size()));
  for (const auto& [name, m] : ckpt.matrices()) {
    w.u8(static_cast<unsigned char>(SectionKind::Matrix));
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name);
    w.u64(16 + 8 * m.size());
    w.u64(m.rows());
    w.u64(m.cols());
    for (double v : m.values()) w.f64(v);
  }
  for (const auto& [name, text] : ckpt.texts()) {
    w.u8(static_cast<unsigned char>(SectionKind::Text));
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name);
    w.u64(text.size());
    w.raw(text);
  }
  auto& bytes = w.bytes();
  const std::uint64_t checksum = fnv1a64(std::span<const unsigned char>(bytes));
  w.u64(checksum);
  return std::move(bytes);
}

Checkpoint deserialize_checkpoint(std::span<const unsigned char> bytes, std::string_view source) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    fail(ErrorCode::BadMagic, std::string(source));
  }
  ByteReader r(bytes, source);
  r.raw(8);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::VersionMismatch, std::string(source) + ": format version " +
                                         std::to_string(version) + ", reader supports " +
                                         std::to_string(kCheckpointVersion));
  }
  if (bytes.size() < 8 + 4 + 8 + 4 + 8) fail(ErrorCode::TruncatedFile, std::string(source));
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.subspan(bytes.size() - 8), source);
  if (fnv1a64(body) != tail.u64()) fail(ErrorCode::CorruptChecksum, std::string(source));

  Checkpoint ckpt;
  ckpt.fingerprint = r.u64();
  const std::uint32_t sections = r.u32();
  for (std::uint32_t s = 0; s < sections; ++s) {
    const auto kind = static_cast<SectionKind>(r.u8());
    const std::string name = r.raw(r.u32());
    const std::uint64_t length = r.u64();
    const std::size_t start = r.pos();
    if (kind == SectionKind::Matrix) {
      const std::size_t rows = r.u64();
      const std::size_t cols = r.u64();
      if (length != 16 + 8 * rows * cols) fail(ErrorCode::TruncatedFile, name);
      r.need(8 * rows * cols);
      std::vector<double> data(rows * cols);
      for (double& v : data) v = r.f64();
      ckpt.put(name, Matrix(rows, cols, std::move(data)));
    } else if (kind == SectionKind::Text) {
      ckpt.put_text(name, r.raw(length));
    } else {
      fail(ErrorCode::CorruptChecksum, std::string(source) + ": unknown section kind");
    }
    if (r.pos() - start != length) fail(ErrorCode::TruncatedFile, name);
  }
  if (r.pos() != body.size()) fail(ErrorCode::TruncatedFile, std::string(source));
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  return deserialize_checkpoint(bytes, path.string());
}

namespace {

std::string encode_provenance(const std::vector<Provenance>& p) {
  std::string s;
  for (auto v : p) s += v == Provenance::Trained ? 'T' : 'P';
  return s;
}

std::vector<Provenance> decode_provenance(const std::string& s) {
  std::vector<Provenance> p;
  for (char c : s) {
    if (c != 'T' && c != 'P') fail(ErrorCode::CorruptChecksum, "provenance flag");
    p.push_back(c == 'T' ? Provenance::Trained : Provenance::Predicted);
  }
  return p;
}

}  // namespace

Checkpoint ClassifierBank::to_checkpoint(std::uint64_t fingerprint) const {
  Checkpoint c;
  c.fingerprint = fingerprint;
  c.put("verb_weights", verb_weights);
  c.put("noun_weights", noun_weights);
  c.put_text("verb_provenance", encode_provenance(verb_provenance));
  c.put_text("noun_provenance", encode_provenance(noun_provenance));
  return c;
}

ClassifierBank ClassifierBank::from_checkpoint(const Checkpoint& ckpt) {
  ClassifierBank bank;
  bank.verb_weights = ckpt.matrix("verb_weights");
  bank.noun_weights = ckpt.matrix("noun_weights");
  bank.verb_provenance = decode_provenance(ckpt.text("verb_provenance"));
  bank.noun_provenance = decode_provenance(ckpt.text("noun_provenance"));
  if (bank.verb_provenance.size() != bank.verb_weights.rows() ||
      bank.noun_provenance.size() != bank.noun_weights.rows()) {
    fail(ErrorCode::MetadataMismatch, "provenance length differs from weight rows");
  }
  return bank;
}

}  // namespace zsca
