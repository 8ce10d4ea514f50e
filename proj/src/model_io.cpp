#include "veridip/model_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "veridip/errors.hpp"

namespace veridip {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back((bits >> (8 * i)) & 0xff);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = bytes_[pos_] | (bytes_[pos_ + 1] << 8);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw TruncatedError("model file truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::vector<std::uint8_t> serialize(const MlpModel& model) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kModelMagic, kModelMagic + 4);
  put_u16(out, kModelFormatVersion);
  out.push_back(static_cast<std::uint8_t>(model.activation));
  put_u16(out, static_cast<std::uint16_t>(model.layer_dims.size()));
  for (std::uint32_t d : model.layer_dims) put_u32(out, d);
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    for (double w : model.weights[l].data) put_f64(out, w);
    for (double b : model.biases[l]) put_f64(out, b);
  }
  put_u32(out, crc_of(out));
  return out;
}

MlpModel deserialize(std::span<const std::uint8_t> bytes) {
  Reader reader(bytes);
  if (reader.remaining() < 4) throw TruncatedError("model file truncated");
  for (char expected : kModelMagic) {
    if (static_cast<char>(reader.u8()) != expected)
      throw BadMagicError("bad model file magic");
  }
  const std::uint16_t version = reader.u16();
  if (version != kModelFormatVersion)
    throw VersionError("unsupported model format version " +
                       std::to_string(version));
  const std::uint8_t act = reader.u8();
  if (act > 1) throw ShapeError("unknown activation tag");
  const std::uint16_t layer_count = reader.u16();
  if (layer_count < 2) throw ShapeError("model needs at least two layers");

  MlpModel model;
  model.activation = static_cast<Activation>(act);
  model.layer_dims.reserve(layer_count);
  for (int i = 0; i < layer_count; ++i) model.layer_dims.push_back(reader.u32());
  for (std::uint32_t d : model.layer_dims)
    if (d == 0) throw ShapeError("zero-width layer");
  if (model.layer_dims.back() < 2)
    throw ShapeError("class count must be at least 2");

  for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    const std::size_t rows = model.layer_dims[l + 1];
    const std::size_t cols = model.layer_dims[l];
    Matrix w(rows, cols);
    for (double& v : w.data) v = reader.f64();
    std::vector<double> b(rows);
    for (double& v : b) v = reader.f64();
    model.weights.push_back(std::move(w));
    model.biases.push_back(std::move(b));
  }

  const std::size_t payload_end = reader.position();
  const std::uint32_t stored_crc = reader.u32();
  if (reader.remaining() != 0) throw ShapeError("trailing bytes after checksum");
  if (crc_of(bytes.subspan(0, payload_end)) != stored_crc)
    throw ChecksumError("model file checksum mismatch");

  for (const auto& w : model.weights)
    for (double v : w.data)
      if (!std::isfinite(v)) throw ParseError("non-finite weight value");
  for (const auto& b : model.biases)
    for (double v : b)
      if (!std::isfinite(v)) throw ParseError("non-finite bias value");
  return model;
}

void save_model(const MlpModel& model, const std::string& path) {
  const auto bytes = serialize(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path + "'");
}

MlpModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace veridip
