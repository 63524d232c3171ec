#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gapscan/modelzoo/zoo_model.hpp"

// Flat binary model file, all integers uint32 and all reals IEEE-754 float32, little-endian:
//
//   magic "GSZM" | version=1 | kind | height | width | channels | num_labels | payload
//
//   kind 1 (linear): theta[d * k]                      (row-major, d = h*w*c)
//   kind 2 (kernel): n | gamma | supports[n * d] | labels[n] (uint32)
//   kind 3 (mlp):    layers | { in | out | weights[out * in] | bias[out] } per layer
//
// See docs/model_format.md.
namespace gapscan::zoo {

inline constexpr std::array<char, 4> kModelMagic{'G', 'S', 'Z', 'M'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<char> take() { return std::move(bytes_); }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<char>& bytes) : bytes_(bytes) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void expect(const char* p, std::size_t n) {
    need(n);
    if (std::memcmp(bytes_.data() + pos_, p, n) != 0) throw FormatError("not a model file (bad magic)");
    pos_ += n;
  }
  // Guards allocations sized from header fields.
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) throw FormatError("model file truncated");
  }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<char> serialize_model(const ZooModel& model) {
  detail::ByteWriter w;
  w.raw(kModelMagic.data(), kModelMagic.size());
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.kind()));
  const Shape s = model.input_shape();
  w.u32(static_cast<std::uint32_t>(s.height));
  w.u32(static_cast<std::uint32_t>(s.width));
  w.u32(static_cast<std::uint32_t>(s.channels));
  w.u32(static_cast<std::uint32_t>(model.num_labels()));
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          for (float v : m.theta()) w.f32(v);
        } else if constexpr (std::is_same_v<T, KernelModel>) {
          w.u32(static_cast<std::uint32_t>(m.num_supports()));
          w.f32(m.gamma());
          for (float v : m.supports()) w.f32(v);
          for (Label y : m.support_labels()) w.u32(static_cast<std::uint32_t>(y));
        } else {
          w.u32(static_cast<std::uint32_t>(m.layers().size()));
          for (const DenseLayer& l : m.layers()) {
            w.u32(static_cast<std::uint32_t>(l.in));
            w.u32(static_cast<std::uint32_t>(l.out));
            for (float v : l.weights) w.f32(v);
            for (float v : l.bias) w.f32(v);
          }
        }
      },
      model.variant());
  return w.take();
}

inline ZooModel deserialize_model(const std::vector<char>& bytes) {
  detail::ByteReader r(bytes);
  r.expect(kModelMagic.data(), kModelMagic.size());
  if (const std::uint32_t v = r.u32(); v != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(v));
  }
  const std::uint32_t kind = r.u32();
  Shape shape{};
  shape.height = r.u32();
  shape.width = r.u32();
  shape.channels = r.u32();
  const std::size_t labels = r.u32();
  if (!shape.valid() || labels == 0) throw FormatError("model header has an empty shape or label set");
  if (shape.height > 65535 || shape.width > 65535 || shape.channels > 65535 || shape.size() > (1u << 28) ||
      labels > 65535) {
    throw FormatError("model header dimensions out of range");
  }
  const std::size_t d = shape.size();

  auto floats = [&](std::size_t n) {
    if (n > bytes.size()) throw FormatError("model file truncated");
    r.need(n * 4);
    std::vector<float> out(n);
    for (float& v : out) v = r.f32();
    return out;
  };

  auto finish = [&](ZooModel m) {
    if (!r.done()) throw FormatError("trailing bytes after model payload");
    return m;
  };

  switch (static_cast<ModelKind>(kind)) {
    case ModelKind::linear:
      return finish(LinearModel(shape, labels, floats(d * labels)));
    case ModelKind::kernel: {
      const std::size_t n = r.u32();
      const float gamma = r.f32();
      std::vector<float> supports = floats(n * d);
      r.need(n * 4);
      std::vector<Label> ys(n);
      for (Label& y : ys) y = r.u32();
      return finish(KernelModel(shape, labels, std::move(supports), std::move(ys), gamma));
    }
    case ModelKind::mlp: {
      const std::size_t count = r.u32();
      std::vector<DenseLayer> layers;
      for (std::size_t i = 0; i < count; ++i) {
        DenseLayer l;
        l.in = r.u32();
        l.out = r.u32();
        l.weights = floats(l.in * l.out);
        l.bias = floats(l.out);
        layers.push_back(std::move(l));
      }
      if (layers.empty() || layers.back().out != labels) throw FormatError("MLP head does not match label count");
      return finish(MlpModel(shape, std::move(layers)));
    }
  }
  throw FormatError("unknown model kind tag " + std::to_string(kind));
}

inline void save_model(const ZooModel& model, const std::string& path) {
  const std::vector<char> bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path);
}

inline ZooModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace gapscan::zoo
