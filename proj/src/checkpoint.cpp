#include "arithlm/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "arithlm/errors.hpp"

namespace arithlm {

namespace {

// Byte-by-byte little-endian, independent of host order.
template <typename T>
void put(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xffU));
  }
}

void put_f32(std::string& out, float v) { put(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(value);
  }

  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_container(const Container& c) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string header = c.header.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& [name, t] : c.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.ndim()));
    for (auto extent : t.shape()) put<std::uint64_t>(out, extent);
    for (real v : t.data()) put_f32(out, static_cast<float>(v));
  }
  return out;
}

Container decode_container(const std::string& bytes) {
  Reader r(bytes);
  if (r.get_bytes(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw IoError("not an arithlm container (bad magic)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported container version " + std::to_string(version));
  }
  Container c;
  c.header = Json::parse(r.get_bytes(r.get<std::uint32_t>()));
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_bytes(r.get<std::uint32_t>());
    const auto ndim = r.get<std::uint32_t>();
    Shape shape(ndim);
    for (auto& extent : shape) extent = r.get<std::uint64_t>();
    Tensor t(shape);
    for (real& v : t.data()) v = r.get_f32();
    c.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw IoError("trailing bytes after container payload");
  return c;
}

void write_container(const std::string& path, const Container& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const std::string bytes = encode_container(c);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

Container read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_container(ss.str());
}

void save_checkpoint(const std::string& path, const Model& model, std::uint64_t seed,
                     std::size_t epoch) {
  Container c;
  c.header = Json{{"kind", "model"},
                  {"config", to_json(model.config())},
                  {"seed", seed},
                  {"epoch", epoch},
                  {"rng", std::string(Rng::kAlgorithm)}};
  for (const auto& [name, t] : model.parameters()) c.tensors.emplace_back(name, t);
  write_container(path, c);
}

Checkpoint load_checkpoint(const std::string& path) {
  Container c = read_container(path);
  const ModelConfig config = model_config_from_json(c.header.at("config"));
  Rng rng(0);
  Model model(config, rng);
  if (c.tensors.size() != model.parameters().size()) {
    throw IoError("checkpoint holds " + std::to_string(c.tensors.size()) + " tensors, model needs " +
                  std::to_string(model.parameters().size()));
  }
  for (const auto& [name, stored] : c.tensors) {
    Tensor& p = model.parameter(name);
    if (p.shape() != stored.shape()) {
      throw IoError("shape mismatch for " + name + ": " + shape_str(stored.shape()) + " vs " +
                    shape_str(p.shape()));
    }
    std::copy(stored.data().begin(), stored.data().end(), p.data().begin());
  }
  return Checkpoint{std::move(model), c.header.at("seed").get<std::uint64_t>(),
                    c.header.at("epoch").get<std::size_t>()};
}

std::uint64_t parameter_hash(const Model& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : model.parameters()) {
    mix(name.data(), name.size());
    for (auto extent : t.shape()) mix(&extent, sizeof(extent));
    mix(t.ptr(), t.size() * sizeof(real));
  }
  return h;
}

}  // namespace arithlm
