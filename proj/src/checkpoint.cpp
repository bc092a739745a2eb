#include "pointcont/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>

#include "pointcont/errors.hpp"

namespace pct {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'N', 'T'};

template <class U>
void put_le(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <class U>
U get_le(std::istream& in, const char* what) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U)))
    throw FormatError(std::string("pcnt: truncated while reading ") + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(U(buf[i]) << (8 * i));
  return v;
}

std::size_t element_count(const std::vector<std::uint32_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t a, std::uint32_t b) { return a * b; });
}

}  // namespace

void write_pcnt(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kPcntVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xFFFF) throw FormatError("pcnt: tensor name too long: " + t.name);
    if (t.dims.size() > 0xFF) throw FormatError("pcnt: rank too large: " + t.name);
    if (element_count(t.dims) != t.data.size())
      throw FormatError("pcnt: payload size does not match dims for " + t.name);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put_le<std::uint32_t>(out, d);
    for (float f : t.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  if (!out) throw FormatError("pcnt: write failed");
}

std::vector<NamedTensor> read_pcnt(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("pcnt: bad magic");
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kPcntVersion)
    throw FormatError("pcnt: unsupported version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(in, "tensor count");
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto len = get_le<std::uint16_t>(in, "name length");
    t.name.resize(len);
    if (len && !in.read(t.name.data(), len)) throw FormatError("pcnt: truncated name");
    const auto rank = get_le<std::uint8_t>(in, "rank");
    t.dims.resize(rank);
    for (auto& d : t.dims) d = get_le<std::uint32_t>(in, "dims");
    t.data.resize(element_count(t.dims));
    for (auto& f : t.data) f = std::bit_cast<float>(get_le<std::uint32_t>(in, "payload"));
    out.push_back(std::move(t));
  }
  return out;
}

void write_pcnt_file(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open for writing: " + path.string());
  write_pcnt(out, tensors);
}

std::vector<NamedTensor> read_pcnt_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open: " + path.string());
  return read_pcnt(in);
}

std::vector<NamedTensor> to_named_tensors(const ParamStore& store) {
  std::vector<NamedTensor> out;
  for (const Tensor* t : store.all()) {
    NamedTensor n;
    n.name = t->name;
    for (auto d : t->shape) n.dims.push_back(static_cast<std::uint32_t>(d));
    n.data.reserve(t->size());
    for (double v : t->value) n.data.push_back(static_cast<float>(v));
    out.push_back(std::move(n));
  }
  return out;
}

void assign_from(ParamStore& store, const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != store.count())
    throw FormatError("checkpoint: expected " + std::to_string(store.count()) +
                      " tensors, file has " + std::to_string(tensors.size()));
  for (const auto& n : tensors) {
    if (!store.contains(n.name)) throw FormatError("checkpoint: unknown tensor " + n.name);
    Tensor& t = store.at(n.name);
    if (n.dims.size() != t.shape.size() ||
        !std::equal(n.dims.begin(), n.dims.end(), t.shape.begin()))
      throw FormatError("checkpoint: shape mismatch for " + n.name);
    for (std::size_t i = 0; i < t.size(); ++i) t.value[i] = static_cast<double>(n.data[i]);
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store) {
  write_pcnt_file(path, to_named_tensors(store));
}

void load_checkpoint(const std::filesystem::path& path, ParamStore& store) {
  assign_from(store, read_pcnt_file(path));
}

}  // namespace pct
