#include "tsgzsl/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "model container assumes a little-endian host");
static_assert(sizeof(double) == 8);

namespace tsgzsl::core {

namespace {

constexpr char kMagic[4] = {'M', 'O', 'D', 'C'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("model container: truncated while reading " + what);
  return v;
}

}  // namespace

void save_tensors(const std::string& path, const NamedTensors& tensors) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    os.write(kMagic, 4);
    write_pod<std::uint32_t>(os, kVersion);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
      if (!t) throw std::invalid_argument("save_tensors: null tensor '" + name + "'");
      write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t->rank()));
      for (std::size_t d : t->shape) write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(d));
      os.write(reinterpret_cast<const char*>(t->values.data()),
               static_cast<std::streamsize>(t->values.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("write error on '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

NamedTensors load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open model container '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("'" + path + "' is not a model container (bad magic)");
  }
  const auto version = read_pod<std::uint32_t>(is, "version");
  if (version != kVersion) {
    throw std::runtime_error("unsupported container version " + std::to_string(version));
  }
  const auto count = read_pod<std::uint32_t>(is, "tensor count");
  NamedTensors out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(is, "name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw std::runtime_error("model container: truncated name");
    const auto rank = read_pod<std::uint32_t>(is, "rank");
    Shape shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<std::size_t>(read_pod<std::uint64_t>(is, "dimension"));
      numel *= shape[d];
    }
    std::vector<double> values(numel);
    is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(numel * sizeof(double)));
    if (!is) throw std::runtime_error("model container: truncated values for '" + name + "'");
    auto t = Tensor::create(std::move(shape), std::move(values));
    t->name = name;
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

void load_into(const std::string& path, const NamedTensors& params) {
  NamedTensors loaded = load_tensors(path);
  if (loaded.size() != params.size()) {
    throw std::runtime_error("model container '" + path + "' holds " + std::to_string(loaded.size()) +
                             " tensors, expected " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [want_name, dst] = params[i];
    const auto& [got_name, src] = loaded[i];
    if (want_name != got_name) {
      throw std::runtime_error("model container mismatch: expected tensor '" + want_name + "', found '" +
                               got_name + "'");
    }
    if (src->shape != dst->shape) {
      throw std::runtime_error("model container mismatch for '" + want_name + "': shape " +
                               shape_str(src->shape) + " vs expected " + shape_str(dst->shape));
    }
    dst->values = src->values;
  }
}

}  // namespace tsgzsl::core
