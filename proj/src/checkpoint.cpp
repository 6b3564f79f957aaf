#include "fusemil/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "fusemil/hash.hpp"

namespace fusemil {

namespace {

constexpr char kMagic[4] = {'F', 'C', 'P', 'R'};
constexpr std::uint16_t kVersion = 1;

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw data_error("truncated checkpoint: " + path);
  return v;
}

using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

void save_checkpoint(const std::string& path, StudentModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open for writing: " + path);
  std::uint32_t count = 0;
  model.visit_params([&](Param&) { ++count; });
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, count);
  model.visit_params([&](Param& p) {
    write_pod(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod(out, static_cast<std::uint32_t>(p.value.rows()));
    write_pod(out, static_cast<std::uint32_t>(p.value.cols()));
    const RowMajorF payload = p.value.cast<float>();
    const std::size_t n_bytes = sizeof(float) * static_cast<std::size_t>(payload.size());
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(n_bytes));
    write_pod(out, crc32(payload.data(), n_bytes));
  });
  if (!out) throw data_error("write failed: " + path);
}

void load_checkpoint(const std::string& path, StudentModel& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw schema_error("bad magic in checkpoint: " + path);
  const auto version = read_pod<std::uint16_t>(in, path);
  if (version != kVersion)
    throw schema_error("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  const auto count = read_pod<std::uint32_t>(in, path);

  std::map<std::string, Matd> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rows = read_pod<std::uint32_t>(in, path);
    const auto cols = read_pod<std::uint32_t>(in, path);
    RowMajorF payload(rows, cols);
    const std::size_t n_bytes = sizeof(float) * static_cast<std::size_t>(payload.size());
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(n_bytes));
    if (!in) throw data_error("truncated checkpoint payload: " + path);
    const auto stored = read_pod<std::uint32_t>(in, path);
    if (stored != crc32(payload.data(), n_bytes))
      throw data_error("checkpoint tensor '" + name + "' checksum mismatch: " + path);
    tensors[name] = payload.cast<double>();
  }

  std::size_t used = 0;
  model.visit_params([&](Param& p) {
    const auto it = tensors.find(p.name);
    if (it == tensors.end())
      throw data_error("checkpoint missing tensor '" + p.name + "': " + path);
    if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols())
      throw data_error("checkpoint tensor '" + p.name + "' shape mismatch: " + path);
    p.value = it->second;
    ++used;
  });
  if (used != tensors.size())
    throw data_error("checkpoint has tensors not present in the model: " + path);
}

}  // namespace fusemil
