#include "fusemil/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "fusemil/hash.hpp"

static_assert(std::endian::native == std::endian::little,
              "container format assumes a little-endian host");

namespace fusemil {

namespace {

constexpr char kMagic[4] = {'F', 'C', 'P', 'E'};
constexpr std::uint16_t kVersion = 1;

template <class T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw data_error("truncated container file: " + path);
  return v;
}

}  // namespace

void write_container(const std::string& path, const std::string& model_name, const Matd& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open for writing: " + path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(data.rows()));
  write_pod(out, static_cast<std::uint32_t>(data.cols()));
  write_pod(out, static_cast<std::uint32_t>(model_name.size()));
  out.write(model_name.data(), static_cast<std::streamsize>(model_name.size()));

  using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajorF payload = data.cast<float>();
  const std::size_t n_bytes = sizeof(float) * static_cast<std::size_t>(payload.size());
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(n_bytes));
  write_pod(out, crc32(payload.data(), n_bytes));
  if (!out) throw data_error("write failed: " + path);
}

ViewContainer read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open container file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw schema_error("bad magic in container file: " + path);
  const auto version = read_pod<std::uint16_t>(in, path);
  if (version != kVersion)
    throw schema_error("unsupported container version " + std::to_string(version) + ": " + path);
  const auto n_rows = read_pod<std::uint32_t>(in, path);
  const auto n_cols = read_pod<std::uint32_t>(in, path);
  const auto name_len = read_pod<std::uint32_t>(in, path);
  std::string name(name_len, '\0');
  in.read(name.data(), name_len);
  if (!in) throw data_error("truncated container file: " + path);

  using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajorF payload(n_rows, n_cols);
  const std::size_t n_bytes = sizeof(float) * static_cast<std::size_t>(payload.size());
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(n_bytes));
  if (!in) throw data_error("truncated container payload: " + path);
  const auto stored_crc = read_pod<std::uint32_t>(in, path);
  const auto actual_crc = crc32(payload.data(), n_bytes);
  if (stored_crc != actual_crc) throw data_error("payload checksum mismatch: " + path);

  ViewContainer c;
  c.model_name = std::move(name);
  c.data = payload.cast<double>();
  return c;
}

PatchView load_view(const std::string& path, const ModelRegistry& registry,
                    const std::string& slide_id) {
  ViewContainer c = read_container(path);
  const auto it = registry.view_dims.find(c.model_name);
  if (it == registry.view_dims.end())
    throw schema_error("model '" + c.model_name + "' not in view registry: " + path);
  if (c.data.cols() != it->second)
    throw schema_error("view '" + c.model_name + "' has dim " + std::to_string(c.data.cols()) +
                       ", registry expects " + std::to_string(it->second) + ": " + path);
  if (c.data.rows() < 1) throw data_error("view has no rows: " + path);
  if (!all_finite(c.data)) throw data_error("view contains non-finite values: " + path);
  PatchView v;
  v.slide_id = slide_id;
  v.model_name = std::move(c.model_name);
  v.matrix = std::move(c.data);
  return v;
}

void write_view(const std::string& path, const PatchView& view) {
  write_container(path, view.model_name, view.matrix);
}

Vecd load_teacher_vector(const std::string& path, const ModelRegistry& registry,
                         std::string* teacher_name) {
  ViewContainer c = read_container(path);
  const auto it = registry.teacher_dims.find(c.model_name);
  if (it == registry.teacher_dims.end())
    throw schema_error("model '" + c.model_name + "' not in teacher registry: " + path);
  if (c.data.rows() != 1 || c.data.cols() != it->second)
    throw schema_error("teacher vector '" + c.model_name + "' has shape " +
                       std::to_string(c.data.rows()) + "x" + std::to_string(c.data.cols()) +
                       ", registry expects 1x" + std::to_string(it->second) + ": " + path);
  if (!all_finite(c.data)) throw data_error("teacher vector contains non-finite values: " + path);
  if (teacher_name) *teacher_name = c.model_name;
  return c.data.row(0).transpose();
}

void write_teacher_vector(const std::string& path, const std::string& teacher_name, const Vecd& v) {
  write_container(path, teacher_name, v.transpose());
}

}  // namespace fusemil
