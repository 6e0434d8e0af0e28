#include "vdlg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "vdlg/errors.hpp"

namespace vdlg {

namespace {

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError(path + ": truncated checkpoint");
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in, const std::string& path) {
  auto len = read_raw<std::uint32_t>(in, path);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError(path + ": truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const RunConfig& config,
                     std::uint64_t step, std::uint64_t data_seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write("VDCK", 4);
  write_raw<std::uint32_t>(out, 1);
  write_string(out, config.serialize());
  write_raw<std::uint64_t>(out, step);
  write_raw<std::uint64_t>(out, data_seed);
  auto params = model.params().all();
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    write_string(out, p->name);
    write_raw<std::int64_t>(out, p->value.rows());
    write_raw<std::int64_t>(out, p->value.cols());
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double)) * p->value.size());
  }
  if (!out) throw DataError("checkpoint write failed: " + path);
}

namespace {

CheckpointMeta read_header(std::ifstream& in, const std::string& path) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "VDCK", 4) != 0)
    throw DataError(path + ": not a checkpoint file");
  auto version = read_raw<std::uint32_t>(in, path);
  if (version != 1) throw DataError(path + ": unsupported checkpoint version");
  CheckpointMeta meta;
  meta.config = parse_config_text(read_string(in, path), path + "#config");
  meta.step = read_raw<std::uint64_t>(in, path);
  meta.data_seed = read_raw<std::uint64_t>(in, path);
  return meta;
}

}  // namespace

CheckpointMeta peek_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  return read_header(in, path);
}

std::unique_ptr<Model> load_checkpoint(const std::string& path, int vocab_size,
                                       CheckpointMeta* meta_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  CheckpointMeta meta = read_header(in, path);
  auto model = std::make_unique<Model>(meta.config.encoder_config(vocab_size), meta.config.seed);
  auto count = read_raw<std::uint32_t>(in, path);
  if (count != model->params().size())
    throw ConfigError(path + ": checkpoint/model parameter count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_string(in, path);
    auto rows = read_raw<std::int64_t>(in, path);
    auto cols = read_raw<std::int64_t>(in, path);
    Parameter* p = model->params().find(name);
    if (!p) throw ConfigError(path + ": unexpected parameter '" + name + "'");
    if (p->value.rows() != rows || p->value.cols() != cols)
      throw ConfigError(path + ": shape mismatch for parameter '" + name + "'");
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(sizeof(double)) * p->value.size());
    if (!in) throw DataError(path + ": truncated checkpoint");
  }
  if (meta_out) *meta_out = std::move(meta);
  return model;
}

}  // namespace vdlg
