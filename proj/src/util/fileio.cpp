#include "util/fileio.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace diffanon {

namespace {

void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

void append_raw(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}

void read_raw(const std::string& in, std::size_t& pos, void* p, std::size_t n) {
  if (pos + n > in.size()) throw std::runtime_error("fileio: truncated record");
  std::memcpy(p, in.data() + pos, n);
  pos += n;
}

}  // namespace

void write_f32_tensor(const std::string& path, const Tensor& t) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("fileio: cannot open " + path + " for writing");
  for (double v : t.data) {
    const float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), sizeof(f));
  }
  if (!out) throw std::runtime_error("fileio: write failed for " + path);
}

Tensor read_f32_tensor(const std::string& path, std::vector<int> shape) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("fileio: cannot open " + path);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) {
    float f = 0.0f;
    in.read(reinterpret_cast<char*>(&f), sizeof(f));
    if (!in) throw std::runtime_error("fileio: " + path + " shorter than expected shape");
    v = static_cast<double>(f);
  }
  return t;
}

void write_text_file(const std::string& path, const std::string& body) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("fileio: cannot open " + path + " for writing");
  out << body;
  if (!out) throw std::runtime_error("fileio: write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("fileio: cannot open " + path);
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return body;
}

void put_u32(std::string& out, std::uint32_t v) { append_raw(out, &v, sizeof(v)); }
void put_u64(std::string& out, std::uint64_t v) { append_raw(out, &v, sizeof(v)); }
void put_f32(std::string& out, float v) { append_raw(out, &v, sizeof(v)); }

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  std::uint32_t v = 0;
  read_raw(in, pos, &v, sizeof(v));
  return v;
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
  std::uint64_t v = 0;
  read_raw(in, pos, &v, sizeof(v));
  return v;
}

float get_f32(const std::string& in, std::size_t& pos) {
  float v = 0.0f;
  read_raw(in, pos, &v, sizeof(v));
  return v;
}

}  // namespace diffanon
