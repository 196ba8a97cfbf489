#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace diffanon {

// Raw little-endian f32 blob, row-major, no header (the dataset dump and
// anonymized-embedding format). Shape comes from the surrounding config.
void write_f32_tensor(const std::string& path, const Tensor& t);
Tensor read_f32_tensor(const std::string& path, std::vector<int> shape);

void write_text_file(const std::string& path, const std::string& body);
std::string read_text_file(const std::string& path);

// Little-endian scalar writers used by the checkpoint format.
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f32(std::string& out, float v);
std::uint32_t get_u32(const std::string& in, std::size_t& pos);
std::uint64_t get_u64(const std::string& in, std::size_t& pos);
float get_f32(const std::string& in, std::size_t& pos);

}  // namespace diffanon
