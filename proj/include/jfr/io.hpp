#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "jfr/tensor.hpp"

namespace jfr::io {

/// Tensor wire format, little-endian:
///   magic "JTNS" | version u32 | rank u32 | dims u64[rank] | data f64[prod(dims)]
inline constexpr std::uint32_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& os, const Tensor& t);
/// Throws std::runtime_error on bad magic, unknown version, or truncation.
Tensor read_tensor(std::istream& is, const std::string& context = "");

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

// Raw little-endian scalar helpers shared by the checkpoint and dataset formats.
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
std::uint32_t read_u32(std::istream& is, const std::string& context);
std::uint64_t read_u64(std::istream& is, const std::string& context);
void write_magic(std::ostream& os, const char magic[4]);
void expect_magic(std::istream& is, const char magic[4], const std::string& context);

}  // namespace jfr::io
