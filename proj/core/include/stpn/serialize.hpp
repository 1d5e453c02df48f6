#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "stpn/tensor.hpp"

namespace stpn {

// Tensor stream: magic "STPN", version u32, rank u32, extents u64[],
// payload f64[] row-major. All integers little-endian.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Archive: count u32, then (name length u32, UTF-8 name, tensor stream)
// records in order.
void write_archive(std::ostream& os, const NamedTensors& items);
NamedTensors read_archive(std::istream& is);

void write_archive_file(const std::string& path, const NamedTensors& items);
NamedTensors read_archive_file(const std::string& path);

// Little-endian scalar helpers, shared with the dataset format.
void put_u32(std::ostream& os, std::uint32_t v);
void put_u64(std::ostream& os, std::uint64_t v);
void put_f32(std::ostream& os, float v);
void put_f64(std::ostream& os, double v);
std::uint32_t get_u32(std::istream& is);
std::uint64_t get_u64(std::istream& is);
float get_f32(std::istream& is);
double get_f64(std::istream& is);

}  // namespace stpn
