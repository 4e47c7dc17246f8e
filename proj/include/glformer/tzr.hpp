#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "glformer/tensor.hpp"

namespace glformer {

// TZR tensor file format: one UTF-8 JSON header line
//   {"dtype":"f64","shape":[...]}
// followed by a newline, then the row-major little-endian IEEE-754 payload.
// The writer emits the header byte-for-byte in the field order above so that
// identical tensors produce identical files.

void write_tzr(std::ostream& os, const Tensor& t);
void write_tzr(const std::filesystem::path& path, const Tensor& t);
std::string tzr_bytes(const Tensor& t);

Tensor read_tzr(std::istream& is);
Tensor read_tzr(const std::filesystem::path& path);

} // namespace glformer
