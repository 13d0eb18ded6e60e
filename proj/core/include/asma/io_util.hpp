#pragma once

#include <filesystem>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <string>

#include "asma/precision.hpp"

ASMA_NAMESPACE_BEGIN

/// Writes via `fill` into `<path>.tmp` and renames over `path`.
void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fill,
                  bool binary = false);

void atomic_write_text(const std::filesystem::path& path, const std::string& text);

std::string read_text_file(const std::filesystem::path& path);

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes);

std::string hex64(std::uint64_t v);

// Little-endian integer IO. Readers throw MalformedRecord naming `what` when
// the stream ends early.
void write_u16(std::ostream& out, std::uint16_t v);
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
std::uint16_t read_u16(std::istream& in, const char* what);
std::uint32_t read_u32(std::istream& in, const char* what);
std::uint64_t read_u64(std::istream& in, const char* what);

ASMA_NAMESPACE_END
