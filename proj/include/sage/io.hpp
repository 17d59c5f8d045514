#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sage/corpus.hpp"
#include "sage/matrix.hpp"

namespace sage::io {

enum class Format { emb1, csv, jsonl };

std::string to_string(Format f);
Format format_from_string(const std::string& s);
/// .emb1/.embl → emb1, .csv → csv, .jsonl → jsonl.
Format format_from_extension(const std::filesystem::path& path);

// EMB1: "EMB1", u32 n, u32 d, n*d f32, all little-endian.
// EMBL: "EMBL", u32 n, u32 d, n*d f32, u32 C, n*u32 labels.
std::vector<std::byte> encode_emb1(const EmbeddingMatrix& m);
std::vector<std::byte> encode_embl(const LabeledCorpus& c);
/// Accepts both EMB1 and EMBL (labels are then validated and dropped).
EmbeddingMatrix decode_emb1(std::span<const std::byte> bytes);
LabeledCorpus decode_embl(std::span<const std::byte> bytes);

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, Format format);
void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path, Format format);

/// Labeled variants: EMBL, CSV with a trailing integer column, JSONL with "label".
LabeledCorpus load_corpus(const std::filesystem::path& path, Format format);
void save_corpus(const LabeledCorpus& c, const std::filesystem::path& path, Format format);

std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// FNV-1a 64 of a byte buffer, as 16 lowercase hex digits.
std::string checksum_hex(std::span<const std::byte> bytes);

/// Little-endian primitives shared by the checkpoint formats.
void put_u32(std::vector<std::byte>& out, std::uint32_t v);
void put_f32(std::vector<std::byte>& out, float v);
std::uint32_t get_u32(std::span<const std::byte> bytes, std::size_t offset);
float get_f32(std::span<const std::byte> bytes, std::size_t offset);

/// Shortest decimal text that parses back to the same float.
std::string format_float(float v);
std::string format_double(double v);

}  // namespace sage::io
