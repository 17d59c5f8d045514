#include "sage/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sage::io {

namespace {

constexpr std::size_t kHeaderBytes = 12;

void check_magic(std::span<const std::byte> bytes, const char* magic) {
  if (bytes.size() < 4) throw ParseError("file shorter than magic", bytes.size(), ParseError::Location::byte_offset);
  if (std::memcmp(bytes.data(), magic, 4) != 0) {
    throw ParseError(std::string("bad magic, expected ") + magic, 0, ParseError::Location::byte_offset);
  }
}

void require_bytes(std::span<const std::byte> bytes, std::size_t offset, std::size_t count,
                   const char* what) {
  if (bytes.size() < offset + count) {
    throw ParseError(std::string("truncated ") + what, bytes.size(), ParseError::Location::byte_offset);
  }
}

EmbeddingMatrix decode_payload(std::span<const std::byte> bytes, std::size_t& offset) {
  require_bytes(bytes, 4, 8, "header");
  const std::uint32_t n = get_u32(bytes, 4);
  const std::uint32_t d = get_u32(bytes, 8);
  if (n == 0) throw ParseError("header declares n = 0", 4, ParseError::Location::byte_offset);
  if (d == 0) throw ParseError("header declares d = 0", 8, ParseError::Location::byte_offset);
  const std::size_t count = std::size_t{n} * d;
  offset = kHeaderBytes;
  require_bytes(bytes, offset, count * 4, "payload");
  EmbeddingMatrix m(n, d);
  for (std::size_t i = 0; i < count; ++i, offset += 4) {
    m.values()[i] = get_f32(bytes, offset);
  }
  const std::size_t bad = first_non_finite_row(m);
  if (bad != m.rows()) throw DataError("non-finite value", bad);
  return m;
}

std::vector<std::uint32_t> decode_labels(std::span<const std::byte> bytes, std::size_t& offset,
                                         std::size_t n, std::uint32_t& num_classes) {
  require_bytes(bytes, offset, 4, "class count");
  num_classes = get_u32(bytes, offset);
  if (num_classes < 2) throw ParseError("class count must be >= 2", offset, ParseError::Location::byte_offset);
  offset += 4;
  require_bytes(bytes, offset, n * 4, "labels");
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i, offset += 4) {
    labels[i] = get_u32(bytes, offset);
    if (labels[i] >= num_classes) throw DataError("label out of range", i);
  }
  return labels;
}

void check_trailing(std::span<const std::byte> bytes, std::size_t offset) {
  if (offset != bytes.size()) {
    throw ParseError("unexpected trailing bytes", offset, ParseError::Location::byte_offset);
  }
}

float parse_float(std::string_view field, std::size_t line) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  float v = 0.0f;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError("invalid number '" + std::string(field) + "'", line, ParseError::Location::line);
  }
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

/// Rows and optional labels from CSV text. `labeled` means the final column is a label.
void parse_csv(const std::string& text, bool labeled, std::vector<float>& values,
               std::vector<std::uint32_t>& labels, std::size_t& d) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  d = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_fields(line);
    if (width == 0) {
      width = fields.size();
      if (labeled && width < 2) throw ParseError("labeled row needs at least 2 fields", line_no, ParseError::Location::line);
      d = labeled ? width - 1 : width;
    } else if (fields.size() != width) {
      throw ParseError("row has " + std::to_string(fields.size()) + " fields, expected " +
                           std::to_string(width),
                       line_no, ParseError::Location::line);
    }
    for (std::size_t j = 0; j < d; ++j) values.push_back(parse_float(fields[j], line_no));
    if (labeled) {
      std::string_view f = fields.back();
      while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.remove_suffix(1);
      while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
      std::uint32_t label = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), label);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError("invalid label '" + std::string(f) + "'", line_no, ParseError::Location::line);
      }
      labels.push_back(label);
    }
  }
  if (width == 0) throw ParseError("no rows", line_no, ParseError::Location::line);
}

void parse_jsonl(const std::string& text, bool labeled, std::vector<float>& values,
                 std::vector<std::uint32_t>& labels, std::size_t& d) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  d = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no, ParseError::Location::line);
    }
    if (!obj.is_object() || !obj.contains("vec") || !obj["vec"].is_array()) {
      throw ParseError("object needs a \"vec\" array", line_no, ParseError::Location::line);
    }
    const auto& vec = obj["vec"];
    if (first) {
      d = vec.size();
      if (d == 0) throw ParseError("empty \"vec\"", line_no, ParseError::Location::line);
      first = false;
    } else if (vec.size() != d) {
      throw ParseError("\"vec\" has " + std::to_string(vec.size()) + " entries, expected " +
                           std::to_string(d),
                       line_no, ParseError::Location::line);
    }
    for (const auto& v : vec) {
      if (!v.is_number()) throw ParseError("non-numeric entry in \"vec\"", line_no, ParseError::Location::line);
      values.push_back(v.get<float>());
    }
    if (labeled) {
      if (!obj.contains("label") || !obj["label"].is_number_unsigned()) {
        throw ParseError("missing non-negative integer \"label\"", line_no, ParseError::Location::line);
      }
      labels.push_back(obj["label"].get<std::uint32_t>());
    }
  }
  if (first) throw ParseError("no rows", line_no, ParseError::Location::line);
}

EmbeddingMatrix finish_text_matrix(std::vector<float> values, std::size_t d) {
  const std::size_t rows = values.size() / d;
  EmbeddingMatrix m(rows, d, std::move(values));
  const std::size_t bad = first_non_finite_row(m);
  if (bad != m.rows()) throw DataError("non-finite value", bad);
  return m;
}

std::string csv_text(const EmbeddingMatrix& m, const std::vector<std::uint32_t>* labels) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += format_float(row[j]);
    }
    if (labels) {
      out += ',';
      out += std::to_string((*labels)[r]);
    }
    out += '\n';
  }
  return out;
}

std::string jsonl_text(const EmbeddingMatrix& m, const std::vector<std::uint32_t>* labels) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out += "{\"vec\":[";
    auto row = m.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += format_float(row[j]);
    }
    out += ']';
    if (labels) out += ",\"label\":" + std::to_string((*labels)[r]);
    out += "}\n";
  }
  return out;
}

std::uint32_t infer_classes(const std::vector<std::uint32_t>& labels) {
  std::uint32_t hi = 0;
  for (auto l : labels) hi = std::max(hi, l);
  return std::max<std::uint32_t>(2, hi + 1);
}

}  // namespace

std::string to_string(Format f) {
  switch (f) {
    case Format::emb1: return "emb1";
    case Format::csv: return "csv";
    case Format::jsonl: return "jsonl";
  }
  return "?";
}

Format format_from_string(const std::string& s) {
  if (s == "emb1" || s == "embl") return Format::emb1;
  if (s == "csv") return Format::csv;
  if (s == "jsonl") return Format::jsonl;
  throw ValidationError("format", "unknown format '" + s + "'");
}

Format format_from_extension(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".emb1" || ext == ".embl" || ext == ".emb") return Format::emb1;
  if (ext == ".csv") return Format::csv;
  if (ext == ".jsonl") return Format::jsonl;
  throw ValidationError("format", "cannot infer format from extension '" + ext + "'");
}

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

void put_f32(std::vector<std::byte>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::span<const std::byte> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(bytes[offset + static_cast<std::size_t>(i)]) << (8 * i);
  }
  return v;
}

float get_f32(std::span<const std::byte> bytes, std::size_t offset) {
  return std::bit_cast<float>(get_u32(bytes, offset));
}

std::string format_float(float v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<std::byte> encode_emb1(const EmbeddingMatrix& m) {
  std::vector<std::byte> out;
  out.reserve(kHeaderBytes + m.values().size() * 4);
  for (char c : {'E', 'M', 'B', '1'}) out.push_back(static_cast<std::byte>(c));
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (float v : m.values()) put_f32(out, v);
  return out;
}

std::vector<std::byte> encode_embl(const LabeledCorpus& c) {
  std::vector<std::byte> out = encode_emb1(c.embeddings);
  out[3] = static_cast<std::byte>('L');
  put_u32(out, c.num_classes);
  for (auto l : c.labels) put_u32(out, l);
  return out;
}

EmbeddingMatrix decode_emb1(std::span<const std::byte> bytes) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), "EMBL", 4) == 0) {
    return decode_embl(bytes).embeddings;
  }
  check_magic(bytes, "EMB1");
  std::size_t offset = 0;
  EmbeddingMatrix m = decode_payload(bytes, offset);
  check_trailing(bytes, offset);
  return m;
}

LabeledCorpus decode_embl(std::span<const std::byte> bytes) {
  check_magic(bytes, "EMBL");
  std::size_t offset = 0;
  LabeledCorpus c;
  c.embeddings = decode_payload(bytes, offset);
  c.labels = decode_labels(bytes, offset, c.embeddings.rows(), c.num_classes);
  check_trailing(bytes, offset);
  return c;
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError(path.string(), "write failed");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::as_bytes(std::span(text.data(), text.size())));
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::string checksum_hex(std::span<const std::byte> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::byte b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, Format format) {
  switch (format) {
    case Format::emb1: return decode_emb1(read_file(path));
    case Format::csv:
    case Format::jsonl: {
      std::vector<float> values;
      std::vector<std::uint32_t> unused;
      std::size_t d = 0;
      const std::string text = read_text(path);
      if (format == Format::csv) {
        parse_csv(text, false, values, unused, d);
      } else {
        parse_jsonl(text, false, values, unused, d);
      }
      return finish_text_matrix(std::move(values), d);
    }
  }
  throw ValidationError("format", "unsupported");
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path, Format format) {
  require_finite(m, "embeddings");
  switch (format) {
    case Format::emb1: write_file(path, encode_emb1(m)); return;
    case Format::csv: write_text(path, csv_text(m, nullptr)); return;
    case Format::jsonl: write_text(path, jsonl_text(m, nullptr)); return;
  }
}

LabeledCorpus load_corpus(const std::filesystem::path& path, Format format) {
  if (format == Format::emb1) return decode_embl(read_file(path));
  std::vector<float> values;
  std::vector<std::uint32_t> labels;
  std::size_t d = 0;
  const std::string text = read_text(path);
  if (format == Format::csv) {
    parse_csv(text, true, values, labels, d);
  } else {
    parse_jsonl(text, true, values, labels, d);
  }
  LabeledCorpus c;
  c.embeddings = finish_text_matrix(std::move(values), d);
  c.labels = std::move(labels);
  c.num_classes = infer_classes(c.labels);
  return c;
}

void save_corpus(const LabeledCorpus& c, const std::filesystem::path& path, Format format) {
  c.validate();
  switch (format) {
    case Format::emb1: write_file(path, encode_embl(c)); return;
    case Format::csv: write_text(path, csv_text(c.embeddings, &c.labels)); return;
    case Format::jsonl: write_text(path, jsonl_text(c.embeddings, &c.labels)); return;
  }
}

}  // namespace sage::io
