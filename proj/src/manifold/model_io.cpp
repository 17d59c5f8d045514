#include <algorithm>
#include <cstring>

#include <nlohmann/json.hpp>

#include "sage/io.hpp"
#include "sage/manifold.hpp"

namespace sage::manifold {

namespace {

nlohmann::json params_json(const ProjectionParams& p) {
  return {{"n_neighbors", p.n_neighbors}, {"target_dim", p.target_dim}, {"min_dist", p.min_dist},
          {"spread", p.spread},           {"a", p.a},                   {"b", p.b},
          {"epochs", p.epochs},           {"neg_sample_rate", p.neg_sample_rate},
          {"init", to_string(p.init)},    {"seed", p.seed}};
}

ProjectionParams params_from_json(const nlohmann::json& j) {
  ProjectionParams p;
  p.n_neighbors = j.at("n_neighbors").get<std::size_t>();
  p.target_dim = j.at("target_dim").get<std::size_t>();
  p.min_dist = j.at("min_dist").get<double>();
  p.spread = j.at("spread").get<double>();
  p.a = j.at("a").get<double>();
  p.b = j.at("b").get<double>();
  p.epochs = j.at("epochs").get<std::size_t>();
  p.neg_sample_rate = j.at("neg_sample_rate").get<std::size_t>();
  p.init = init_mode_from_string(j.at("init").get<std::string>());
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

}  // namespace

std::vector<std::byte> encode_model(const ProjectionModel& model) {
  const nlohmann::json header = {{"format", "sage-projection"},
                                 {"format_version", 1},
                                 {"params", params_json(model.params)},
                                 {"n", model.size()},
                                 {"d", model.input_dim()},
                                 {"m", model.target_dim()},
                                 {"num_edges", model.graph.edges.size()},
                                 {"spectral_fell_back", model.spectral_fell_back}};
  const std::string text = header.dump() + "\n";
  std::vector<std::byte> out(text.size());
  std::memcpy(out.data(), text.data(), text.size());
  for (float v : model.train_embeddings.values()) io::put_f32(out, v);
  for (float v : model.coords.values()) io::put_f32(out, v);
  for (const auto& e : model.graph.edges) {
    io::put_u32(out, e.i);
    io::put_u32(out, e.j);
    io::put_f32(out, e.weight);
  }
  return out;
}

ProjectionModel decode_model(std::span<const std::byte> bytes) {
  const auto* begin = reinterpret_cast<const char*>(bytes.data());
  const auto* newline = std::find(begin, begin + bytes.size(), '\n');
  if (newline == begin + bytes.size()) {
    throw ParseError("missing header terminator", bytes.size(), ParseError::Location::byte_offset);
  }
  ProjectionModel model;
  std::size_t n = 0, d = 0, m = 0, num_edges = 0;
  try {
    const auto header = nlohmann::json::parse(begin, newline);
    if (header.at("format").get<std::string>() != "sage-projection" ||
        header.at("format_version").get<int>() != 1) {
      throw ParseError("unsupported projection checkpoint", 0, ParseError::Location::byte_offset);
    }
    model.params = params_from_json(header.at("params"));
    n = header.at("n").get<std::size_t>();
    d = header.at("d").get<std::size_t>();
    m = header.at("m").get<std::size_t>();
    num_edges = header.at("num_edges").get<std::size_t>();
    model.spectral_fell_back = header.at("spectral_fell_back").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid projection header: ") + e.what(), 0, ParseError::Location::byte_offset);
  } catch (const ValidationError& e) {
    throw ParseError(std::string("invalid projection header: ") + e.what(), 0, ParseError::Location::byte_offset);
  }
  std::size_t offset = static_cast<std::size_t>(newline - begin) + 1;
  const std::size_t need = 4 * (n * d + n * m + 3 * num_edges);
  if (bytes.size() - offset < need) throw ParseError("truncated projection payload", bytes.size(), ParseError::Location::byte_offset);
  if (bytes.size() - offset > need) throw ParseError("unexpected trailing bytes", offset + need, ParseError::Location::byte_offset);

  model.train_embeddings = EmbeddingMatrix(n, d);
  for (float& v : model.train_embeddings.values()) {
    v = io::get_f32(bytes, offset);
    offset += 4;
  }
  model.coords = Coords(n, m);
  for (float& v : model.coords.values()) {
    v = io::get_f32(bytes, offset);
    offset += 4;
  }
  model.graph.n = n;
  model.graph.edges.resize(num_edges);
  for (auto& e : model.graph.edges) {
    e.i = io::get_u32(bytes, offset);
    e.j = io::get_u32(bytes, offset + 4);
    e.weight = io::get_f32(bytes, offset + 8);
    offset += 12;
  }
  model.graph.validate();
  require_finite(model.coords, "projection coords");
  return model;
}

void save_model(const ProjectionModel& model, const std::string& path) {
  io::write_file(path, encode_model(model));
}

ProjectionModel load_model(const std::string& path) { return decode_model(io::read_file(path)); }

}  // namespace sage::manifold
