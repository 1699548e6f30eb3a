#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "curricode/minimodel/model.hpp"
#include "json.hpp"

namespace curricode::mini {

// File layout: u64 little-endian header length, JSON header, then the
// parameter values as little-endian IEEE-754 doubles.

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t x) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error("truncated checkpoint");
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return x;
}

}  // namespace detail

struct Checkpoint {
  ParamVector params;
  nlohmann::ordered_json header;
};

inline void save_checkpoint(const std::filesystem::path& path, const ParamVector& params,
                            std::uint64_t vocab_hash, std::uint64_t seed,
                            const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json h;
  h["format"] = "curricode-params-v1";
  h["blocks"] = nlohmann::ordered_json::array(
      {{{"name", "embeddings"}, {"rows", params.layout.vocab}, {"cols", params.layout.d}},
       {{"name", "decoder"}, {"rows", params.layout.d_out}, {"cols", 2 * params.layout.d}},
       {{"name", "bias"}, {"rows", params.layout.d_out}, {"cols", 1}},
       {{"name", "projection"}, {"rows", params.layout.vocab}, {"cols", params.layout.d_out}}});
  h["vocab_hash"] = vocab_hash;
  h["seed"] = seed;
  for (auto it = extra.begin(); it != extra.end(); ++it) h[it.key()] = it.value();
  const std::string header = h.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  detail::put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (double v : params.values) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw Error("failed writing " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::uint64_t n = detail::get_u64(in);
  if (n > (1u << 24)) throw Error("implausible checkpoint header length");
  std::string header(n, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(n))) throw Error("truncated checkpoint header");
  Checkpoint c;
  c.header = nlohmann::ordered_json::parse(header);
  const auto& blocks = c.header.at("blocks");
  c.params.layout.vocab = blocks.at(0).at("rows").get<std::size_t>();
  c.params.layout.d = blocks.at(0).at("cols").get<std::size_t>();
  c.params.layout.d_out = blocks.at(1).at("rows").get<std::size_t>();
  c.params.values.resize(c.params.layout.size());
  for (auto& v : c.params.values) v = std::bit_cast<double>(detail::get_u64(in));
  if (in.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes in checkpoint");
  return c;
}

}  // namespace curricode::mini
