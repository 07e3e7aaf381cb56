#include "ehrgen/tok/token_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ehrgen/util/error.hpp"

namespace ehrgen::tok {

static_assert(std::endian::native == std::endian::little, "token files assume a little-endian host");

namespace {

constexpr char kMagic[4] = {'E', 'H', 'R', 'T'};

template <class T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& in, const std::string& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error("truncated token file " + path);
  return v;
}

}  // namespace

void write_token_text(const std::string& path, const std::vector<TokenSequence>& seqs, const Vocabulary& vocab,
                      const nlohmann::json& header) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  nlohmann::json h = header.is_null() ? nlohmann::json::object() : header;
  h["format"] = "ehrgen-tokens";
  h["format_version"] = kTokenFileFormatVersion;
  out << "# " << h.dump() << '\n';
  for (const auto& s : seqs) out << s.patient_id << '\t' << to_text(s, vocab) << '\n';
  if (!out) throw Error("write failed: " + path);
}

std::vector<TokenSequence> read_token_text(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<TokenSequence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      auto h = nlohmann::json::parse(line.substr(2), nullptr, false);
      if (h.is_discarded()) throw ParseError("bad token file header", lineno);
      if (h.value("format_version", 0) != kTokenFileFormatVersion) {
        throw VersionError("unsupported token file version in " + path);
      }
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("missing patient id field", lineno);
    try {
      TokenSequence s = from_text(line.substr(tab + 1), vocab);
      s.patient_id = line.substr(0, tab);
      out.push_back(std::move(s));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return out;
}

void write_token_binary(const std::string& path, const std::vector<TokenSequence>& seqs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kTokenFileFormatVersion);
  put<std::uint64_t>(out, seqs.size());
  for (const auto& s : seqs) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.ids.size()));
    out.write(reinterpret_cast<const char*>(s.ids.data()),
              static_cast<std::streamsize>(s.ids.size() * sizeof(TokenId)));
  }
  if (!out) throw Error("write failed: " + path);
}

std::vector<TokenSequence> read_token_binary(const std::string& path, std::size_t vocab_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw Error("not a token file: " + path);
  if (get<std::uint32_t>(in, path) != kTokenFileFormatVersion) {
    throw VersionError("unsupported token file version in " + path);
  }
  const auto count = get<std::uint64_t>(in, path);
  std::vector<TokenSequence> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    TokenSequence s;
    s.ids.resize(len);
    if (!in.read(reinterpret_cast<char*>(s.ids.data()), static_cast<std::streamsize>(len * sizeof(TokenId)))) {
      throw Error("truncated token file " + path);
    }
    for (TokenId id : s.ids) {
      if (id >= vocab_size) throw Error("token id out of range in " + path);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ehrgen::tok
