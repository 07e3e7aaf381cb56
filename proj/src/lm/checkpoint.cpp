#include "ehrgen/lm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ehrgen/util/error.hpp"
#include "ehrgen/util/hash.hpp"

namespace ehrgen::lm {

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'E', 'H', 'R', 'G', 'C', 'K', 'P', 'T'};

std::string payload_of(const Model& model) {
  const std::size_t n = model.parameters().size() * sizeof(float);
  std::string bytes(3 * n, '\0');
  std::memcpy(bytes.data(), model.parameters().data(), n);
  std::memcpy(bytes.data() + n, model.adam_m().data(), n);
  std::memcpy(bytes.data() + 2 * n, model.adam_v().data(), n);
  return bytes;
}

json tensor_table(const ModelConfig& c) {
  json out = json::array();
  for (const auto& t : parameter_tensors(c)) out.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", t.offset}});
  return out;
}

struct Header {
  json manifest;
  std::streamoff payload_offset = 0;
};

Header read_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw Error("not a checkpoint: " + path);
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&version), sizeof version)) throw Error("truncated checkpoint " + path);
  if (version != kCheckpointFormatVersion) {
    throw VersionError("checkpoint " + path + ": unsupported format version " + std::to_string(version));
  }
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1u << 30)) {
    throw Error("corrupt checkpoint " + path + ": bad manifest length");
  }
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw Error("truncated checkpoint " + path);
  Header h;
  h.manifest = json::parse(text, nullptr, false);
  if (h.manifest.is_discarded()) throw Error("corrupt checkpoint " + path + ": unreadable manifest");
  h.payload_offset = in.tellg();
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const json& metadata) {
  const std::string payload = payload_of(model);
  json manifest = {{"format", "ehrgen-checkpoint"},
                   {"format_version", kCheckpointFormatVersion},
                   {"config", to_json(model.config())},
                   {"step", model.step()},
                   {"tensors", tensor_table(model.config())},
                   {"sections", {"parameters", "adam_m", "adam_v"}},
                   {"dtype", "float32-le"},
                   {"payload_bytes", payload.size()},
                   {"payload_sha256", sha256_hex(payload)}};
  if (!metadata.is_null()) manifest["metadata"] = metadata;
  const std::string text = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  const std::uint32_t version = kCheckpointFormatVersion;
  const std::uint64_t len = text.size();
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error("write failed: " + path);
}

json read_checkpoint_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  return read_header(in, path).manifest;
}

Model load_checkpoint(const std::string& path, std::optional<std::size_t> expected_vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  const Header h = read_header(in, path);
  const json& man = h.manifest;
  ModelConfig config;
  try {
    config = model_config_from_json(man.at("config"));
    check_config(config);
    if (man.at("tensors") != tensor_table(config)) throw Error("tensor table does not match the config");
  } catch (const json::exception& e) {
    throw Error("corrupt checkpoint " + path + ": " + e.what());
  } catch (const PreconditionError& e) {
    throw Error("corrupt checkpoint " + path + ": " + e.what());
  }
  if (expected_vocab && *expected_vocab != config.vocab_size) {
    throw Error("checkpoint " + path + " has vocabulary size " + std::to_string(config.vocab_size) + ", expected " +
                std::to_string(*expected_vocab));
  }
  const std::size_t n = parameter_count(config);
  std::string payload(3 * n * sizeof(float), '\0');
  if (!in.read(payload.data(), static_cast<std::streamsize>(payload.size()))) {
    throw Error("corrupt checkpoint " + path + ": truncated tensor section");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error("corrupt checkpoint " + path + ": trailing bytes");
  if (sha256_hex(payload) != man.value("payload_sha256", std::string())) {
    throw Error("corrupt checkpoint " + path + ": tensor checksum mismatch");
  }
  std::vector<float> params(n);
  std::memcpy(params.data(), payload.data(), n * sizeof(float));
  Model model(config, std::move(params));
  std::memcpy(model.adam_m().data(), payload.data() + n * sizeof(float), n * sizeof(float));
  std::memcpy(model.adam_v().data(), payload.data() + 2 * n * sizeof(float), n * sizeof(float));
  model.set_step(man.value("step", std::uint64_t{0}));
  return model;
}

}  // namespace ehrgen::lm
