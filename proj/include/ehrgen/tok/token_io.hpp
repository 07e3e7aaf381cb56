#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ehrgen/tok/codec.hpp"

namespace ehrgen::tok {

inline constexpr int kTokenFileFormatVersion = 1;

// Text form: a "# {json header}" line, then one patient per line as
// "patient_id<TAB>token token ...". The binary sidecar holds the same ids:
// "EHRT", u32 version, u64 count, then per sequence u32 length and u32 ids,
// all little-endian.
void write_token_text(const std::string& path, const std::vector<TokenSequence>& seqs, const Vocabulary& vocab,
                      const nlohmann::json& header);
std::vector<TokenSequence> read_token_text(const std::string& path, const Vocabulary& vocab);

void write_token_binary(const std::string& path, const std::vector<TokenSequence>& seqs);
// Throws VersionError on an unknown version, Error on a truncated file or an
// id outside [0, vocab_size).
std::vector<TokenSequence> read_token_binary(const std::string& path, std::size_t vocab_size);

}  // namespace ehrgen::tok
