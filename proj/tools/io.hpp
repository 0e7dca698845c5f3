#pragma once

#include <optional>
#include <string>

#include "lipattn/attention.hpp"
#include "lipattn/tokens.hpp"

namespace lipattn::cli {

/// n rows of d comma-separated numbers, no header. Blank lines are skipped.
TokenSequence read_tokens_csv(const std::string& path);
void write_tokens_csv(const std::string& path, const TokenSequence& x);

/// One weight per line (or one comma-separated row); normalized on read.
SimplexWeights read_weights(const std::string& path);
void write_weights(const std::string& path, const SimplexWeights& w);

/// Single head: {"Q": [[...]], "K": [[...]], "V": [[...]], optional "b_Q", "b_K", "b_V"}.
/// Multi-head: {"heads": [single head objects], "W": [[[...]], ...]}.
struct ModelFile {
  std::optional<AttentionParams> single;
  std::optional<MultiHeadParams> multi;
};

ModelFile read_params(const std::string& path);
void write_params(const std::string& path, const AttentionParams& p);
void write_params(const std::string& path, const MultiHeadParams& mp);

}  // namespace lipattn::cli
