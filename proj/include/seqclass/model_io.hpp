#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "seqclass/corpus.hpp"
#include "seqclass/nn.hpp"

namespace seqclass {

class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
// Manifest declares a format newer than this build understands.
class VersionError : public BundleError {
 public:
  using BundleError::BundleError;
};
// Vocabulary bytes do not match the hash recorded at save time.
class HashError : public BundleError {
 public:
  using BundleError::BundleError;
};
// Weights blob missing, truncated, or inconsistent with the manifest.
class BlobError : public BundleError {
 public:
  using BundleError::BundleError;
};

inline constexpr int kBundleFormatVersion = 1;

std::uint64_t fnv1a64(std::string_view bytes);

// Provenance echoed into the manifest; has no effect on inference.
struct BundleMeta {
  std::string optimizer = "none";
  std::uint64_t seed = 0;
};

// A model bundle is a directory holding manifest.txt (key=value, fixed key
// order), weights.bin (every tensor in ModelParams::tensors() order, 32-bit
// little-endian floats), and vocab.tsv. Each file is written to a temp name
// and renamed, so readers never observe partial writes. Identical inputs
// produce byte-identical bundles.
void save_model(const ModelParams& model, const Vocabulary& vocab,
                const std::filesystem::path& dir, const BundleMeta& meta = {});

struct LoadedModel {
  ModelParams model;
  Vocabulary vocab;
  BundleMeta meta;
};

LoadedModel load_model(const std::filesystem::path& dir);

}  // namespace seqclass
