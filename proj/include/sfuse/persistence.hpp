#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfuse/network.hpp"
#include "sfuse/pipeline.hpp"

namespace sfuse {

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

// Checkpoint layout, all integers little-endian:
//   "SFUSECKP"  u32 version
//   u8 kind (0 cnn, 1 fusion head)  u8 domain ('s'|'f', 0 for a head)
//   u32 input size (x, or the feature length of a head)  u32 depth (0 for a head)
//   u64 seed  u32 epochs completed  f64 final loss  f64 final accuracy
//   u32 block count, then per block:
//     u32 name length, name bytes, u32 rank, rank x u64 extents, f32 values
inline constexpr char kCheckpointMagic[8] = {'S', 'F', 'U', 'S', 'E', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Network<float>& net);
Network<float> decode_checkpoint(const std::string& bytes, const std::string& origin = "checkpoint");

void save_checkpoint(const Network<float>& net, const std::filesystem::path& path);
Network<float> load_checkpoint(const std::filesystem::path& path);
/// Rejects a checkpoint that does not hold the expected CNN.
Network<float> load_checkpoint(const std::filesystem::path& path, const NetworkSpec& expected);

/// Feature store: one `sample_id,v1,...,vn` record per line, 9 significant digits.
void write_feature_store(const std::filesystem::path& path, const std::vector<ManifestEntry>& samples,
                         const std::vector<std::vector<float>>& rows);
std::vector<std::pair<std::string, std::vector<float>>> read_feature_store(const std::filesystem::path& path);

/// Per-epoch training history as `epoch,loss,accuracy` lines.
std::string format_history(const std::vector<EpochStats>& history);

/// Text report: a summary table, then per subset a fenced confusion matrix
/// followed by `metric,value` lines.
std::string format_report(const std::vector<SubsetResult>& results);

/// Flat `key = value` configuration; '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Writes one 8-bit PNG per channel of every convolution and pooling output
/// (`cl<i>_<c>.png`, `pl<i>_<c>.png`), min-max scaled per map. Returns the
/// written paths in layer order.
std::vector<std::filesystem::path> dump_activations(const Network<float>& net, const Tensor& input,
                                                    const std::filesystem::path& out_dir);
std::vector<std::filesystem::path> dump_activations(const Network<float>& net, const TensorD& image,
                                                    const std::filesystem::path& out_dir);

}  // namespace sfuse
