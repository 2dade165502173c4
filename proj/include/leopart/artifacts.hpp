#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "leopart/grid.hpp"
#include "leopart/segmentation_metrics.hpp"

namespace leopart {

// A directory of per-image label maps (u16 for clusters / segmentations, u8
// for binary masks) described by an `index.txt`:
//   config_hash <hex>
//   kind <clusters|foreground|segmentation>
//   labels <n>
//   map <id> <relative path>
struct MapSet {
  std::string kind;
  std::string config_hash;
  std::size_t n_labels = 0;
  std::vector<std::string> ids;
  std::vector<LabelMap> maps;
};

void write_map_set(const MapSet& set, const std::filesystem::path& dir);
MapSet read_map_set(const std::filesystem::path& dir);

// Binary masks stored as a map set of kind "foreground".
MapSet mask_set(const std::vector<BinaryMask>& masks, const std::vector<std::string>& ids, const std::string& hash);
std::vector<BinaryMask> masks_of(const MapSet& set);

// `# config_hash <hex>` header used by the text artifacts.
std::string hash_header(const std::string& hash);
std::optional<std::string> find_hash_header(const std::string& text);

// Records a run: command line, config hash and the fnv1a64 of every output file,
// written to dir/name.
void write_run_manifest(const std::filesystem::path& dir, const std::string& command, const std::string& hash,
                        const std::vector<std::filesystem::path>& outputs,
                        const std::string& name = "run_manifest.txt");

}  // namespace leopart
