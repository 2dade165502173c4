#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace leopart {

enum class DType : std::uint8_t { kF32 = 1, kU16 = 2, kU8 = 3 };

const char* dtype_name(DType d);

// Row-major tensor of up to four dimensions. The payload type is fixed by the
// dtype; `data` always holds product(shape) values.
class Tensor {
 public:
  using Storage =
      std::variant<std::vector<float>, std::vector<std::uint16_t>, std::vector<std::uint8_t>>;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<float> values);
  Tensor(std::vector<std::size_t> shape, std::vector<std::uint16_t> values);
  Tensor(std::vector<std::size_t> shape, std::vector<std::uint8_t> values);

  static Tensor zeros(DType dtype, std::vector<std::size_t> shape);

  DType dtype() const;
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const;

  std::span<const float> f32() const;
  std::span<float> f32();
  std::span<const std::uint16_t> u16() const;
  std::span<std::uint16_t> u16();
  std::span<const std::uint8_t> u8() const;
  std::span<std::uint8_t> u8();

  bool operator==(const Tensor& other) const = default;

 private:
  void validate() const;

  std::vector<std::size_t> shape_;
  Storage data_;
};

// "LPT1" layout: magic(4) dtype(1) ndim(1) reserved(2) dims(u32 LE each)
// payload(LE). The whole file is produced in memory and written at once.
std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");

void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

struct ManifestRecord {
  std::string id;
  std::filesystem::path feature_path;
  std::optional<std::filesystem::path> attention_path;
  std::optional<std::filesystem::path> mask_path;
  std::optional<std::filesystem::path> parts_path;
};

struct TokenGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  bool operator==(const TokenGrid&) const = default;
};

// Line-oriented dataset index:
//   grid=<H>x<W> dim=<D>            (header, once)
//   id=<s> feature=<path> [attention=<path>] [mask=<path>] [parts=<path>]
// Relative paths resolve against the manifest's directory. '#' starts a comment.
struct DatasetManifest {
  std::vector<ManifestRecord> records;
  TokenGrid token_grid;
  std::size_t feature_dim = 0;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const;

  // Loaders check the tensor against the declared grid and feature dimension.
  Tensor load_features(const ManifestRecord& r) const;
  Tensor load_attention(const ManifestRecord& r) const;
  Tensor load_mask(const ManifestRecord& r) const;
  Tensor load_parts(const ManifestRecord& r) const;
};

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

// Named tensors plus scalar metadata. Prototype tensors (names ending in
// "prototypes") must have unit-norm rows.
struct Checkpoint {
  std::map<std::string, Tensor> tensors;
  std::uint64_t step = 0;
  std::uint64_t config_hash = 0;

  void validate() const;
};

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// 64-bit FNV-1a, used for config hashes and artifact fingerprints.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t v);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace leopart
