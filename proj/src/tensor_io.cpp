#include "leopart/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "leopart/error.hpp"

namespace leopart {

static_assert(std::endian::native == std::endian::little,
              "LPT1 encoding assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'L', 'P', 'T', '1'};
constexpr char kCheckpointMagic[4] = {'L', 'P', 'C', '1'};
constexpr std::size_t kHeaderBytes = 8;
constexpr std::size_t kMaxDims = 4;

std::size_t element_size(DType d) {
  switch (d) {
    case DType::kF32:
      return 4;
    case DType::kU16:
      return 2;
    case DType::kU8:
      return 1;
  }
  throw FormatError("unknown dtype");
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  return v;
}

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty() || shape.size() > kMaxDims) {
    throw ValidationError("tensor must have 1 to 4 dimensions, got " + std::to_string(shape.size()));
  }
  for (auto d : shape) {
    if (d == 0) throw ValidationError("tensor dimensions must be >= 1");
    if (d > 0xFFFFFFFFu) throw ValidationError("tensor dimension exceeds u32 range");
  }
}

}  // namespace

const char* dtype_name(DType d) {
  switch (d) {
    case DType::kF32:
      return "f32";
    case DType::kU16:
      return "u16";
    case DType::kU8:
      return "u8";
  }
  return "?";
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<float> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  validate();
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<std::uint16_t> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  validate();
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<std::uint8_t> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  validate();
}

Tensor Tensor::zeros(DType dtype, std::vector<std::size_t> shape) {
  check_shape(shape);
  const std::size_t n = shape_product(shape);
  switch (dtype) {
    case DType::kF32:
      return Tensor(std::move(shape), std::vector<float>(n, 0.0f));
    case DType::kU16:
      return Tensor(std::move(shape), std::vector<std::uint16_t>(n, 0));
    case DType::kU8:
      return Tensor(std::move(shape), std::vector<std::uint8_t>(n, 0));
  }
  throw FormatError("unknown dtype");
}

void Tensor::validate() const {
  check_shape(shape_);
  const std::size_t n = std::visit([](const auto& v) { return v.size(); }, data_);
  if (n != shape_product(shape_)) {
    throw ValidationError("tensor holds " + std::to_string(n) + " values but shape implies " +
                          std::to_string(shape_product(shape_)));
  }
}

DType Tensor::dtype() const {
  switch (data_.index()) {
    case 0:
      return DType::kF32;
    case 1:
      return DType::kU16;
    default:
      return DType::kU8;
  }
}

std::size_t Tensor::numel() const { return shape_.empty() ? 0 : shape_product(shape_); }

namespace {
template <typename T, typename V>
auto& expect_storage(V& data, DType want, DType have) {
  if (want != have) {
    throw ValidationError(std::string("tensor dtype is ") + dtype_name(have) + ", expected " +
                          dtype_name(want));
  }
  return std::get<std::vector<T>>(data);
}
}  // namespace

std::span<const float> Tensor::f32() const { return expect_storage<float>(data_, DType::kF32, dtype()); }
std::span<float> Tensor::f32() { return expect_storage<float>(data_, DType::kF32, dtype()); }
std::span<const std::uint16_t> Tensor::u16() const {
  return expect_storage<std::uint16_t>(data_, DType::kU16, dtype());
}
std::span<std::uint16_t> Tensor::u16() { return expect_storage<std::uint16_t>(data_, DType::kU16, dtype()); }
std::span<const std::uint8_t> Tensor::u8() const {
  return expect_storage<std::uint8_t>(data_, DType::kU8, dtype());
}
std::span<std::uint8_t> Tensor::u8() { return expect_storage<std::uint8_t>(data_, DType::kU8, dtype()); }

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  check_shape(t.shape());
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * t.ndim() + element_size(t.dtype()) * t.numel());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(static_cast<std::uint8_t>(t.dtype()));
  out.push_back(static_cast<std::uint8_t>(t.ndim()));
  out.push_back(0);
  out.push_back(0);
  for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));

  const auto append_raw = [&out](const void* p, std::size_t nbytes) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + nbytes);
  };
  switch (t.dtype()) {
    case DType::kF32:
      append_raw(t.f32().data(), t.f32().size_bytes());
      break;
    case DType::kU16:
      append_raw(t.u16().data(), t.u16().size_bytes());
      break;
    case DType::kU8:
      append_raw(t.u8().data(), t.u8().size_bytes());
      break;
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(origin + ": missing LPT1 magic");
  }
  if (bytes.size() < kHeaderBytes) throw LengthError(origin + ": truncated header");
  const auto code = bytes[4];
  if (code < 1 || code > 3) throw FormatError(origin + ": unknown dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const std::size_t ndim = bytes[5];
  if (ndim == 0 || ndim > kMaxDims) throw FormatError(origin + ": bad ndim " + std::to_string(ndim));
  if (bytes.size() < kHeaderBytes + 4 * ndim) throw LengthError(origin + ": truncated dims");

  std::vector<std::size_t> shape(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    shape[i] = get_u32(bytes, kHeaderBytes + 4 * i);
    if (shape[i] == 0) throw FormatError(origin + ": zero dimension");
  }
  const std::size_t n = shape_product(shape);
  const std::size_t offset = kHeaderBytes + 4 * ndim;
  const std::size_t need = n * element_size(dtype);
  if (bytes.size() - offset < need) {
    throw LengthError(origin + ": header declares " + std::to_string(n) + " values but payload holds " +
                      std::to_string((bytes.size() - offset) / element_size(dtype)));
  }
  const auto* src = bytes.data() + offset;
  switch (dtype) {
    case DType::kF32: {
      std::vector<float> v(n);
      std::memcpy(v.data(), src, need);
      return Tensor(std::move(shape), std::move(v));
    }
    case DType::kU16: {
      std::vector<std::uint16_t> v(n);
      std::memcpy(v.data(), src, need);
      return Tensor(std::move(shape), std::move(v));
    }
    case DType::kU8: {
      std::vector<std::uint8_t> v(src, src + n);
      return Tensor(std::move(shape), std::move(v));
    }
  }
  throw FormatError(origin + ": unknown dtype");
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  const auto bytes = encode_tensor(t);
  write_file_bytes(path, bytes);
}

Tensor read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_tensor(bytes, path.string());
}

// ---------------------------------------------------------------------------
// Manifest

std::filesystem::path DatasetManifest::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

namespace {

Tensor load_checked(const DatasetManifest& m, const ManifestRecord& r, const std::filesystem::path& p,
                    DType dtype, std::optional<std::size_t> leading, const char* what) {
  Tensor t = read_tensor(m.resolve(p));
  const auto fail = [&](const std::string& msg) {
    throw ValidationError("record '" + r.id + "' " + what + ": " + msg);
  };
  if (t.dtype() != dtype) fail(std::string("dtype ") + dtype_name(t.dtype()) + ", expected " + dtype_name(dtype));
  const std::size_t want_ndim = leading ? 3 : 2;
  if (t.ndim() != want_ndim) fail("expected " + std::to_string(want_ndim) + " dims");
  const std::size_t h = t.dim(want_ndim - 2), w = t.dim(want_ndim - 1);
  if (h != m.token_grid.height || w != m.token_grid.width) {
    fail("grid " + std::to_string(h) + "x" + std::to_string(w) + " does not match manifest grid " +
         std::to_string(m.token_grid.height) + "x" + std::to_string(m.token_grid.width));
  }
  if (leading && *leading != 0 && t.dim(0) != *leading) {
    fail("feature dim " + std::to_string(t.dim(0)) + " does not match manifest feature_dim " +
         std::to_string(*leading));
  }
  return t;
}

}  // namespace

Tensor DatasetManifest::load_features(const ManifestRecord& r) const {
  return load_checked(*this, r, r.feature_path, DType::kF32, feature_dim, "features");
}

Tensor DatasetManifest::load_attention(const ManifestRecord& r) const {
  if (!r.attention_path) throw ValidationError("record '" + r.id + "' has no attention map");
  return load_checked(*this, r, *r.attention_path, DType::kF32, std::size_t{0}, "attention");
}

Tensor DatasetManifest::load_mask(const ManifestRecord& r) const {
  if (!r.mask_path) throw ValidationError("record '" + r.id + "' has no mask");
  return load_checked(*this, r, *r.mask_path, DType::kU8, std::nullopt, "mask");
}

Tensor DatasetManifest::load_parts(const ManifestRecord& r) const {
  if (!r.parts_path) throw ValidationError("record '" + r.id + "' has no part mask");
  return load_checked(*this, r, *r.parts_path, DType::kU8, std::nullopt, "parts");
}

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  std::set<std::string> seen;
  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(lines, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::map<std::string, std::string> kv;
    std::string field;
    while (fields >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw FormatError("manifest line " + std::to_string(lineno) + ": expected key=value, got '" + field + "'");
      }
      const auto key = field.substr(0, eq);
      if (!kv.emplace(key, field.substr(eq + 1)).second) {
        throw FormatError("manifest line " + std::to_string(lineno) + ": repeated key '" + key + "'");
      }
    }
    if (kv.empty()) continue;

    if (kv.contains("grid") || kv.contains("dim")) {
      if (have_header) throw FormatError("manifest line " + std::to_string(lineno) + ": second header");
      if (!kv.contains("grid") || !kv.contains("dim") || kv.size() != 2) {
        throw FormatError("manifest line " + std::to_string(lineno) + ": header needs exactly grid= and dim=");
      }
      const auto& g = kv["grid"];
      const auto x = g.find('x');
      try {
        if (x == std::string::npos) throw std::invalid_argument("grid");
        m.token_grid.height = std::stoul(g.substr(0, x));
        m.token_grid.width = std::stoul(g.substr(x + 1));
        m.feature_dim = std::stoul(kv["dim"]);
      } catch (const std::logic_error&) {
        throw FormatError("manifest line " + std::to_string(lineno) + ": bad header values");
      }
      if (m.token_grid.height == 0 || m.token_grid.width == 0 || m.feature_dim == 0) {
        throw ValidationError("manifest header: grid and dim must be positive");
      }
      have_header = true;
      continue;
    }

    ManifestRecord r;
    for (const auto& [key, value] : kv) {
      if (key == "id") {
        r.id = value;
      } else if (key == "feature") {
        r.feature_path = value;
      } else if (key == "attention") {
        r.attention_path = value;
      } else if (key == "mask") {
        r.mask_path = value;
      } else if (key == "parts") {
        r.parts_path = value;
      } else {
        throw FormatError("manifest line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      }
    }
    if (r.id.empty()) throw ValidationError("manifest line " + std::to_string(lineno) + ": missing id");
    if (r.feature_path.empty()) {
      throw ValidationError("manifest record '" + r.id + "': missing feature path");
    }
    if (!seen.insert(r.id).second) throw ValidationError("manifest: duplicate id '" + r.id + "'");
    m.records.push_back(std::move(r));
  }
  if (!have_header) throw ValidationError("manifest: missing 'grid=HxW dim=D' header");
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_manifest(std::string(bytes.begin(), bytes.end()), path.parent_path());
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "grid=" << m.token_grid.height << "x" << m.token_grid.width << " dim=" << m.feature_dim << "\n";
  for (const auto& r : m.records) {
    out << "id=" << r.id << " feature=" << r.feature_path.generic_string();
    if (r.attention_path) out << " attention=" << r.attention_path->generic_string();
    if (r.mask_path) out << " mask=" << r.mask_path->generic_string();
    if (r.parts_path) out << " parts=" << r.parts_path->generic_string();
    out << "\n";
  }
  const auto s = out.str();
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

// ---------------------------------------------------------------------------
// Checkpoint: "LPC1" step(u64) hash(u64) count(u32) { name_len(u32) name tensor_len(u64) LPT1 }*

void Checkpoint::validate() const {
  for (const auto& [name, t] : tensors) {
    if (!name.ends_with("prototypes")) continue;
    if (t.dtype() != DType::kF32 || t.ndim() != 2) throw ValidationError(name + ": prototypes must be 2-D f32");
    const auto v = t.f32();
    const std::size_t cols = t.dim(1);
    for (std::size_t r = 0; r < t.dim(0); ++r) {
      double sq = 0.0;
      for (std::size_t c = 0; c < cols; ++c) sq += static_cast<double>(v[r * cols + c]) * v[r * cols + c];
      if (std::abs(std::sqrt(sq) - 1.0) > 1e-5) {
        throw ValidationError(name + ": row " + std::to_string(r) + " is not unit norm");
      }
    }
  }
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  ckpt.validate();
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
  put_u64(out, ckpt.step);
  put_u64(out, ckpt.config_hash);
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    const auto blob = encode_tensor(t);
    put_u64(out, blob.size());
    out.insert(out.end(), blob.begin(), blob.end());
  }
  write_file_bytes(path, out);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::span<const std::uint8_t> b(bytes);
  const auto origin = path.string();
  if (b.size() < 24 || std::memcmp(b.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError(origin + ": missing LPC1 magic");
  }
  Checkpoint ck;
  ck.step = get_u64(b, 4);
  ck.config_hash = get_u64(b, 12);
  const std::uint32_t count = get_u32(b, 20);
  std::size_t at = 24;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (b.size() < at + 4) throw LengthError(origin + ": truncated entry header");
    const std::size_t name_len = get_u32(b, at);
    at += 4;
    if (b.size() < at + name_len + 8) throw LengthError(origin + ": truncated entry name");
    std::string name(reinterpret_cast<const char*>(b.data() + at), name_len);
    at += name_len;
    const std::size_t blob_len = get_u64(b, at);
    at += 8;
    if (b.size() - at < blob_len) throw LengthError(origin + ": truncated tensor '" + name + "'");
    ck.tensors.emplace(name, decode_tensor(b.subspan(at, blob_len), origin + ":" + name));
    at += blob_len;
  }
  ck.validate();
  return ck;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (auto c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& text) {
  return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

}  // namespace leopart
