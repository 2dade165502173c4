#include "leopart/artifacts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "leopart/error.hpp"
#include "leopart/synth.hpp"
#include "leopart/tensor_io.hpp"

namespace leopart {

void write_map_set(const MapSet& set, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (set.ids.size() != set.maps.size()) throw ValidationError("map set: id/map count mismatch");
  fs::create_directories(dir / "maps");
  std::ostringstream index;
  index << "config_hash " << set.config_hash << '\n'
        << "kind " << set.kind << '\n'
        << "labels " << set.n_labels << '\n';
  const bool binary = set.kind == "foreground";
  for (std::size_t i = 0; i < set.maps.size(); ++i) {
    const fs::path rel = fs::path("maps") / (set.ids[i] + ".lpt");
    if (binary) {
      ClassMap m(set.maps[i].height, set.maps[i].width);
      for (std::size_t p = 0; p < m.size(); ++p) m.data[p] = static_cast<std::uint8_t>(set.maps[i].data[p]);
      write_tensor(to_tensor(m), dir / rel);
    } else {
      write_tensor(to_tensor(set.maps[i]), dir / rel);
    }
    index << "map " << set.ids[i] << ' ' << rel.generic_string() << '\n';
  }
  std::ofstream os(dir / "index.txt", std::ios::binary);
  if (!os) throw IoError("cannot write " + (dir / "index.txt").string());
  os << index.str();
}

MapSet read_map_set(const std::filesystem::path& dir) {
  std::ifstream is(dir / "index.txt");
  if (!is) throw IoError("cannot read " + (dir / "index.txt").string());
  MapSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    const auto where = (dir / "index.txt").string() + ":" + std::to_string(line_no);
    if (key == "config_hash") {
      ls >> set.config_hash;
    } else if (key == "kind") {
      ls >> set.kind;
    } else if (key == "labels") {
      if (!(ls >> set.n_labels)) throw FormatError(where + ": bad label count");
    } else if (key == "map") {
      std::string id, rel;
      if (!(ls >> id >> rel)) throw FormatError(where + ": expected 'map <id> <path>'");
      const Tensor t = read_tensor(dir / rel);
      if (t.dtype() == DType::kU16) {
        set.maps.push_back(label_map_from(t));
      } else if (t.dtype() == DType::kU8) {
        const ClassMap m = class_map_from(t);
        LabelMap l(m.height, m.width);
        for (std::size_t p = 0; p < m.size(); ++p) l.data[p] = m.data[p];
        set.maps.push_back(std::move(l));
      } else {
        throw FormatError(where + ": map tensors must be u8 or u16");
      }
      set.ids.push_back(id);
    } else {
      throw FormatError(where + ": unknown key '" + key + "'");
    }
  }
  return set;
}

MapSet mask_set(const std::vector<BinaryMask>& masks, const std::vector<std::string>& ids, const std::string& hash) {
  MapSet set;
  set.kind = "foreground";
  set.config_hash = hash;
  set.n_labels = 2;
  set.ids = ids;
  for (const auto& m : masks) {
    LabelMap l(m.height, m.width);
    for (std::size_t p = 0; p < m.size(); ++p) l.data[p] = m.data[p] ? 1 : 0;
    set.maps.push_back(std::move(l));
  }
  return set;
}

std::vector<BinaryMask> masks_of(const MapSet& set) {
  std::vector<BinaryMask> out;
  for (const auto& m : set.maps) {
    BinaryMask b(m.height, m.width);
    for (std::size_t p = 0; p < m.size(); ++p) b.data[p] = m.data[p] ? 1 : 0;
    out.push_back(std::move(b));
  }
  return out;
}

std::string hash_header(const std::string& hash) { return "# config_hash " + hash + "\n"; }

std::optional<std::string> find_hash_header(const std::string& text) {
  static const std::string kPrefix = "# config_hash ";
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind(kPrefix, 0) == 0) return line.substr(kPrefix.size());
  }
  return std::nullopt;
}

void write_run_manifest(const std::filesystem::path& dir, const std::string& command, const std::string& hash,
                        const std::vector<std::filesystem::path>& outputs, const std::string& name) {
  std::ostringstream os;
  os << "command " << command << '\n' << "config_hash " << hash << '\n';
  std::vector<std::filesystem::path> files;
  for (const auto& p : outputs) {
    if (std::filesystem::is_directory(p)) {
      for (const auto& e : std::filesystem::recursive_directory_iterator(p)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
    } else {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    os << "output " << std::filesystem::relative(f, dir).generic_string() << ' '
       << hex64(fnv1a64(read_file_bytes(f))) << '\n';
  }
  std::ofstream f(dir / name, std::ios::binary);
  if (!f) throw IoError("cannot write " + (dir / name).string());
  f << os.str();
}

}  // namespace leopart
