#pragma once

// Dataset building: raw portraits + landmark/segmentation providers +
// attribute table -> per-record directories of PNGs and a JSON manifest.

#include <json.hpp>

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rsgan/geometry.hpp"
#include "rsgan/png_io.hpp"
#include "rsgan/sample.hpp"
#include "rsgan/synth.hpp"

namespace rsgan {

namespace fs = std::filesystem;
using json = nlohmann::json;

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kManifestVersion = 1;

struct ManifestRecord {
  std::string id;
  std::string split;  // "train" or "test"
  std::string dir;    // relative to the manifest directory
  AttributeVector c;
  json extra = json::object();  // optional metadata (e.g. synthetic factors)

  bool operator==(const ManifestRecord&) const = default;
};

inline const char* const kSampleFiles[] = {"x.png", "xf.png", "xh.png", "mbg.png", "attrs.json"};

struct DatasetManifest {
  int version = kManifestVersion;
  int resolution = 0;
  std::size_t skip_count = 0;
  std::vector<std::string> attribute_names;
  std::vector<ManifestRecord> records;

  std::size_t count(const std::string& split) const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [&](const auto& r) { return r.split == split; }));
  }

  json to_json() const {
    json recs = json::array();
    for (const auto& r : records) {
      json files = json::object();
      files["x"] = r.dir + "/x.png";
      files["x_f"] = r.dir + "/xf.png";
      files["x_h"] = r.dir + "/xh.png";
      files["m_bg"] = r.dir + "/mbg.png";
      files["attrs"] = r.dir + "/attrs.json";
      json j{{"id", r.id}, {"split", r.split}, {"dir", r.dir}, {"files", files}, {"attributes", r.c}};
      if (!r.extra.empty()) j["extra"] = r.extra;
      recs.push_back(std::move(j));
    }
    return json{{"version", version},
                {"resolution", resolution},
                {"skip_count", skip_count},
                {"attribute_names", attribute_names},
                {"records", recs}};
  }

  static DatasetManifest from_json(const json& j) {
    DatasetManifest m;
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion)
      throw DatasetError("manifest version " + std::to_string(m.version) + " is not supported (expected " +
                         std::to_string(kManifestVersion) + ")");
    m.resolution = j.at("resolution").get<int>();
    m.skip_count = j.at("skip_count").get<std::size_t>();
    m.attribute_names = j.value("attribute_names", std::vector<std::string>{});
    for (const auto& r : j.at("records")) {
      ManifestRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.split = r.at("split").get<std::string>();
      rec.dir = r.at("dir").get<std::string>();
      rec.c = r.at("attributes").get<AttributeVector>();
      if (r.contains("extra")) rec.extra = r.at("extra");
      m.records.push_back(std::move(rec));
    }
    return m;
  }

  /// Checks the manifest invariants against the files under `root`.
  void validate(const fs::path& root) const {
    std::map<std::string, int> seen;
    for (const auto& r : records) {
      if (seen[r.id]++) throw DatasetError("duplicate record id " + r.id);
      if (r.split != "train" && r.split != "test") throw DatasetError("record " + r.id + " has no split tag");
      for (const char* f : kSampleFiles)
        if (!fs::exists(root / r.dir / f)) throw DatasetError("record " + r.id + " is missing " + f);
      if (!attribute_names.empty() && r.c.size() != attribute_names.size())
        throw DatasetError("record " + r.id + " attribute length mismatch");
    }
  }
};

inline std::string dump_manifest(const DatasetManifest& m) { return m.to_json().dump(2) + "\n"; }

inline void save_manifest(const DatasetManifest& m, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write manifest " + path.string());
  out << dump_manifest(m);
}

inline DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open manifest " + path.string());
  try {
    return DatasetManifest::from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DatasetError("malformed manifest " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Per-record files

inline void write_sample(const RegionSample& s, const fs::path& dir) {
  fs::create_directories(dir);
  write_png(dir / "x.png", s.x);
  write_png(dir / "xf.png", s.x_f);
  write_png(dir / "xh.png", s.x_h);
  write_png(dir / "mbg.png", s.m_bg);
  std::ofstream out(dir / "attrs.json", std::ios::binary);
  out << json(s.c).dump() << "\n";
  if (!out) throw DatasetError("cannot write " + (dir / "attrs.json").string());
}

inline RegionSample read_sample(const fs::path& dir, const std::string& id) {
  RegionSample s;
  s.id = id;
  s.x = read_png(dir / "x.png");
  s.x_f = read_png(dir / "xf.png");
  s.x_h = read_png(dir / "xh.png");
  s.m_bg = read_mask_png(dir / "mbg.png");
  std::ifstream in(dir / "attrs.json");
  if (!in) throw DatasetError("cannot open " + (dir / "attrs.json").string());
  s.c = json::parse(in).get<AttributeVector>();
  s.validate(width(s.x));
  return s;
}

/// Loads all records of one split ("" for all).
inline std::vector<RegionSample> load_samples(const fs::path& manifest_path, const std::string& split = "") {
  const auto m = load_manifest(manifest_path);
  const fs::path root = manifest_path.parent_path();
  std::vector<RegionSample> out;
  for (const auto& r : m.records)
    if (split.empty() || r.split == split) {
      out.push_back(read_sample(root / r.dir, r.id));
      if (out.back().resolution() != m.resolution)
        throw DatasetError("record " + r.id + " does not match manifest resolution");
    }
  return out;
}

// ---------------------------------------------------------------------------
// Providers. Any failure on one image is reported as RejectedRecord.

class LandmarkProvider {
 public:
  virtual ~LandmarkProvider() = default;
  virtual Landmarks68 landmarks(const std::string& id, const fs::path& image_path) = 0;
};

class SegmentationProvider {
 public:
  virtual ~SegmentationProvider() = default;
  /// Background mask at raw image size: 1 = background.
  virtual BinaryMask background_mask(const std::string& id, const fs::path& image_path) = 0;
};

namespace dataset_detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  return cells;
}

inline Landmarks68 parse_landmark_cells(const std::vector<std::string>& cells, std::size_t offset) {
  if (cells.size() != offset + 136)
    throw RejectedRecord("landmark row has " + std::to_string(cells.size() - offset) + " values, expected 136");
  Landmarks68 lm;
  try {
    for (std::size_t i = 0; i < 68; ++i)
      lm.points[i] = {std::stod(cells[offset + 2 * i]), std::stod(cells[offset + 2 * i + 1])};
  } catch (const std::exception&) {
    throw RejectedRecord("non-numeric landmark value");
  }
  return lm;
}

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

// Runs `command input output`; returns false on a non-zero exit.
inline bool run_tool(const std::string& command, const fs::path& input, const fs::path& output) {
  const std::string line = command + " " + shell_quote(input.string()) + " " + shell_quote(output.string()) +
                           " >/dev/null 2>&1";
  return std::system(line.c_str()) == 0;
}

inline fs::path scratch_file(const std::string& id, const char* ext) {
  static std::atomic<unsigned> counter{0};
  return fs::temp_directory_path() /
         ("rsgan_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + id + ext);
}

}  // namespace dataset_detail

/// Reads precomputed landmarks from a CSV: `id,x0,y0,...,x67,y67` per line.
/// A header line starting with "id" is ignored.
class FixtureLandmarkProvider : public LandmarkProvider {
 public:
  explicit FixtureLandmarkProvider(const fs::path& csv) {
    std::ifstream in(csv);
    if (!in) throw DatasetError("cannot open landmark fixture " + csv.string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line.rfind("id", 0) == 0) continue;
      auto cells = dataset_detail::split_csv_line(line);
      rows_[cells.at(0)] = std::move(cells);
    }
  }

  Landmarks68 landmarks(const std::string& id, const fs::path&) override {
    auto it = rows_.find(id);
    if (it == rows_.end()) throw RejectedRecord("no landmarks for " + id);
    return dataset_detail::parse_landmark_cells(it->second, 1);
  }

 private:
  std::map<std::string, std::vector<std::string>> rows_;
};

/// Reads precomputed background masks `<dir>/<id>.png` (white = background).
class FixtureMaskProvider : public SegmentationProvider {
 public:
  explicit FixtureMaskProvider(fs::path dir) : dir_(std::move(dir)) {}

  BinaryMask background_mask(const std::string& id, const fs::path&) override {
    const fs::path p = dir_ / (id + ".png");
    if (!fs::exists(p)) throw RejectedRecord("no background mask for " + id);
    try {
      return read_mask_png(p);
    } catch (const ImageIoError& e) {
      throw RejectedRecord(e.what());
    }
  }

 private:
  fs::path dir_;
};

/// Runs an installed detector as `<command> <image.png> <out.csv>`; the tool
/// writes one line of 136 comma-separated coordinates.
class ExternalLandmarkProvider : public LandmarkProvider {
 public:
  explicit ExternalLandmarkProvider(std::string command) : command_(std::move(command)) {}

  Landmarks68 landmarks(const std::string& id, const fs::path& image_path) override {
    const fs::path out = dataset_detail::scratch_file(id, ".csv");
    const bool ok = dataset_detail::run_tool(command_, image_path, out);
    std::string line;
    {
      std::ifstream in(out);
      if (ok && in) std::getline(in, line);
    }
    std::error_code ec;
    fs::remove(out, ec);
    if (!ok) throw RejectedRecord("landmark tool failed on " + id);
    return dataset_detail::parse_landmark_cells(dataset_detail::split_csv_line(line), 0);
  }

 private:
  std::string command_;
};

/// Runs an installed segmenter as `<command> <image.png> <out.png>`; the tool
/// writes a mask image with white background pixels.
class ExternalMaskProvider : public SegmentationProvider {
 public:
  explicit ExternalMaskProvider(std::string command) : command_(std::move(command)) {}

  BinaryMask background_mask(const std::string& id, const fs::path& image_path) override {
    const fs::path out = dataset_detail::scratch_file(id, ".png");
    const bool ok = dataset_detail::run_tool(command_, image_path, out);
    std::optional<BinaryMask> mask;
    std::string err;
    if (ok) {
      try {
        mask = read_mask_png(out);
      } catch (const ImageIoError& e) {
        err = e.what();
      }
    }
    std::error_code ec;
    fs::remove(out, ec);
    if (!ok) throw RejectedRecord("segmentation tool failed on " + id);
    if (!mask) throw RejectedRecord("segmentation output unreadable for " + id + ": " + err);
    return *mask;
  }

 private:
  std::string command_;
};

/// Attribute table: CSV with header `id,<name>,...`. CelebA-style -1/1 labels
/// are mapped to 0/1; other values must already be in [0,1].
struct AttributeTable {
  std::vector<std::string> names;
  std::map<std::string, AttributeVector> rows;

  const AttributeVector* find(const std::string& id) const {
    auto it = rows.find(id);
    return it == rows.end() ? nullptr : &it->second;
  }
};

inline AttributeTable load_attribute_table(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw DatasetError("cannot open attribute table " + csv.string());
  AttributeTable t;
  std::string line;
  if (!std::getline(in, line)) throw DatasetError("empty attribute table");
  auto header = dataset_detail::split_csv_line(line);
  if (header.size() < 2) throw DatasetError("attribute table needs an id column and attributes");
  t.names.assign(header.begin() + 1, header.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = dataset_detail::split_csv_line(line);
    if (cells.size() != header.size()) throw DatasetError("attribute row for " + cells.at(0) + " has wrong length");
    AttributeVector c;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      float v = std::stof(cells[i]);
      if (v == -1.f) v = 0.f;
      if (!(v >= 0.f && v <= 1.f)) throw DatasetError("attribute value out of range for " + cells[0]);
      c.push_back(v);
    }
    t.rows[cells[0]] = std::move(c);
  }
  return t;
}

struct SplitCounts {
  std::size_t train = 0;
  std::size_t test = 0;
};

struct BuildOptions {
  int resolution = 32;
  std::optional<SplitCounts> split;  // none: every usable record is "train"
  unsigned threads = 1;
  std::function<void(const std::string&)> log;  // skip messages
};

/// Processes every *.png in raw_dir (sorted by file name). Records whose
/// providers fail or whose geometry is invalid are skipped and counted. With
/// a split, the first `train` usable records are train, the next `test` are
/// test, and any further records are left out.
inline DatasetManifest build_dataset(const fs::path& raw_dir, LandmarkProvider& landmarks,
                                     SegmentationProvider& segmentation, const AttributeTable& attrs,
                                     const fs::path& out_dir, const BuildOptions& opt) {
  if (!fs::is_directory(raw_dir)) throw DatasetError("raw directory does not exist: " + raw_dir.string());
  if (opt.resolution < 8) throw DatasetError("resolution must be at least 8");
  std::vector<fs::path> inputs;
  for (const auto& e : fs::directory_iterator(raw_dir))
    if (e.is_regular_file() && e.path().extension() == ".png") inputs.push_back(e.path());
  std::sort(inputs.begin(), inputs.end());

  fs::create_directories(out_dir / "records");
  std::vector<std::optional<ManifestRecord>> results(inputs.size());
  std::mutex provider_mutex, log_mutex;

  auto process = [&](std::size_t i) {
    const fs::path& path = inputs[i];
    const std::string id = path.stem().string();
    try {
      Image image;
      try {
        image = read_png(path);
      } catch (const ImageIoError& e) {
        throw RejectedRecord(e.what());
      }
      Landmarks68 lm;
      BinaryMask bg;
      {
        // providers are not required to be thread-safe
        std::lock_guard<std::mutex> lock(provider_mutex);
        lm = landmarks.landmarks(id, path);
        bg = segmentation.background_mask(id, path);
      }
      const AttributeVector* c = attrs.find(id);
      if (!c) throw RejectedRecord("no attributes for " + id);
      if (width(image) != kRawWidth || height(image) != kRawHeight)
        throw GeometryError("image " + id + " is not 178 x 218");
      const BinaryMask face = compute_face_mask(lm, kRawWidth, kRawHeight);
      const RegionCrops crops = crop_regions(image, face, bg, opt.resolution);
      RegionSample s{id, crops.x, crops.x_f, crops.x_h, crops.m_bg, *c};
      const std::string dir = "records/" + id;
      write_sample(s, out_dir / dir);
      results[i] = ManifestRecord{id, "", dir, *c, json::object()};
    } catch (const RejectedRecord& e) {
      if (opt.log) {
        std::lock_guard<std::mutex> lock(log_mutex);
        opt.log("skipped " + id + ": " + e.what());
      }
    }
  };

  const unsigned n_threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(inputs.size())));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < inputs.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < inputs.size(); i = next++) process(i);
      });
    for (auto& th : pool) th.join();
  }

  DatasetManifest m;
  m.resolution = opt.resolution;
  m.attribute_names = attrs.names;
  std::size_t usable = 0;
  for (auto& r : results) {
    if (!r) {
      ++m.skip_count;
      continue;
    }
    std::string split = "train";
    if (opt.split) {
      if (usable < opt.split->train)
        split = "train";
      else if (usable < opt.split->train + opt.split->test)
        split = "test";
      else
        split.clear();
    }
    ++usable;
    if (split.empty()) continue;
    r->split = split;
    m.records.push_back(std::move(*r));
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Landmarks consistent with a synthetic portrait: the 41 face points sit on
/// an ellipse shrunk by the hull stretch, so the stretched hull roughly
/// recovers the rendered face. Jaw/brow points follow the outer face.
inline Landmarks68 synth_landmarks(std::uint64_t seed) {
  const SynthGeometry g = synth_geometry(seed);
  Landmarks68 lm;
  for (int i = 0; i < 68; ++i) {
    const double t = 2 * 3.14159265358979323846 * i / 68.0;
    double sx = 1.0, sy = 1.0;
    if (i >= Landmarks68::kFaceBegin) {
      sx = 1.0 / kHullStretchX;
      sy = 1.0 / kHullStretchY;
    }
    lm.points[static_cast<std::size_t>(i)] = {g.face_cx + 0.97 * g.face_ax * sx * std::cos(t),
                                              g.face_cy + 0.97 * g.face_ay * sy * std::sin(t)};
  }
  return lm;
}

struct SynthSpec {
  std::uint64_t seed = 0;
  double face_hue = 0;
  double hair_hue = 0;
};

/// Deterministic list of synthetic factor settings.
inline std::vector<SynthSpec> synth_specs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SynthSpec> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].seed = rng();
    out[i].face_hue = sample_hue(rng);
    out[i].hair_hue = sample_hue(rng);
  }
  return out;
}

inline std::vector<RegionSample> synth_samples(const std::vector<SynthSpec>& specs, int s) {
  std::vector<RegionSample> out;
  out.reserve(specs.size());
  for (const auto& sp : specs) out.push_back(synth_sample(sp.seed, sp.face_hue, sp.hair_hue, s));
  return out;
}

/// Writes a synthetic dataset (train records then test records) to out_dir.
inline DatasetManifest write_synth_dataset(const fs::path& out_dir, std::size_t n_train, std::size_t n_test, int s,
                                           std::uint64_t seed) {
  const auto specs = synth_specs(n_train + n_test, seed);
  DatasetManifest m;
  m.resolution = s;
  m.attribute_names = synth_attribute_names();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    RegionSample smp = synth_sample(specs[i].seed, specs[i].face_hue, specs[i].hair_hue, s);
    char name[32];
    std::snprintf(name, sizeof name, "synth_%06zu", i);
    smp.id = name;
    const std::string dir = std::string("records/") + name;
    write_sample(smp, out_dir / dir);
    m.records.push_back({smp.id, i < n_train ? "train" : "test", dir, smp.c,
                         json{{"face_hue", specs[i].face_hue}, {"hair_hue", specs[i].hair_hue}}});
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace rsgan
