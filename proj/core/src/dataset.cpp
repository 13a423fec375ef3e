#include "spxnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "spxnet/errors.hpp"
#include "spxnet/formats.hpp"
#include "spxnet/keyvalue.hpp"
#include "spxnet/rng.hpp"
#include "spxnet/weights_io.hpp"

namespace spxnet {

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.mode = mode;
  for (std::size_t i : indices) {
    if (i >= size()) throw ShapeError("dataset index " + std::to_string(i) + " out of range");
    if (mode == DataMode::flow) {
      out.flow.push_back(flow[i]);
    } else {
      out.stereo.push_back(stereo[i]);
    }
  }
  return out;
}

std::pair<int, int> Dataset::image_size() const {
  if (empty()) throw ShapeError("empty dataset has no image size");
  auto size_of = [&](std::size_t i) {
    const Shape s = mode == DataMode::flow ? flow[i].frame1.shape() : stereo[i].left.shape();
    return std::pair{s.h, s.w};
  };
  const auto first = size_of(0);
  for (std::size_t i = 1; i < size(); ++i) {
    if (size_of(i) != first) throw ShapeError("dataset samples differ in size");
  }
  return first;
}

Dataset synthetic_dataset(DataMode mode, int n, int height, int width, std::uint64_t seed,
                          const SyntheticOptions& options) {
  Dataset d;
  d.mode = mode;
  if (mode == DataMode::flow) {
    d.flow = gen_synthetic_flow(n, height, width, seed, options);
  } else {
    d.stereo = gen_synthetic_stereo(n, height, width, seed, options);
  }
  return d;
}

std::vector<std::size_t> validation_indices(std::size_t n, std::uint64_t seed, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("validation fraction must lie in [0, 1]");
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
  for (std::size_t i = 0; i < n; ++i) keyed.emplace_back(Rng(seed, {0x5a11u, i}).next(), i);
  std::sort(keyed.begin(), keyed.end());
  const auto count = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(keyed[k].second);
  std::sort(out.begin(), out.end());
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, std::uint64_t seed, double fraction) {
  const auto val = validation_indices(data.size(), seed, fraction);
  std::vector<std::size_t> train;
  for (std::size_t i = 0, k = 0; i < data.size(); ++i) {
    if (k < val.size() && val[k] == i) {
      ++k;
    } else {
      train.push_back(i);
    }
  }
  return {data.subset(train), data.subset(val)};
}

DatasetManifest DatasetManifest::parse(std::istream& is, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 3 || fields[1].empty() || fields[2].empty()) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": expected mode<TAB>source<TAB>split");
    }
    ManifestRecord r;
    try {
      r.mode = parse_data_mode(fields[0]);
    } catch (const ConfigError& e) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    r.source = fields[1];
    r.split = fields[2];
    if (!m.records.empty() && r.mode != m.records.front().mode) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": records mix flow and stereo");
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  return parse(is, path.parent_path());
}

std::string DatasetManifest::str() const {
  std::string out;
  for (const auto& r : records) out += to_string(r.mode) + "\t" + r.source + "\t" + r.split + "\n";
  return out;
}

void DatasetManifest::save(const std::filesystem::path& path) const { atomic_write(path, str()); }

DataMode DatasetManifest::mode() const {
  if (records.empty()) throw FormatError("manifest has no records");
  return records.front().mode;
}

std::vector<std::string> DatasetManifest::splits() const {
  std::vector<std::string> out;
  for (const auto& r : records) {
    if (std::find(out.begin(), out.end(), r.split) == out.end()) out.push_back(r.split);
  }
  return out;
}

namespace {

struct SyntheticSource {
  std::uint64_t seed;
  std::uint64_t index;
  int height;
  int width;
};

bool parse_synthetic(const std::string& source, SyntheticSource& out) {
  constexpr std::string_view prefix = "synthetic:";
  if (source.rfind(prefix, 0) != 0) return false;
  const auto parts = split_list(source.substr(prefix.size()), ':');
  if (parts.size() != 3) throw FormatError("synthetic source '" + source + "' must be synthetic:<seed>:<index>:<h>x<w>");
  const auto x = parts[2].find('x');
  try {
    std::size_t used = 0;
    out.seed = std::stoull(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("seed");
    out.index = std::stoull(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("index");
    if (x == std::string::npos) throw std::invalid_argument("size");
    out.height = std::stoi(parts[2].substr(0, x));
    out.width = std::stoi(parts[2].substr(x + 1));
  } catch (const std::exception&) {
    throw FormatError("synthetic source '" + source + "' is malformed");
  }
  return true;
}

}  // namespace

Dataset load_dataset(const DatasetManifest& manifest, const std::string& split) {
  Dataset d;
  d.mode = manifest.mode();
  for (const auto& r : manifest.records) {
    if (!split.empty() && r.split != split) continue;
    SyntheticSource syn{};
    if (parse_synthetic(r.source, syn)) {
      if (d.mode == DataMode::flow) {
        d.flow.push_back(gen_flow_sample(syn.seed, syn.index, syn.height, syn.width));
      } else {
        d.stereo.push_back(gen_stereo_sample(syn.seed, syn.index, syn.height, syn.width));
      }
      continue;
    }
    const std::filesystem::path stem = manifest.base_dir / r.source;
    auto file = [&](const char* suffix) {
      auto p = stem;
      p += suffix;
      return p;
    };
    if (d.mode == DataMode::flow) {
      FlowSample s{read_ppm(file("_img1.ppm")), read_ppm(file("_img2.ppm")), read_flo(file("_flow.flo")), {}};
      check_sample(s);
      d.flow.push_back(std::move(s));
    } else {
      StereoSample s{read_ppm(file("_left.ppm")), read_ppm(file("_right.ppm")), read_pfm(file("_disp.pfm")), {}};
      check_sample(s);
      d.stereo.push_back(std::move(s));
    }
  }
  if (!d.empty()) d.image_size();
  return d;
}

DatasetManifest write_dataset(const Dataset& data, const std::filesystem::path& dir, std::uint64_t seed,
                              double val_fraction) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto val = validation_indices(data.size(), seed, val_fraction);
  DatasetManifest m;
  m.base_dir = dir;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::ostringstream name;
    name << "sample_" << std::setw(5) << std::setfill('0') << i;
    const std::string stem = name.str();
    const auto path = [&](const char* suffix) { return dir / (stem + suffix); };
    if (data.mode == DataMode::flow) {
      write_ppm(data.flow[i].frame1, path("_img1.ppm"));
      write_ppm(data.flow[i].frame2, path("_img2.ppm"));
      write_flo(data.flow[i].flow, path("_flow.flo"));
    } else {
      write_ppm(data.stereo[i].left, path("_left.ppm"));
      write_ppm(data.stereo[i].right, path("_right.ppm"));
      write_pfm(data.stereo[i].disparity, path("_disp.pfm"));
    }
    const bool is_val = std::binary_search(val.begin(), val.end(), i);
    m.records.push_back({data.mode, stem, is_val ? "val" : "train"});
  }
  m.save(dir / "manifest.tsv");
  return m;
}

}  // namespace spxnet
