#include "sfuse/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "sfuse/image.hpp"
#include "sfuse/random.hpp"
#include "sfuse/wavelet.hpp"

namespace sfuse {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

bool is_image(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<std::string> default_class_names() {
  const auto& names = script_names();
  return {names.begin(), names.end()};
}

}  // namespace

const std::array<std::string, kNumClasses>& script_names() {
  static const std::array<std::string, kNumClasses> names = {
      "Bangla", "Devanagari", "Gujarati", "Gurumukhi", "Kannada", "Malayalam",
      "Oriya",  "Roman",      "Tamil",    "Telugu",    "Urdu"};
  return names;
}

int class_index(std::string_view name) {
  const auto& names = script_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error("unknown class name '" + std::string(name) + "'");
  return static_cast<int>(it - names.begin());
}

DatasetManifest discover_corpus(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw Error("corpus root is not a directory: " + root.string());
  DatasetManifest m{root, {}, default_class_names()};
  for (const auto& dir : std::filesystem::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    const std::string name = dir.path().filename().string();
    const int label = class_index(name);
    for (const auto& file : std::filesystem::directory_iterator(dir.path())) {
      if (file.is_regular_file() && is_image(file.path())) {
        m.entries.push_back({name + "/" + file.path().filename().string(), label});
      }
    }
  }
  std::sort(m.entries.begin(), m.entries.end());
  if (m.entries.empty()) throw Error("corpus " + root.string() + " contains no images");
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& manifest, const std::filesystem::path& root) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot open manifest " + manifest.string());
  DatasetManifest m{root, {}, default_class_names()};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 2 || fields[0].empty()) {
      throw Error("manifest " + manifest.string() + ":" + std::to_string(line_no) +
                  ": expected 'relative_path,class_name'");
    }
    m.entries.push_back({fields[0], class_index(fields[1])});
  }
  if (m.entries.empty()) throw Error("manifest " + manifest.string() + " has no records");
  return m;
}

DatasetSplit split_dataset(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error("split: train fraction must lie in (0,1), got " + std::to_string(train_fraction));
  }
  std::vector<std::vector<ManifestEntry>> by_class(kNumClasses);
  for (const auto& e : manifest.entries) by_class.at(static_cast<std::size_t>(e.label)).push_back(e);

  DatasetSplit s;
  s.ratio = train_fraction;
  s.seed = seed;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& members = by_class[c];
    if (members.size() < kMinSamplesPerClass) {
      throw Error("split: class " + script_names()[c] + " has " + std::to_string(members.size()) +
                  " samples, at least " + std::to_string(kMinSamplesPerClass) + " required");
    }
    std::sort(members.begin(), members.end());
    Rng rng(mix_seed(seed, c));
    rng.shuffle(std::span<ManifestEntry>(members));
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    s.train.insert(s.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.insert(s.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  return s;
}

void write_split(const DatasetSplit& split, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write split file " + path.string());
    for (const auto& e : split.train) out << e.path << ',' << script_names()[e.label] << ",train\n";
    for (const auto& e : split.test) out << e.path << ',' << script_names()[e.label] << ",test\n";
    if (!out) throw Error("cannot write split file " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

DatasetSplit read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open split file " + path.string());
  DatasetSplit s;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 3 || (f[2] != "train" && f[2] != "test")) {
      throw Error("split file " + path.string() + ":" + std::to_string(line_no) +
                  ": expected 'relative_path,class_name,train|test'");
    }
    (f[2] == "train" ? s.train : s.test).push_back({f[0], class_index(f[1])});
  }
  if (s.train.empty() || s.test.empty()) throw Error("split file " + path.string() + " lacks train or test records");
  const double total = static_cast<double>(s.train.size() + s.test.size());
  s.ratio = static_cast<double>(s.train.size()) / total;
  return s;
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                 std::uint64_t epoch) {
  if (count == 0) throw Error("batch_iter: empty sample set");
  if (batch_size == 0) throw Error("batch_iter: batch size must be at least 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(mix_seed(seed, 0x5EED0000ULL + epoch));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Batch gather_batch(const std::vector<Tensor>& inputs, const std::vector<int>& labels,
                   const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw Error("gather_batch: no samples selected");
  const Shape& sample = inputs.at(indices[0]).shape();
  Shape shape{indices.size()};
  shape.insert(shape.end(), sample.begin(), sample.end());
  Batch b{Tensor(shape), {}};
  const std::size_t stride = element_count(sample);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor& x = inputs.at(indices[i]);
    if (x.shape() != sample) {
      throw Error("gather_batch: sample shapes differ: " + to_string(sample) + " vs " + to_string(x.shape()));
    }
    std::copy(x.values().begin(), x.values().end(), b.images.data() + i * stride);
    b.labels.push_back(labels.at(indices[i]));
  }
  return b;
}

Tensor prepare_input(const TensorD& image, Domain domain, std::size_t size) {
  const NetworkSpec probe{domain, static_cast<int>(size), 2};
  if (!probe.valid()) {
    throw Error(std::string("prepare_input: (") + static_cast<char>(domain) + "," + std::to_string(size) +
                ") is not an input of any defined network");
  }
  TensorD base = image;
  if (domain == Domain::frequency) base = wavelet_preprocess(resize_bilinear(image, 128, 128));
  TensorD out = resize_bilinear(base, size, size);
  for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
  return out.cast<float>().reshaped({1, size, size});
}

}  // namespace sfuse
