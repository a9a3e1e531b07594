#include "sfuse/persistence.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sfuse/image.hpp"

namespace sfuse {
namespace {

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string origin) : bytes_(bytes), origin_(std::move(origin)) {}

  template <class U>
  U le(const char* field) {
    need(sizeof(U), field);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string raw(std::size_t n, const char* field) {
    need(n, field);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(origin_ + ": " + what + " at offset " + std::to_string(pos_));
  }

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* field) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(origin_ + ": truncated at offset " + std::to_string(pos_) + " while reading " + field + " (" +
                  std::to_string(n) + " bytes needed, " + std::to_string(bytes_.size() - pos_) + " left)");
    }
  }

  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::string format_real(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
  return std::string(buf, r.ptr);
}

std::string report_id(const std::string& label) {
  std::string out = label;
  for (char& c : out) {
    if (c == ',') c = '_';
    if (c == ';') c = '+';
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot write " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string encode_checkpoint(const Network<float>& net) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  if (net.is_fusion_head()) {
    put_le<std::uint8_t>(out, 1);
    put_le<std::uint8_t>(out, 0);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.input_length()));
    put_le<std::uint32_t>(out, 0);
  } else {
    put_le<std::uint8_t>(out, 0);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(net.spec().domain));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.spec().input_size));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.spec().depth));
  }
  const TrainingMeta& m = net.meta();
  put_le<std::uint64_t>(out, m.seed);
  put_le<std::uint32_t>(out, m.epochs_completed);
  put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m.final_loss));
  put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m.final_accuracy));

  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.parameters().size()));
  for (const auto& p : net.parameters()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t e : p.value.shape()) put_le<std::uint64_t>(out, e);
    for (float v : p.value.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Network<float> decode_checkpoint(const std::string& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  if (r.raw(sizeof(kCheckpointMagic), "magic") != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw Error(origin + ": bad magic at offset 0 (not an sfuse checkpoint)");
  }
  const auto version = r.le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw Error(origin + ": unsupported version " + std::to_string(version) + " at offset 8 (expected " +
                std::to_string(kCheckpointVersion) + ")");
  }
  const auto kind = r.le<std::uint8_t>("network kind");
  const auto domain = r.le<std::uint8_t>("domain");
  const auto input = r.le<std::uint32_t>("input size");
  const auto depth = r.le<std::uint32_t>("depth");
  std::optional<NetworkSpec> spec;
  if (kind == 0) {
    if (domain != 's' && domain != 'f') r.fail("invalid domain byte " + std::to_string(domain));
    spec = NetworkSpec{static_cast<Domain>(domain), static_cast<int>(input), static_cast<int>(depth)};
    if (!spec->valid()) r.fail("invalid network spec (" + spec->str() + ")");
  } else if (kind != 1) {
    r.fail("invalid network kind " + std::to_string(kind));
  }

  TrainingMeta meta;
  meta.seed = r.le<std::uint64_t>("seed");
  meta.epochs_completed = r.le<std::uint32_t>("epochs completed");
  meta.final_loss = std::bit_cast<double>(r.le<std::uint64_t>("final loss"));
  meta.final_accuracy = std::bit_cast<double>(r.le<std::uint64_t>("final accuracy"));

  const auto blocks = r.le<std::uint32_t>("block count");
  if (blocks > 64) r.fail("implausible block count " + std::to_string(blocks));
  std::vector<Parameter<float>> params;
  for (std::uint32_t b = 0; b < blocks; ++b) {
    const auto name_len = r.le<std::uint32_t>("block name length");
    if (name_len > 256) r.fail("implausible name length " + std::to_string(name_len));
    std::string name = r.raw(name_len, "block name");
    const auto rank = r.le<std::uint32_t>("block rank");
    if (rank == 0 || rank > 8) r.fail("invalid rank " + std::to_string(rank) + " for block '" + name + "'");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto e = r.le<std::uint64_t>("block extent");
      if (e == 0 || e > (std::uint64_t{1} << 32)) r.fail("invalid extent in block '" + name + "'");
      shape.push_back(static_cast<std::size_t>(e));
    }
    const std::size_t count = element_count(shape);
    if (count > (std::size_t{1} << 31)) r.fail("block '" + name + "' is too large");
    std::vector<float> values(count);
    const std::string raw = r.raw(count * 4, "block values");
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t u = 0;
      for (std::size_t k = 0; k < 4; ++k) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + k])) << (8 * k);
      values[i] = std::bit_cast<float>(u);
    }
    params.push_back({std::move(name), Tensor(shape, std::move(values))});
  }
  if (!r.done()) r.fail("trailing bytes after last block");
  try {
    return Network<float>::assemble(spec, kind == 1 ? input : 0, std::move(params), meta);
  } catch (const Error& e) {
    throw Error(origin + ": " + e.what());
  }
}

void save_checkpoint(const Network<float>& net, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(net));
}

Network<float> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

Network<float> load_checkpoint(const std::filesystem::path& path, const NetworkSpec& expected) {
  Network<float> net = load_checkpoint(path);
  if (net.is_fusion_head()) {
    throw Error(path.string() + ": holds a fusion head, expected network " + expected.str());
  }
  if (net.spec() != expected) {
    throw Error(path.string() + ": holds network " + net.spec().str() + ", expected " + expected.str());
  }
  return net;
}

void write_feature_store(const std::filesystem::path& path, const std::vector<ManifestEntry>& samples,
                         const std::vector<std::vector<float>>& rows) {
  if (samples.size() != rows.size()) throw Error("feature store: sample and row counts differ");
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].path.find(',') != std::string::npos) {
      throw Error("feature store: sample id '" + samples[i].path + "' contains a comma");
    }
    out += samples[i].path;
    for (float v : rows[i]) {
      const auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
      out += ',';
      out.append(buf, r.ptr);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<std::pair<std::string, std::vector<float>>> read_feature_store(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::pair<std::string, std::vector<float>>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t pos = line.find(',');
    if (pos == std::string::npos) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": record has no feature values");
    }
    std::pair<std::string, std::vector<float>> rec{line.substr(0, pos), {}};
    while (pos != std::string::npos) {
      const std::size_t start = pos + 1;
      pos = line.find(',', start);
      const std::size_t end = pos == std::string::npos ? line.size() : pos;
      float v = 0;
      const auto r = std::from_chars(line.data() + start, line.data() + end, v);
      if (r.ec != std::errc() || r.ptr != line.data() + end) {
        throw Error(path.string() + ":" + std::to_string(line_no) + ": malformed value");
      }
      rec.second.push_back(v);
    }
    if (!out.empty() && out.front().second.size() != rec.second.size()) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": record length differs from the first record");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::string format_history(const std::vector<EpochStats>& history) {
  std::string out = "epoch,loss,accuracy\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    out += std::to_string(e + 1) + "," + format_real(history[e].loss) + "," + format_real(history[e].accuracy) + "\n";
  }
  return out;
}

std::string format_report(const std::vector<SubsetResult>& results) {
  const auto& names = script_names();
  std::string out = "# sfuse metrics report\n\n";
  out += "subset,networks,samples,accuracy,precision,recall,f_score\n";
  for (const auto& r : results) {
    out += report_id(r.label) + "," + std::to_string(r.selector.size()) + "," + std::to_string(r.confusion.total()) +
           "," + format_real(r.metrics.accuracy) + "," + format_real(r.metrics.precision) + "," +
           format_real(r.metrics.recall) + "," + format_real(r.metrics.f_score) + "\n";
  }
  for (const auto& r : results) {
    out += "\n## subset " + report_id(r.label) + "\n";
    out += "networks";
    for (const auto& s : r.selector) out += "," + s.stem();
    out += "\n```confusion\n";
    for (const auto& row : r.confusion.counts) {
      for (std::size_t j = 0; j < row.size(); ++j) out += (j ? " " : "") + std::to_string(row[j]);
      out += "\n";
    }
    out += "```\n";
    out += "accuracy," + format_real(r.metrics.accuracy) + "\n";
    out += "precision," + format_real(r.metrics.precision) + "\n";
    out += "recall," + format_real(r.metrics.recall) + "\n";
    out += "f_score," + format_real(r.metrics.f_score) + "\n";
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      out += "precision." + names[c] + "," + format_real(r.metrics.class_precision[c]) + "\n";
      out += "recall." + names[c] + "," + format_real(r.metrics.class_recall[c]) + "\n";
      out += "f_score." + names[c] + "," + format_real(r.metrics.class_f_score[c]) + "\n";
    }
    for (int c : r.metrics.no_samples) out += "flag.no_samples," + names[static_cast<std::size_t>(c)] + "\n";
    for (int c : r.metrics.no_predictions) out += "flag.no_predictions," + names[static_cast<std::size_t>(c)] + "\n";
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(path.string() + ":" + std::to_string(line_no) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::vector<std::filesystem::path> dump_activations(const Network<float>& net, const Tensor& input,
                                                    const std::filesystem::path& out_dir) {
  if (net.is_fusion_head()) throw Error("dump_activations: fusion heads have no activation maps");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw Error("dump_activations: cannot create directory " + out_dir.string());
  }
  Shape batch_shape{1};
  batch_shape.insert(batch_shape.end(), input.shape().begin(), input.shape().end());
  Tape<float> tape;
  Rng unused(0);
  const ForwardPass pass = net.record(tape, input.reshaped(batch_shape), Mode::eval, unused);

  std::vector<std::filesystem::path> written;
  int conv_no = 0;
  int pool_no = 0;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const LayerKind kind = net.layers()[i].kind;
    std::string layer;
    if (kind == LayerKind::conv) {
      layer = "cl" + std::to_string(++conv_no);
    } else if (kind == LayerKind::maxpool) {
      layer = "pl" + std::to_string(++pool_no);
    } else {
      continue;
    }
    const Tensor& maps = tape.value(pass.layer_outputs[i]);  // [1,C,H,W]
    const std::size_t channels = maps.dim(1);
    const std::size_t h = maps.dim(2);
    const std::size_t w = maps.dim(3);
    for (std::size_t c = 0; c < channels; ++c) {
      TensorD map({h, w});
      for (std::size_t k = 0; k < h * w; ++k) map[k] = maps[c * h * w + k];
      const auto path = out_dir / (layer + "_" + std::to_string(c) + ".png");
      save_gray8(rescale_unit(map), path);
      written.push_back(path);
    }
  }
  return written;
}

std::vector<std::filesystem::path> dump_activations(const Network<float>& net, const TensorD& image,
                                                    const std::filesystem::path& out_dir) {
  const NetworkSpec& spec = net.spec();
  return dump_activations(net, prepare_input(image, spec.domain, static_cast<std::size_t>(spec.input_size)), out_dir);
}

}  // namespace sfuse
