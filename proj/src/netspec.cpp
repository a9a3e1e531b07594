#include "sfuse/netspec.hpp"

#include <algorithm>
#include <charconv>

#include "sfuse/tensor.hpp"

namespace sfuse {
namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error("network spec: cannot parse '" + std::string(whole) + "'");
  }
  return v;
}

Domain parse_domain(std::string_view s, std::string_view whole) {
  if (s == "s") return Domain::spatial;
  if (s == "f") return Domain::frequency;
  throw Error("network spec: domain must be 's' or 'f' in '" + std::string(whole) + "'");
}

}  // namespace

bool NetworkSpec::valid() const {
  if (depth != 2 && depth != 3) return false;
  if (domain == Domain::spatial) return input_size == 32 || input_size == 48 || input_size == 128;
  if (domain == Domain::frequency) return input_size == 32 || input_size == 48;
  return false;
}

void NetworkSpec::validate() const {
  if (!valid()) throw Error("network spec (" + str() + ") is not one of the ten defined networks");
}

std::string NetworkSpec::str() const {
  return std::string(1, static_cast<char>(domain)) + "," + std::to_string(input_size) + "," + std::to_string(depth);
}

std::string NetworkSpec::stem() const {
  return std::string(1, static_cast<char>(domain)) + "_" + std::to_string(input_size) + "_" + std::to_string(depth);
}

NetworkSpec NetworkSpec::parse(std::string_view text) {
  const auto parts = split(trim(text), ',');
  if (parts.size() != 3) throw Error("network spec: expected 'd,x,y', got '" + std::string(text) + "'");
  NetworkSpec s{parse_domain(trim(parts[0]), text), parse_int(trim(parts[1]), text), parse_int(trim(parts[2]), text)};
  s.validate();
  return s;
}

const std::array<NetworkSpec, 10>& canonical_networks() {
  static const std::array<NetworkSpec, 10> specs = {{
      {Domain::spatial, 32, 2},
      {Domain::spatial, 32, 3},
      {Domain::spatial, 48, 2},
      {Domain::spatial, 48, 3},
      {Domain::spatial, 128, 2},
      {Domain::spatial, 128, 3},
      {Domain::frequency, 32, 2},
      {Domain::frequency, 32, 3},
      {Domain::frequency, 48, 2},
      {Domain::frequency, 48, 3},
  }};
  return specs;
}

std::size_t canonical_index(const NetworkSpec& spec) {
  const auto& all = canonical_networks();
  const auto it = std::find(all.begin(), all.end(), spec);
  if (it == all.end()) throw Error("network spec (" + spec.str() + ") is not one of the ten defined networks");
  return static_cast<std::size_t>(it - all.begin());
}

std::vector<NetworkSpec> canonical_order(std::vector<NetworkSpec> specs) {
  std::sort(specs.begin(), specs.end(),
            [](const NetworkSpec& a, const NetworkSpec& b) { return canonical_index(a) < canonical_index(b); });
  if (std::adjacent_find(specs.begin(), specs.end()) != specs.end()) {
    throw Error("selector lists a network more than once");
  }
  return specs;
}

std::vector<NetworkSpec> parse_selector(std::string_view text) {
  text = trim(text);
  const auto& all = canonical_networks();
  auto where = [&](auto pred) {
    std::vector<NetworkSpec> out;
    std::copy_if(all.begin(), all.end(), std::back_inserter(out), pred);
    return out;
  };
  if (text.empty()) throw Error("selector is empty");
  if (text == "all") return {all.begin(), all.end()};
  if (text == "spatial" || text == "s") return where([](const NetworkSpec& s) { return s.domain == Domain::spatial; });
  if (text == "frequency" || text == "f") {
    return where([](const NetworkSpec& s) { return s.domain == Domain::frequency; });
  }
  std::vector<NetworkSpec> out;
  for (std::string_view item : split(text, ';')) {
    item = trim(item);
    const auto parts = split(item, ',');
    if (parts.size() == 2) {
      const Domain d = parse_domain(trim(parts[0]), item);
      const int x = parse_int(trim(parts[1]), item);
      auto pair = where([&](const NetworkSpec& s) { return s.domain == d && s.input_size == x; });
      if (pair.empty()) throw Error("selector: no networks match '" + std::string(item) + "'");
      out.insert(out.end(), pair.begin(), pair.end());
    } else {
      out.push_back(NetworkSpec::parse(item));
    }
  }
  return canonical_order(std::move(out));
}

std::string selector_label(const std::vector<NetworkSpec>& specs) {
  const auto& all = canonical_networks();
  if (specs.size() == all.size()) return "all";
  if (specs.size() == 1) return specs[0].str();
  const bool same_domain = std::all_of(specs.begin(), specs.end(), [&](auto& s) { return s.domain == specs[0].domain; });
  if (same_domain) {
    const auto count = std::count_if(all.begin(), all.end(), [&](auto& s) { return s.domain == specs[0].domain; });
    if (static_cast<std::size_t>(count) == specs.size()) return specs[0].domain == Domain::spatial ? "spatial" : "frequency";
    if (specs.size() == 2 && specs[0].input_size == specs[1].input_size) {
      return std::string(1, static_cast<char>(specs[0].domain)) + "," + std::to_string(specs[0].input_size);
    }
  }
  std::string out;
  for (const auto& s : specs) out += (out.empty() ? "" : ";") + s.str();
  return out;
}

}  // namespace sfuse
