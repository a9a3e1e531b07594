#pragma once

#include <array>
#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace sfuse {

enum class Domain : char { spatial = 's', frequency = 'f' };

/// Identifies one network by input domain, input side length and the number
/// of convolution + pooling pairs.
struct NetworkSpec {
  Domain domain = Domain::spatial;
  int input_size = 32;
  int depth = 2;

  auto operator<=>(const NetworkSpec&) const = default;

  bool valid() const;
  void validate() const;  // throws Error naming the spec
  std::string str() const;   // "s,32,2"
  std::string stem() const;  // "s_32_2", used in file names
  static NetworkSpec parse(std::string_view text);
};

/// The ten networks in fusion order: all spatial sizes, then frequency sizes,
/// depth 2 before depth 3.
const std::array<NetworkSpec, 10>& canonical_networks();
std::size_t canonical_index(const NetworkSpec& spec);

/// Sorts into canonical order and rejects duplicates.
std::vector<NetworkSpec> canonical_order(std::vector<NetworkSpec> specs);

/// Parses a selector: "all", "spatial" (or "s"), "frequency" (or "f"), a
/// domain/size pair such as "s,128" (both depths), or a ';'-separated list
/// of full specs "s,32,2;f,48,3".
std::vector<NetworkSpec> parse_selector(std::string_view text);

std::string selector_label(const std::vector<NetworkSpec>& specs);

}  // namespace sfuse
