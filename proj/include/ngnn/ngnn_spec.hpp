#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ngnn/tape.hpp"

namespace ngnn {

/// Parse failure with the 0-based offset of the offending character.
class NgnnSpecError : public std::runtime_error {
 public:
  NgnnSpecError(const std::string& msg, std::size_t position)
      : std::runtime_error(msg + " (at position " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Expands a block spec string into the ordered activation list. Grammar:
/// <n>-<act>("+"<n>-<act>)* with n a positive integer and act one of
/// relu | sigmoid | identity. "1-relu+1-sigmoid" -> [relu, sigmoid].
inline std::vector<Activation> parse_ngnn_spec(std::string_view s) {
  std::vector<Activation> acts;
  std::size_t i = 0;
  const auto fail = [&](const std::string& msg, std::size_t at) -> void {
    throw NgnnSpecError(msg, at);
  };
  while (true) {
    const std::size_t num_start = i;
    std::size_t count = 0;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
      count = count * 10 + static_cast<std::size_t>(s[i] - '0');
      ++i;
    }
    if (i == num_start) fail("expected layer count", i);
    if (count == 0) fail("layer count must be positive", num_start);
    if (i >= s.size() || s[i] != '-') fail("expected '-' after layer count", i);
    ++i;
    const std::size_t act_start = i;
    while (i < s.size() && s[i] != '+') ++i;
    const std::string_view name = s.substr(act_start, i - act_start);
    Activation act;
    if (name == "relu") act = Activation::relu;
    else if (name == "sigmoid") act = Activation::sigmoid;
    else if (name == "identity") act = Activation::identity;
    else fail("unknown activation '" + std::string(name) + "'", act_start);
    acts.insert(acts.end(), count, act);
    if (i == s.size()) break;
    ++i;  // consume '+'
    if (i == s.size()) fail("trailing '+'", i - 1);
  }
  return acts;
}

/// Canonical run-length rendering; parse_ngnn_spec(render_ngnn_spec(a)) == a.
inline std::string render_ngnn_spec(std::span<const Activation> acts) {
  std::string out;
  std::size_t i = 0;
  while (i < acts.size()) {
    std::size_t j = i;
    while (j < acts.size() && acts[j] == acts[i]) ++j;
    if (!out.empty()) out += '+';
    out += std::to_string(j - i);
    out += '-';
    out += to_string(acts[i]);
    i = j;
  }
  return out;
}

}  // namespace ngnn
