#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "asymac/nn/tape.hpp"

namespace asymac::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text checkpoint:
///
///   asymac-checkpoint v1
///   meta <key> <value...>          (any number, value runs to end of line)
///   tensor <name> <rows> <cols>
///   <rows lines of cols values, shortest round-trip form, space separated>
///   end
///
/// Values round-trip exactly.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Matrix>> tensors;

  void add(std::string name, Matrix value);
  bool has(const std::string& name) const;
  /// Throws CheckpointError if absent.
  const Matrix& tensor(const std::string& name) const;
  const std::string& get(const std::string& key) const;

  std::string to_string() const;
  static Checkpoint parse(const std::string& text);
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace asymac::nn
