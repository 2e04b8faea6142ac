#include "asymac/nn/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

namespace asymac::nn {

namespace {
constexpr const char* kMagic = "asymac-checkpoint v1";
}

void Checkpoint::add(std::string name, Matrix value) { tensors.emplace_back(std::move(name), std::move(value)); }

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return true;
  return false;
}

const Matrix& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return m;
  throw CheckpointError("checkpoint has no tensor '" + name + "'");
}

const std::string& Checkpoint::get(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw CheckpointError("checkpoint has no meta key '" + key + "'");
  return it->second;
}

std::string Checkpoint::to_string() const {
  std::string out = std::string(kMagic) + "\n";
  for (const auto& [k, v] : meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos)
      throw CheckpointError("meta entries must be single-line with a space-free key: " + k);
    out += "meta " + k + " " + v + "\n";
  }
  char buf[32];
  for (const auto& [name, m] : tensors) {
    out += "tensor " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (j) out += ' ';
        out.append(buf, std::to_chars(buf, buf + sizeof buf, m(i, j)).ptr);
      }
      out += '\n';
    }
  }
  out += "end\n";
  return out;
}

Checkpoint Checkpoint::parse(const std::string& text) {
  std::string_view rest(text);
  auto next_line = [&rest](std::string_view& line) {
    if (rest.empty()) return false;
    const auto nl = rest.find('\n');
    line = rest.substr(0, nl);
    rest = nl == std::string_view::npos ? std::string_view() : rest.substr(nl + 1);
    return true;
  };
  std::string_view line;
  if (!next_line(line) || line != kMagic) throw CheckpointError("not an asymac checkpoint (bad header)");
  Checkpoint ck;
  int line_no = 1;
  bool ended = false;
  while (next_line(line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto space = line.find(' ');
    const std::string_view word = line.substr(0, space);
    const std::string_view tail = space == std::string_view::npos ? std::string_view() : line.substr(space + 1);
    if (word == "end") {
      ended = true;
      break;
    }
    if (word == "meta") {
      const auto gap = tail.find(' ');
      ck.meta[std::string(tail.substr(0, gap))] = gap == std::string_view::npos ? "" : std::string(tail.substr(gap + 1));
    } else if (word == "tensor") {
      std::istringstream ls{std::string(tail)};
      std::string name;
      long rows = -1, cols = -1;
      if (!(ls >> name >> rows >> cols) || rows < 0 || cols < 0)
        throw CheckpointError("line " + std::to_string(line_no) + ": malformed tensor header");
      Matrix m(rows, cols);
      for (long i = 0; i < rows; ++i) {
        if (!next_line(line)) throw CheckpointError("truncated tensor '" + name + "'");
        ++line_no;
        const char* p = line.data();
        const char* end = p + line.size();
        for (long j = 0; j < cols; ++j) {
          while (p < end && *p == ' ') ++p;
          double v = 0.0;
          const auto res = std::from_chars(p, end, v);
          if (res.ec != std::errc())
            throw CheckpointError("line " + std::to_string(line_no) + ": short or malformed row in '" + name + "'");
          m(i, j) = v;
          p = res.ptr;
        }
      }
      ck.tensors.emplace_back(std::move(name), std::move(m));
    } else {
      throw CheckpointError("line " + std::to_string(line_no) + ": unknown record '" + std::string(word) + "'");
    }
  }
  if (!ended) throw CheckpointError("checkpoint is missing its end marker");
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path);
  out << to_string();
  if (!out) throw CheckpointError("write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path);
  in.seekg(0, std::ios::end);
  std::string text(static_cast<std::size_t>(in.tellg()), '\0');
  in.seekg(0);
  in.read(text.data(), static_cast<std::streamsize>(text.size()));
  if (!in) throw CheckpointError("read failed for " + path);
  return parse(text);
}

}  // namespace asymac::nn
