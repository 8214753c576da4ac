#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "gplab/nn.hpp"

namespace gplab::nn {
namespace {

constexpr std::string_view kMagic = "gplab-params 1";

std::string hex(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, res.ptr);
}

double parse_hex(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw Error("malformed parameter value '" + std::string(s) + "'");
  }
  return v;
}

bool next_content_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') return true;
  }
  return false;
}

}  // namespace

void save_params(std::ostream& out, const ParamSet& params, std::string_view comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << kMagic << '\n';
  for (const auto& [name, t] : params) {
    out << name << ' ' << t.rank();
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i) out << ' ';
      out << hex(t[i]);
    }
    out << '\n';
  }
}

ParamSet load_params(std::istream& in) {
  std::string line;
  if (!next_content_line(in, line) || line != kMagic) {
    throw Error("not a parameter file (missing '" + std::string(kMagic) + "' header)");
  }
  ParamSet params;
  while (next_content_line(in, line)) {
    std::istringstream head(line);
    std::string name;
    std::size_t rank = 0;
    if (!(head >> name >> rank)) throw Error("malformed parameter header '" + line + "'");
    Shape shape(rank);
    for (auto& d : shape)
      if (!(head >> d)) throw Error("malformed shape for parameter '" + name + "'");
    std::string values;
    if (!std::getline(in, values)) throw Error("missing values for parameter '" + name + "'");
    Tensor t(shape);
    std::istringstream vs(values);
    std::string tok;
    std::size_t i = 0;
    while (vs >> tok) {
      if (i >= t.size()) throw Error("too many values for parameter '" + name + "'");
      t[i++] = parse_hex(tok);
    }
    if (i != t.size()) throw Error("too few values for parameter '" + name + "'");
    params.add(std::move(name), std::move(t));
  }
  return params;
}

void save_params(const std::string& path, const ParamSet& params, std::string_view comment) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  save_params(out, params, comment);
  if (!out) throw Error("failed writing '" + path + "'");
}

ParamSet load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return load_params(in);
}

}  // namespace gplab::nn
