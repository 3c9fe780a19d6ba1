#include "btsim/msh.hpp"

#include "btsim/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace btsim {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view tok, T& value) {
  const char* end = tok.data() + tok.size();
  auto res = std::from_chars(tok.data(), end, value);
  return res.ec == std::errc() && res.ptr == end;
}

int element_dim(int type) {
  switch (type) {
    case 15: return 0;
    case 1: return 1;
    case 2: return 2;
    case 4: return 3;
    default: return -1;
  }
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line = text_.substr(pos_, end - pos_);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.remove_suffix(1);
    }
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    pos_ = end + 1;
    ++line_no_;
    return true;
  }

  std::size_t line_no() const { return line_no_; }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorKind::kParse, "msh line " + std::to_string(line_no_) + ": " + what);
  }

  std::string_view require(const char* context) {
    std::string_view line;
    if (!next(line)) {
      fail(ErrorKind::kParse, "msh line " + std::to_string(line_no_ + 1) +
                                  ": unexpected end of file in " + context);
    }
    return line;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

std::size_t parse_count(LineReader& in, const char* context) {
  auto tok = split_ws(in.require(context));
  long count = 0;
  if (tok.size() != 1 || !parse_number(tok[0], count) || count < 0) {
    in.error(std::string("malformed count in ") + context);
  }
  return static_cast<std::size_t>(count);
}

void expect_end(LineReader& in, std::string_view tag) {
  auto line = in.require("section end");
  if (line != tag) in.error("expected " + std::string(tag));
}

}  // namespace

MshDocument parse_msh(std::string_view text) {
  MshDocument doc;
  LineReader in(text);
  bool have_format = false, have_nodes = false, have_elements = false;
  std::string_view line;
  while (in.next(line)) {
    if (line.empty()) continue;
    if (line.front() != '$') in.error("expected a section header");
    if (line == "$MeshFormat") {
      auto tok = split_ws(in.require("$MeshFormat"));
      if (tok.size() != 3) in.error("malformed $MeshFormat line");
      doc.version = std::string(tok[0]);
      if (doc.version != "2.2") in.error("unsupported MSH version " + doc.version + " (only 2.2)");
      int file_type = -1, data_size = 0;
      if (!parse_number(tok[1], file_type) || !parse_number(tok[2], data_size)) {
        in.error("malformed $MeshFormat line");
      }
      if (file_type != 0) in.error("binary MSH files are not supported");
      expect_end(in, "$EndMeshFormat");
      have_format = true;
    } else if (line == "$Nodes") {
      if (!have_format) in.error("$Nodes before $MeshFormat");
      const std::size_t count = parse_count(in, "$Nodes");
      doc.nodes.reserve(std::min<std::size_t>(count, 1u << 20));
      for (std::size_t i = 0; i < count; ++i) {
        auto tok = split_ws(in.require("$Nodes"));
        long id = 0;
        Vec3 x;
        if (tok.size() != 4 || !parse_number(tok[0], id) || !parse_number(tok[1], x[0]) ||
            !parse_number(tok[2], x[1]) || !parse_number(tok[3], x[2])) {
          in.error("malformed node line");
        }
        if (!x.allFinite()) in.error("non-finite node coordinate");
        if (!doc.node_index.emplace(id, static_cast<int>(doc.nodes.size())).second) {
          in.error("duplicate node id " + std::to_string(id));
        }
        doc.nodes.push_back(x);
      }
      expect_end(in, "$EndNodes");
      have_nodes = true;
    } else if (line == "$Elements") {
      if (!have_nodes) in.error("$Elements before $Nodes");
      const std::size_t count = parse_count(in, "$Elements");
      doc.elements.reserve(std::min<std::size_t>(count, 1u << 20));
      for (std::size_t i = 0; i < count; ++i) {
        auto tok = split_ws(in.require("$Elements"));
        MshElement el;
        long ntags = 0;
        if (tok.size() < 3 || !parse_number(tok[0], el.id) || !parse_number(tok[1], el.type) ||
            !parse_number(tok[2], ntags) || ntags < 0) {
          in.error("malformed element line");
        }
        const int dim = element_dim(el.type);
        if (dim < 0) in.error("unsupported element type " + std::to_string(el.type));
        const std::size_t nnodes = static_cast<std::size_t>(dim + 1);
        if (tok.size() != 3 + static_cast<std::size_t>(ntags) + nnodes) {
          in.error("element line has the wrong number of fields");
        }
        for (long t = 0; t < ntags; ++t) {
          long tag = 0;
          if (!parse_number(tok[3 + t], tag)) in.error("malformed element tag");
          el.tags.push_back(tag);
        }
        for (std::size_t k = 0; k < nnodes; ++k) {
          long nid = 0;
          if (!parse_number(tok[3 + ntags + k], nid)) in.error("malformed element node id");
          auto it = doc.node_index.find(nid);
          if (it == doc.node_index.end()) {
            in.error("element " + std::to_string(el.id) + " references missing node " +
                     std::to_string(nid));
          }
          el.nodes.push_back(it->second);
        }
        doc.elements.push_back(std::move(el));
      }
      expect_end(in, "$EndElements");
      have_elements = true;
    } else {
      const std::string name(line.substr(1));
      const std::string end_tag = "$End" + name;
      const std::size_t start = in.line_no();
      bool closed = false;
      while (in.next(line)) {
        if (line == end_tag) {
          closed = true;
          break;
        }
      }
      if (!closed) {
        fail(ErrorKind::kParse, "msh line " + std::to_string(start) + ": section $" + name +
                                    " is never closed");
      }
      doc.warnings.push_back("skipped unknown section $" + name + " at line " + std::to_string(start));
    }
  }
  if (!have_format) fail(ErrorKind::kParse, "msh: missing $MeshFormat section");
  if (!have_nodes) fail(ErrorKind::kParse, "msh: missing $Nodes section");
  if (!have_elements) fail(ErrorKind::kParse, "msh: missing $Elements section");
  return doc;
}

MeshImport to_mesh(const MshDocument& doc) {
  int topo = -1;
  for (const auto& el : doc.elements) topo = std::max(topo, element_dim(el.type));
  if (topo < 1) fail(ErrorKind::kUnsupportedMesh, "msh document has no line, triangle or tetrahedron cells");

  std::vector<int> renumber(doc.nodes.size(), -1);
  std::vector<Vec3> verts;
  std::vector<int> cells;
  CompartmentMarker marker;
  for (const auto& el : doc.elements) {
    if (element_dim(el.type) != topo) continue;
    for (int n : el.nodes) {
      if (renumber[n] < 0) {
        renumber[n] = static_cast<int>(verts.size());
        verts.push_back(doc.nodes[n]);
      }
      cells.push_back(renumber[n]);
    }
    marker.push_back(el.tags.empty() ? 0 : static_cast<int>(el.tags.front()));
  }

  bool z_used = false, y_used = false;
  for (const auto& x : verts) {
    z_used |= x[2] != 0.0;
    y_used |= x[1] != 0.0;
  }
  int embed = z_used ? 3 : (y_used ? 2 : 1);
  embed = std::max(embed, topo);

  MeshImport out{Mesh(embed, topo, std::move(verts), std::move(cells)), std::move(marker), {}};

  std::map<std::array<int, 3>, int> facet_lookup;
  for (std::size_t f = 0; f < out.mesh.num_facets(); ++f) {
    std::array<int, 3> key{-1, -1, -1};
    auto fv = out.mesh.facet_vertices(f);
    std::copy(fv.begin(), fv.end(), key.begin());
    facet_lookup.emplace(key, static_cast<int>(f));
  }
  for (const auto& el : doc.elements) {
    if (element_dim(el.type) != topo - 1) continue;
    std::array<int, 3> key{-1, -1, -1};
    for (std::size_t k = 0; k < el.nodes.size(); ++k) {
      const int v = renumber[el.nodes[k]];
      if (v < 0) {
        fail(ErrorKind::kUnsupportedMesh, "element " + std::to_string(el.id) +
                                              " of lower dimension is not attached to any cell");
      }
      key[k] = v;
    }
    std::sort(key.begin(), key.begin() + static_cast<long>(el.nodes.size()));
    auto it = facet_lookup.find(key);
    if (it == facet_lookup.end()) {
      fail(ErrorKind::kUnsupportedMesh, "element " + std::to_string(el.id) +
                                            " mixes maximal dimensions: it is not a facet of the cell complex");
    }
    out.facet_tags[it->second] = el.tags.empty() ? 0 : static_cast<int>(el.tags.front());
  }
  return out;
}

std::string write_native(const Mesh& mesh, const CompartmentMarker* marker) {
  if (marker != nullptr && marker->size() != mesh.num_cells()) {
    fail(ErrorKind::kDimension, "marker length does not match the cell count");
  }
  std::string out = "btmesh 1 " + std::to_string(mesh.embed_dim()) + " " +
                    std::to_string(mesh.topo_dim()) + " " + std::to_string(mesh.num_vertices()) +
                    " " + std::to_string(mesh.num_cells()) + "\n";
  std::array<char, 64> buf;
  for (const auto& x : mesh.vertices()) {
    for (int k = 0; k < mesh.embed_dim(); ++k) {
      auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x[k]);
      if (k) out += ' ';
      out.append(buf.data(), res.ptr);
    }
    out += '\n';
  }
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    auto cv = mesh.cell(c);
    for (std::size_t i = 0; i < cv.size(); ++i) {
      if (i) out += ' ';
      out += std::to_string(cv[i]);
    }
    out += '\n';
  }
  if (marker != nullptr) {
    out += "markers\n";
    for (int m : *marker) out += std::to_string(m) + "\n";
  }
  return out;
}

namespace {

class TokenReader {
 public:
  explicit TokenReader(std::string_view text) : text_(text) {}

  bool at_end() {
    skip();
    return pos_ >= text_.size();
  }

  std::string_view next(const char* what) {
    skip();
    if (pos_ >= text_.size()) {
      fail(ErrorKind::kFormat, "native mesh truncated at byte " + std::to_string(pos_) +
                                   " while reading " + what);
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
    last_ = start;
    return text_.substr(start, pos_ - start);
  }

  template <class T>
  T number(const char* what) {
    auto tok = next(what);
    T value{};
    if (!parse_number(tok, value)) {
      fail(ErrorKind::kFormat, "native mesh: malformed " + std::string(what) + " at byte " +
                                   std::to_string(last_));
    }
    return value;
  }

  std::size_t offset() const { return last_; }

 private:
  static bool is_space(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; }
  void skip() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t last_ = 0;
};

}  // namespace

NativeMesh read_native(std::string_view text) {
  TokenReader in(text);
  if (in.next("header") != "btmesh" || in.number<int>("format version") != 1) {
    fail(ErrorKind::kFormat, "native mesh: header mismatch (expected 'btmesh 1')");
  }
  const int embed = in.number<int>("embedding dimension");
  const int topo = in.number<int>("topological dimension");
  const long nv = in.number<long>("vertex count");
  const long nc = in.number<long>("cell count");
  if (embed < 1 || embed > 3 || topo < 1 || topo > embed || nv < 1 || nc < 1) {
    fail(ErrorKind::kFormat, "native mesh: header mismatch (invalid dimensions or counts)");
  }
  std::vector<Vec3> verts;
  verts.reserve(std::min<std::size_t>(static_cast<std::size_t>(nv), 1u << 20));
  for (long v = 0; v < nv; ++v) {
    Vec3 x = Vec3::Zero();
    for (int k = 0; k < embed; ++k) x[k] = in.number<double>("vertex coordinate");
    verts.push_back(x);
  }
  std::vector<int> cells;
  for (long c = 0; c < nc * (topo + 1); ++c) cells.push_back(in.number<int>("cell vertex index"));
  CompartmentMarker marker;
  if (!in.at_end()) {
    if (in.next("markers keyword") != "markers") {
      fail(ErrorKind::kFormat, "native mesh: unexpected token at byte " + std::to_string(in.offset()));
    }
    for (long c = 0; c < nc; ++c) marker.push_back(in.number<int>("marker"));
    if (!in.at_end()) {
      in.next("trailing data");
      fail(ErrorKind::kFormat, "native mesh: trailing data at byte " + std::to_string(in.offset()));
    }
  }
  return {Mesh(embed, topo, std::move(verts), std::move(cells)), std::move(marker)};
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace btsim
