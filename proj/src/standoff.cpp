// SPDX-License-Identifier: Apache-2.0
#include "medre/standoff.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "medre/error.hpp"
#include "medre/utf8.hpp"

namespace medre {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(s.substr(pos));
      break;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
      ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t')
      ++i;
    if (i > b)
      out.push_back(s.substr(b, i - b));
  }
  return out;
}

std::size_t parse_offset(std::string_view s, const std::string &id) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ValidationError("bad offset", id,
                          "entity " + id + ": bad offset '" + std::string(s) +
                              "'");
  return v;
}

// BRAT writes spans containing line breaks with spaces in the surface column.
std::string flatten_newlines(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '\n', ' ');
  return out;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r')
    line.remove_suffix(1);
  return line;
}

} // namespace

Document parse_standoff(std::string_view text, std::string_view ann,
                        const SchemaProfile &schema, const ParseOptions &opts,
                        std::string doc_id) {
  Document doc;
  doc.doc_id = std::move(doc_id);
  doc.text = std::string(text);
  const utf8::Index index(doc.text);
  const std::size_t len = index.size();

  std::vector<std::pair<Relation, int>> pending;
  std::set<std::string> other_ids;
  int lineno = 0;
  for (auto raw : split(ann, '\n')) {
    ++lineno;
    const auto line = strip_cr(raw);
    if (line.empty() || line[0] == '#')
      continue;
    const auto fields = split(line, '\t');
    const std::string id(fields[0]);
    if (line[0] == 'T') {
      if (fields.size() < 3)
        throw ValidationError("malformed line", id,
                              "line " + std::to_string(lineno) +
                                  ": entity line needs three tab fields");
      const auto spec = fields[1];
      if (spec.find(';') != std::string_view::npos)
        throw ValidationError("fragmented span", id,
                              "entity " + id +
                                  ": discontinuous spans are not supported");
      const auto parts = split_ws(spec);
      if (parts.size() != 3)
        throw ValidationError("malformed line", id,
                              "entity " + id + ": expected '<Type> <start> <end>'");
      Entity e;
      e.id = id;
      e.etype = std::string(parts[0]);
      e.start = parse_offset(parts[1], id);
      e.end = parse_offset(parts[2], id);
      if (!(e.start < e.end && e.end <= len))
        throw ValidationError("offset out of bounds", id,
                              "entity " + id + " span [" +
                                  std::to_string(e.start) + "," +
                                  std::to_string(e.end) +
                                  ") outside text of " + std::to_string(len) +
                                  " characters");
      e.surface = std::string(index.slice(e.start, e.end));
      // The surface column may itself contain tabs; rejoin the remainder.
      std::string surface(fields[2]);
      for (std::size_t k = 3; k < fields.size(); ++k)
        surface += "\t" + std::string(fields[k]);
      if (flatten_newlines(e.surface) != surface)
        throw ValidationError("surface mismatch", id,
                              "entity " + id + ": surface '" + surface +
                                  "' differs from text '" + e.surface + "'");
      if (!schema.has_entity_type(e.etype)) {
        if (opts.strict)
          throw ValidationError("unknown entity type", id,
                                "entity " + id + " has unknown type '" +
                                    e.etype + "'");
        e.etype = std::string(kOtherType);
        other_ids.insert(e.id);
      }
      doc.entities.push_back(std::move(e));
    } else if (line[0] == 'R') {
      if (fields.size() < 2)
        throw ValidationError("malformed line", id,
                              "line " + std::to_string(lineno) +
                                  ": relation line needs two tab fields");
      const auto parts = split_ws(fields[1]);
      if (parts.size() != 3 || parts[1].substr(0, 5) != "Arg1:" ||
          parts[2].substr(0, 5) != "Arg2:")
        throw ValidationError("malformed line", id,
                              "relation " + id +
                                  ": expected '<Type> Arg1:<id> Arg2:<id>'");
      Relation r;
      r.id = id;
      r.rtype = std::string(parts[0]);
      r.source = std::string(parts[1].substr(5));
      r.target = std::string(parts[2].substr(5));
      pending.emplace_back(std::move(r), lineno);
    } else if (opts.strict) {
      throw ValidationError("unsupported line", id,
                            "line " + std::to_string(lineno) +
                                ": only T and R lines are supported");
    }
  }

  std::set<std::string> entity_ids;
  for (const auto &e : doc.entities)
    entity_ids.insert(e.id);
  for (auto &[r, ln] : pending) {
    if (!entity_ids.count(r.source) || !entity_ids.count(r.target))
      throw ValidationError("dangling argument", r.id,
                            "relation " + r.id + " references a missing entity");
    const bool known =
        schema.has_relation_type(r.rtype) || r.rtype == kSameFrame;
    if (!known && opts.strict)
      throw ValidationError("unknown relation type", r.id,
                            "relation " + r.id + " has unknown type '" +
                                r.rtype + "'");
    if (!known || other_ids.count(r.source) || other_ids.count(r.target))
      continue;
    doc.relations.push_back(std::move(r));
  }

  for (const auto &v : validate_document(doc, schema))
    throw ValidationError(v.rule, v.id, v.message);
  return doc;
}

std::pair<std::string, std::string> serialize_standoff(const Document &doc) {
  std::map<std::string, std::string> rename;
  std::ostringstream ann;
  for (std::size_t i = 0; i < doc.entities.size(); ++i) {
    const auto &e = doc.entities[i];
    const std::string id = "T" + std::to_string(i + 1);
    rename[e.id] = id;
    ann << id << '\t' << e.etype << ' ' << e.start << ' ' << e.end << '\t'
        << flatten_newlines(e.surface) << '\n';
  }
  for (std::size_t i = 0; i < doc.relations.size(); ++i) {
    const auto &r = doc.relations[i];
    ann << 'R' << (i + 1) << '\t' << r.rtype << " Arg1:" << rename.at(r.source)
        << " Arg2:" << rename.at(r.target) << '\n';
  }
  return {doc.text, ann.str()};
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path &path,
                       std::string_view content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
      throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Document load_document(const std::filesystem::path &txt,
                       const std::filesystem::path &ann,
                       const SchemaProfile &schema, const ParseOptions &opts) {
  return parse_standoff(read_file(txt), read_file(ann), schema, opts,
                        txt.stem().string());
}

std::vector<Document> load_corpus(const std::filesystem::path &dir,
                                  const SchemaProfile &schema,
                                  const ParseOptions &opts) {
  if (!std::filesystem::is_directory(dir))
    throw IoError("corpus directory " + dir.string() + " does not exist");
  std::vector<std::filesystem::path> texts;
  for (const auto &entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      texts.push_back(entry.path());
  std::sort(texts.begin(), texts.end());
  std::vector<Document> out;
  for (const auto &txt : texts) {
    auto ann = txt;
    ann.replace_extension(".ann");
    if (!std::filesystem::exists(ann))
      throw IoError("missing annotation file " + ann.string());
    out.push_back(load_document(txt, ann, schema, opts));
  }
  return out;
}

void write_document(const std::filesystem::path &dir, const Document &doc) {
  const auto [text, ann] = serialize_standoff(doc);
  write_file_atomic(dir / (doc.doc_id + ".txt"), text);
  write_file_atomic(dir / (doc.doc_id + ".ann"), ann);
}

} // namespace medre
