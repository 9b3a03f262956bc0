#pragma once

// Dataset data model and on-disk layout.
//
// A dataset directory holds `manifest.json` plus one `<table>.csv` per table.
// Every column is integer-encoded; categorical columns carry the dictionary
// that maps codes back to strings (code i <-> dictionary[i]).

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "autoce/error.hpp"
#include "json.hpp"

namespace autoce {

using json = nlohmann::json;

inline constexpr int kManifestFormatVersion = 1;

struct Column {
  std::string name;
  std::vector<std::int64_t> values;
  std::vector<std::string> dictionary;  // empty for natively integer columns

  bool operator==(const Column&) const = default;
};

struct Table {
  std::string name;
  std::vector<Column> columns;
  std::optional<std::string> pk;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().values.size(); }

  const Column* find(std::string_view column) const {
    for (const auto& c : columns)
      if (c.name == column) return &c;
    return nullptr;
  }
  Column* find(std::string_view column) {
    for (auto& c : columns)
      if (c.name == column) return &c;
    return nullptr;
  }

  bool operator==(const Table&) const = default;
};

struct JoinEdge {
  std::string pk_table;
  std::string pk_column;
  std::string fk_table;
  std::string fk_column;

  auto operator<=>(const JoinEdge&) const = default;
};

struct Dataset {
  std::string id;
  std::vector<Table> tables;
  std::vector<JoinEdge> joins;

  const Table* find(std::string_view table) const {
    for (const auto& t : tables)
      if (t.name == table) return &t;
    return nullptr;
  }
  Table* find(std::string_view table) {
    for (auto& t : tables)
      if (t.name == table) return &t;
    return nullptr;
  }

  std::size_t table_index(std::string_view table) const {
    for (std::size_t i = 0; i < tables.size(); ++i)
      if (tables[i].name == table) return i;
    throw Error("unknown table '" + std::string(table) + "'");
  }

  // PK columns and FK columns referenced by join edges.
  bool is_key_column(std::string_view table, std::string_view column) const {
    if (const Table* t = find(table); t && t->pk && *t->pk == column) return true;
    for (const auto& e : joins) {
      if (e.fk_table == table && e.fk_column == column) return true;
      if (e.pk_table == table && e.pk_column == column) return true;
    }
    return false;
  }

  std::vector<const Column*> non_key_columns(const Table& t) const {
    std::vector<const Column*> out;
    for (const auto& c : t.columns)
      if (!is_key_column(t.name, c.name)) out.push_back(&c);
    return out;
  }

  std::size_t total_rows() const {
    std::size_t n = 0;
    for (const auto& t : tables) n += t.rows();
    return n;
  }

  bool operator==(const Dataset&) const = default;
};

// Maps arbitrary strings to dense codes 0..n-1 in sorted order.
inline Column encode_categorical(std::string name, const std::vector<std::string>& raw) {
  Column col;
  col.name = std::move(name);
  col.dictionary = raw;
  std::sort(col.dictionary.begin(), col.dictionary.end());
  col.dictionary.erase(std::unique(col.dictionary.begin(), col.dictionary.end()), col.dictionary.end());
  col.values.reserve(raw.size());
  for (const auto& s : raw) {
    const auto it = std::lower_bound(col.dictionary.begin(), col.dictionary.end(), s);
    col.values.push_back(static_cast<std::int64_t>(it - col.dictionary.begin()));
  }
  return col;
}

// Returns one human-readable message per violated invariant; empty iff valid.
inline std::vector<std::string> validate(const Dataset& d) {
  std::vector<std::string> out;
  std::set<std::string> names;
  for (const auto& t : d.tables) {
    if (!names.insert(t.name).second) out.push_back("duplicate table name '" + t.name + "'");

    bool ragged = false;
    for (const auto& c : t.columns) ragged |= c.values.size() != t.rows();
    if (ragged) out.push_back("table '" + t.name + "': columns have different lengths");

    for (const auto& c : t.columns) {
      const bool negative = std::any_of(c.values.begin(), c.values.end(), [](auto v) { return v < 0; });
      if (negative) out.push_back("column '" + t.name + "." + c.name + "': negative value");
      if (!c.dictionary.empty()) {
        const auto bound = static_cast<std::int64_t>(c.dictionary.size());
        if (std::any_of(c.values.begin(), c.values.end(), [&](auto v) { return v >= bound; }))
          out.push_back("column '" + t.name + "." + c.name + "': code outside dictionary");
      }
    }

    if (t.pk) {
      const Column* pk = t.find(*t.pk);
      if (!pk) {
        out.push_back("table '" + t.name + "': pk '" + *t.pk + "' is not a column");
      } else {
        std::unordered_set<std::int64_t> seen(pk->values.begin(), pk->values.end());
        if (seen.size() != pk->values.size())
          out.push_back("table '" + t.name + "': duplicate values in pk '" + *t.pk + "'");
      }
    }
  }

  std::set<JoinEdge> edges;
  for (const auto& e : d.joins) {
    const std::string label = e.pk_table + "." + e.pk_column + " <- " + e.fk_table + "." + e.fk_column;
    if (e.pk_table == e.fk_table) out.push_back("join " + label + ": self-loop");
    if (!edges.insert(e).second) out.push_back("join " + label + ": duplicate edge");
    const Table* pt = d.find(e.pk_table);
    const Table* ft = d.find(e.fk_table);
    const Column* pc = pt ? pt->find(e.pk_column) : nullptr;
    const Column* fc = ft ? ft->find(e.fk_column) : nullptr;
    if (!pc || !fc) {
      out.push_back("join " + label + ": endpoint does not exist");
      continue;
    }
    std::unordered_set<std::int64_t> keys(pc->values.begin(), pc->values.end());
    const auto dangling = std::find_if(fc->values.begin(), fc->values.end(),
                                       [&](auto v) { return !keys.contains(v); });
    if (dangling != fc->values.end())
      out.push_back("join " + label + ": fk value " + std::to_string(*dangling) + " missing from pk column");
  }
  return out;
}

inline void throw_if_invalid(const Dataset& d) {
  const auto violations = validate(d);
  if (violations.empty()) return;
  std::string msg = "dataset '" + d.id + "' invalid: " + violations.front();
  if (violations.size() > 1) msg += " (+" + std::to_string(violations.size() - 1) + " more)";
  throw Error(msg);
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::int64_t parse_int(std::string_view s, const std::string& where) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(where + ": not an integer '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

inline std::string table_to_csv(const Table& t) {
  std::string out;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (c) out += ',';
    out += t.columns[c].name;
  }
  out += '\n';
  char buf[24];
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (c) out += ',';
      const auto res = std::to_chars(buf, buf + sizeof buf, t.columns[c].values[r]);
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

inline Table table_from_csv(std::string name, std::string_view text) {
  Table t;
  t.name = std::move(name);
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    return true;
  };
  std::string_view line;
  if (!next_line(line)) throw Error("table '" + t.name + "': empty csv");
  if (!line.empty())
    for (auto h : detail::split(line, ',')) t.columns.push_back(Column{std::string(h), {}, {}});
  std::size_t row = 0;
  while (next_line(line)) {
    if (line.empty()) continue;
    ++row;
    const auto cells = detail::split(line, ',');
    if (cells.size() != t.columns.size())
      throw Error("table '" + t.name + "': row " + std::to_string(row) + " has " +
                  std::to_string(cells.size()) + " cells, expected " + std::to_string(t.columns.size()));
    for (std::size_t c = 0; c < cells.size(); ++c)
      t.columns[c].values.push_back(detail::parse_int(cells[c], "table '" + t.name + "'"));
  }
  return t;
}

inline json manifest_json(const Dataset& d) {
  json tables = json::array();
  for (const auto& t : d.tables) {
    json cols = json::array();
    for (const auto& c : t.columns) {
      json col = {{"name", c.name}};
      if (!c.dictionary.empty()) col["dictionary"] = c.dictionary;
      cols.push_back(std::move(col));
    }
    tables.push_back({{"name", t.name},
                      {"file", t.name + ".csv"},
                      {"rows", t.rows()},
                      {"pk", t.pk ? json(*t.pk) : json(nullptr)},
                      {"columns", std::move(cols)}});
  }
  json joins = json::array();
  for (const auto& e : d.joins)
    joins.push_back({{"pk_table", e.pk_table}, {"pk_column", e.pk_column},
                     {"fk_table", e.fk_table}, {"fk_column", e.fk_column}});
  return {{"format_version", kManifestFormatVersion}, {"id", d.id}, {"tables", std::move(tables)},
          {"joins", std::move(joins)}};
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  throw_if_invalid(d);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir.string() + "': " + ec.message());
  for (const auto& t : d.tables) detail::write_file(dir / (t.name + ".csv"), table_to_csv(t));
  detail::write_file(dir / "manifest.json", manifest_json(d).dump(2) + "\n");
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw Error("missing manifest '" + manifest_path.string() + "'");
  json m;
  try {
    m = json::parse(detail::read_file(manifest_path));
  } catch (const json::exception& e) {
    throw Error("malformed manifest '" + manifest_path.string() + "': " + e.what());
  }
  if (m.value("format_version", 0) != kManifestFormatVersion)
    throw Error("unsupported manifest format_version in '" + manifest_path.string() + "'");

  Dataset d;
  d.id = m.at("id").get<std::string>();
  for (const auto& jt : m.at("tables")) {
    const auto name = jt.at("name").get<std::string>();
    const auto csv = dir / jt.value("file", name + ".csv");
    if (!std::filesystem::exists(csv)) throw Error("table '" + name + "': missing file '" + csv.string() + "'");
    Table t = table_from_csv(name, detail::read_file(csv));
    const auto& cols = jt.at("columns");
    if (cols.size() != t.columns.size()) throw Error("table '" + name + "': manifest/csv column count mismatch");
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (cols[c].at("name").get<std::string>() != t.columns[c].name)
        throw Error("table '" + name + "': manifest/csv column name mismatch at " + std::to_string(c));
      if (cols[c].contains("dictionary"))
        t.columns[c].dictionary = cols[c]["dictionary"].get<std::vector<std::string>>();
    }
    if (!jt.at("pk").is_null()) t.pk = jt["pk"].get<std::string>();
    if (jt.contains("rows") && jt["rows"].get<std::size_t>() != t.rows())
      throw Error("table '" + name + "': manifest row count disagrees with csv");
    d.tables.push_back(std::move(t));
  }
  for (const auto& je : m.at("joins"))
    d.joins.push_back(JoinEdge{je.at("pk_table"), je.at("pk_column"), je.at("fk_table"), je.at("fk_column")});
  throw_if_invalid(d);
  return d;
}

// ---------------------------------------------------------------------------
// Label store

enum class LatencyUnit { cost, ms };

inline std::string to_string(LatencyUnit u) { return u == LatencyUnit::cost ? "cost" : "ms"; }

inline LatencyUnit latency_unit_from_string(std::string_view s) {
  if (s == "cost") return LatencyUnit::cost;
  if (s == "ms") return LatencyUnit::ms;
  throw Error("unknown latency unit '" + std::string(s) + "'");
}

struct LabelRecord {
  std::string dataset_id;
  std::string estimator_id;
  double qerr_mean = 1.0;
  double latency_mean = 0.0;
  LatencyUnit unit = LatencyUnit::cost;

  bool operator==(const LabelRecord&) const = default;
};

inline void check_record(const LabelRecord& r) {
  require(!r.dataset_id.empty() && !r.estimator_id.empty(), "label record without dataset/estimator id");
  require(r.qerr_mean >= 1.0, "label record " + r.dataset_id + "/" + r.estimator_id + ": qerr_mean < 1");
  require(r.latency_mean >= 0.0, "label record " + r.dataset_id + "/" + r.estimator_id + ": negative latency");
}

inline json to_json(const LabelRecord& r) {
  return {{"dataset_id", r.dataset_id}, {"estimator_id", r.estimator_id}, {"qerr_mean", r.qerr_mean},
          {"latency_mean", r.latency_mean}, {"unit", to_string(r.unit)}};
}

inline LabelRecord label_from_json(const json& j) {
  LabelRecord r{j.at("dataset_id"), j.at("estimator_id"), j.at("qerr_mean"), j.at("latency_mean"),
                latency_unit_from_string(j.at("unit").get<std::string>())};
  check_record(r);
  return r;
}

// Append-only, one JSON object per line.
inline void append_labels(const std::filesystem::path& path, const std::vector<LabelRecord>& records) {
  for (const auto& r : records) check_record(r);
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error("cannot append to '" + path.string() + "'");
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<LabelRecord> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open label store '" + path.string() + "'");
  std::vector<LabelRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(label_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// Groups records by dataset id, preserving first-seen order within a dataset.
inline std::map<std::string, std::vector<LabelRecord>> group_by_dataset(const std::vector<LabelRecord>& records) {
  std::map<std::string, std::vector<LabelRecord>> out;
  for (const auto& r : records) out[r.dataset_id].push_back(r);
  return out;
}

}  // namespace autoce
