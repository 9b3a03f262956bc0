#pragma once

// Select-project-join workloads over a Dataset, the exact cardinality oracle
// and the Q-error metric.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "autoce/corpus.hpp"
#include "autoce/error.hpp"
#include "autoce/parallel.hpp"
#include "autoce/rng.hpp"

namespace autoce {

struct RangePredicate {
  std::string table;
  std::string column;
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  auto operator<=>(const RangePredicate&) const = default;
};

struct Query {
  std::vector<std::string> tables;
  std::vector<JoinEdge> joins;
  std::vector<RangePredicate> ranges;
  std::optional<std::int64_t> true_card;

  // Structural equality; ignores true_card.
  bool same_shape(const Query& o) const { return tables == o.tables && joins == o.joins && ranges == o.ranges; }
};

struct Workload {
  std::string dataset_id;
  std::vector<Query> train;
  std::vector<Query> test;
};

struct WorkloadParams {
  int n_train = 300;
  int n_test = 100;
  double pred_prob = 0.5;
};

// Checks the Query invariants against a dataset; returns violations.
inline std::vector<std::string> validate_query(const Dataset& d, const Query& q) {
  std::vector<std::string> out;
  if (q.tables.empty()) out.push_back("query has no tables");
  std::set<std::string> names(q.tables.begin(), q.tables.end());
  if (names.size() != q.tables.size()) out.push_back("query lists a table twice");
  for (const auto& t : q.tables)
    if (!d.find(t)) out.push_back("unknown table '" + t + "'");
  for (const auto& e : q.joins) {
    if (!names.contains(e.pk_table) || !names.contains(e.fk_table))
      out.push_back("join references a table outside the query");
    if (std::find(d.joins.begin(), d.joins.end(), e) == d.joins.end())
      out.push_back("join " + e.pk_table + "." + e.pk_column + " = " + e.fk_table + "." + e.fk_column + " is not a schema edge");
  }
  for (const auto& r : q.ranges) {
    const Table* t = d.find(r.table);
    if (!names.contains(r.table) || !t || !t->find(r.column))
      out.push_back("predicate column '" + r.table + "." + r.column + "' not available");
    if (r.lo > r.hi) out.push_back("predicate on '" + r.table + "." + r.column + "' has lo > hi");
  }
  // Connectivity: a single join component spanning all listed tables.
  if (!q.tables.empty() && out.empty()) {
    std::set<std::string> seen{q.tables.front()};
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& e : q.joins) {
        const bool a = seen.contains(e.pk_table), b = seen.contains(e.fk_table);
        if (a != b) {
          seen.insert(a ? e.fk_table : e.pk_table);
          grew = true;
        }
      }
    }
    if (seen.size() != names.size()) out.push_back("query tables are not connected by its joins");
    if (q.joins.size() + 1 != q.tables.size()) out.push_back("query joins do not form a spanning tree");
  }
  return out;
}

namespace detail {

inline Query random_query(const Dataset& d, double pred_prob, Rng& rng) {
  Query q;
  const std::size_t n = d.tables.size();
  const auto target = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(n)));
  std::vector<bool> chosen(n, false);
  std::vector<std::size_t> members{rng.index(n)};
  chosen[members.front()] = true;
  while (members.size() < target) {
    std::vector<const JoinEdge*> frontier;
    for (const auto& e : d.joins) {
      const bool a = chosen[d.table_index(e.pk_table)], b = chosen[d.table_index(e.fk_table)];
      if (a != b) frontier.push_back(&e);
    }
    if (frontier.empty()) break;
    const JoinEdge* e = frontier[rng.index(frontier.size())];
    const auto added = chosen[d.table_index(e->pk_table)] ? d.table_index(e->fk_table) : d.table_index(e->pk_table);
    chosen[added] = true;
    members.push_back(added);
    q.joins.push_back(*e);
  }
  std::sort(members.begin(), members.end());
  for (auto i : members) q.tables.push_back(d.tables[i].name);
  std::sort(q.joins.begin(), q.joins.end());

  for (auto i : members) {
    const Table& t = d.tables[i];
    for (const Column* c : d.non_key_columns(t)) {
      if (c->values.empty() || !rng.bernoulli(pred_prob)) continue;
      const auto [mn, mx] = std::minmax_element(c->values.begin(), c->values.end());
      auto a = rng.uniform_int(*mn, *mx);
      auto b = rng.uniform_int(*mn, *mx);
      if (a > b) std::swap(a, b);
      q.ranges.push_back(RangePredicate{t.name, c->name, a, b});
    }
  }
  return q;
}

}  // namespace detail

inline std::int64_t exact_card(const Dataset& d, const Query& q);

// Generates train/test queries and fills true_card with the exact oracle.
// A test query that duplicates a train query is redrawn (bounded attempts;
// tiny query spaces can make duplicates unavoidable).
inline Workload gen_workload(const Dataset& d, const WorkloadParams& p, Rng& rng) {
  require(!d.tables.empty(), "gen_workload: dataset has no tables");
  require(p.n_train >= 0 && p.n_test >= 0, "gen_workload: negative query count");
  Workload w;
  w.dataset_id = d.id;
  for (int i = 0; i < p.n_train; ++i) w.train.push_back(detail::random_query(d, p.pred_prob, rng));
  for (int i = 0; i < p.n_test; ++i) {
    Query q = detail::random_query(d, p.pred_prob, rng);
    for (int attempt = 0; attempt < 100; ++attempt) {
      const bool dup = std::any_of(w.train.begin(), w.train.end(), [&](const Query& t) { return t.same_shape(q); });
      if (!dup) break;
      q = detail::random_query(d, p.pred_prob, rng);
    }
    w.test.push_back(std::move(q));
  }
  for (auto& q : w.train) q.true_card = exact_card(d, q);
  for (auto& q : w.test) q.true_card = exact_card(d, q);
  return w;
}

namespace detail {

inline std::vector<char> filter_rows(const Table& t, const Query& q) {
  std::vector<char> keep(t.rows(), 1);
  for (const auto& r : q.ranges) {
    if (r.table != t.name) continue;
    const Column* c = t.find(r.column);
    if (!c) throw Error("predicate column '" + r.table + "." + r.column + "' not found");
    for (std::size_t i = 0; i < keep.size(); ++i)
      if (c->values[i] < r.lo || c->values[i] > r.hi) keep[i] = 0;
  }
  return keep;
}

}  // namespace detail

// Exact result size of the SPJ query. Each table is filtered, then the join
// tree is contracted bottom-up: a child table is hash-aggregated on its join
// key (sum of per-row subtree counts) and probed from the parent's key.
inline std::int64_t exact_card(const Dataset& d, const Query& q) {
  require(!q.tables.empty(), "exact_card: query has no tables");
  const std::size_t n = q.tables.size();
  std::vector<const Table*> tables(n);
  for (std::size_t i = 0; i < n; ++i) {
    tables[i] = d.find(q.tables[i]);
    if (!tables[i]) throw Error("exact_card: unknown table '" + q.tables[i] + "'");
  }
  auto local = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < n; ++i)
      if (q.tables[i] == name) return i;
    throw Error("exact_card: join references table '" + name + "' outside the query");
  };

  // Per-row weights start at the filter mask.
  std::vector<std::vector<std::int64_t>> weight(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto keep = detail::filter_rows(*tables[i], q);
    weight[i].assign(keep.begin(), keep.end());
  }

  // Root the join tree at table 0, record a post-order of edges.
  struct Link {
    std::size_t parent, child;
    const Column* parent_key;
    const Column* child_key;
  };
  std::vector<Link> order;
  std::vector<bool> visited(n, false);
  std::vector<std::size_t> stack{0};
  visited[0] = true;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (const auto& e : q.joins) {
      const auto a = local(e.pk_table), b = local(e.fk_table);
      std::size_t v;
      const Column *uk, *vk;
      if (a == u && !visited[b]) {
        v = b;
        uk = tables[a]->find(e.pk_column);
        vk = tables[b]->find(e.fk_column);
      } else if (b == u && !visited[a]) {
        v = a;
        uk = tables[b]->find(e.fk_column);
        vk = tables[a]->find(e.pk_column);
      } else {
        continue;
      }
      if (!uk || !vk) throw Error("exact_card: join column missing");
      visited[v] = true;
      order.push_back(Link{u, v, uk, vk});
      stack.push_back(v);
    }
  }
  require(std::all_of(visited.begin(), visited.end(), [](bool b) { return b; }),
          "exact_card: query tables are not connected");
  require(order.size() == q.joins.size(), "exact_card: join graph has a cycle");

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    std::unordered_map<std::int64_t, std::int64_t> agg;
    const auto& cw = weight[it->child];
    for (std::size_t r = 0; r < cw.size(); ++r)
      if (cw[r]) agg[it->child_key->values[r]] += cw[r];
    auto& pw = weight[it->parent];
    for (std::size_t r = 0; r < pw.size(); ++r) {
      if (!pw[r]) continue;
      const auto f = agg.find(it->parent_key->values[r]);
      pw[r] = f == agg.end() ? 0 : pw[r] * f->second;
    }
  }
  std::int64_t total = 0;
  for (auto w : weight[0]) total += w;
  return total;
}

// Q-error with the zero-cardinality guard: truth 0 is treated as 1.
inline double qerror(double estimate, std::int64_t truth) {
  require(estimate > 0.0, "qerror: estimate must be positive");
  const double t = static_cast<double>(std::max<std::int64_t>(truth, 1));
  return std::max(estimate, t) / std::min(estimate, t);
}

// ---------------------------------------------------------------------------
// Serialization: one JSON object per line; the first line is a header.

inline json to_json(const Query& q) {
  json joins = json::array();
  for (const auto& e : q.joins) joins.push_back({e.pk_table, e.pk_column, e.fk_table, e.fk_column});
  json ranges = json::array();
  for (const auto& r : q.ranges) ranges.push_back({r.table, r.column, r.lo, r.hi});
  json j = {{"tables", q.tables}, {"joins", std::move(joins)}, {"ranges", std::move(ranges)}};
  j["true_card"] = q.true_card ? json(*q.true_card) : json(nullptr);
  return j;
}

inline Query query_from_json(const json& j) {
  Query q;
  q.tables = j.at("tables").get<std::vector<std::string>>();
  for (const auto& e : j.at("joins")) q.joins.push_back(JoinEdge{e.at(0), e.at(1), e.at(2), e.at(3)});
  for (const auto& r : j.at("ranges"))
    q.ranges.push_back(RangePredicate{r.at(0), r.at(1), r.at(2).get<std::int64_t>(), r.at(3).get<std::int64_t>()});
  if (j.contains("true_card") && !j["true_card"].is_null()) q.true_card = j["true_card"].get<std::int64_t>();
  return q;
}

inline void save_workload(const Workload& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << json{{"format_version", 1}, {"dataset_id", w.dataset_id}}.dump() << '\n';
  for (const auto& q : w.train) {
    auto j = to_json(q);
    j["split"] = "train";
    out << j.dump() << '\n';
  }
  for (const auto& q : w.test) {
    auto j = to_json(q);
    j["split"] = "test";
    out << j.dump() << '\n';
  }
}

inline Workload load_workload(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open workload '" + path.string() + "'");
  Workload w;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty workload file '" + path.string() + "'");
  try {
    w.dataset_id = json::parse(line).at("dataset_id").get<std::string>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      (j.at("split") == "train" ? w.train : w.test).push_back(query_from_json(j));
    }
  } catch (const json::exception& e) {
    throw Error("malformed workload '" + path.string() + "': " + e.what());
  }
  return w;
}

}  // namespace autoce
