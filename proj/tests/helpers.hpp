#pragma once

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "autoce/corpus.hpp"
#include "autoce/workload.hpp"

namespace autoce::test {

inline Column col(std::string name, std::vector<std::int64_t> values) { return Column{std::move(name), std::move(values), {}}; }

inline Table table(std::string name, std::vector<Column> cols, std::optional<std::string> pk = std::nullopt) {
  return Table{std::move(name), std::move(cols), std::move(pk)};
}

// parent(id, a) <- child(fk_parent, b)
inline Dataset parent_child(std::vector<std::int64_t> a, std::vector<std::int64_t> fk, std::vector<std::int64_t> b) {
  std::vector<std::int64_t> ids(a.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i + 1);
  Dataset d;
  d.id = "pc";
  d.tables.push_back(table("parent", {col("id", ids), col("a", std::move(a))}, "id"));
  d.tables.push_back(table("child", {col("fk_parent", std::move(fk)), col("b", std::move(b))}));
  d.joins.push_back(JoinEdge{"parent", "id", "child", "fk_parent"});
  return d;
}

// Counts result rows by enumerating the full cross product of the query's tables.
inline std::int64_t nested_loop_count(const Dataset& d, const Query& q) {
  std::vector<const Table*> ts;
  for (const auto& name : q.tables) ts.push_back(d.find(name));
  auto pos = [&](const std::string& name) {
    for (std::size_t i = 0; i < q.tables.size(); ++i)
      if (q.tables[i] == name) return i;
    ADD_FAILURE() << "table not in query: " << name;
    return std::size_t{0};
  };
  std::vector<std::size_t> row(ts.size(), 0);
  std::int64_t count = 0;
  std::function<void(std::size_t)> rec = [&](std::size_t depth) {
    if (depth == ts.size()) {
      for (const auto& e : q.joins) {
        const auto pi = pos(e.pk_table), fi = pos(e.fk_table);
        if (ts[pi]->find(e.pk_column)->values[row[pi]] != ts[fi]->find(e.fk_column)->values[row[fi]]) return;
      }
      for (const auto& r : q.ranges) {
        const auto ti = pos(r.table);
        const auto v = ts[ti]->find(r.column)->values[row[ti]];
        if (v < r.lo || v > r.hi) return;
      }
      ++count;
      return;
    }
    for (std::size_t r = 0; r < ts[depth]->rows(); ++r) {
      row[depth] = r;
      rec(depth + 1);
    }
  };
  rec(0);
  return count;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("autoce_test_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace autoce::test
