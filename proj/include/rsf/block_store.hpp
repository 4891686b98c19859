#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "rsf/kernels.hpp"
#include "rsf/linalg.hpp"

namespace rsf {

enum class StoreAccess { kRead, kWrite };

struct StoreLogEntry {
  int i = 0;
  int j = 0;
  StoreAccess kind = StoreAccess::kRead;
};

// Optional access log attached to a BlockStore for locality checks and for
// collecting the write set of a parallel phase.
struct StoreLog {
  std::vector<StoreLogEntry> entries;
};

// Modified interaction blocks of one tree level, keyed by ordered box-id
// pairs, plus the current active index list of every box.
//
// Entries carry the index lists they were written with. A box's active list
// shrinks when it is skeletonized, but blocks between the box and its
// distance-2 neighbors are not rewritten at that moment; reads therefore
// slice stored data down to the current active lists.
template <class S>
class BlockStore {
 public:
  struct Entry {
    Matrix<S> data;
    std::vector<int> rows;  // global point indices of data's rows
    std::vector<int> cols;
  };

  BlockStore() = default;

  // All boxes known with the given active lists.
  BlockStore(int level, std::vector<std::vector<int>> active)
      : level_(level), active_(std::move(active)),
        known_(active_.size(), 1) {}

  // No boxes known yet; actives arrive via set_active.
  BlockStore(int level, int n_boxes)
      : level_(level), active_(static_cast<size_t>(n_boxes)),
        known_(static_cast<size_t>(n_boxes), 0) {}

  int level() const { return level_; }
  int n_boxes() const { return static_cast<int>(active_.size()); }

  bool knows_active(int box) const { return known_.at(static_cast<size_t>(box)) != 0; }

  const std::vector<int>& active(int box) const {
    if (!knows_active(box)) {
      throw std::logic_error("BlockStore: active list of box " +
                             std::to_string(box) + " is not tracked here");
    }
    return active_[static_cast<size_t>(box)];
  }

  void set_active(int box, std::vector<int> idx) {
    active_.at(static_cast<size_t>(box)) = std::move(idx);
    known_[static_cast<size_t>(box)] = 1;
  }

  bool has(int i, int j) const { return blocks_.count(key(i, j)) != 0; }

  const Entry* find(int i, int j) const {
    auto it = blocks_.find(key(i, j));
    return it == blocks_.end() ? nullptr : &it->second;
  }

  void put(int i, int j, Matrix<S> data, std::vector<int> rows,
           std::vector<int> cols) {
    if (data.rows() != static_cast<Eigen::Index>(rows.size()) ||
        data.cols() != static_cast<Eigen::Index>(cols.size())) {
      throw std::logic_error("BlockStore::put: shape does not match index tags");
    }
    if (log) log->entries.push_back({i, j, StoreAccess::kWrite});
    Entry& e = blocks_[key(i, j)];
    scalars_ -= static_cast<size_t>(e.data.size());
    e.data = std::move(data);
    e.rows = std::move(rows);
    e.cols = std::move(cols);
    scalars_ += static_cast<size_t>(e.data.size());
  }

  void note_read(int i, int j) const {
    if (log) log->entries.push_back({i, j, StoreAccess::kRead});
  }

  // Stored data restricted to the boxes' current active lists.
  Matrix<S> read_stored(int i, int j) const {
    const Entry* e = find(i, j);
    if (!e) throw std::logic_error("BlockStore::read_stored: no such block");
    const auto& want_r = active(i);
    const auto& want_c = active(j);
    if (want_r == e->rows && want_c == e->cols) return e->data;
    return slice(*e, want_r, want_c);
  }

  // Entry restricted to current active lists, for shipping elsewhere:
  // eliminated rows/columns can never be read again.
  Entry current_entry(int i, int j) const {
    return Entry{read_stored(i, j), active(i), active(j)};
  }

  template <class F>
  void for_each(F f) const {  // ordered by (i, j)
    for (const auto& [k, e] : blocks_) {
      f(static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu), e);
    }
  }

  size_t stored_scalars() const { return scalars_; }

  StoreLog* log = nullptr;

 private:
  static std::uint64_t key(int i, int j) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
           static_cast<std::uint32_t>(j);
  }

  static Matrix<S> slice(const Entry& e, const std::vector<int>& want_r,
                         const std::vector<int>& want_c) {
    std::unordered_map<int, int> rpos, cpos;
    rpos.reserve(e.rows.size());
    cpos.reserve(e.cols.size());
    for (size_t k = 0; k < e.rows.size(); ++k) rpos.emplace(e.rows[k], static_cast<int>(k));
    for (size_t k = 0; k < e.cols.size(); ++k) cpos.emplace(e.cols[k], static_cast<int>(k));
    Matrix<S> out(static_cast<Eigen::Index>(want_r.size()),
                  static_cast<Eigen::Index>(want_c.size()));
    for (size_t cj = 0; cj < want_c.size(); ++cj) {
      const auto itc = cpos.find(want_c[cj]);
      if (itc == cpos.end()) {
        throw std::logic_error("BlockStore: active index missing from stored block");
      }
      for (size_t ri = 0; ri < want_r.size(); ++ri) {
        const auto itr = rpos.find(want_r[ri]);
        if (itr == rpos.end()) {
          throw std::logic_error("BlockStore: active index missing from stored block");
        }
        out(static_cast<Eigen::Index>(ri), static_cast<Eigen::Index>(cj)) =
            e.data(itr->second, itc->second);
      }
    }
    return out;
  }

  int level_ = 0;
  std::vector<std::vector<int>> active_;
  std::vector<char> known_;
  std::map<std::uint64_t, Entry> blocks_;
  size_t scalars_ = 0;
};

// Stored block if present (sliced to the current active lists), otherwise
// kernel evaluation over the active lists.
template <class K>
Matrix<typename K::Scalar> read_block(const BlockStore<typename K::Scalar>& store,
                                      const K& kernel,
                                      const std::vector<Point2D>& pts, int i,
                                      int j) {
  store.note_read(i, j);
  if (store.has(i, j)) return store.read_stored(i, j);
  const auto& rows = store.active(i);
  const auto& cols = store.active(j);
  return assemble_block(kernel, rows, cols, pts);
}

}  // namespace rsf
