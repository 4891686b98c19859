#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <utility>

#include "rsf/comm.hpp"
#include "rsf/driver.hpp"

namespace rsf {

// Contiguous square-block partition of each level's box grid over a square
// worker grid, with the per-level worker-count reduction schedule.
//
// Workers keep their leaf-level id throughout; at coarser levels the active
// workers are the reduction survivors (the even-(row,col) member of each
// 2x2 worker block). A level's worker grid shrinks by 4x whenever the box
// grid would drop below 2 sqrt(p) x 2 sqrt(p), so every active worker owns
// at least a 2x2 block of boxes.
class WorkerGrid {
 public:
  WorkerGrid() = default;
  WorkerGrid(int tree_depth, int p);

  int p() const { return p_; }
  int leaf_side() const { return side_; }
  int tree_depth() const { return depth_; }

  int active_workers(int level) const { return p_at_.at(static_cast<size_t>(level)); }
  int side_at(int level) const;        // sqrt(active_workers)
  int boxes_per_side(int level) const; // box-block edge per worker

  // Persistent (leaf-level) worker id owning a box.
  int owner(int level, int box_id) const;
  bool is_active(int level, int worker) const;
  std::vector<int> workers_at(int level) const;  // active ids, ascending

  // Color of an active worker at a level: (row % 2) * 2 + (col % 2) on the
  // level's worker grid.
  int color(int level, int worker) const;

  // Survivor (new owner) of an active worker when moving to `level - 1`.
  int survivor(int level, int worker) const;

 private:
  std::pair<int, int> grid_pos(int level, int worker) const;  // (row, col)
  int persistent_id(int level, int row, int col) const;

  int depth_ = 0;
  int p_ = 1;
  int side_ = 1;
  std::vector<int> p_at_;  // indexed by level 0..depth
};

// Validates p (power of four), divisibility, and the 2x2-boxes-per-worker
// constraint at the leaf level.
WorkerGrid partition_domain(const QuadTree& tree, int p);

struct WorkerBoxes {
  int worker = 0;
  std::vector<int> interior;  // row-major box ids
  std::vector<int> boundary;
};

// Interior boxes have every neighbor on the same worker; boundary boxes
// have at least one neighbor elsewhere. One entry per active worker,
// ascending by worker id.
std::vector<WorkerBoxes> classify_boxes(const WorkerGrid& grid,
                                        const QuadTree& tree, int level);

// The box order a sequential sweep must use to match the parallel
// schedule: interior boxes in (worker, row-major) order, then boundary
// boxes grouped by color in (color, worker, row-major) order.
std::vector<int> parallel_compatible_order(const WorkerGrid& grid,
                                           const QuadTree& tree, int level);

// OrderProvider for factorize() replaying the parallel schedule for p workers.
OrderProvider parallel_order_provider(int p);

// Workers needing blocks or active lists, used to address exchanges.
std::vector<int> receivers_for_pair(const WorkerGrid& grid, const QuadTree& tree,
                                    int level, int i, int j);
std::vector<int> receivers_for_active(const WorkerGrid& grid, const QuadTree& tree,
                                      int level, int box);

struct PhaseRecord {
  int level = 0;
  std::string name;
  // (worker, boxes actually skeletonized by it during this concurrent phase)
  std::vector<std::pair<int, std::vector<int>>> processed;
};

struct ParallelRunInfo {
  std::vector<PhaseRecord> phases;
  std::vector<CommCounters> counters;
  std::vector<double> comp_seconds;  // per worker
  double wall_seconds = 0.0;
  size_t peak_stored_scalars = 0;
  // Words moved per stage ("L4 interior", "L4 transition", "gather", ...).
  std::vector<std::pair<std::string, std::uint64_t>> stage_words;
};

struct ParallelOptions {
  int leaf_target = 64;
  int n_proxy = 0;
  int p = 1;
};

namespace detail {

template <class S>
struct WorkerCtx {
  int id = 0;
  BlockStore<S> store;
  StoreLog log;
  std::vector<ElementaryFactor<S>> new_factors;
  std::vector<int> processed;
  double comp_seconds = 0.0;
};

template <class F>
void run_worker_tasks(const std::vector<int>& workers, F fn) {
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers.size());
  threads.reserve(workers.size());
  for (size_t k = 0; k < workers.size(); ++k) {
    threads.emplace_back([&, k] {
      try {
        fn(workers[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <class S>
void install_messages(WorkerCtx<S>& ctx, std::vector<Message<S>> msgs,
                      BlockStore<S>* also_into = nullptr) {
  StoreLog* saved = ctx.store.log;
  ctx.store.log = nullptr;
  for (auto& m : msgs) {
    if (std::holds_alternative<BlockMsg<S>>(m.payload)) {
      auto& bm = std::get<BlockMsg<S>>(m.payload);
      try {
        ctx.store.put(bm.i, bm.j, std::move(bm.data), std::move(bm.rows),
                      std::move(bm.cols));
      } catch (const std::logic_error& e) {
        ctx.store.log = saved;
        throw std::runtime_error("worker " + std::to_string(ctx.id) +
                                 ": install aborted: " + e.what());
      }
    } else {
      auto& am = std::get<ActiveMsg>(m.payload);
      if (also_into && am.level == also_into->level()) {
        also_into->set_active(am.box, am.idx);
      } else {
        ctx.store.set_active(am.box, std::move(am.idx));
      }
    }
  }
  ctx.store.log = saved;
}

}  // namespace detail

// Distributed-style factorization over an in-process worker fabric:
// per level, interior boxes concurrently on all workers, boundary boxes in
// four color phases with data exchange after every concurrent phase, then
// a level transition (with worker-grid reduction when the box grid gets
// small) and a final gather for the dense top-level factor.
//
// The result is bitwise identical to factorize() run with
// parallel_order_provider(p).
template <class K>
Factorization<typename K::Scalar> parallel_factorize(
    const std::vector<Point2D>& pts, const K& kernel, double eps,
    const ParallelOptions& opt, Communicator<typename K::Scalar>& comm,
    ParallelRunInfo* info = nullptr) {
  using S = typename K::Scalar;
  using Clock = std::chrono::steady_clock;
  const auto t_start = Clock::now();

  if (!(eps > 0.0) || !(eps < 1.0)) {
    throw std::invalid_argument("parallel_factorize: eps must be in (0,1)");
  }
  QuadTree tree(pts, opt.leaf_target);
  const int depth = tree.depth();
  WorkerGrid grid = partition_domain(tree, opt.p);

  Factorization<S> f;
  f.n = tree.n_points();
  f.tree_depth = depth;
  f.epsilon = eps;
  f.top_level = std::min(depth, kMinCompressedLevel - 1);

  std::map<int, detail::WorkerCtx<S>> ctxs;
  {
    std::vector<std::vector<int>> leaf_active(
        static_cast<size_t>(tree.boxes_at(depth)));
    for (int b = 0; b < tree.boxes_at(depth); ++b) leaf_active[static_cast<size_t>(b)] = tree.leaf_points(b);
    for (int w : grid.workers_at(depth)) {
      auto& c = ctxs[w];
      c.id = w;
      c.store = BlockStore<S>(depth, leaf_active);
      c.store.log = &c.log;
    }
  }

  size_t peak_scalars = 0;
  auto note_memory = [&] {
    size_t total = 0;
    for (auto& [w, c] : ctxs) total += c.store.stored_scalars();
    peak_scalars = std::max(peak_scalars, total);
  };
  std::vector<double> comp_seconds(static_cast<size_t>(grid.p()), 0.0);
  std::uint64_t words_mark = 0;
  auto note_stage = [&](const std::string& name) {
    if (!info) return;
    const std::uint64_t now = comm.total_words();
    info->stage_words.emplace_back(name, now - words_mark);
    words_mark = now;
  };

  // Replica refresh is lazy: a phase marks what it rewrote, and a worker
  // receives pending data only right before a phase in which it may read
  // it. Pure ownership copies (kept for the level transition, not read
  // during this level) wait until the end of the level, when both boxes
  // are skeletonized and the slice is smallest.
  std::map<int, std::map<std::pair<int, int>, int>> dirty_read;  // receiver -> pair -> writer
  std::map<int, std::map<std::pair<int, int>, int>> dirty_own;
  std::map<int, std::map<int, int>> dirty_actives;               // receiver -> box -> owner

  auto mark_phase = [&](int level, const std::vector<int>& senders) {
    for (int w : senders) {
      auto& ctx = ctxs.at(w);
      std::set<std::pair<int, int>> written;
      for (const auto& e : ctx.log.entries) {
        if (e.kind == StoreAccess::kWrite) written.emplace(e.i, e.j);
      }
      for (const auto& [i, j] : written) {
        // Readers: owners of boxes adjacent to both (their eliminations
        // read-modify-write the pair), plus the endpoints' owners for
        // distance-2 pairs (read during compression).
        std::set<int> readers;
        std::vector<int> ni = tree.neighbors(level, i);
        ni.push_back(i);
        const Box bi = tree.box(level, i);
        const Box bj = tree.box(level, j);
        for (int c : ni) {
          if (box_distance(tree.box(level, c), bj) <= 1) {
            readers.insert(grid.owner(level, c));
          }
        }
        if (box_distance(bi, bj) == 2) {
          readers.insert(grid.owner(level, i));
          readers.insert(grid.owner(level, j));
        }
        for (int r : readers) {
          if (r != w) dirty_read[r][{i, j}] = w;
        }
        for (int r : {grid.owner(level, i), grid.owner(level, j)}) {
          if (r != w && !readers.count(r)) dirty_own[r][{i, j}] = w;
        }
      }
      for (int b : ctx.processed) {
        for (int r : receivers_for_active(grid, tree, level, b)) {
          if (r != w) dirty_actives[r][b] = w;
        }
      }
      ctx.log.entries.clear();
      ctx.processed.clear();
    }
  };

  auto flush_to = [&](int level, const std::vector<int>& receivers, bool final) {
    for (int r : receivers) {
      if (auto it = dirty_actives.find(r); it != dirty_actives.end()) {
        for (const auto& [b, w] : it->second) {
          comm.send_active(w, r, {level, b, ctxs.at(w).store.active(b)});
        }
        dirty_actives.erase(it);
      }
      auto ship = [&](std::map<int, std::map<std::pair<int, int>, int>>& dirty) {
        auto it = dirty.find(r);
        if (it == dirty.end()) return;
        for (const auto& [pair, w] : it->second) {
          auto e = ctxs.at(w).store.current_entry(pair.first, pair.second);
          comm.send_block(w, r,
                          {level, pair.first, pair.second, std::move(e.data),
                           std::move(e.rows), std::move(e.cols)});
        }
        dirty.erase(it);
      };
      ship(dirty_read);
      if (final) ship(dirty_own);
    }
    comm.route();
    for (int r : receivers) {
      detail::install_messages(ctxs.at(r), comm.drain(r));
    }
  };

  auto collect_factors = [&](int level, const char* name,
                             const std::vector<int>& workers) {
    PhaseRecord rec;
    rec.level = level;
    rec.name = name;
    for (int w : workers) {
      auto& ctx = ctxs.at(w);
      rec.processed.emplace_back(w, ctx.processed);
      for (auto& ef : ctx.new_factors) f.factors.push_back(std::move(ef));
      ctx.new_factors.clear();
    }
    if (info) info->phases.push_back(std::move(rec));
  };

  for (int level = depth; level >= kMinCompressedLevel; --level) {
    const auto classes = classify_boxes(grid, tree, level);
    std::map<int, const WorkerBoxes*> by_worker;
    for (const auto& wb : classes) by_worker[wb.worker] = &wb;
    const std::vector<int> active = grid.workers_at(level);

    auto skeletonize_list = [&](int w, const std::vector<int>& boxes) {
      auto& ctx = ctxs.at(w);
      for (int b : boxes) {
        const auto t0 = Clock::now();
        ctx.new_factors.push_back(
            skeletonize_box(tree, level, b, ctx.store, kernel, eps, opt.n_proxy));
        ctx.comp_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
        ctx.processed.push_back(b);
      }
    };

    // Phase A: interior boxes, all workers concurrently.
    detail::run_worker_tasks(active, [&](int w) {
      skeletonize_list(w, by_worker.at(w)->interior);
    });
    collect_factors(level, "interior", active);
    mark_phase(level, active);
    note_stage("L" + std::to_string(level) + " interior");
    note_memory();

    // Phase B: boundary boxes in color order; each color's workers pull
    // their pending replica updates just before computing.
    for (int c = 0; c < 4; ++c) {
      std::vector<int> cw;
      for (int w : active) {
        if (grid.color(level, w) == c) cw.push_back(w);
      }
      flush_to(level, cw, false);
      detail::run_worker_tasks(cw, [&](int w) {
        skeletonize_list(w, by_worker.at(w)->boundary);
      });
      collect_factors(level, ("boundary_color_" + std::to_string(c)).c_str(), cw);
      mark_phase(level, cw);
    }
    flush_to(level, active, true);
    note_stage("L" + std::to_string(level) + " boundary");
    note_memory();

    // Level ranks from the factors just produced.
    {
      LevelRankStat stat;
      stat.level = level;
      for (const auto& ef : f.factors) {
        if (ef.level != level) continue;
        stat.boxes += 1;
        stat.mean_skeleton += static_cast<double>(ef.skeleton.size());
        stat.mean_input += static_cast<double>(ef.skeleton.size() + ef.redundant.size());
      }
      if (stat.boxes > 0) {
        stat.mean_skeleton /= stat.boxes;
        stat.mean_input /= stat.boxes;
      }
      f.level_ranks.push_back(stat);
    }

    // Phase C: transition to level - 1.
    const int nlevel = level - 1;
    const std::vector<int> next_active = grid.workers_at(nlevel);

    if (static_cast<int>(next_active.size()) < static_cast<int>(active.size())) {
      // Reduction: retiring workers hand their state to the survivor.
      for (int w : active) {
        const int sv = grid.survivor(level, w);
        if (sv == w) continue;
        auto& ctx = ctxs.at(w);
        ctx.store.for_each([&](int i, int j, const typename BlockStore<S>::Entry&) {
          if (grid.owner(level, i) == w || grid.owner(level, j) == w) {
            auto e = ctx.store.current_entry(i, j);
            comm.send_block(w, sv, {level, i, j, std::move(e.data), std::move(e.rows), std::move(e.cols)});
          }
        });
        // Only the halo this worker tracks is guaranteed fresh: boxes
        // within distance two of its owned region.
        for (int b = 0; b < tree.boxes_at(level); ++b) {
          bool tracked = grid.owner(level, b) == w;
          if (!tracked) {
            for (int n : tree.neighbors(level, b)) {
              if (grid.owner(level, n) == w) { tracked = true; break; }
            }
          }
          if (!tracked) {
            for (int m : tree.distance2_neighbors(level, b)) {
              if (grid.owner(level, m) == w) { tracked = true; break; }
            }
          }
          if (tracked) comm.send_active(w, sv, {level, b, ctx.store.active(b)});
        }
      }
      comm.route();
      for (int w : next_active) {
        detail::install_messages(ctxs.at(w), comm.drain(w));
      }
    }

    // Merge skeletons into parent ownership and announce child data:
    // every new owner ships each modified child block under a parent pair
    // to the workers that will replicate that pair, plus the merged parent
    // active lists.
    std::map<int, BlockStore<S>> next_stores;
    for (int w : next_active) {
      auto& ctx = ctxs.at(w);
      BlockStore<S> ns(nlevel, tree.boxes_at(nlevel));
      for (int pbox = 0; pbox < tree.boxes_at(nlevel); ++pbox) {
        if (grid.owner(nlevel, pbox) != w) continue;
        std::vector<int> merged;
        for (int ch : tree.children_of(nlevel, pbox)) {
          const auto& s = ctx.store.active(ch);
          merged.insert(merged.end(), s.begin(), s.end());
        }
        ns.set_active(pbox, merged);
        for (int r : receivers_for_active(grid, tree, nlevel, pbox)) {
          if (r != w) comm.send_active(w, r, {nlevel, pbox, merged});
        }
      }
      ctx.store.for_each([&](int i, int j, const typename BlockStore<S>::Entry&) {
        const int pi = tree.parent_of(level, i), pj = tree.parent_of(level, j);
        if (grid.owner(nlevel, pi) != w) return;  // unique sender: row side
        const auto recv = receivers_for_pair(grid, tree, nlevel, pi, pj);
        if (recv.size() == 1 && recv[0] == w) return;
        const auto e = ctx.store.current_entry(i, j);
        for (int r : recv) {
          if (r != w) comm.send_block(w, r, {level, i, j, e.data, e.rows, e.cols});
        }
      });
      next_stores.emplace(w, std::move(ns));
    }
    comm.route();
    for (int w : next_active) {
      detail::install_messages(ctxs.at(w), comm.drain(w), &next_stores.at(w));
    }

    // Assemble the parent pairs this worker replicates from child blocks
    // (delivered plus local) and pristine kernel data.
    detail::run_worker_tasks(next_active, [&](int w) {
      auto& ctx = ctxs.at(w);
      auto& ns = next_stores.at(w);
      const auto t0 = Clock::now();
      std::set<std::pair<int, int>> needed;
      ctx.store.for_each([&](int i, int j, const typename BlockStore<S>::Entry&) {
        const int pi = tree.parent_of(level, i), pj = tree.parent_of(level, j);
        if (!ns.knows_active(pi) || !ns.knows_active(pj)) return;
        for (int r : receivers_for_pair(grid, tree, nlevel, pi, pj)) {
          if (r == w) needed.emplace(pi, pj);
        }
      });
      for (const auto& [pi, pj] : needed) {
        ns.put(pi, pj,
               detail::assemble_parent_block(tree, level, ctx.store, kernel, pi,
                                             pj, ns.active(pi), ns.active(pj)),
               ns.active(pi), ns.active(pj));
      }
      ctx.comp_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
    });

    for (int w : next_active) {
      auto& ctx = ctxs.at(w);
      ctx.store = std::move(next_stores.at(w));
      ctx.store.log = &ctx.log;
      ctx.log.entries.clear();
    }
    for (int w : active) {
      if (!grid.is_active(nlevel, w)) {
        comp_seconds[static_cast<size_t>(w)] += ctxs.at(w).comp_seconds;
        ctxs.erase(w);
      }
    }
    note_stage("L" + std::to_string(level) + " transition");
    note_memory();
  }

  // Gather the remaining top-level system on worker 0 and factor densely.
  {
    const int tl = f.top_level;
    for (int w : grid.workers_at(tl)) {
      if (w == 0) continue;
      auto& ctx = ctxs.at(w);
      ctx.store.for_each([&](int i, int j, const typename BlockStore<S>::Entry&) {
        if (grid.owner(tl, i) == w) {
          auto e = ctx.store.current_entry(i, j);
          comm.send_block(w, 0, {tl, i, j, std::move(e.data), std::move(e.rows), std::move(e.cols)});
        }
      });
      for (int b = 0; b < tree.boxes_at(tl); ++b) {
        if (grid.owner(tl, b) == w) {
          comm.send_active(w, 0, {tl, b, ctx.store.active(b)});
        }
      }
    }
    comm.route();
    auto& root = ctxs.at(0);
    detail::install_messages(root, comm.drain(0));

    const auto t0 = Clock::now();
    Matrix<S> top = detail::assemble_top(tree, root.store, kernel, tl, f.top_indices);
    if (top.rows() > 0) {
      Eigen::PartialPivLU<Matrix<S>> plu(top);
      f.top_lu = plu.matrixLU();
      f.top_perm = detail::extract_perm<S>(plu);
    }
    root.comp_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
    note_stage("gather");
  }

  f.peak_stored_scalars = peak_scalars;
  for (auto& [w, c] : ctxs) comp_seconds[static_cast<size_t>(w)] += c.comp_seconds;
  if (info) {
    info->counters = comm.counters();
    info->comp_seconds = comp_seconds;
    info->wall_seconds = std::chrono::duration<double>(Clock::now() - t_start).count();
    info->peak_stored_scalars = peak_scalars;
  }
  return f;
}

}  // namespace rsf
