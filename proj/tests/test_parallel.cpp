#include <set>

#include "doctest.h"
#include "factor_compare.hpp"
#include "rsf/parallel.hpp"
#include "rsf/solve.hpp"

using namespace rsf;
using rsf_test::factorizations_equal;
using rsf_test::uniform_rhs;

TEST_CASE("partition_domain validates worker counts") {
  QuadTree t(make_grid(64), 64);  // 8x8 leaf grid
  CHECK_NOTHROW(partition_domain(t, 1));
  CHECK_NOTHROW(partition_domain(t, 4));
  CHECK_NOTHROW(partition_domain(t, 16));
  CHECK_THROWS_AS(partition_domain(t, 2), std::invalid_argument);
  CHECK_THROWS_AS(partition_domain(t, 8), std::invalid_argument);
  // 64 workers on an 8x8 leaf grid would leave 1x1 boxes per worker.
  try {
    partition_domain(t, 64);
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("2x2") != std::string::npos);
  }
}

TEST_CASE("partition shapes: one worker owns everything; p=4 makes quadrants") {
  QuadTree t(make_grid(64), 64);
  WorkerGrid g1 = partition_domain(t, 1);
  CHECK(g1.active_workers(3) == 1);
  for (int b = 0; b < 64; ++b) CHECK(g1.owner(3, b) == 0);
  CHECK(g1.color(3, 0) == 0);

  WorkerGrid g4 = partition_domain(t, 4);
  std::set<int> owners, colors;
  for (int b = 0; b < 64; ++b) owners.insert(g4.owner(3, b));
  for (int w : g4.workers_at(3)) colors.insert(g4.color(3, w));
  CHECK(owners.size() == 4);
  CHECK(colors.size() == 4);
  // Contiguous 4x4 blocks.
  CHECK(g4.owner(3, 0) == g4.owner(3, 3 * 8 + 3));
  CHECK(g4.owner(3, 0) != g4.owner(3, 4));
}

TEST_CASE("adjacent workers in a 4x4 grid always differ in color") {
  QuadTree t(make_grid(128), 16);  // depth 5 -> leaf grid 32x32
  WorkerGrid g = partition_domain(t, 16);
  const int side = 4;
  auto color_at = [&](int r, int c) {
    // worker owning the first box of block (r, c)
    const int bps = g.boxes_per_side(5);
    return g.color(5, g.owner(5, (r * bps) * 32 + c * bps));
  };
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      for (auto [dr, dc] : {std::pair{0, 1}, {1, 0}, {1, 1}, {1, -1}}) {
        const int r2 = r + dr, c2 = c + dc;
        if (r2 < 0 || c2 < 0 || r2 >= side || c2 >= side) continue;
        CHECK(color_at(r, c) != color_at(r2, c2));
      }
    }
  }
}

TEST_CASE("box classification matches the perimeter picture") {
  QuadTree t(make_grid(64), 64);  // 8x8 leaf grid
  WorkerGrid g4 = partition_domain(t, 4);
  auto classes = classify_boxes(g4, t, 3);
  REQUIRE(classes.size() == 4);
  for (const auto& wb : classes) {
    // Corner worker with a 4x4 block: two faces adjacent to other workers,
    // 4 + 4 - 1 = 7 boundary boxes.
    CHECK(wb.boundary.size() == 7);
    CHECK(wb.interior.size() == 9);
  }

  WorkerGrid g1 = partition_domain(t, 1);
  auto all_mine = classify_boxes(g1, t, 3);
  REQUIRE(all_mine.size() == 1);
  CHECK(all_mine[0].boundary.empty());
  CHECK(all_mine[0].interior.size() == 64);

  // Fully interior worker: 4k - 4 boundary boxes for a k x k block.
  QuadTree t2(make_grid(128), 16);  // leaf grid 32x32
  WorkerGrid g16 = partition_domain(t2, 16);
  auto c16 = classify_boxes(g16, t2, 5);
  const int k = g16.boxes_per_side(5);
  bool saw_interior_worker = false;
  for (const auto& wb : c16) {
    if (wb.boundary.size() == static_cast<size_t>(4 * k - 4)) saw_interior_worker = true;
  }
  CHECK(saw_interior_worker);
}

TEST_CASE("p=1 parallel run equals the sequential driver with zero traffic") {
  auto pts = make_grid(64);
  LaplaceKernel kernel(1.0 / 64);
  auto f_seq = factorize(pts, kernel, 1e-6, FactorOptions{.leaf_target = 64});
  InProcessCommunicator<double> comm(1);
  auto f_par = parallel_factorize(pts, kernel, 1e-6,
                                  ParallelOptions{.leaf_target = 64, .p = 1}, comm);
  CHECK(factorizations_equal(f_seq, f_par));
  CHECK(comm.total_messages() == 0);
  CHECK(comm.total_words() == 0);
}

TEST_CASE("p=4 run is bitwise identical to its sequential replay") {
  auto pts = make_grid(64);
  LaplaceKernel kernel(1.0 / 64);
  auto f_rep = factorize(pts, kernel, 1e-6,
                         FactorOptions{.leaf_target = 64,
                                       .order = parallel_order_provider(4)});
  InProcessCommunicator<double> comm(4);
  auto f_par = parallel_factorize(pts, kernel, 1e-6,
                                  ParallelOptions{.leaf_target = 64, .p = 4}, comm);
  CHECK(factorizations_equal(f_rep, f_par));
  CHECK(comm.total_messages() > 0);

  auto b = uniform_rhs(4096, 77);
  auto x1 = apply_inverse(f_rep, b);
  auto x2 = apply_inverse(f_par, b);
  CHECK((x1 - x2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("repeated parallel runs are bitwise deterministic") {
  auto pts = make_grid(64);
  LaplaceKernel kernel(1.0 / 64);
  InProcessCommunicator<double> c1(16), c2(16);
  auto f1 = parallel_factorize(pts, kernel, 1e-6,
                               ParallelOptions{.leaf_target = 64, .p = 16}, c1);
  auto f2 = parallel_factorize(pts, kernel, 1e-6,
                               ParallelOptions{.leaf_target = 64, .p = 16}, c2);
  CHECK(factorizations_equal(f1, f2));
  CHECK(c1.total_words() == c2.total_words());
  CHECK(c1.total_messages() == c2.total_messages());
}

TEST_CASE("counter accounting is exact for a block transfer") {
  InProcessCommunicator<std::complex<double>> comm(2);
  Matrix<std::complex<double>> block(12, 15);
  block.setZero();
  std::vector<int> rows(12), cols(15);
  comm.send_block(0, 1, {3, 7, 8, block, rows, cols});
  CHECK(comm.counters()[0].messages == 1);
  CHECK(comm.counters()[0].words == 360);  // 12 * 15 * 2
  CHECK(comm.counters()[1].messages == 0);

  InProcessCommunicator<double> rcomm(2);
  Matrix<double> rblock(12, 15);
  rblock.setZero();
  rcomm.send_block(1, 0, {3, 7, 8, rblock, std::vector<int>(12), std::vector<int>(15)});
  CHECK(rcomm.counters()[1].words == 180);
}

TEST_CASE("helmholtz parallel run matches its replay") {
  auto pts = make_grid(32);
  HelmholtzKernel kernel(1.0 / 32, 12.0);
  auto f_rep = factorize(pts, kernel, 1e-6,
                         FactorOptions{.leaf_target = 16,
                                       .order = parallel_order_provider(4)});
  InProcessCommunicator<std::complex<double>> comm(4);
  auto f_par = parallel_factorize(pts, kernel, 1e-6,
                                  ParallelOptions{.leaf_target = 16, .p = 4}, comm);
  CHECK(factorizations_equal(f_rep, f_par));
}

TEST_CASE("concurrent phases only co-schedule well-separated boxes") {
  auto pts = make_grid(64);
  LaplaceKernel kernel(1.0 / 64);
  QuadTree tree(pts, 64);
  InProcessCommunicator<double> comm(4);
  ParallelRunInfo info;
  parallel_factorize(pts, kernel, 1e-6, ParallelOptions{.leaf_target = 64, .p = 4},
                     comm, &info);
  REQUIRE(!info.phases.empty());
  int pairs_checked = 0;
  for (const auto& ph : info.phases) {
    for (size_t a = 0; a < ph.processed.size(); ++a) {
      for (size_t b = a + 1; b < ph.processed.size(); ++b) {
        for (int ba : ph.processed[a].second) {
          for (int bb : ph.processed[b].second) {
            CHECK(box_distance(tree.box(ph.level, ba), tree.box(ph.level, bb)) > 2);
            ++pairs_checked;
          }
        }
      }
    }
  }
  CHECK(pairs_checked > 0);
}

TEST_CASE("per-worker message count grows at most logarithmically in p") {
  auto pts = make_grid(128);
  LaplaceKernel kernel(1.0 / 128);
  std::vector<std::uint64_t> max_msgs;
  for (int p : {4, 16, 64}) {
    InProcessCommunicator<double> comm(p);
    parallel_factorize(pts, kernel, 1e-6, ParallelOptions{.leaf_target = 64, .p = p},
                       comm);
    std::uint64_t mm = 0;
    for (const auto& c : comm.counters()) mm = std::max(mm, c.messages);
    max_msgs.push_back(mm);
  }
  // Quadrupling p never quadruples the per-worker message count.
  CHECK(max_msgs[1] <= 4 * max_msgs[0]);
  CHECK(max_msgs[2] <= 4 * max_msgs[1]);
}

TEST_CASE("quadrupling N scales total words like the boundary size") {
  std::uint64_t words[2];
  int idx = 0;
  for (int n_side : {64, 128}) {
    auto pts = make_grid(n_side);
    LaplaceKernel kernel(1.0 / n_side);
    InProcessCommunicator<double> comm(4);
    // Flat-rank regime: per-level block widths match across sizes.
    parallel_factorize(pts, kernel, 1e-3, ParallelOptions{.leaf_target = 64, .p = 4},
                       comm);
    words[idx++] = comm.total_words();
  }
  const double ratio = static_cast<double>(words[1]) / static_cast<double>(words[0]);
  CHECK(ratio >= 1.4);
  CHECK(ratio <= 3.0);
}
