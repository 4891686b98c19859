#pragma once

#include <cstdint>
#include <stdexcept>
#include <variant>
#include <vector>

#include "rsf/linalg.hpp"

namespace rsf {

struct CommCounters {
  std::uint64_t messages = 0;
  std::uint64_t words = 0;  // one word = one real scalar; complex counts two
};

template <class S>
struct BlockMsg {
  int level = 0;
  int i = 0;
  int j = 0;
  Matrix<S> data;
  std::vector<int> rows, cols;
};

struct ActiveMsg {
  int level = 0;
  int box = 0;
  std::vector<int> idx;
};

template <class S>
struct Message {
  int from = 0;
  std::variant<BlockMsg<S>, ActiveMsg> payload;
};

// Transport between worker contexts with exact traffic accounting.
// Senders enqueue during a phase; the orchestrator routes between barriers;
// receivers drain afterwards.
template <class S>
class Communicator {
 public:
  virtual ~Communicator() = default;
  virtual void send_block(int from, int to, BlockMsg<S> m) = 0;
  virtual void send_active(int from, int to, ActiveMsg m) = 0;
  virtual void route() = 0;
  virtual std::vector<Message<S>> drain(int worker) = 0;
  virtual const std::vector<CommCounters>& counters() const = 0;

  std::uint64_t total_messages() const {
    std::uint64_t t = 0;
    for (const auto& c : counters()) t += c.messages;
    return t;
  }
  std::uint64_t total_words() const {
    std::uint64_t t = 0;
    for (const auto& c : counters()) t += c.words;
    return t;
  }
};

// In-process channel fabric: per-worker outboxes and inboxes moved by
// value, no shared mutable state between workers. During a phase each
// worker touches only its own outbox; route() runs between barriers.
template <class S>
class InProcessCommunicator : public Communicator<S> {
 public:
  explicit InProcessCommunicator(int p)
      : outbox_(static_cast<size_t>(p)), inbox_(static_cast<size_t>(p)),
        counters_(static_cast<size_t>(p)) {}

  void send_block(int from, int to, BlockMsg<S> m) override {
    check_ids(from, to);
    counters_[static_cast<size_t>(from)].messages += 1;
    counters_[static_cast<size_t>(from)].words +=
        static_cast<std::uint64_t>(m.data.size()) *
        ScalarTraits<S>::words_per_scalar;
    outbox_[static_cast<size_t>(from)].push_back(
        {from, std::variant<BlockMsg<S>, ActiveMsg>(std::in_place_index<0>, std::move(m)), to});
  }

  void send_active(int from, int to, ActiveMsg m) override {
    check_ids(from, to);
    counters_[static_cast<size_t>(from)].messages += 1;
    counters_[static_cast<size_t>(from)].words += m.idx.size();
    outbox_[static_cast<size_t>(from)].push_back(
        {from, std::variant<BlockMsg<S>, ActiveMsg>(std::in_place_index<1>, std::move(m)), to});
  }

  void route() override {
    for (auto& box : outbox_) {
      for (auto& env : box) {
        inbox_[static_cast<size_t>(env.to)].push_back(
            {env.from, std::move(env.payload)});
      }
      box.clear();
    }
  }

  std::vector<Message<S>> drain(int worker) override {
    std::vector<Message<S>> out;
    out.swap(inbox_.at(static_cast<size_t>(worker)));
    return out;
  }

  const std::vector<CommCounters>& counters() const override { return counters_; }

 private:
  struct Envelope {
    int from;
    std::variant<BlockMsg<S>, ActiveMsg> payload;
    int to;
  };

  void check_ids(int from, int to) const {
    if (from < 0 || to < 0 || from >= static_cast<int>(outbox_.size()) ||
        to >= static_cast<int>(outbox_.size()) || from == to) {
      throw std::invalid_argument("Communicator: bad worker ids");
    }
  }

  std::vector<std::vector<Envelope>> outbox_;
  std::vector<std::vector<Message<S>>> inbox_;
  std::vector<CommCounters> counters_;
};

}  // namespace rsf
