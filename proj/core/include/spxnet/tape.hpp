#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "spxnet/tensor.hpp"

namespace spxnet {

// Ordered record of executed operations. Ops executed while a tape is
// active (see Tape::Scope) append an entry with a backward rule; backward()
// replays the rules in reverse order.
//
// A tape is single-owner: one thread records and replays it.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  struct Entry {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::string op, std::vector<Tensor> inputs, const Tensor& output, BackwardFn fn);

  // Accumulates d(loss)/d(t) into the grad buffer of every requires_grad
  // tensor reachable from `loss`. Leaf gradients add to existing buffers.
  void backward(const Tensor& loss);

  // Drops all entries; tensors produced before the reset can no longer be
  // used as a backward root.
  void reset();

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<std::string> op_names() const;
  std::size_t count(std::string_view op) const;
  bool contains(std::string_view op) const { return count(op) > 0; }

  std::uint64_t id() const { return id_; }
  std::uint64_t generation() const { return generation_; }

  // Tape that ops record onto on the calling thread, or nullptr.
  static Tape* active();

  // Makes `tape` the active tape of this thread for the scope's lifetime.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

 private:
  std::vector<Entry> entries_;
  std::uint64_t id_;
  std::uint64_t generation_ = 1;
};

}  // namespace spxnet
