#include "spxnet/tape.hpp"

#include <atomic>

#include "spxnet/errors.hpp"

namespace spxnet {

namespace {
std::atomic<std::uint64_t> next_tape_id{1};
thread_local Tape* active_tape = nullptr;
}  // namespace

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

void Tape::record(std::string op, std::vector<Tensor> inputs, const Tensor& output, BackwardFn fn) {
  auto& out = storage_of(output);
  out.tape_id = id_;
  out.tape_generation = generation_;
  entries_.push_back(Entry{std::move(op), std::move(inputs), output, std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.shape() != Shape{1, 1, 1, 1}) {
    throw TapeError("backward() needs a (1,1,1,1) loss, got " +
                    (loss.defined() ? loss.shape().str() : std::string("undefined")));
  }
  const auto& root = storage_of(loss);
  if (root.tape_id != id_) throw TapeError("loss was not recorded on this tape");
  if (root.tape_generation != generation_) throw TapeError("loss tensor used after tape reset");
  if (!root.requires_grad) throw TapeError("loss does not depend on any requires_grad tensor");

  // Intermediate gradients are per-replay; only leaves accumulate.
  for (auto& e : entries_) {
    if (e.output.has_grad()) e.output.clear_grad();
  }
  Tensor seed = loss;
  seed.ensure_grad()[0] = 1.0f;

  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->backward || !it->output.requires_grad() || !it->output.has_grad()) continue;
    it->backward();
  }
}

void Tape::reset() {
  entries_.clear();
  ++generation_;
}

std::vector<std::string> Tape::op_names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (const auto& e : entries_) names.push_back(e.op);
  return names;
}

std::size_t Tape::count(std::string_view op) const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.op == op ? 1 : 0;
  return n;
}

Tape* Tape::active() { return active_tape; }

Tape::Scope::Scope(Tape& tape) : previous_(active_tape) { active_tape = &tape; }

Tape::Scope::~Scope() { active_tape = previous_; }

}  // namespace spxnet
