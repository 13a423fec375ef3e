#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace spxnet {

// Batch/channel/height/width extents of a rank-4 tensor.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
           static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  bool valid() const { return n >= 1 && c >= 1 && h >= 1 && w >= 1; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::ostream& operator<<(std::ostream& os, const Shape& s);

class Tape;

namespace detail {
struct TensorStorage {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  // Set when the tensor is produced by an op recorded on a tape.
  std::uint64_t tape_id = 0;
  std::uint64_t tape_generation = 0;
};
}  // namespace detail

// Rank-4 float tensor with an optional gradient buffer.
//
// Tensor is a handle: copies share storage, so an op output recorded on a
// tape and the caller's copy see the same gradient. Use clone() for a deep
// copy. Data is row-major within (n, c, h, w).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, float value);
  static Tensor from(Shape shape, std::vector<float> values);

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const;
  std::size_t numel() const { return shape().numel(); }

  std::span<const float> data() const;
  // Mutable access is meant for leaves (parameters, inputs under
  // construction); op outputs are treated as immutable.
  std::span<float> mutable_data();

  float at(int n, int c, int h, int w) const;
  float& at(int n, int c, int h, int w);
  float item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const float> grad() const;
  std::span<float> mutable_grad() const;
  // Gradient buffers stay mutable through const handles: tensors are
  // immutable after creation except for their gradients.
  // Allocates a zero gradient buffer if none exists.
  std::span<float> ensure_grad() const;
  void zero_grad() const;
  void clear_grad() const;

  Tensor clone() const;
  // New leaf sharing no storage and carrying no gradient.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  std::size_t offset(int n, int c, int h, int w) const;

  // Text dump: "shape: n c h w" then whitespace-separated values.
  void dump(std::ostream& os) const;
  static Tensor parse_dump(std::istream& is);

 private:
  friend class Tape;
  friend detail::TensorStorage& storage_of(const Tensor& t);
  explicit Tensor(std::shared_ptr<detail::TensorStorage> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<detail::TensorStorage> impl_;
};

detail::TensorStorage& storage_of(const Tensor& t);

// Elementwise equality of shapes and bit patterns of the data.
bool bit_equal(const Tensor& a, const Tensor& b);

}  // namespace spxnet
