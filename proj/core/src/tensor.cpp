#include "spxnet/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "spxnet/errors.hpp"

namespace spxnet {

std::string Shape::str() const {
  std::ostringstream os;
  os << *this;
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Shape& s) {
  return os << '(' << s.n << ',' << s.c << ',' << s.h << ',' << s.w << ')';
}

namespace {

void check_shape(const Shape& shape) {
  if (!shape.valid()) throw ShapeError("tensor dimensions must be >= 1, got " + shape.str());
}

const detail::TensorStorage& checked(const std::shared_ptr<detail::TensorStorage>& impl) {
  if (!impl) throw ShapeError("use of an undefined tensor");
  return *impl;
}

}  // namespace

detail::TensorStorage& storage_of(const Tensor& t) {
  if (!t.impl_) throw ShapeError("use of an undefined tensor");
  return *t.impl_;
}

Tensor Tensor::zeros(Shape shape) { return full(shape, 0.0f); }

Tensor Tensor::full(Shape shape, float value) {
  check_shape(shape);
  auto impl = std::make_shared<detail::TensorStorage>();
  impl->shape = shape;
  impl->data.assign(shape.numel(), value);
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<float> values) {
  check_shape(shape);
  if (values.size() != shape.numel()) {
    throw ShapeError("tensor " + shape.str() + " needs " + std::to_string(shape.numel()) +
                     " values, got " + std::to_string(values.size()));
  }
  auto impl = std::make_shared<detail::TensorStorage>();
  impl->shape = shape;
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

const Shape& Tensor::shape() const { return checked(impl_).shape; }

std::span<const float> Tensor::data() const { return checked(impl_).data; }

std::span<float> Tensor::mutable_data() { return storage_of(*this).data; }

std::size_t Tensor::offset(int n, int c, int h, int w) const {
  const Shape& s = shape();
  return ((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w;
}

float Tensor::at(int n, int c, int h, int w) const { return data()[offset(n, c, h, w)]; }

float& Tensor::at(int n, int c, int h, int w) { return mutable_data()[offset(n, c, h, w)]; }

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape().str());
  return data()[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  storage_of(*this).requires_grad = value;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const float> Tensor::grad() const { return checked(impl_).grad; }

std::span<float> Tensor::mutable_grad() const { return storage_of(*this).grad; }

std::span<float> Tensor::ensure_grad() const {
  auto& s = storage_of(*this);
  if (s.grad.empty()) s.grad.assign(s.data.size(), 0.0f);
  return s.grad;
}

void Tensor::zero_grad() const {
  auto& s = storage_of(*this);
  std::fill(s.grad.begin(), s.grad.end(), 0.0f);
}

void Tensor::clear_grad() const {
  auto& s = storage_of(*this);
  s.grad.clear();
  s.grad.shrink_to_fit();
}

Tensor Tensor::clone() const {
  const auto& s = checked(impl_);
  auto impl = std::make_shared<detail::TensorStorage>();
  impl->shape = s.shape;
  impl->data = s.data;
  impl->grad = s.grad;
  impl->requires_grad = s.requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::detach() const {
  const auto& s = checked(impl_);
  return from(s.shape, s.data);
}

void Tensor::dump(std::ostream& os) const {
  const Shape& s = shape();
  os << "shape: " << s.n << ' ' << s.c << ' ' << s.h << ' ' << s.w << '\n';
  const auto values = data();
  const auto old_precision = os.precision(std::numeric_limits<float>::max_digits10);
  for (std::size_t i = 0; i < values.size(); ++i) {
    os << values[i] << ((i + 1) % static_cast<std::size_t>(s.w) == 0 ? '\n' : ' ');
  }
  os.precision(old_precision);
}

Tensor Tensor::parse_dump(std::istream& is) {
  std::string tag;
  Shape s;
  if (!(is >> tag >> s.n >> s.c >> s.h >> s.w) || tag != "shape:") {
    throw FormatError("tensor dump must start with 'shape: n c h w'");
  }
  check_shape(s);
  std::vector<float> values(s.numel());
  for (auto& v : values) {
    if (!(is >> v)) throw FormatError("tensor dump truncated");
  }
  return from(s, std::move(values));
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  const auto x = a.data();
  const auto y = b.data();
  return std::memcmp(x.data(), y.data(), x.size_bytes()) == 0;
}

}  // namespace spxnet
