#include "rhyme/params.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "rhyme/error.hpp"

namespace rhyme {

Tensor &ParameterStore::add(std::string name, std::vector<std::size_t> shape) {
  if (contains(name)) {
    throw ShapeError("duplicate tensor name '" + name + "'");
  }
  const std::size_t count =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
  tensors_.push_back(Tensor{std::move(name), std::move(shape), AlignedDoubles(count, 0.0)});
  return tensors_.back();
}

bool ParameterStore::contains(std::string_view name) const noexcept {
  return std::any_of(tensors_.begin(), tensors_.end(), [&](const Tensor &t) { return t.name == name; });
}

Tensor &ParameterStore::at(std::string_view name) {
  for (auto &t : tensors_) {
    if (t.name == name) {
      return t;
    }
  }
  throw ShapeError("no tensor named '" + std::string(name) + "'");
}

const Tensor &ParameterStore::at(std::string_view name) const {
  return const_cast<ParameterStore *>(this)->at(name);
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto &t : tensors_) {
    n += t.size();
  }
  return n;
}

ParameterStore ParameterStore::zeros_like() const {
  ParameterStore out;
  for (const auto &t : tensors_) {
    out.add(t.name, t.shape);
  }
  return out;
}

void ParameterStore::set_zero() {
  for (auto &t : tensors_) {
    std::fill(t.data.begin(), t.data.end(), 0.0);
  }
}

bool ParameterStore::same_layout(const ParameterStore &other) const noexcept {
  if (tensors_.size() != other.tensors_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name != other.tensors_[i].name || tensors_[i].shape != other.tensors_[i].shape) {
      return false;
    }
  }
  return true;
}

void ParameterStore::axpy(double scale, const ParameterStore &other) {
  if (!same_layout(other)) {
    throw ShapeError("axpy: parameter layouts differ");
  }
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    auto &dst = tensors_[i].data;
    const auto &src = other.tensors_[i].data;
    for (std::size_t j = 0; j < dst.size(); ++j) {
      dst[j] += scale * src[j];
    }
  }
}

void ParameterStore::scale(double factor) {
  for (auto &t : tensors_) {
    for (auto &v : t.data) {
      v *= factor;
    }
  }
}

namespace {

std::pair<Eigen::Index, Eigen::Index> matrix_dims(const Tensor &t) {
  if (t.shape.size() == 2) {
    return {static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1])};
  }
  // conv kernels [out, in, k] are viewed as [out, in*k]
  if (t.shape.size() == 3) {
    return {static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1] * t.shape[2])};
  }
  throw ShapeError("tensor '" + t.name + "' is not a matrix");
}

} // namespace

MatrixMap ParameterStore::matrix(std::string_view name) {
  Tensor &t = at(name);
  const auto [r, c] = matrix_dims(t);
  return MatrixMap(t.data.data(), r, c);
}

ConstMatrixMap ParameterStore::matrix(std::string_view name) const {
  const Tensor &t = at(name);
  const auto [r, c] = matrix_dims(t);
  return ConstMatrixMap(t.data.data(), r, c);
}

VectorMap ParameterStore::vector(std::string_view name) {
  Tensor &t = at(name);
  if (t.shape.size() != 1) {
    throw ShapeError("tensor '" + t.name + "' is not a vector");
  }
  return VectorMap(t.data.data(), static_cast<Eigen::Index>(t.size()));
}

ConstVectorMap ParameterStore::vector(std::string_view name) const {
  const Tensor &t = at(name);
  if (t.shape.size() != 1) {
    throw ShapeError("tensor '" + t.name + "' is not a vector");
  }
  return ConstVectorMap(t.data.data(), static_cast<Eigen::Index>(t.size()));
}

double &ParameterStore::scalar(std::string_view name) {
  Tensor &t = at(name);
  if (t.size() != 1) {
    throw ShapeError("tensor '" + t.name + "' is not a scalar");
  }
  return t.data[0];
}

double ParameterStore::scalar(std::string_view name) const {
  return const_cast<ParameterStore *>(this)->scalar(name);
}

} // namespace rhyme
