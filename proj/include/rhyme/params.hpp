#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace rhyme {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

/// Packet-aligned storage. Eigen peels reductions up to the first aligned
/// element, so a buffer's address would otherwise change the summation order.
using AlignedDoubles = std::vector<double, Eigen::aligned_allocator<double>>;

/// Named row-major tensor of doubles.
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  AlignedDoubles data;

  std::size_t size() const noexcept { return data.size(); }

  friend bool operator==(const Tensor &, const Tensor &) = default;
};

/// Ordered collection of named tensors. Used both for trainable parameters and
/// for their gradients, which always share names, order and shapes.
class ParameterStore {
public:
  ParameterStore() = default;

  Tensor &add(std::string name, std::vector<std::size_t> shape);

  bool contains(std::string_view name) const noexcept;
  Tensor &at(std::string_view name);
  const Tensor &at(std::string_view name) const;

  std::span<Tensor> tensors() noexcept { return tensors_; }
  std::span<const Tensor> tensors() const noexcept { return tensors_; }

  /// Total number of scalars across all tensors.
  std::size_t scalar_count() const noexcept;

  /// Store with the same layout and every entry zero.
  ParameterStore zeros_like() const;
  void set_zero();
  /// Elementwise this += scale * other. Layouts must match.
  void axpy(double scale, const ParameterStore &other);
  void scale(double factor);
  bool same_layout(const ParameterStore &other) const noexcept;

  // Typed views; throw ShapeError on rank mismatch.
  MatrixMap matrix(std::string_view name);
  ConstMatrixMap matrix(std::string_view name) const;
  VectorMap vector(std::string_view name);
  ConstVectorMap vector(std::string_view name) const;
  double &scalar(std::string_view name);
  double scalar(std::string_view name) const;

  friend bool operator==(const ParameterStore &, const ParameterStore &) = default;

private:
  std::vector<Tensor> tensors_;
};

} // namespace rhyme
