// Copyright 2026 The Hierflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HIERFLOW_MATRIX_HPP
#define HIERFLOW_MATRIX_HPP

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace hierflow {

/// Dense row-major square matrix. Node-pair quantities are small enough
/// (n up to ~10^4) that dense storage is the simplest layout.
template <class T>
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, T fill = T{})
      : n_(n), data_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }

  T& operator()(std::size_t row, std::size_t col) {
    assert(row < n_ && col < n_);
    return data_[row * n_ + col];
  }
  const T& operator()(std::size_t row, std::size_t col) const {
    assert(row < n_ && col < n_);
    return data_[row * n_ + col];
  }

  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * n_, n_};
  }
  std::span<const T> data() const { return data_; }

  bool operator==(const SquareMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<T> data_;
};

}  // namespace hierflow

#endif  // HIERFLOW_MATRIX_HPP
