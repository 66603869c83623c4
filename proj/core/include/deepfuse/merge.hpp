#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "deepfuse/tensor.hpp"

namespace deepfuse {

/// How the two feature stacks are combined. Concat stacks channels (a first, then b).
enum class MergeMode { Add, Mean, Max, Product, Concat };

std::string_view to_string(MergeMode mode) noexcept;
std::optional<MergeMode> parse_merge_mode(std::string_view name) noexcept;

Tensor3 merge_forward(const Tensor3& a, const Tensor3& b, MergeMode mode);

// Max routes the gradient to the larger operand; ties go to `a`.
std::pair<Tensor3, Tensor3> merge_backward(const Tensor3& a, const Tensor3& b, MergeMode mode,
                                           const Tensor3& upstream_grad);

}  // namespace deepfuse
