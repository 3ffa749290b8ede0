#pragma once

#include <string>
#include <variant>
#include <vector>

#include "mmv/io.hpp"
#include "mmv/ndimage.hpp"
#include "mmv/normalize.hpp"
#include "mmv/stain.hpp"

namespace mmv {

/// Which image of a sample a transform step touches.
enum class Role { Source, Target, Costmap };

std::string_view role_name(Role r) noexcept;

struct EnsureAxesOp {
  AxisList axes;
  friend bool operator==(const EnsureAxesOp&, const EnsureAxesOp&) = default;
};

/// Rounds and clamps values into the integer range of `dtype` (values stay float).
struct CastOp {
  DType dtype = DType::F32;
  friend bool operator==(const CastOp&, const CastOp&) = default;
};

struct StainOp {
  StainParams params;
};

/// One deterministic preprocessing step.
struct TransformStep {
  std::variant<NormSpec, StainOp, EnsureAxesOp, CastOp> op;
  std::vector<Role> apply_to{Role::Source};

  std::string name() const;
  bool applies_to(Role r) const;
};

Image apply_transform(const Image& img, const TransformStep& step);

/// Applies every step whose apply_to contains `role`, in order.
Image apply_transforms(const Image& img, const std::vector<TransformStep>& steps, Role role);

/// Canonical JSON text of a step list; feeds the cache content key.
std::string transforms_canonical(const std::vector<TransformStep>& steps);

}  // namespace mmv
