#include "mmv/transforms.hpp"

#include <algorithm>
#include <cmath>

#include "transform_json.hpp"

namespace mmv {

std::string_view role_name(Role r) noexcept {
  switch (r) {
    case Role::Source: return "source";
    case Role::Target: return "target";
    case Role::Costmap: return "costmap";
  }
  return "source";
}

namespace {

Role parse_role(const std::string& s, const std::string& where) {
  if (s == "source") return Role::Source;
  if (s == "target") return Role::Target;
  if (s == "costmap") return Role::Costmap;
  throw Error(Errc::ValidationError, where + ": unknown role '" + s + "' (source, target, costmap)");
}

struct OpName {
  std::string operator()(const NormSpec& n) const {
    switch (n.kind) {
      case NormKind::Percentile: return "percentile_norm";
      case NormKind::Standard: return "standard_norm";
      case NormKind::Center: return "center_norm";
    }
    return "norm";
  }
  std::string operator()(const StainOp&) const { return "stain_norm"; }
  std::string operator()(const EnsureAxesOp&) const { return "ensure_axes"; }
  std::string operator()(const CastOp&) const { return "cast"; }
};

Image cast_values(const Image& img, DType dtype) {
  if (dtype == DType::F32) return img;
  const float hi = dtype == DType::U8 ? 255.0f : 65535.0f;
  Image out = img;
  for (float& v : out.data()) v = std::clamp(std::nearbyint(v), 0.0f, hi);
  return out;
}

double number(const Json& j, const std::string& key, const std::string& where) {
  const Json& v = j.at(key);
  if (!v.is_number()) throw Error(Errc::ValidationError, where + "." + key + ": expected a number");
  return v.get<double>();
}

}  // namespace

std::string TransformStep::name() const { return std::visit(OpName{}, op); }

bool TransformStep::applies_to(Role r) const {
  return std::find(apply_to.begin(), apply_to.end(), r) != apply_to.end();
}

Image apply_transform(const Image& img, const TransformStep& step) {
  return std::visit(
      [&](const auto& op) -> Image {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, NormSpec>) {
          return apply_norm(img, op);
        } else if constexpr (std::is_same_v<T, StainOp>) {
          return macenko_normalize(img, op.params);
        } else if constexpr (std::is_same_v<T, EnsureAxesOp>) {
          return ensure_axes(img, op.axes);
        } else {
          return cast_values(img, op.dtype);
        }
      },
      step.op);
}

Image apply_transforms(const Image& img, const std::vector<TransformStep>& steps, Role role) {
  Image cur = img;
  for (const auto& s : steps)
    if (s.applies_to(role)) cur = apply_transform(cur, s);
  return cur;
}

Json transform_to_json(const TransformStep& step) {
  Json j;
  j["op"] = step.name();
  j["apply_to"] = Json::array();
  for (Role r : step.apply_to) j["apply_to"].push_back(std::string(role_name(r)));
  std::visit(
      [&](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, NormSpec>) {
          if (op.kind == NormKind::Percentile) {
            j["p_lo"] = op.p_lo;
            j["p_hi"] = op.p_hi;
            j["out_lo"] = op.out_lo;
            j["out_hi"] = op.out_hi;
          } else if (op.kind == NormKind::Center) {
            j["center_fraction"] = op.center_fraction;
          }
        } else if constexpr (std::is_same_v<T, StainOp>) {
          const auto& p = op.params;
          j["io"] = p.io;
          j["beta"] = p.beta;
          j["alpha"] = p.alpha;
          j["reference"] = Json::array();
          for (int r = 0; r < 3; ++r) j["reference"].push_back({p.reference(r, 0), p.reference(r, 1)});
          j["reference_max"] = {p.reference_max(0), p.reference_max(1)};
        } else if constexpr (std::is_same_v<T, EnsureAxesOp>) {
          j["axes"] = axes_string(op.axes);
        } else {
          j["dtype"] = std::string(dtype_name(op.dtype));
        }
      },
      step.op);
  return j;
}

void reject_unknown_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(Errc::ValidationError, where + ": expected a mapping");
  for (const auto& [k, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      const std::string prefix = where.empty() ? "" : where + ".";
      throw Error(Errc::UnknownKey,
                  "unknown key '" + prefix + k + "' (did you mean '" + prefix + nearest_key(k, allowed) + "'?)");
    }
  }
}

TransformStep transform_from_json(const Json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("op") || !j.at("op").is_string())
    throw Error(Errc::ValidationError, where + ": each preprocess step needs an 'op' string");
  const std::string op = j.at("op").get<std::string>();
  TransformStep step;
  std::vector<std::string> allowed{"op", "apply_to"};

  if (op == "percentile_norm" || op == "standard_norm" || op == "center_norm") {
    NormSpec n;
    if (op == "percentile_norm") {
      n.kind = NormKind::Percentile;
      allowed.insert(allowed.end(), {"p_lo", "p_hi", "out_lo", "out_hi"});
    } else if (op == "standard_norm") {
      n.kind = NormKind::Standard;
    } else {
      n.kind = NormKind::Center;
      allowed.push_back("center_fraction");
    }
    reject_unknown_keys(j, allowed, where);
    if (j.contains("p_lo")) n.p_lo = number(j, "p_lo", where);
    if (j.contains("p_hi")) n.p_hi = number(j, "p_hi", where);
    if (j.contains("out_lo")) n.out_lo = number(j, "out_lo", where);
    if (j.contains("out_hi")) n.out_hi = number(j, "out_hi", where);
    if (j.contains("center_fraction")) n.center_fraction = number(j, "center_fraction", where);
    try {
      n.validate();
    } catch (const Error& e) {
      throw Error(Errc::ValidationError, where + ": " + e.detail());
    }
    step.op = n;
  } else if (op == "stain_norm") {
    allowed.insert(allowed.end(), {"io", "beta", "alpha", "reference", "reference_max"});
    reject_unknown_keys(j, allowed, where);
    StainParams p;
    if (j.contains("io")) p.io = number(j, "io", where);
    if (j.contains("beta")) p.beta = number(j, "beta", where);
    if (j.contains("alpha")) p.alpha = number(j, "alpha", where);
    try {
      if (j.contains("reference")) {
        const Json& m = j.at("reference");
        if (!m.is_array() || m.size() != 3) throw Error(Errc::ValidationError, "reference must be 3 rows of 2");
        for (int r = 0; r < 3; ++r) {
          if (!m[r].is_array() || m[r].size() != 2) throw Error(Errc::ValidationError, "reference must be 3 rows of 2");
          for (int c = 0; c < 2; ++c) p.reference(r, c) = m[r][c].get<double>();
        }
      }
      if (j.contains("reference_max")) {
        const Json& m = j.at("reference_max");
        if (!m.is_array() || m.size() != 2) throw Error(Errc::ValidationError, "reference_max must have 2 entries");
        p.reference_max << m[0].get<double>(), m[1].get<double>();
      }
      p.validate();
    } catch (const Error& e) {
      throw Error(Errc::ValidationError, where + ": " + e.detail());
    } catch (const Json::exception& e) {
      throw Error(Errc::ValidationError, where + ": " + e.what());
    }
    step.op = StainOp{p};
  } else if (op == "ensure_axes") {
    allowed.push_back("axes");
    reject_unknown_keys(j, allowed, where);
    if (!j.contains("axes") || !j.at("axes").is_string())
      throw Error(Errc::ValidationError, where + ".axes: expected a string such as \"CZYX\"");
    try {
      step.op = EnsureAxesOp{parse_axes(j.at("axes").get<std::string>())};
    } catch (const Error& e) {
      throw Error(Errc::ValidationError, where + ".axes: " + e.detail());
    }
    step.apply_to = {Role::Source, Role::Target, Role::Costmap};
  } else if (op == "cast") {
    allowed.push_back("dtype");
    reject_unknown_keys(j, allowed, where);
    const std::string d = j.contains("dtype") && j.at("dtype").is_string() ? j.at("dtype").get<std::string>() : "";
    CastOp c;
    if (d == "f32") c.dtype = DType::F32;
    else if (d == "u8") c.dtype = DType::U8;
    else if (d == "u16") c.dtype = DType::U16;
    else throw Error(Errc::ValidationError, where + ".dtype: expected f32, u8 or u16");
    step.op = c;
  } else {
    throw Error(Errc::ValidationError,
                where + ".op: unknown op '" + op +
                    "' (percentile_norm, standard_norm, center_norm, stain_norm, ensure_axes, cast)");
  }

  if (j.contains("apply_to")) {
    const Json& a = j.at("apply_to");
    if (!a.is_array() || a.empty()) throw Error(Errc::ValidationError, where + ".apply_to: expected a non-empty list");
    step.apply_to.clear();
    for (const auto& r : a) {
      if (!r.is_string()) throw Error(Errc::ValidationError, where + ".apply_to: expected role names");
      const Role role = parse_role(r.get<std::string>(), where + ".apply_to");
      if (!step.applies_to(role)) step.apply_to.push_back(role);
    }
    std::sort(step.apply_to.begin(), step.apply_to.end());
  }
  return step;
}

std::string transforms_canonical(const std::vector<TransformStep>& steps) {
  Json j = Json::array();
  for (const auto& s : steps) j.push_back(transform_to_json(s));
  return j.dump();
}

}  // namespace mmv
