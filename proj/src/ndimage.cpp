#include "mmv/ndimage.hpp"

namespace mmv {

AxisList parse_axes(std::string_view labels) {
  AxisList axes;
  for (char c : labels) {
    auto a = axis_from_label(c);
    if (!a) throw Error(Errc::InvalidArgument, std::string("unknown axis label '") + c + "'");
    if (!axes.empty() && axes.back() >= *a)
      throw Error(Errc::InvalidArgument, "axes not in canonical TCZYX order: " + std::string(labels));
    axes.push_back(*a);
  }
  return axes;
}

}  // namespace mmv
