#include "mmv/executor.hpp"

#include <cmath>

#include "mmv/external.hpp"

namespace mmv {

std::string_view executor_kind_name(ExecutorKind k) noexcept {
  switch (k) {
    case ExecutorKind::Identity: return "identity";
    case ExecutorKind::Blur: return "blur";
    case ExecutorKind::Affine: return "affine";
    case ExecutorKind::Threshold: return "threshold";
    case ExecutorKind::External: return "external";
  }
  return "identity";
}

ExecutorKind parse_executor_kind(std::string_view s) {
  if (s == "identity") return ExecutorKind::Identity;
  if (s == "blur") return ExecutorKind::Blur;
  if (s == "affine") return ExecutorKind::Affine;
  if (s == "threshold") return ExecutorKind::Threshold;
  if (s == "external") return ExecutorKind::External;
  throw Error(Errc::ValidationError,
              "unknown executor kind '" + std::string(s) + "' (identity, blur, affine, threshold, external)");
}

void ExecutorSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::ValidationError, what); };
  if (spatial_rank != 2 && spatial_rank != 3) fail("executor.spatial_rank must be 2 or 3");
  if (in_channels < 1 || out_channels < 1) fail("executor channels must be >= 1");
  if (kind != ExecutorKind::External && in_channels != out_channels)
    fail("built-in executors need in_channels == out_channels");
  if (kind == ExecutorKind::Blur) {
    if (sigma.size() != 1 && sigma.size() != std::size_t(spatial_rank))
      fail("executor.sigma needs 1 or spatial_rank entries");
    for (double s : sigma)
      if (!(s > 0.0)) fail("executor.sigma must be > 0");
  }
  if (kind == ExecutorKind::External) {
    if (command.empty() || command.front().empty()) fail("executor.command must be non-empty");
    if (!(timeout_s > 0.0)) fail("executor.timeout must be > 0");
    if (pool_size < 1) fail("executor.pool_size must be >= 1");
  }
}

void check_batch(const ExecutorSpec& spec, const Image& batch) {
  const AxisList want = spec.spatial_rank == 3 ? AxisList{Axis::T, Axis::C, Axis::Z, Axis::Y, Axis::X}
                                               : AxisList{Axis::T, Axis::C, Axis::Y, Axis::X};
  if (batch.axes() != want)
    throw Error(Errc::ShapeMismatch, "executor batch must be " + axes_string(want) + ", got " + axes_string(batch.axes()));
  if (batch.shape()[1] != spec.in_channels)
    throw Error(Errc::ChannelMismatch, "executor expects " + std::to_string(spec.in_channels) + " channels, batch has " +
                                           std::to_string(batch.shape()[1]));
}

std::vector<double> gaussian_kernel_1d(double sigma) {
  if (!(sigma > 0.0)) throw Error(Errc::InvalidArgument, "gaussian sigma must be > 0");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> k(std::size_t(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-double(i * i) / (2.0 * sigma * sigma));
    k[std::size_t(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

namespace {

/// Half-sample symmetric extension (d c b a | a b c d | d c b a), any distance.
std::size_t symmetric_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - 1 - m;
  return std::size_t(m);
}

void convolve_axis(Image& img, std::size_t axis, const std::vector<double>& kernel) {
  const Shape& shape = img.shape();
  const std::size_t n = shape[axis];
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  auto data = img.data();
  std::vector<double> line(n);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      for (std::size_t x = 0; x < n; ++x) line[x] = data[base + x * inner];
      for (std::size_t x = 0; x < n; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k)
          acc += kernel[std::size_t(k + radius)] * line[symmetric_index(std::ptrdiff_t(x) + k, n)];
        data[base + x * inner] = static_cast<float>(acc);
      }
    }
}

class IdentityExecutor final : public Executor {
 public:
  explicit IdentityExecutor(ExecutorSpec s) : spec_(std::move(s)) {}
  const ExecutorSpec& spec() const override { return spec_; }
  Image run(const Image& batch, std::size_t) override {
    check_batch(spec_, batch);
    return batch;
  }

 private:
  ExecutorSpec spec_;
};

class AffineExecutor final : public Executor {
 public:
  explicit AffineExecutor(ExecutorSpec s) : spec_(std::move(s)) {}
  const ExecutorSpec& spec() const override { return spec_; }
  Image run(const Image& batch, std::size_t) override {
    check_batch(spec_, batch);
    Image out = batch;
    out.array() = (batch.array().cast<double>() * spec_.gain + spec_.bias).cast<float>();
    return out;
  }

 private:
  ExecutorSpec spec_;
};

class ThresholdExecutor final : public Executor {
 public:
  explicit ThresholdExecutor(ExecutorSpec s) : spec_(std::move(s)) {}
  const ExecutorSpec& spec() const override { return spec_; }
  Image run(const Image& batch, std::size_t) override {
    check_batch(spec_, batch);
    Image out = batch;
    const auto t = spec_.threshold;
    out.array() = (batch.array().cast<double>() >= t).cast<float>();
    return out;
  }

 private:
  ExecutorSpec spec_;
};

class BlurExecutor final : public Executor {
 public:
  explicit BlurExecutor(ExecutorSpec s) : spec_(std::move(s)) {}
  const ExecutorSpec& spec() const override { return spec_; }
  Image run(const Image& batch, std::size_t) override {
    check_batch(spec_, batch);
    return gaussian_blur(batch, spec_.sigma);
  }

 private:
  ExecutorSpec spec_;
};

}  // namespace

Image gaussian_blur(const Image& img, const std::vector<double>& sigma) {
  const AxisList spatial = img.spatial_axes();
  if (sigma.size() != 1 && sigma.size() != spatial.size())
    throw Error(Errc::InvalidArgument, "blur sigma needs 1 or " + std::to_string(spatial.size()) + " entries");
  Image out = img;
  for (std::size_t k = 0; k < spatial.size(); ++k) {
    const double s = sigma.size() == 1 ? sigma[0] : sigma[k];
    convolve_axis(out, *img.axis_index(spatial[k]), gaussian_kernel_1d(s));
  }
  return out;
}

std::unique_ptr<Executor> make_executor(const ExecutorSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ExecutorKind::Identity: return std::make_unique<IdentityExecutor>(spec);
    case ExecutorKind::Blur: return std::make_unique<BlurExecutor>(spec);
    case ExecutorKind::Affine: return std::make_unique<AffineExecutor>(spec);
    case ExecutorKind::Threshold: return std::make_unique<ThresholdExecutor>(spec);
    case ExecutorKind::External: return std::make_unique<ExternalExecutor>(spec);
  }
  throw Error(Errc::InvalidArgument, "unknown executor kind");
}

Image execute(const ExecutorSpec& spec, const Image& batch) { return make_executor(spec)->run(batch); }

}  // namespace mmv
