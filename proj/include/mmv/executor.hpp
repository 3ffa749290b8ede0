#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mmv/ndimage.hpp"

namespace mmv {

enum class ExecutorKind { Identity, Blur, Affine, Threshold, External };

std::string_view executor_kind_name(ExecutorKind k) noexcept;
ExecutorKind parse_executor_kind(std::string_view s);

/// Declaration of a patch -> patch transform.
struct ExecutorSpec {
  ExecutorKind kind = ExecutorKind::Identity;
  int spatial_rank = 2;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::vector<double> sigma{1.0};  ///< blur; one value per spatial axis, or one for all
  double gain = 1.0;               ///< affine
  double bias = 0.0;               ///< affine
  double threshold = 0.5;          ///< threshold
  std::vector<std::string> command;  ///< external: argv
  double timeout_s = 60.0;           ///< external: per frame
  std::size_t pool_size = 1;         ///< external: concurrent child processes

  void validate() const;
  friend bool operator==(const ExecutorSpec&, const ExecutorSpec&) = default;
};

/// Runs a batch laid out as (T=batch, C, [Z,] Y, X). The T axis is always
/// present and carries the batch index.
class Executor {
 public:
  virtual ~Executor() = default;
  virtual const ExecutorSpec& spec() const = 0;
  /// Largest batch accepted by one run() call.
  virtual std::size_t max_batch() const { return std::size_t(-1); }
  /// Window/batch index is attached to errors raised for this call.
  virtual Image run(const Image& batch, std::size_t batch_index = 0) = 0;
};

std::unique_ptr<Executor> make_executor(const ExecutorSpec& spec);

/// One-shot convenience over make_executor(spec)->run(batch).
Image execute(const ExecutorSpec& spec, const Image& batch);

/// Normalized sampled gaussian, radius ceil(4 sigma).
std::vector<double> gaussian_kernel_1d(double sigma);

/// Separable gaussian over the spatial axes of `img` (each channel/batch
/// entry independently), half-sample symmetric boundary. `sigma` holds one
/// value per spatial axis or a single value for all.
Image gaussian_blur(const Image& img, const std::vector<double>& sigma);

/// Checks batch layout (T, C, spatial) against the spec's channels and rank.
void check_batch(const ExecutorSpec& spec, const Image& batch);

}  // namespace mmv
