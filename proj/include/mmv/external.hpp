#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <sys/types.h>
#include <vector>

#include "mmv/executor.hpp"
#include "mmv/wire.hpp"

namespace mmv {

/// What the child declared in its hello frame.
struct HelloInfo {
  int version = 0;
  std::size_t max_batch = 1;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  int spatial_rank = 0;
};

/// One child process speaking the frame protocol over its stdin/stdout.
/// Single request in flight; not thread-safe.
class ExternalSession {
 public:
  /// Starts the child and exchanges hello frames. Throws SpawnFailure,
  /// HelloMismatch or ExternalProtocolError.
  explicit ExternalSession(const ExecutorSpec& spec);
  ~ExternalSession();
  ExternalSession(const ExternalSession&) = delete;
  ExternalSession& operator=(const ExternalSession&) = delete;

  const HelloInfo& hello() const noexcept { return hello_; }
  pid_t pid() const noexcept { return pid_; }
  bool broken() const noexcept { return broken_; }

  /// One infer/result round trip. `batch_index` is attached to errors.
  Image infer(const Image& batch, std::size_t batch_index = 0);

  /// Closes the child's input and waits up to the timeout, then kills it.
  /// Returns the child's exit status as reported by waitpid.
  int shutdown();

 private:
  [[noreturn]] void fail(Errc code, const std::string& what, std::optional<std::size_t> index = std::nullopt);

  ExecutorSpec spec_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  bool broken_ = false;
  bool reaped_ = false;
  int status_ = 0;
  HelloInfo hello_;
};

/// Executor backed by a pool of ExternalSession children.
class ExternalExecutor final : public Executor {
 public:
  explicit ExternalExecutor(ExecutorSpec spec);
  ~ExternalExecutor() override;

  const ExecutorSpec& spec() const override { return spec_; }
  std::size_t max_batch() const override { return max_batch_; }
  Image run(const Image& batch, std::size_t batch_index = 0) override;

 private:
  std::unique_ptr<ExternalSession> acquire();
  void release(std::unique_ptr<ExternalSession> s);

  ExecutorSpec spec_;
  std::size_t max_batch_ = 1;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<ExternalSession>> idle_;
};

}  // namespace mmv
