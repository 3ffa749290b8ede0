#include "mmv/external.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

extern char** environ;

namespace mmv {

namespace {

void ignore_sigpipe_once() {
  static std::once_flag once;
  std::call_once(once, [] {
    struct sigaction sa {};
    sa.sa_handler = SIG_IGN;
    sigemptyset(&sa.sa_mask);
    ::sigaction(SIGPIPE, &sa, nullptr);
  });
}

void set_nonblocking(int fd) {
  const int flags = ::fcntl(fd, F_GETFL);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

std::string describe_command(const std::vector<std::string>& argv) {
  std::string s;
  for (const auto& a : argv) {
    if (!s.empty()) s.push_back(' ');
    s += a;
  }
  return s;
}

}  // namespace

ExternalSession::ExternalSession(const ExecutorSpec& spec)
    : spec_(spec), timeout_(std::chrono::milliseconds(static_cast<long long>(spec.timeout_s * 1000.0))) {
  spec_.validate();
  ignore_sigpipe_once();

  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw Error(Errc::SpawnFailure, std::string("pipe: ") + std::strerror(errno));
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw Error(Errc::SpawnFailure, std::string("pipe: ") + std::strerror(errno));
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

  std::vector<char*> argv;
  for (auto& a : spec_.command) argv.push_back(a.data());
  argv.push_back(nullptr);
  const int rc = ::posix_spawnp(&pid_, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    pid_ = -1;
    throw Error(Errc::SpawnFailure, "cannot start '" + describe_command(spec_.command) + "': " + std::strerror(rc));
  }
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  set_nonblocking(to_child_);
  set_nonblocking(from_child_);

  try {
    const Frame hello = read_frame(from_child_, timeout_);
    if (hello.header.type == "error")
      fail(Errc::ExternalProtocolError, "child reported error during handshake: " + hello.header.note.value_or(""));
    if (hello.header.type != "hello") fail(Errc::ExternalProtocolError, "expected hello, got " + hello.header.type);
    hello_.version = hello.header.v;
    hello_.max_batch = hello.header.max_batch.value_or(1);
    hello_.in_channels = hello.header.in_channels.value_or(0);
    hello_.out_channels = hello.header.out_channels.value_or(0);
    hello_.spatial_rank = static_cast<int>(hello.header.spatial_rank.value_or(0));

    std::string mismatch;
    if (hello_.version != kProtocolVersion)
      mismatch = "protocol version " + std::to_string(hello_.version) + ", expected " + std::to_string(kProtocolVersion);
    else if (hello.header.dtype != "f32")
      mismatch = "dtype " + hello.header.dtype;
    else if (hello_.in_channels != spec_.in_channels || hello_.out_channels != spec_.out_channels)
      mismatch = "channels " + std::to_string(hello_.in_channels) + "->" + std::to_string(hello_.out_channels) +
                 ", config says " + std::to_string(spec_.in_channels) + "->" + std::to_string(spec_.out_channels);
    else if (hello_.spatial_rank != spec_.spatial_rank)
      mismatch = "spatial rank " + std::to_string(hello_.spatial_rank) + ", config says " + std::to_string(spec_.spatial_rank);
    else if (hello_.max_batch < 1)
      mismatch = "max_batch 0";
    if (!mismatch.empty()) {
      Frame err;
      err.header.type = "error";
      err.header.note = "hello mismatch: " + mismatch;
      try {
        write_frame(to_child_, err, timeout_);
      } catch (const Error&) {
      }
      fail(Errc::HelloMismatch, mismatch);
    }

    Frame ack;
    ack.header.type = "hello";
    ack.header.max_batch = hello_.max_batch;
    ack.header.in_channels = spec_.in_channels;
    ack.header.out_channels = spec_.out_channels;
    ack.header.spatial_rank = std::uint64_t(spec_.spatial_rank);
    write_frame(to_child_, ack, timeout_);
  } catch (...) {
    shutdown();
    throw;
  }
}

ExternalSession::~ExternalSession() { shutdown(); }

void ExternalSession::fail(Errc code, const std::string& what, std::optional<std::size_t> index) {
  broken_ = true;
  throw Error(code, what, index);
}

Image ExternalSession::infer(const Image& batch, std::size_t batch_index) {
  if (broken_) fail(Errc::ExternalProtocolError, "session is no longer usable", batch_index);
  check_batch(spec_, batch);
  if (batch.shape()[0] > hello_.max_batch)
    throw Error(Errc::InvalidArgument, "batch of " + std::to_string(batch.shape()[0]) + " exceeds declared max_batch " +
                                           std::to_string(hello_.max_batch), batch_index);
  Frame req;
  req.header.type = "infer";
  req.header.shape.assign(batch.shape().begin(), batch.shape().end());
  req.payload = batch.buffer();

  Frame res;
  try {
    write_frame(to_child_, req, timeout_);
    res = read_frame(from_child_, timeout_);
  } catch (const Error& e) {
    fail(Errc::ExternalProtocolError, "batch " + std::to_string(batch_index) + ": " + e.detail(), batch_index);
  }
  if (res.header.type == "error")
    fail(Errc::ExternalProtocolError,
         "batch " + std::to_string(batch_index) + ": child reported: " + res.header.note.value_or("(no note)"), batch_index);
  if (res.header.type != "result")
    fail(Errc::ExternalProtocolError, "batch " + std::to_string(batch_index) + ": expected result, got " + res.header.type,
         batch_index);

  Shape want = batch.shape();
  want[1] = spec_.out_channels;
  const Shape got(res.header.shape.begin(), res.header.shape.end());
  if (got != want)
    throw Error(Errc::ShapeMismatch, "batch " + std::to_string(batch_index) + ": result shape " + shape_string(got) +
                                         ", expected " + shape_string(want), batch_index);
  return Image(batch.axes(), want, std::move(res.payload));
}

int ExternalSession::shutdown() {
  if (to_child_ >= 0) {
    ::close(to_child_);
    to_child_ = -1;
  }
  if (pid_ > 0 && !reaped_) {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    auto sleep = std::chrono::microseconds(200);
    for (;;) {
      const pid_t r = ::waitpid(pid_, &status_, WNOHANG);
      if (r == pid_ || (r < 0 && errno != EINTR)) break;
      if (std::chrono::steady_clock::now() >= deadline) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status_, 0);
        break;
      }
      std::this_thread::sleep_for(sleep);
      sleep = std::min(sleep * 2, std::chrono::microseconds(20000));
    }
    reaped_ = true;
  }
  if (from_child_ >= 0) {
    ::close(from_child_);
    from_child_ = -1;
  }
  broken_ = true;
  return status_;
}

ExternalExecutor::ExternalExecutor(ExecutorSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  for (std::size_t i = 0; i < spec_.pool_size; ++i) idle_.push_back(std::make_unique<ExternalSession>(spec_));
  max_batch_ = idle_.front()->hello().max_batch;
  for (const auto& s : idle_) max_batch_ = std::min(max_batch_, s->hello().max_batch);
}

ExternalExecutor::~ExternalExecutor() = default;

std::unique_ptr<ExternalSession> ExternalExecutor::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !idle_.empty(); });
  auto s = std::move(idle_.back());
  idle_.pop_back();
  return s;
}

void ExternalExecutor::release(std::unique_ptr<ExternalSession> s) {
  {
    std::lock_guard lock(mu_);
    idle_.push_back(std::move(s));
  }
  cv_.notify_one();
}

Image ExternalExecutor::run(const Image& batch, std::size_t batch_index) {
  auto session = acquire();
  struct Return {
    ExternalExecutor* self;
    std::unique_ptr<ExternalSession>* s;
    ~Return() { self->release(std::move(*s)); }
  } give_back{this, &session};

  if (session->broken()) session = std::make_unique<ExternalSession>(spec_);
  return session->infer(batch, batch_index);
}

}  // namespace mmv
