#include "stylefool/remote.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "stylefool/error.hpp"

namespace stylefool {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  if (bytes.empty()) return out;
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw FormatError("base64 length is not a multiple of 4");
  if (text.empty()) return {};
  std::vector<std::uint8_t> out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw FormatError("invalid base64 payload");
  std::size_t padding = 0;
  if (text.back() == '=') ++padding;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

std::string encode_request(std::uint64_t id, const VideoTensor& video) {
  auto values = video.data();
  std::vector<std::uint8_t> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int k = 0; k < 4; ++k) bytes[i * 4 + k] = static_cast<std::uint8_t>(bits >> (8 * k));
  }
  nlohmann::ordered_json j;
  j["id"] = id;
  j["shape"] = {video.frames(), video.height(), video.width(), video.channels()};
  j["data"] = base64_encode(bytes);
  return j.dump();
}

WireRequest decode_request(std::string_view line) {
  const std::string raw(line);
  try {
    const auto j = nlohmann::json::parse(raw);
    WireRequest req;
    req.id = j.at("id").get<std::uint64_t>();
    const auto shape = j.at("shape").get<std::vector<long long>>();
    if (shape.size() != 4) throw ProtocolError("shape must have four entries", raw);
    for (long long d : shape) {
      if (d < 1 || d > (1 << 16)) throw ProtocolError("shape entry out of range", raw);
    }
    const auto bytes = base64_decode(j.at("data").get<std::string>());
    const std::size_t count = std::size_t(shape[0]) * shape[1] * shape[2] * shape[3];
    if (bytes.size() != count * 4) throw ProtocolError("payload length does not match shape", raw);
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) bits |= std::uint32_t(bytes[i * 4 + k]) << (8 * k);
      values[i] = std::bit_cast<float>(bits);
    }
    req.video = VideoTensor(static_cast<int>(shape[0]), static_cast<int>(shape[1]),
                            static_cast<int>(shape[2]), static_cast<int>(shape[3]),
                            std::move(values));
    return req;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed request (") + e.what() + ")", raw);
  } catch (const FormatError& e) {
    throw ProtocolError(e.what(), raw);
  } catch (const ValidationError& e) {
    throw ProtocolError(e.what(), raw);
  }
}

std::string encode_response(std::uint64_t id, const Prediction& pred) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["label"] = pred.label;
  j["confidence"] = pred.confidence;
  return j.dump();
}

Prediction decode_response(std::string_view line, std::uint64_t expected_id) {
  const std::string raw(line);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    throw ProtocolError("response is not JSON", raw);
  }
  if (!j.is_object()) throw ProtocolError("response is not an object", raw);
  if (j.contains("error")) throw ProtocolError("classifier reported an error", raw);
  try {
    const auto id = j.at("id").get<std::uint64_t>();
    if (id != expected_id) {
      throw ProtocolError("response id " + std::to_string(id) + " does not match request " +
                              std::to_string(expected_id),
                          raw);
    }
    Prediction p{j.at("label").get<int>(), j.at("confidence").get<double>()};
    if (p.label < 0) throw ProtocolError("negative label", raw);
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) {
      throw ProtocolError("confidence outside [0,1]", raw);
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed response (") + e.what() + ")", raw);
  }
}

namespace {

/// Line framing over a pair of file descriptors.
class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd, bool is_socket)
      : read_fd_(read_fd), write_fd_(write_fd), socket_(is_socket) {}

  ~FdChannel() override {
    if (read_fd_ >= 0) ::close(read_fd_);
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  }

  void write_line(const std::string& line) override {
    const std::string framed = line + "\n";
    std::size_t off = 0;
    while (off < framed.size()) {
      const ssize_t n = socket_ ? ::send(write_fd_, framed.data() + off, framed.size() - off,
                                         MSG_NOSIGNAL)
                                : ::write(write_fd_, framed.data() + off, framed.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw QueryError(std::string("classifier write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw QueryError("classifier did not answer within the timeout");
      pollfd pfd{read_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw QueryError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (ready == 0) continue;
      char chunk[65536];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw QueryError(std::string("classifier read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw QueryError("classifier closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  int read_fd_;
  int write_fd_;
  bool socket_;
  std::string buffer_;
};

class ProcessChannel final : public FdChannel {
 public:
  ProcessChannel(int read_fd, int write_fd, pid_t pid) : FdChannel(read_fd, write_fd, false), pid_(pid) {}
  ~ProcessChannel() override {
    ::close(write_fd_);
    write_fd_ = -1;
    ::close(read_fd_);
    read_fd_ = -1;
    // Give a well-behaved peer a moment to see EOF, then take down its process group.
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
      ::usleep(10000);
    }
    ::kill(-pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
  }

 private:
  pid_t pid_;
};

std::unique_ptr<LineChannel> connect_tcp(const std::string& hostport) {
  const auto colon = hostport.rfind(':');
  if (colon == std::string::npos) throw QueryError("tcp endpoint needs host:port, got '" + hostport + "'");
  const std::string host = hostport.substr(0, colon);
  const std::string port = hostport.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw QueryError("cannot resolve '" + hostport + "': " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw QueryError("cannot connect to '" + hostport + "'");
  return std::make_unique<FdChannel>(fd, fd, true);
}

std::unique_ptr<LineChannel> spawn(const std::string& command) {
  int to_child[2], from_child[2];
  if (::pipe(to_child) != 0) throw QueryError("pipe failed");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw QueryError("pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw QueryError("fork failed");
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  // A classifier process that exits early must surface as a QueryError, not a signal.
  ::signal(SIGPIPE, SIG_IGN);
  return std::make_unique<ProcessChannel>(from_child[0], to_child[1], pid);
}

}  // namespace

RemoteClassifier::RemoteClassifier(std::unique_ptr<LineChannel> channel,
                                   std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), timeout_(timeout) {
  if (!channel_) throw ValidationError("remote classifier needs a channel");
}

std::unique_ptr<RemoteClassifier> RemoteClassifier::connect(const std::string& endpoint,
                                                            std::chrono::milliseconds timeout) {
  if (endpoint.starts_with("tcp://")) {
    return std::make_unique<RemoteClassifier>(connect_tcp(endpoint.substr(6)), timeout);
  }
  if (endpoint.starts_with("exec:")) {
    return std::make_unique<RemoteClassifier>(spawn(endpoint.substr(5)), timeout);
  }
  throw ValidationError("unsupported classifier endpoint '" + endpoint + "'");
}

Prediction RemoteClassifier::classify(const VideoTensor& video) {
  std::lock_guard lock(mu_);
  const std::uint64_t id = next_id_++;
  channel_->write_line(encode_request(id, video));
  return decode_response(channel_->read_line(timeout_), id);
}

std::unique_ptr<BlackBox> open_classifier(const std::string& endpoint,
                                          std::chrono::milliseconds timeout) {
  if (endpoint.starts_with("toy:")) {
    return std::make_unique<ToyClassifier>(load_toy(endpoint.substr(4)));
  }
  return RemoteClassifier::connect(endpoint, timeout);
}

namespace {

/// Handles one request line; never throws for malformed input.
std::string answer(BlackBox& model, const std::string& line) {
  std::uint64_t id = 0;
  try {
    auto req = decode_request(line);
    id = req.id;
    return encode_response(id, model.classify(req.video));
  } catch (const Error& e) {
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.is_object() && j.contains("id") && j["id"].is_number_unsigned()) {
        id = j["id"].get<std::uint64_t>();
      }
    } catch (const nlohmann::json::exception&) {
    }
    nlohmann::ordered_json err;
    err["id"] = id;
    err["error"] = std::string(e.what()).substr(0, 200);
    return err.dump();
  }
}

void serve_fds(BlackBox& model, int in_fd, int out_fd, bool is_socket) {
  FdChannel channel(in_fd, out_fd, is_socket);
  try {
    while (true) {
      const std::string line = channel.read_line(std::chrono::hours(24 * 365));
      if (line.empty()) continue;
      channel.write_line(answer(model, line));
    }
  } catch (const QueryError&) {
    // Peer closed the stream.
  }
}

}  // namespace

void serve_stream(BlackBox& model, int in_fd, int out_fd) {
  // The channel owns the descriptors it is given, so hand it duplicates.
  serve_fds(model, ::dup(in_fd), ::dup(out_fd), false);
}

void serve_tcp(BlackBox& model, int port, int max_connections,
               const std::function<void(int)>& on_listening) {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw IoError("socket failed");
  const int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listener, 4) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listener);
    throw IoError("cannot listen on port " + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_listening) on_listening(ntohs(addr.sin_port));
  for (int served = 0; max_connections <= 0 || served < max_connections; ++served) {
    const int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      ::close(listener);
      throw IoError(std::string("accept failed: ") + std::strerror(errno));
    }
    serve_fds(model, fd, fd, true);
  }
  ::close(listener);
}

}  // namespace stylefool
