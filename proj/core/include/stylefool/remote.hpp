#pragma once

#include <chrono>
#include <functional>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stylefool/classifier.hpp"

namespace stylefool {

// Newline-delimited JSON wire protocol.
//   request:  {"id": uint64, "shape": [T,H,W,C], "data": base64 of f32 LE payload}
//   response: {"id": uint64, "label": int, "confidence": float}

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws FormatError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string encode_request(std::uint64_t id, const VideoTensor& video);
struct WireRequest {
  std::uint64_t id = 0;
  VideoTensor video;
};
/// Throws ProtocolError carrying the raw line.
WireRequest decode_request(std::string_view line);

std::string encode_response(std::uint64_t id, const Prediction& pred);
/// Throws ProtocolError on malformed JSON, missing fields or an id other than `expected_id`.
Prediction decode_response(std::string_view line, std::uint64_t expected_id);

inline constexpr std::chrono::milliseconds kDefaultRemoteTimeout{30'000};

/// Byte stream carrying protocol lines (socket or child-process pipes).
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  /// Throws QueryError on transport failure or timeout.
  virtual void write_line(const std::string& line) = 0;
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

/// Client side of the wire protocol. One request in flight at a time.
class RemoteClassifier final : public BlackBox {
 public:
  RemoteClassifier(std::unique_ptr<LineChannel> channel,
                   std::chrono::milliseconds timeout = kDefaultRemoteTimeout);

  /// "tcp://host:port" or "exec:<shell command>". Connection failure → QueryError.
  static std::unique_ptr<RemoteClassifier> connect(
      const std::string& endpoint, std::chrono::milliseconds timeout = kDefaultRemoteTimeout);

  Prediction classify(const VideoTensor& video) override;

 private:
  std::mutex mu_;
  std::unique_ptr<LineChannel> channel_;
  std::chrono::milliseconds timeout_;
  std::uint64_t next_id_ = 1;
};

/// Opens "toy:<path to TCW1>", "tcp://host:port" or "exec:<command>".
std::unique_ptr<BlackBox> open_classifier(const std::string& endpoint,
                                          std::chrono::milliseconds timeout = kDefaultRemoteTimeout);

/// Answers protocol lines from `in_fd` on `out_fd` until end of input. Malformed
/// requests get {"id": <id or 0>, "error": "..."}.
void serve_stream(BlackBox& model, int in_fd, int out_fd);

/// Listens on 127.0.0.1:`port` (0 picks a free port) and serves connections one
/// at a time. `on_listening` receives the bound port. Stops after
/// `max_connections` connections when that is positive.
void serve_tcp(BlackBox& model, int port, int max_connections = 0,
               const std::function<void(int)>& on_listening = {});

}  // namespace stylefool
