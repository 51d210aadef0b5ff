#pragma once

// Networked frame store. One request and one response per line, each a JSON
// object:
//
//   {"op":"meta","video":id}             -> {"ok":true,"frames":n}
//   {"op":"frame","video":id,"index":t}  -> {"ok":true,"index":t,"score":s}
//   {"op":"stats"}                       -> {"ok":true,"requests":{id:n,...},"total":n}
//   {"op":"bye"}                         -> {"ok":true}, then the server closes
//
// Failures answer {"ok":false,"error":msg} and the session continues. Each
// connection is a session with its own per-video frame counters.

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "framesearch/data.hpp"
#include "framesearch/episode.hpp"

namespace framesearch {

namespace protocol {

struct MetaRequest {
  std::string video;
  bool operator==(const MetaRequest&) const = default;
};
struct FrameRequest {
  std::string video;
  FrameIndex index = 0;
  bool operator==(const FrameRequest&) const = default;
};
struct StatsRequest {
  bool operator==(const StatsRequest&) const = default;
};
struct ByeRequest {
  bool operator==(const ByeRequest&) const = default;
};

using Request = std::variant<MetaRequest, FrameRequest, StatsRequest, ByeRequest>;

/// One line, no trailing newline.
std::string encode(const Request& request);
/// Throws DataError describing what is wrong with the line.
Request decode_request(const std::string& line);

}  // namespace protocol

/// Read-only score store. Labels are deliberately not part of it.
class ServerCatalog {
 public:
  ServerCatalog() = default;
  explicit ServerCatalog(std::span<const VideoRecord> records);

  void add(std::string video_id, std::vector<double> scores);
  const std::vector<double>* find(const std::string& video_id) const;
  std::size_t size() const { return videos_.size(); }

 private:
  std::map<std::string, std::vector<double>> videos_;
};

/// Splits "host:port"; an empty host means all interfaces.
std::pair<std::string, std::uint16_t> parse_address(const std::string& address);

class FrameServer {
 public:
  FrameServer(ServerCatalog catalog, std::string bind_address);
  ~FrameServer();

  FrameServer(const FrameServer&) = delete;
  FrameServer& operator=(const FrameServer&) = delete;

  /// Binds and starts accepting on a background thread. Throws Error on bind
  /// failure. Returns the bound port (useful when binding port 0).
  std::uint16_t start();

  /// Stops accepting, lets sessions finish the request in hand, joins.
  void stop();

  std::uint16_t port() const { return port_; }

  /// Frame responses sent across all sessions, ever.
  std::size_t total_frame_responses() const { return total_frames_.load(); }

 private:
  struct Session;

  void accept_loop();
  void serve_session(Session& session);
  std::string handle(Session& session, const std::string& line, bool& close_after);

  ServerCatalog catalog_;
  std::string bind_address_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> total_frames_{0};
  std::thread acceptor_;
  std::mutex sessions_mutex_;
  std::vector<std::unique_ptr<Session>> sessions_;
};

/// FrameSource backed by a FrameServer session. Construction issues the meta
/// request; every fetch issues exactly one frame request.
class RemoteFrameSource final : public FrameSource {
 public:
  RemoteFrameSource(const std::string& address, std::string video_id);
  ~RemoteFrameSource() override;

  RemoteFrameSource(const RemoteFrameSource&) = delete;
  RemoteFrameSource& operator=(const RemoteFrameSource&) = delete;

  std::size_t frame_count() const override { return frames_; }
  double fetch(FrameIndex t) override;
  std::size_t requests() const override { return requests_; }

  /// Server-side counters for this session.
  std::map<std::string, std::size_t> server_counters();

  /// Sends "bye" and closes. Further requests throw TransportError.
  void close();

 private:
  std::string round_trip(const std::string& line);

  int fd_ = -1;
  std::string video_id_;
  std::string buffer_;
  std::size_t frames_ = 0;
  std::size_t requests_ = 0;
};

}  // namespace framesearch
