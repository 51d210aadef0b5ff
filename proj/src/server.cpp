#include "framesearch/server.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <optional>

#include <nlohmann/json.hpp>

#include "framesearch/error.hpp"

namespace framesearch {
namespace {

constexpr int kPollMillis = 50;
constexpr std::size_t kMaxLine = 1 << 20;

using ordered_json = nlohmann::ordered_json;

std::string error_response(const std::string& message) {
  ordered_json doc;
  doc["ok"] = false;
  doc["error"] = message;
  return doc.dump();
}

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

// Pops one line from `buffer` if a newline is present.
std::optional<std::string> take_line(std::string& buffer) {
  const auto pos = buffer.find('\n');
  if (pos == std::string::npos) return std::nullopt;
  std::string line = buffer.substr(0, pos);
  buffer.erase(0, pos + 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

enum class ReadStatus { kData, kTimeout, kClosed };

ReadStatus read_some(int fd, std::string& buffer, int timeout_ms) {
  pollfd pfd{fd, POLLIN, 0};
  const int ready = ::poll(&pfd, 1, timeout_ms);
  if (ready == 0) return ReadStatus::kTimeout;
  if (ready < 0) return errno == EINTR ? ReadStatus::kTimeout : ReadStatus::kClosed;
  char chunk[4096];
  const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
  if (n < 0 && errno == EINTR) return ReadStatus::kTimeout;
  if (n <= 0) return ReadStatus::kClosed;
  buffer.append(chunk, static_cast<std::size_t>(n));
  return ReadStatus::kData;
}

struct AddrInfoDeleter {
  void operator()(addrinfo* p) const { ::freeaddrinfo(p); }
};

std::unique_ptr<addrinfo, AddrInfoDeleter> resolve(const std::string& host, std::uint16_t port,
                                                   bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* result = nullptr;
  const std::string service = std::to_string(port);
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints,
                               &result);
  if (rc != 0) {
    throw TransportError("cannot resolve \"" + host + "\": " + ::gai_strerror(rc));
  }
  return std::unique_ptr<addrinfo, AddrInfoDeleter>(result);
}

}  // namespace

namespace protocol {

std::string encode(const Request& request) {
  ordered_json doc;
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, MetaRequest>) {
          doc["op"] = "meta";
          doc["video"] = r.video;
        } else if constexpr (std::is_same_v<T, FrameRequest>) {
          doc["op"] = "frame";
          doc["video"] = r.video;
          doc["index"] = r.index;
        } else if constexpr (std::is_same_v<T, StatsRequest>) {
          doc["op"] = "stats";
        } else {
          doc["op"] = "bye";
        }
      },
      request);
  return doc.dump();
}

Request decode_request(const std::string& line) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw DataError("malformed request");
  }
  if (!doc.is_object() || !doc.contains("op") || !doc["op"].is_string()) {
    throw DataError("malformed request: missing \"op\"");
  }
  const auto op = doc["op"].get<std::string>();
  auto video = [&]() {
    if (!doc.contains("video") || !doc["video"].is_string()) {
      throw DataError("malformed request: missing \"video\"");
    }
    return doc["video"].get<std::string>();
  };
  if (op == "meta") return MetaRequest{video()};
  if (op == "frame") {
    auto id = video();
    if (!doc.contains("index") || !doc["index"].is_number_integer()) {
      throw DataError("malformed request: missing \"index\"");
    }
    if (doc["index"].get<std::int64_t>() < 0) throw DataError("index out of bounds");
    return FrameRequest{std::move(id), doc["index"].get<FrameIndex>()};
  }
  if (op == "stats") return StatsRequest{};
  if (op == "bye") return ByeRequest{};
  throw DataError("unknown op \"" + op + "\"");
}

}  // namespace protocol

ServerCatalog::ServerCatalog(std::span<const VideoRecord> records) {
  for (const auto& r : records) {
    if (!r.scores) throw DataError("record \"" + r.video_id + "\" has no scores");
    add(r.video_id, *r.scores);
  }
}

void ServerCatalog::add(std::string video_id, std::vector<double> scores) {
  if (!videos_.emplace(std::move(video_id), std::move(scores)).second) {
    throw DataError("duplicate video_id in catalog");
  }
}

const std::vector<double>* ServerCatalog::find(const std::string& video_id) const {
  auto it = videos_.find(video_id);
  return it == videos_.end() ? nullptr : &it->second;
}

std::pair<std::string, std::uint16_t> parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw InvalidArgument("address must be host:port");
  std::string host = address.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') {
    host = host.substr(1, host.size() - 2);
  }
  const std::string port_text = address.substr(colon + 1);
  try {
    std::size_t used = 0;
    const unsigned long port = std::stoul(port_text, &used);
    if (used != port_text.size() || port > 65535) throw std::out_of_range("port");
    return {host, static_cast<std::uint16_t>(port)};
  } catch (const std::logic_error&) {
    throw InvalidArgument("bad port in address \"" + address + "\"");
  }
}

struct FrameServer::Session {
  int fd = -1;
  std::thread worker;
  std::mutex counters_mutex;
  std::map<std::string, std::size_t> counters;
  std::atomic<bool> done{false};
};

FrameServer::FrameServer(ServerCatalog catalog, std::string bind_address)
    : catalog_(std::move(catalog)), bind_address_(std::move(bind_address)) {}

FrameServer::~FrameServer() { stop(); }

std::uint16_t FrameServer::start() {
  if (listen_fd_ >= 0) throw Error("server already started");
  const auto [host, port] = parse_address(bind_address_);
  auto info = resolve(host, port, true);
  std::string last_error = "no usable address";
  for (addrinfo* ai = info.get(); ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    const int yes = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      listen_fd_ = fd;
      break;
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  if (listen_fd_ < 0) throw Error("cannot bind " + bind_address_ + ": " + last_error);

  sockaddr_storage bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  if (bound.ss_family == AF_INET) {
    port_ = ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
  } else {
    port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port);
  }
  stopping_ = false;
  acceptor_ = std::thread([this] { accept_loop(); });
  return port_;
}

void FrameServer::stop() {
  if (listen_fd_ < 0) return;
  stopping_ = true;
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  std::lock_guard lock(sessions_mutex_);
  for (auto& s : sessions_) {
    if (s->worker.joinable()) s->worker.join();
  }
  sessions_.clear();
}

void FrameServer::accept_loop() {
  while (!stopping_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, kPollMillis) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int yes = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);

    std::lock_guard lock(sessions_mutex_);
    // Reap finished sessions so long-running servers do not accumulate threads.
    std::erase_if(sessions_, [](std::unique_ptr<Session>& s) {
      if (!s->done) return false;
      s->worker.join();
      return true;
    });
    auto session = std::make_unique<Session>();
    session->fd = fd;
    Session& ref = *session;
    session->worker = std::thread([this, &ref] { serve_session(ref); });
    sessions_.push_back(std::move(session));
  }
}

void FrameServer::serve_session(Session& session) {
  std::string buffer;
  bool open = true;
  while (open) {
    while (auto line = take_line(buffer)) {
      bool close_after = false;
      const std::string response = handle(session, *line, close_after) + "\n";
      if (!send_all(session.fd, response) || close_after) {
        open = false;
        break;
      }
    }
    if (!open || stopping_) break;
    if (buffer.size() > kMaxLine) {
      send_all(session.fd, error_response("request line too long") + "\n");
      break;
    }
    if (read_some(session.fd, buffer, kPollMillis) == ReadStatus::kClosed) break;
  }
  ::close(session.fd);
  session.done = true;
}

std::string FrameServer::handle(Session& session, const std::string& line, bool& close_after) {
  protocol::Request request;
  try {
    request = protocol::decode_request(line);
  } catch (const DataError& e) {
    return error_response(e.what());
  }
  ordered_json doc;
  doc["ok"] = true;
  if (const auto* meta = std::get_if<protocol::MetaRequest>(&request)) {
    const auto* scores = catalog_.find(meta->video);
    if (scores == nullptr) return error_response("no such video");
    doc["frames"] = scores->size();
  } else if (const auto* frame = std::get_if<protocol::FrameRequest>(&request)) {
    const auto* scores = catalog_.find(frame->video);
    if (scores == nullptr) return error_response("no such video");
    if (frame->index >= scores->size()) return error_response("index out of bounds");
    doc["index"] = frame->index;
    doc["score"] = (*scores)[frame->index];
    std::lock_guard lock(session.counters_mutex);
    ++session.counters[frame->video];
    ++total_frames_;
  } else if (std::holds_alternative<protocol::StatsRequest>(request)) {
    std::lock_guard lock(session.counters_mutex);
    std::size_t total = 0;
    auto requests = ordered_json::object();
    for (const auto& [video, n] : session.counters) {
      requests[video] = n;
      total += n;
    }
    doc["requests"] = std::move(requests);
    doc["total"] = total;
  } else {
    close_after = true;
  }
  return doc.dump();
}

RemoteFrameSource::RemoteFrameSource(const std::string& address, std::string video_id)
    : video_id_(std::move(video_id)) {
  const auto [host, port] = parse_address(address);
  auto info = resolve(host.empty() ? "127.0.0.1" : host, port, false);
  for (addrinfo* ai = info.get(); ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  if (fd_ < 0) throw TransportError("cannot connect to " + address);
  const int yes = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);

  const auto response = nlohmann::json::parse(round_trip(protocol::encode(
      protocol::MetaRequest{video_id_})));
  if (!response.value("ok", false)) {
    const auto message = response.value("error", std::string("meta request failed"));
    close();
    throw DataError(message + ": \"" + video_id_ + "\"");
  }
  frames_ = response.at("frames").get<std::size_t>();
}

RemoteFrameSource::~RemoteFrameSource() {
  try {
    close();
  } catch (...) {
  }
}

std::string RemoteFrameSource::round_trip(const std::string& line) {
  if (fd_ < 0) throw TransportError("connection closed");
  if (!send_all(fd_, line + "\n")) {
    ::close(fd_);
    fd_ = -1;
    throw TransportError("connection lost while sending");
  }
  for (;;) {
    if (auto reply = take_line(buffer_)) return *reply;
    if (read_some(fd_, buffer_, -1) == ReadStatus::kClosed) {
      ::close(fd_);
      fd_ = -1;
      throw TransportError("connection lost while waiting for response");
    }
  }
}

double RemoteFrameSource::fetch(FrameIndex t) {
  nlohmann::json response;
  try {
    response = nlohmann::json::parse(round_trip(protocol::encode(
        protocol::FrameRequest{video_id_, t})));
  } catch (const nlohmann::json::parse_error&) {
    throw TransportError("malformed response from server");
  }
  if (!response.value("ok", false)) {
    const auto message = response.value("error", std::string("frame request failed"));
    if (message == "index out of bounds") {
      throw InvalidArgument("index out of bounds: frame " + std::to_string(t));
    }
    throw TransportError(message);
  }
  const double score = response.at("score").get<double>();
  ++requests_;
  return score;
}

std::map<std::string, std::size_t> RemoteFrameSource::server_counters() {
  const auto response =
      nlohmann::json::parse(round_trip(protocol::encode(protocol::StatsRequest{})));
  if (!response.value("ok", false)) throw TransportError("stats request failed");
  return response.at("requests").get<std::map<std::string, std::size_t>>();
}

void RemoteFrameSource::close() {
  if (fd_ < 0) return;
  send_all(fd_, protocol::encode(protocol::ByeRequest{}) + "\n");
  ::shutdown(fd_, SHUT_RDWR);
  ::close(fd_);
  fd_ = -1;
}

}  // namespace framesearch
