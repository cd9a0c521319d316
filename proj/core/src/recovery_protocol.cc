#include "volstream/recovery_protocol.h"

#include <fcntl.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <utility>

#include "net_util.h"

namespace volstream {
namespace wire {
namespace {

constexpr size_t kRequestFixed = 10;  // modality .. k_refs

size_t MaskBytes(int blocks) { return (static_cast<size_t>(blocks) + 7) / 8; }

}  // namespace

Bytes Frame(uint8_t type, std::span<const uint8_t> body) {
  Bytes out;
  out.reserve(5 + body.size());
  PutU32(out, static_cast<uint32_t>(body.size() + 1));
  out.push_back(type);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Bytes EncodeHandshake(const Handshake& h) {
  const uint8_t body[] = {h.version, h.modalities};
  return Frame(kHandshake, body);
}

Bytes PackMask(const CorruptionMask& mask) {
  Bytes bits(MaskBytes(static_cast<int>(mask.block_count())), 0);
  for (size_t i = 0; i < mask.block_count(); ++i) {
    if (mask.at_index(i)) bits[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
  }
  return bits;
}

CorruptionMask UnpackMask(std::span<const uint8_t> bits, int blocks_x, int blocks_y) {
  CorruptionMask mask(blocks_x, blocks_y);
  if (bits.size() < MaskBytes(blocks_x * blocks_y)) {
    throw Error(ErrorCode::kParse, "mask bitset too short");
  }
  for (size_t i = 0; i < mask.block_count(); ++i) {
    mask.set_index(i, (bits[i / 8] >> (i % 8)) & 1);
  }
  return mask;
}

Bytes EncodeRequest(const RecoveryRequest& req) {
  req.Validate();
  if (req.plane.width > 0xFFFF || req.plane.height > 0xFFFF || req.references.size() > 255) {
    throw Error(ErrorCode::kInvalidArgument, "request exceeds wire field limits");
  }
  Bytes body;
  body.reserve(kRequestFixed + req.plane.size() * (1 + req.references.size()) + 64);
  body.push_back(static_cast<uint8_t>(req.modality));
  PutU32(body, req.frame_id);
  PutU16(body, static_cast<uint16_t>(req.plane.width));
  PutU16(body, static_cast<uint16_t>(req.plane.height));
  body.push_back(static_cast<uint8_t>(req.references.size()));
  const Bytes bits = PackMask(req.mask);
  body.insert(body.end(), bits.begin(), bits.end());
  body.insert(body.end(), req.plane.data.begin(), req.plane.data.end());
  for (const auto& r : req.references) body.insert(body.end(), r.data.begin(), r.data.end());
  return Frame(kRequest, body);
}

Bytes EncodeResponse(uint32_t frame_id, const Plane& plane) {
  Bytes body;
  body.reserve(4 + plane.size());
  PutU32(body, frame_id);
  body.insert(body.end(), plane.data.begin(), plane.data.end());
  return Frame(kResponse, body);
}

Bytes EncodeError(uint32_t frame_id, std::string_view message) {
  Bytes body;
  PutU32(body, frame_id);
  body.insert(body.end(), message.begin(), message.end());
  return Frame(kError, body);
}

Handshake DecodeHandshake(std::span<const uint8_t> body) {
  if (body.size() != 2) throw Error(ErrorCode::kParse, "handshake body must be 2 bytes");
  return {body[0], body[1]};
}

RecoveryRequest DecodeRequest(std::span<const uint8_t> body) {
  if (body.size() < kRequestFixed) throw Error(ErrorCode::kParse, "request shorter than header");
  RecoveryRequest req;
  if (body[0] > 1) throw Error(ErrorCode::kParse, "bad modality byte");
  req.modality = static_cast<Modality>(body[0]);
  req.frame_id = GetU32(&body[1]);
  const int w = GetU16(&body[5]);
  const int h = GetU16(&body[7]);
  const int k = body[9];
  if (w == 0 || h == 0) throw Error(ErrorCode::kParse, "zero plane dimension");
  const auto grid = CorruptionMask::ForPlane(w, h, kRecoveryBlock);
  const size_t mask_bytes = MaskBytes(static_cast<int>(grid.block_count()));
  const size_t plane_bytes = static_cast<size_t>(w) * h * ChannelsFor(req.modality);
  const size_t expect = kRequestFixed + mask_bytes + plane_bytes * (1 + static_cast<size_t>(k));
  if (body.size() != expect) {
    throw Error(ErrorCode::kParse, "request length " + std::to_string(body.size()) +
                                       " != expected " + std::to_string(expect));
  }
  size_t off = kRequestFixed;
  req.mask = UnpackMask(body.subspan(off, mask_bytes), grid.blocks_x(), grid.blocks_y());
  off += mask_bytes;
  auto take_plane = [&] {
    Plane p(w, h, ChannelsFor(req.modality));
    std::copy_n(body.begin() + static_cast<std::ptrdiff_t>(off), plane_bytes, p.data.begin());
    off += plane_bytes;
    return p;
  };
  req.plane = take_plane();
  for (int i = 0; i < k; ++i) req.references.push_back(take_plane());
  return req;
}

Response DecodeResponse(std::span<const uint8_t> body) {
  if (body.size() < 4) throw Error(ErrorCode::kParse, "response shorter than header");
  return {GetU32(body.data()), Bytes(body.begin() + 4, body.end())};
}

ErrorReply DecodeError(std::span<const uint8_t> body) {
  if (body.size() < 4) throw Error(ErrorCode::kParse, "error reply shorter than header");
  return {GetU32(body.data()), std::string(body.begin() + 4, body.end())};
}

}  // namespace wire

namespace {

int64_t NowMs() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double ElapsedMs(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

[[noreturn]] void Fault(const std::string& what) { throw Error(ErrorCode::kBackendFault, what); }

}  // namespace

StreamConnection StreamConnection::Connect(const Endpoint& peer, int timeout_ms) {
  const sockaddr_in addr = net::ToSockaddr(peer);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) net::ThrowErrno(ErrorCode::kBackendFault, "socket");
  StreamConnection conn(fd);
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    if (errno != EINPROGRESS) net::ThrowErrno(ErrorCode::kBackendFault, "connect " + peer.ToString());
    pollfd pfd{fd, POLLOUT, 0};
    if (::poll(&pfd, 1, timeout_ms) <= 0) Fault("connect " + peer.ToString() + ": timed out");
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      errno = err;
      net::ThrowErrno(ErrorCode::kBackendFault, "connect " + peer.ToString());
    }
  }
  ::fcntl(fd, F_SETFL, flags);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return conn;
}

StreamConnection::~StreamConnection() { Close(); }

StreamConnection::StreamConnection(StreamConnection&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}

StreamConnection& StreamConnection::operator=(StreamConnection&& o) noexcept {
  if (this != &o) {
    Close();
    fd_ = std::exchange(o.fd_, -1);
  }
  return *this;
}

void StreamConnection::Close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void StreamConnection::SendAll(std::span<const uint8_t> bytes) {
  size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      net::ThrowErrno(ErrorCode::kBackendFault, "send");
    }
    sent += static_cast<size_t>(n);
  }
}

bool StreamConnection::ReadExact(uint8_t* dst, size_t n, int64_t deadline_ms) {
  size_t got = 0;
  while (got < n) {
    int wait = -1;
    if (deadline_ms >= 0) {
      const int64_t left = deadline_ms - NowMs();
      if (left <= 0) return false;
      wait = static_cast<int>(left);
    }
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, wait);
    if (ready < 0) {
      if (errno == EINTR) continue;
      net::ThrowErrno(ErrorCode::kBackendFault, "poll");
    }
    if (ready == 0) return false;
    const ssize_t r = ::recv(fd_, dst + got, n - got, 0);
    if (r == 0) Fault("connection closed by peer");
    if (r < 0) {
      if (errno == EINTR) continue;
      net::ThrowErrno(ErrorCode::kBackendFault, "recv");
    }
    got += static_cast<size_t>(r);
  }
  return true;
}

std::optional<wire::Message> StreamConnection::Read(int timeout_ms) {
  if (fd_ < 0) Fault("connection is closed");
  const int64_t deadline = timeout_ms < 0 ? -1 : NowMs() + timeout_ms;
  uint8_t len_buf[4];
  if (!ReadExact(len_buf, 4, deadline)) return std::nullopt;
  const uint32_t len = GetU32(len_buf);
  if (len == 0 || len > wire::kMaxMessage) Fault("bad message length " + std::to_string(len));
  Bytes buf(len);
  if (!ReadExact(buf.data(), len, deadline)) return std::nullopt;
  wire::Message m;
  m.type = buf[0];
  m.body.assign(buf.begin() + 1, buf.end());
  return m;
}

RemoteBackend::RemoteBackend(const Endpoint& endpoint, int connect_timeout_ms)
    : endpoint_(endpoint), connect_timeout_ms_(connect_timeout_ms) {
  for (Modality m : kModalities) Open(lanes_[static_cast<int>(m)], m);
}

void RemoteBackend::Open(Lane& lane, Modality m) {
  lane.conn = StreamConnection::Connect(endpoint_, connect_timeout_ms_);
  const uint8_t bit = m == Modality::kRgb ? wire::kRgbBit : wire::kDepthBit;
  lane.conn.SendAll(wire::EncodeHandshake({wire::kVersion, bit}));
  const auto reply = lane.conn.Read(connect_timeout_ms_);
  if (!reply) Fault("handshake with " + endpoint_.ToString() + " timed out");
  if (reply->type != wire::kHandshake) Fault("handshake rejected by " + endpoint_.ToString());
  const auto hs = wire::DecodeHandshake(reply->body);
  if (hs.version != wire::kVersion) Fault("backend speaks protocol version " + std::to_string(hs.version));
  if ((hs.modalities & bit) == 0) {
    Fault("backend does not serve " + std::string(ModalityName(m)));
  }
}

RecoveryResponse RemoteBackend::Recover(const RecoveryRequest& req, double budget_ms) {
  const auto start = std::chrono::steady_clock::now();
  req.Validate();
  if (!req.mask.Any()) return {req.plane, ElapsedMs(start), RecoveryStatus::kOk};
  auto fallback = [&](RecoveryStatus status) {
    RecoveryResponse r = RecoverBaseline(req);
    if (r.status == RecoveryStatus::kOk) r.status = status;
    r.latency_ms = ElapsedMs(start);
    return r;
  };
  Lane& lane = lanes_[static_cast<int>(req.modality)];
  std::lock_guard lock(lane.mu);
  try {
    if (!lane.conn.open()) Open(lane, req.modality);
    lane.conn.SendAll(wire::EncodeRequest(req));
    int wait = -1;
    if (budget_ms > 0) wait = std::max(1, static_cast<int>(std::ceil(budget_ms - ElapsedMs(start))));
    const auto msg = lane.conn.Read(wait);
    if (!msg) {
      // A late reply would desynchronise the stream; start over next time.
      lane.conn.Close();
      ++timeouts_;
      return fallback(RecoveryStatus::kTimeoutFallback);
    }
    if (msg->type == wire::kError) Fault("backend error: " + wire::DecodeError(msg->body).message);
    if (msg->type != wire::kResponse) Fault("unexpected message type " + std::to_string(msg->type));
    auto resp = wire::DecodeResponse(msg->body);
    if (resp.frame_id != req.frame_id) Fault("response for the wrong frame");
    if (resp.plane.size() != req.plane.size()) Fault("response plane has the wrong size");
    Plane candidate = req.plane;
    candidate.data = std::move(resp.plane);
    return {MergeMasked(req.plane, candidate, req.mask), ElapsedMs(start), RecoveryStatus::kOk};
  } catch (const Error&) {
    lane.conn.Close();
    ++faults_;
    return fallback(RecoveryStatus::kFaultFallback);
  }
}

RecoveryServer::Handler RecoveryServer::EchoHandler() {
  return [](const RecoveryRequest& req) { return req.plane; };
}

RecoveryServer::Handler RecoveryServer::BaselineHandler() {
  return [](const RecoveryRequest& req) { return RecoverBaseline(req).plane; };
}

RecoveryServer::RecoveryServer(const Endpoint& listen, Handler handler, Options opts)
    : handler_(std::move(handler)), opts_(opts) {
  const sockaddr_in addr = net::ToSockaddr(listen);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) net::ThrowErrno(ErrorCode::kSocket, "socket");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 8) != 0) {
    const int saved = errno;
    ::close(listen_fd_);
    errno = saved;
    net::ThrowErrno(ErrorCode::kSocket, "listen " + listen.ToString());
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  bound_ = net::FromSockaddr(bound);
  acceptor_ = std::thread([this] { AcceptLoop(); });
}

RecoveryServer::~RecoveryServer() { Stop(); }

void RecoveryServer::Stop() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
  ::close(listen_fd_);
}

void RecoveryServer::Wait() {
  while (!stopping_) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

void RecoveryServer::AcceptLoop() {
  while (!stopping_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(mu_);
    client_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { Serve(fd); });
  }
}

void RecoveryServer::Serve(int fd) {
  StreamConnection conn(fd);
  while (!stopping_) {
    std::optional<wire::Message> msg;
    try {
      msg = conn.Read(-1);
    } catch (const Error&) {
      break;
    }
    if (!msg) break;
    Bytes reply;
    uint32_t frame_id = msg->body.size() >= 5 ? GetU32(&msg->body[1]) : 0;
    try {
      switch (msg->type) {
        case wire::kHandshake: {
          const auto hs = wire::DecodeHandshake(msg->body);
          reply = hs.version == wire::kVersion
                      ? wire::EncodeHandshake({wire::kVersion, opts_.modalities})
                      : wire::EncodeError(0, "unsupported protocol version");
          break;
        }
        case wire::kRequest: {
          const RecoveryRequest req = wire::DecodeRequest(msg->body);
          const uint8_t bit = req.modality == Modality::kRgb ? wire::kRgbBit : wire::kDepthBit;
          if ((opts_.modalities & bit) == 0) {
            reply = wire::EncodeError(frame_id, "modality not served");
            break;
          }
          const Plane out = handler_(req);
          if (!out.SameShape(req.plane)) {
            reply = wire::EncodeError(frame_id, "handler changed the plane shape");
            break;
          }
          Plane merged = MergeMasked(req.plane, out, req.mask);
          if (opts_.truncate_responses) merged.data.resize(merged.data.size() / 2);
          reply = wire::EncodeResponse(req.frame_id, merged);
          break;
        }
        default:
          reply = wire::EncodeError(0, "unknown message type " + std::to_string(msg->type));
      }
    } catch (const Error& e) {
      reply = wire::EncodeError(frame_id, e.what());
    }
    if (opts_.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(opts_.delay_ms));
    try {
      conn.SendAll(reply);
    } catch (const Error&) {
      break;
    }
  }
  std::lock_guard lock(mu_);
  std::erase(client_fds_, fd);
}

namespace {

Plane RandomPlane(int w, int h, int c, std::mt19937_64& rng) {
  Plane p(w, h, c);
  for (auto& v : p.data) v = static_cast<uint8_t>(rng() & 0xFF);
  return p;
}

RecoveryRequest SampleRequest(Modality m, uint32_t frame_id, double mask_fraction,
                              std::mt19937_64& rng) {
  constexpr int kW = 56, kH = 40;  // partial edge blocks on purpose
  RecoveryRequest req;
  req.frame_id = frame_id;
  req.modality = m;
  req.plane = RandomPlane(kW, kH, ChannelsFor(m), rng);
  req.mask = CorruptionMask::ForPlane(kW, kH, kRecoveryBlock);
  for (size_t i = 0; i < req.mask.block_count(); ++i) {
    req.mask.set_index(i, static_cast<double>(rng() >> 11) * 0x1.0p-53 < mask_fraction);
  }
  for (int k = 0; k < 2; ++k) req.references.push_back(RandomPlane(kW, kH, ChannelsFor(m), rng));
  return req;
}

wire::Message Expect(StreamConnection& conn, int timeout_ms) {
  auto m = conn.Read(timeout_ms);
  if (!m) throw Error(ErrorCode::kBackendFault, "no reply within " + std::to_string(timeout_ms) + " ms");
  return *m;
}

Plane ExpectResponse(StreamConnection& conn, const RecoveryRequest& req, int timeout_ms) {
  const wire::Message m = Expect(conn, timeout_ms);
  if (m.type != wire::kResponse) {
    throw Error(ErrorCode::kBackendFault, "reply type " + std::to_string(m.type) + ", wanted response");
  }
  auto r = wire::DecodeResponse(m.body);
  if (r.frame_id != req.frame_id) throw Error(ErrorCode::kBackendFault, "frame id not echoed");
  if (r.plane.size() != req.plane.size()) throw Error(ErrorCode::kBackendFault, "plane size differs");
  Plane p = req.plane;
  p.data = std::move(r.plane);
  return p;
}

std::string UnmaskedDiff(const RecoveryRequest& req, const Plane& got) {
  for (int y = 0; y < got.height; ++y) {
    for (int x = 0; x < got.width; ++x) {
      if (req.mask.at(x / kRecoveryBlock, y / kRecoveryBlock)) continue;
      for (int c = 0; c < got.channels; ++c) {
        if (got.at(x, y, c) != req.plane.at(x, y, c)) {
          return "unmasked pixel (" + std::to_string(x) + "," + std::to_string(y) + ") changed";
        }
      }
    }
  }
  return {};
}

}  // namespace

std::vector<ConformanceCheck> RunBackendConformance(const Endpoint& endpoint, int timeout_ms) {
  std::vector<ConformanceCheck> out;
  std::mt19937_64 rng(20240601);
  uint8_t served = 0;
  auto check = [&](std::string name, auto&& body) {
    ConformanceCheck c{std::move(name), false, {}};
    try {
      StreamConnection conn = StreamConnection::Connect(endpoint, timeout_ms);
      c.detail = body(conn);
      c.passed = c.detail.empty();
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    out.push_back(std::move(c));
  };

  check("handshake", [&](StreamConnection& conn) -> std::string {
    conn.SendAll(wire::EncodeHandshake({}));
    const auto m = Expect(conn, timeout_ms);
    if (m.type != wire::kHandshake) return "reply type " + std::to_string(m.type);
    const auto hs = wire::DecodeHandshake(m.body);
    if (hs.version != wire::kVersion) return "version " + std::to_string(hs.version);
    served = hs.modalities & (wire::kRgbBit | wire::kDepthBit);
    return served ? "" : "no modality advertised";
  });
  check("rejects_unknown_version", [&](StreamConnection& conn) -> std::string {
    conn.SendAll(wire::EncodeHandshake({99, wire::kRgbBit}));
    return Expect(conn, timeout_ms).type == wire::kError ? "" : "version 99 accepted";
  });

  uint32_t frame_id = 100;
  for (Modality m : kModalities) {
    const uint8_t bit = m == Modality::kRgb ? wire::kRgbBit : wire::kDepthBit;
    if ((served & bit) == 0) continue;
    const std::string suffix(ModalityName(m));
    check("empty_mask_identity_" + suffix, [&](StreamConnection& conn) -> std::string {
      const auto req = SampleRequest(m, ++frame_id, 0.0, rng);
      conn.SendAll(wire::EncodeRequest(req));
      return ExpectResponse(conn, req, timeout_ms) == req.plane ? "" : "plane changed";
    });
    check("masked_merge_" + suffix, [&](StreamConnection& conn) -> std::string {
      for (int trial = 0; trial < 4; ++trial) {
        const auto req = SampleRequest(m, ++frame_id, 0.5, rng);
        conn.SendAll(wire::EncodeRequest(req));
        if (auto diff = UnmaskedDiff(req, ExpectResponse(conn, req, timeout_ms)); !diff.empty()) {
          return diff;
        }
      }
      return {};
    });
  }

  const Modality any = (served & wire::kRgbBit) ? Modality::kRgb : Modality::kDepth;
  check("malformed_request_then_recovers", [&](StreamConnection& conn) -> std::string {
    const auto good = SampleRequest(any, ++frame_id, 0.25, rng);
    Bytes bad = wire::EncodeRequest(good);
    bad.resize(bad.size() - 7);
    const uint32_t len = static_cast<uint32_t>(bad.size() - 4);
    for (int i = 0; i < 4; ++i) bad[i] = static_cast<uint8_t>(len >> (8 * i));
    conn.SendAll(bad);
    if (Expect(conn, timeout_ms).type != wire::kError) return "truncated request not rejected";
    conn.SendAll(wire::EncodeRequest(good));
    ExpectResponse(conn, good, timeout_ms);
    return {};
  });
  check("unknown_type_then_recovers", [&](StreamConnection& conn) -> std::string {
    conn.SendAll(wire::Frame(9, {}));
    if (Expect(conn, timeout_ms).type != wire::kError) return "unknown type not rejected";
    const auto good = SampleRequest(any, ++frame_id, 0.25, rng);
    conn.SendAll(wire::EncodeRequest(good));
    ExpectResponse(conn, good, timeout_ms);
    return {};
  });
  return out;
}

}  // namespace volstream
