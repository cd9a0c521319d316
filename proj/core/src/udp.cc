#include "volstream/udp.h"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <utility>

#include "net_util.h"

namespace volstream {
using net::FromSockaddr;
using net::ToSockaddr;

namespace {

[[noreturn]] void ThrowErrno(const std::string& what) { net::ThrowErrno(ErrorCode::kSocket, what); }

}  // namespace

Endpoint Endpoint::Parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw Error(ErrorCode::kConfig, "endpoint must be host:port, got '" + text + "'");
  }
  Endpoint ep;
  ep.host = colon == 0 ? "127.0.0.1" : text.substr(0, colon);
  try {
    const int port = std::stoi(text.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<uint16_t>(port);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfig, "bad port in endpoint '" + text + "'");
  }
  return ep;
}

std::string Endpoint::ToString() const { return host + ":" + std::to_string(port); }

UdpSocket::UdpSocket(const Endpoint& local) {
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) ThrowErrno("socket");
  const sockaddr_in addr = ToSockaddr(local);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    const int saved = errno;
    ::close(fd_);
    fd_ = -1;
    errno = saved;
    ThrowErrno("bind " + local.ToString());
  }
  int bufsize = 4 << 20;
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &bufsize, sizeof(bufsize));
}

UdpSocket::~UdpSocket() {
  if (fd_ >= 0) ::close(fd_);
}

UdpSocket::UdpSocket(UdpSocket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}

UdpSocket& UdpSocket::operator=(UdpSocket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

Endpoint UdpSocket::local_endpoint() const {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) ThrowErrno("getsockname");
  return FromSockaddr(addr);
}

void UdpSocket::SendTo(std::span<const uint8_t> bytes, const Endpoint& peer) {
  if (bytes.size() > kMaxDatagram) {
    throw Error(ErrorCode::kConfig, "datagram of " + std::to_string(bytes.size()) +
                                        " bytes exceeds the 1500-byte MTU guard");
  }
  const sockaddr_in addr = ToSockaddr(peer);
  const ssize_t n = ::sendto(fd_, bytes.data(), bytes.size(), 0,
                             reinterpret_cast<const sockaddr*>(&addr), sizeof(addr));
  if (n < 0) ThrowErrno("sendto " + peer.ToString());
}

std::optional<Bytes> UdpSocket::Receive(int timeout_ms, Endpoint* from) {
  pollfd pfd{fd_, POLLIN, 0};
  const int ready = ::poll(&pfd, 1, timeout_ms);
  if (ready < 0) {
    if (errno == EINTR) return std::nullopt;
    ThrowErrno("poll");
  }
  if (ready == 0) return std::nullopt;
  Bytes buf(65536);
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  const ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0,
                               reinterpret_cast<sockaddr*>(&addr), &len);
  if (n < 0) ThrowErrno("recvfrom");
  buf.resize(static_cast<size_t>(n));
  if (from) *from = FromSockaddr(addr);
  return buf;
}

ImpairedSender::ImpairedSender(UdpSocket& socket, double drop_probability, uint64_t seed)
    : socket_(socket), drop_(drop_probability), rng_(seed) {
  if (!(drop_ >= 0.0 && drop_ <= 1.0)) {
    throw Error(ErrorCode::kConfig, "drop probability must lie in [0,1]");
  }
}

bool ImpairedSender::Send(std::span<const uint8_t> bytes, const Endpoint& peer) {
  if (bytes.size() > kMaxDatagram) {
    throw Error(ErrorCode::kConfig, "datagram exceeds the 1500-byte MTU guard");
  }
  const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  if (u < drop_) return false;
  socket_.SendTo(bytes, peer);
  return true;
}

}  // namespace volstream
