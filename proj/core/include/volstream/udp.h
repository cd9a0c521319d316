#ifndef VOLSTREAM_UDP_H_
#define VOLSTREAM_UDP_H_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>

#include "volstream/common.h"

namespace volstream {

inline constexpr size_t kMaxDatagram = 1500;

struct Endpoint {
  std::string host = "127.0.0.1";
  uint16_t port = 0;

  // "host:port"
  static Endpoint Parse(const std::string& text);
  std::string ToString() const;
  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

// Non-blocking-capable IPv4 datagram socket. Fire-and-forget: no
// retransmission, no ordering.
class UdpSocket {
 public:
  // Binds to |local|; port 0 picks an ephemeral port.
  explicit UdpSocket(const Endpoint& local = {});
  ~UdpSocket();
  UdpSocket(UdpSocket&& other) noexcept;
  UdpSocket& operator=(UdpSocket&& other) noexcept;
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;

  Endpoint local_endpoint() const;

  // Throws kConfig for datagrams above kMaxDatagram, kSocket on send failure.
  void SendTo(std::span<const uint8_t> bytes, const Endpoint& peer);

  // Waits up to |timeout_ms| (negative blocks). Returns nullopt on timeout.
  std::optional<Bytes> Receive(int timeout_ms, Endpoint* from = nullptr);

 private:
  int fd_ = -1;
};

// Drops each datagram with a fixed probability before it reaches the socket.
class ImpairedSender {
 public:
  ImpairedSender(UdpSocket& socket, double drop_probability, uint64_t seed);

  // Returns true when the datagram was handed to the socket.
  bool Send(std::span<const uint8_t> bytes, const Endpoint& peer);

 private:
  UdpSocket& socket_;
  double drop_;
  std::mt19937_64 rng_;
};

}  // namespace volstream

#endif  // VOLSTREAM_UDP_H_
