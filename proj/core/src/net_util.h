#ifndef VOLSTREAM_SRC_NET_UTIL_H_
#define VOLSTREAM_SRC_NET_UTIL_H_

#include <arpa/inet.h>
#include <netinet/in.h>

#include <cerrno>
#include <cstring>
#include <string>

#include "volstream/common.h"
#include "volstream/udp.h"

namespace volstream::net {

inline sockaddr_in ToSockaddr(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  const std::string host = ep.host == "localhost" ? "127.0.0.1" : ep.host;
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw Error(ErrorCode::kConfig, "not an IPv4 address: " + ep.host);
  }
  return addr;
}

inline Endpoint FromSockaddr(const sockaddr_in& addr) {
  char buf[INET_ADDRSTRLEN] = {};
  inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof(buf));
  return {buf, ntohs(addr.sin_port)};
}

[[noreturn]] inline void ThrowErrno(ErrorCode code, const std::string& what) {
  throw Error(code, what + ": " + std::strerror(errno));
}

}  // namespace volstream::net

#endif  // VOLSTREAM_SRC_NET_UTIL_H_
