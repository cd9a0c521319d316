#ifndef VOLSTREAM_RECOVERY_PROTOCOL_H_
#define VOLSTREAM_RECOVERY_PROTOCOL_H_

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "volstream/recovery.h"
#include "volstream/udp.h"

namespace volstream {

// Length-prefixed messages over a stream socket:
//   u32 total_len (bytes after this field) | u8 msg_type | body
// Handshake (0): u8 version | u8 modality bitmask (bit 0 rgb, bit 1 depth)
// Request   (1): u8 modality | u32 frame_id | u16 width | u16 height |
//                u8 k_refs | mask bitset | plane | k_refs reference planes
// Response  (2): u32 frame_id | plane
// Error     (3): u32 frame_id | UTF-8 message
// The mask bitset covers 16x16 blocks row-major, LSB first, ceil(blocks/8)
// bytes. Planes are row-major with 3 (rgb) or 1 (depth) channels.
namespace wire {

inline constexpr uint8_t kVersion = 1;
inline constexpr uint8_t kHandshake = 0;
inline constexpr uint8_t kRequest = 1;
inline constexpr uint8_t kResponse = 2;
inline constexpr uint8_t kError = 3;
inline constexpr uint8_t kRgbBit = 1;
inline constexpr uint8_t kDepthBit = 2;
inline constexpr uint32_t kMaxMessage = 64u << 20;

struct Message {
  uint8_t type = 0;
  Bytes body;
};

struct Handshake {
  uint8_t version = kVersion;
  uint8_t modalities = kRgbBit | kDepthBit;
};

struct Response {
  uint32_t frame_id = 0;
  Bytes plane;
};

struct ErrorReply {
  uint32_t frame_id = 0;
  std::string message;
};

Bytes Frame(uint8_t type, std::span<const uint8_t> body);
Bytes EncodeHandshake(const Handshake& h);
Bytes EncodeRequest(const RecoveryRequest& req);
Bytes EncodeResponse(uint32_t frame_id, const Plane& plane);
Bytes EncodeError(uint32_t frame_id, std::string_view message);

Bytes PackMask(const CorruptionMask& mask);
CorruptionMask UnpackMask(std::span<const uint8_t> bits, int blocks_x, int blocks_y);

// Body decoders; throw kParse on any size or field violation.
Handshake DecodeHandshake(std::span<const uint8_t> body);
RecoveryRequest DecodeRequest(std::span<const uint8_t> body);
Response DecodeResponse(std::span<const uint8_t> body);
ErrorReply DecodeError(std::span<const uint8_t> body);

}  // namespace wire

// Blocking TCP stream carrying framed messages.
class StreamConnection {
 public:
  static StreamConnection Connect(const Endpoint& peer, int timeout_ms);
  explicit StreamConnection(int fd) : fd_(fd) {}
  ~StreamConnection();
  StreamConnection(StreamConnection&& o) noexcept;
  StreamConnection& operator=(StreamConnection&& o) noexcept;
  StreamConnection(const StreamConnection&) = delete;
  StreamConnection& operator=(const StreamConnection&) = delete;

  bool open() const { return fd_ >= 0; }
  void Close();
  void SendAll(std::span<const uint8_t> bytes);
  // Waits up to |timeout_ms| (negative blocks) for one full message. Returns
  // nullopt on timeout; throws kBackendFault on EOF or oversize frames.
  std::optional<wire::Message> Read(int timeout_ms);

 private:
  bool ReadExact(uint8_t* dst, size_t n, int64_t deadline_ms);
  int fd_ = -1;
};

// Client for a recovery server. One connection per modality so the two
// modalities can be recovered concurrently. Timeouts and protocol faults
// fall back to the baseline; the output is always merged through the mask.
class RemoteBackend final : public RecoveryBackend {
 public:
  // Connects and handshakes both modalities; throws kBackendFault on failure.
  explicit RemoteBackend(const Endpoint& endpoint, int connect_timeout_ms = 2000);

  std::string_view name() const override { return "remote"; }
  RecoveryResponse Recover(const RecoveryRequest& req, double budget_ms) override;

  uint64_t timeouts() const { return timeouts_; }
  uint64_t faults() const { return faults_; }

 private:
  struct Lane {
    std::mutex mu;
    StreamConnection conn{-1};
  };

  void Open(Lane& lane, Modality m);

  Endpoint endpoint_;
  int connect_timeout_ms_;
  Lane lanes_[2];
  std::atomic<uint64_t> timeouts_{0};
  std::atomic<uint64_t> faults_{0};
};

// Reference server for the protocol. The handler's output is merged through
// the request mask before replying.
class RecoveryServer {
 public:
  using Handler = std::function<Plane(const RecoveryRequest&)>;

  struct Options {
    uint8_t modalities = wire::kRgbBit | wire::kDepthBit;
    int delay_ms = 0;               // injected before every response
    bool truncate_responses = false;  // fault injection for client tests
  };

  static Handler EchoHandler();
  static Handler BaselineHandler();

  RecoveryServer(const Endpoint& listen, Handler handler, Options opts);
  RecoveryServer(const Endpoint& listen, Handler handler)
      : RecoveryServer(listen, std::move(handler), Options{}) {}
  ~RecoveryServer();
  RecoveryServer(const RecoveryServer&) = delete;
  RecoveryServer& operator=(const RecoveryServer&) = delete;

  Endpoint endpoint() const { return bound_; }
  void Stop();
  // Blocks until Stop() is called from another thread.
  void Wait();

 private:
  void AcceptLoop();
  void Serve(int fd);

  Handler handler_;
  Options opts_;
  int listen_fd_ = -1;
  Endpoint bound_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> client_fds_;
};

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Exercises a server at |endpoint|: handshake, byte-exact pass-through of an
// empty mask, masked-merge locality for both modalities, frame id echo, and
// recovery from malformed or unknown messages on a live connection.
std::vector<ConformanceCheck> RunBackendConformance(const Endpoint& endpoint,
                                                    int timeout_ms = 2000);

}  // namespace volstream

#endif  // VOLSTREAM_RECOVERY_PROTOCOL_H_
