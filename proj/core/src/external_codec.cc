#include "volstream/external_codec.h"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace volstream {
namespace {

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> b) : b_(b) {}

  uint8_t U8() { return Take(1)[0]; }
  uint16_t U16() { return GetU16(Take(2).data()); }
  uint32_t U32() { return GetU32(Take(4).data()); }
  std::span<const uint8_t> Take(size_t n) {
    if (b_.size() - off_ < n) throw Error(ErrorCode::kParse, "codec message truncated");
    auto s = b_.subspan(off_, n);
    off_ += n;
    return s;
  }
  Plane TakePlane(int w, int h, int c) {
    Plane p(w, h, c);
    const auto s = Take(p.size());
    std::copy(s.begin(), s.end(), p.data.begin());
    return p;
  }
  bool done() const { return off_ == b_.size(); }

 private:
  std::span<const uint8_t> b_;
  size_t off_ = 0;
};

void Append(Bytes& out, std::span<const uint8_t> s) { out.insert(out.end(), s.begin(), s.end()); }

void PutGeometry(Bytes& out, FrameKind kind, const Plane& p, const Plane* ref) {
  if (p.width > 0xFFFF || p.height > 0xFFFF) {
    throw Error(ErrorCode::kInvalidArgument, "plane too large for the codec protocol");
  }
  out.push_back(static_cast<uint8_t>(kind));
  out.push_back(static_cast<uint8_t>(p.channels));
  PutU16(out, static_cast<uint16_t>(p.width));
  PutU16(out, static_cast<uint16_t>(p.height));
  out.push_back(ref != nullptr ? 1 : 0);
}

void WriteAll(int fd, const Bytes& bytes) {
  size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, std::string("codec pipe write: ") + std::strerror(errno));
    }
    done += static_cast<size_t>(n);
  }
}

// Returns false on clean EOF before the first byte.
bool ReadExact(int fd, uint8_t* dst, size_t n) {
  size_t got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, dst + got, n - got);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kIo, std::string("codec pipe read: ") + std::strerror(errno));
    }
    if (r == 0) {
      if (got == 0) return false;
      throw Error(ErrorCode::kIo, "codec pipe closed mid-message");
    }
    got += static_cast<size_t>(r);
  }
  return true;
}

std::optional<Bytes> ReadMessage(int fd) {
  uint8_t len_buf[4];
  if (!ReadExact(fd, len_buf, 4)) return std::nullopt;
  Bytes body(GetU32(len_buf));
  if (!body.empty() && !ReadExact(fd, body.data(), body.size())) {
    throw Error(ErrorCode::kIo, "codec pipe closed mid-message");
  }
  return body;
}

void WriteMessage(int fd, const Bytes& body) {
  Bytes framed;
  framed.reserve(body.size() + 4);
  PutU32(framed, static_cast<uint32_t>(body.size()));
  Append(framed, body);
  WriteAll(fd, framed);
}

Bytes HandleRequest(std::span<const uint8_t> body, PlaneCodec& codec) {
  Reader in(body);
  const uint8_t op = in.U8();
  const auto kind = static_cast<FrameKind>(in.U8());
  const int channels = in.U8();
  const int w = in.U16();
  const int h = in.U16();
  const bool has_ref = in.U8() != 0;
  if (kind != FrameKind::kI && kind != FrameKind::kP) throw Error(ErrorCode::kParse, "bad frame kind");
  Bytes out{0};
  if (op == codec_wire::kEncode) {
    const Plane plane = in.TakePlane(w, h, channels);
    std::optional<Plane> ref;
    if (has_ref) ref = in.TakePlane(w, h, channels);
    if (!in.done()) throw Error(ErrorCode::kParse, "trailing bytes in encode request");
    const EncodeResult r = codec.Encode(kind, plane, ref ? &*ref : nullptr);
    PutU32(out, static_cast<uint32_t>(r.frame.header.size()));
    Append(out, r.frame.header);
    PutU32(out, static_cast<uint32_t>(r.frame.payload.size()));
    Append(out, r.frame.payload);
    Append(out, r.reconstruction.data);
    return out;
  }
  if (op != codec_wire::kDecode) throw Error(ErrorCode::kParse, "unknown codec op");
  EncodedFrame enc;
  enc.kind = kind;
  const uint32_t header_len = in.U32();
  const uint32_t payload_len = in.U32();
  const auto header = in.Take(header_len);
  const auto payload = in.Take(payload_len);
  enc.header.assign(header.begin(), header.end());
  enc.payload.assign(payload.begin(), payload.end());
  enc.encoded_len = header_len + payload_len;
  std::vector<ByteRange> ranges(in.U16());
  for (auto& r : ranges) {
    r.begin = in.U32();
    r.end = in.U32();
  }
  std::optional<Plane> ref;
  if (has_ref) ref = in.TakePlane(w, h, channels);
  if (!in.done()) throw Error(ErrorCode::kParse, "trailing bytes in decode request");
  const DecodeResult r = codec.Decode(enc, ref ? &*ref : nullptr, ranges);
  Append(out, r.plane.data);
  PutU16(out, static_cast<uint16_t>(r.mask.blocks_x()));
  PutU16(out, static_cast<uint16_t>(r.mask.blocks_y()));
  for (size_t i = 0; i < r.mask.block_count(); ++i) out.push_back(r.mask.at_index(i) ? 1 : 0);
  return out;
}

}  // namespace

ExternalCodec::ExternalCodec(const std::string& command, int width, int height, int channels)
    : geometry_(width, height, channels) {
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0) throw Error(ErrorCode::kIo, "pipe failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw Error(ErrorCode::kIo, "pipe failed");
  }
  pid_ = ::fork();
  if (pid_ < 0) throw Error(ErrorCode::kIo, "fork failed");
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

ExternalCodec::~ExternalCodec() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) ::waitpid(pid_, nullptr, 0);
}

Bytes ExternalCodec::Call(const Bytes& request) {
  std::lock_guard lock(mu_);
  WriteMessage(to_child_, request);
  auto reply = ReadMessage(from_child_);
  if (!reply || reply->empty()) throw Error(ErrorCode::kIo, "external codec exited");
  if ((*reply)[0] != 0) {
    throw Error(ErrorCode::kUndecodable,
                "external codec: " + std::string(reply->begin() + 1, reply->end()));
  }
  reply->erase(reply->begin());
  return std::move(*reply);
}

EncodeResult ExternalCodec::Encode(FrameKind kind, const Plane& plane, const Plane* reference) {
  Bytes req{codec_wire::kEncode};
  PutGeometry(req, kind, plane, reference);
  Append(req, plane.data);
  if (reference != nullptr) Append(req, reference->data);
  const Bytes reply = Call(req);
  Reader in(reply);
  EncodeResult r;
  r.frame.kind = kind;
  const auto header = in.Take(in.U32());
  r.frame.header.assign(header.begin(), header.end());
  const auto payload = in.Take(in.U32());
  r.frame.payload.assign(payload.begin(), payload.end());
  r.frame.encoded_len = static_cast<uint32_t>(r.frame.header.size() + r.frame.payload.size());
  r.reconstruction = in.TakePlane(plane.width, plane.height, plane.channels);
  const auto prefix = PeekHeaderLength(r.frame.header);
  if (!prefix || *prefix != r.frame.header.size()) {
    throw Error(ErrorCode::kUndecodable, "external codec header lacks its length prefix");
  }
  return r;
}

DecodeResult ExternalCodec::Decode(const EncodedFrame& enc, const Plane* reference,
                                   std::span<const ByteRange> zero_fill_ranges) {
  if (enc.kind == FrameKind::kP && reference == nullptr) {
    throw Error(ErrorCode::kPrecondition, "P-frame decode needs a reference");
  }
  Bytes req{codec_wire::kDecode};
  PutGeometry(req, enc.kind, geometry_, reference);
  PutU32(req, static_cast<uint32_t>(enc.header.size()));
  PutU32(req, static_cast<uint32_t>(enc.payload.size()));
  Append(req, enc.header);
  Append(req, enc.payload);
  PutU16(req, static_cast<uint16_t>(zero_fill_ranges.size()));
  for (const auto& r : zero_fill_ranges) {
    PutU32(req, static_cast<uint32_t>(r.begin));
    PutU32(req, static_cast<uint32_t>(r.end));
  }
  if (reference != nullptr) Append(req, reference->data);
  const Bytes reply = Call(req);
  Reader in(reply);
  DecodeResult r;
  r.plane = in.TakePlane(geometry_.width, geometry_.height, geometry_.channels);
  const int bx = in.U16(), by = in.U16();
  r.mask = CorruptionMask(bx, by);
  const auto flags = in.Take(static_cast<size_t>(bx) * by);
  for (size_t i = 0; i < flags.size(); ++i) r.mask.set_index(i, flags[i] != 0);
  return r;
}

size_t ServeCodec(int in_fd, int out_fd, PlaneCodec& codec) {
  size_t handled = 0;
  while (auto req = ReadMessage(in_fd)) {
    Bytes reply;
    try {
      reply = HandleRequest(*req, codec);
    } catch (const Error& e) {
      reply = {1};
      const std::string msg = e.what();
      reply.insert(reply.end(), msg.begin(), msg.end());
    }
    WriteMessage(out_fd, reply);
    ++handled;
  }
  return handled;
}

}  // namespace volstream
