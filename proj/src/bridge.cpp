#include "compc/bridge.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>

#include "compc/error.hpp"

namespace compc {

namespace wire {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

std::uint16_t get_u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

float get_f32(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

std::size_t image_floats(int width, int height) {
  return 3 * static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

void put_image(std::vector<std::uint8_t>& out, const std::vector<double>& img) {
  for (double v : img) put_f32(out, v);
}

std::vector<double> get_image(const std::uint8_t* p, std::size_t n) {
  std::vector<double> img(n);
  for (std::size_t k = 0; k < n; ++k) img[k] = get_f32(p + 4 * k);
  return img;
}

void require_dims(int width, int height) {
  require(width >= 0 && height >= 0 && width <= 0xffff && height <= 0xffff, "wire: image dimensions out of range");
}

}  // namespace

void put_header(std::vector<std::uint8_t>& out, const Header& h) {
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_u16(out, h.version);
  put_u16(out, h.height);
  put_u16(out, h.width);
  put_u16(out, h.flags);
  out.insert(out.end(), 4, 0);
}

Header parse_header(std::span<const std::uint8_t> payload) {
  if (payload.size() < kHeaderSize) throw GuidanceContractError("wire: frame shorter than header");
  if (std::memcmp(payload.data(), kMagic.data(), 4) != 0) throw GuidanceContractError("wire: bad magic");
  Header h;
  h.version = get_u16(payload.data() + 4);
  h.height = get_u16(payload.data() + 6);
  h.width = get_u16(payload.data() + 8);
  h.flags = get_u16(payload.data() + 10);
  if (h.version != kVersion) throw GuidanceContractError("wire: unsupported version " + std::to_string(h.version));
  return h;
}

std::vector<std::uint8_t> encode_request(const GuidanceRequest& request) {
  request.validate();
  require_dims(request.width, request.height);
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + 16 + 8 * image_floats(request.width, request.height));
  put_header(out, {kVersion, static_cast<std::uint16_t>(request.height), static_cast<std::uint16_t>(request.width), 0});
  put_f32(out, request.relative_pose.d_elevation_deg);
  put_f32(out, request.relative_pose.d_azimuth_deg);
  put_f32(out, request.relative_pose.d_radius);
  put_f32(out, request.step_fraction);
  put_image(out, request.reference_image);
  put_image(out, request.current_image);
  return out;
}

GuidanceRequest decode_request(std::span<const std::uint8_t> payload) {
  const Header h = parse_header(payload);
  if (h.flags != 0) throw GuidanceContractError("wire: request carries flags");
  const std::size_t n = image_floats(h.width, h.height);
  if (payload.size() != kHeaderSize + 16 + 8 * n) throw GuidanceContractError("wire: request length mismatch");
  const std::uint8_t* p = payload.data() + kHeaderSize;
  GuidanceRequest r;
  r.width = h.width;
  r.height = h.height;
  r.relative_pose = {get_f32(p), get_f32(p + 4), get_f32(p + 8)};
  r.step_fraction = get_f32(p + 12);
  r.reference_image = get_image(p + 16, n);
  r.current_image = get_image(p + 16 + 4 * n, n);
  return r;
}

std::vector<std::uint8_t> encode_response(const GuidanceResponse& response, int width, int height) {
  require_dims(width, height);
  require(response.grad_image.size() == image_floats(width, height), "wire: response image size mismatch");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + 4 + 4 * response.grad_image.size());
  put_header(out, {kVersion, static_cast<std::uint16_t>(height), static_cast<std::uint16_t>(width), 0});
  put_f32(out, response.weight);
  put_image(out, response.grad_image);
  return out;
}

GuidanceResponse decode_response(std::span<const std::uint8_t> payload, int width, int height) {
  const Header h = parse_header(payload);
  if (h.flags & kFlagError) throw TransportError("guidance server error: " + decode_error(payload));
  if (h.width != width || h.height != height) throw GuidanceContractError("wire: response dimensions differ");
  const std::size_t n = image_floats(width, height);
  if (payload.size() != kHeaderSize + 4 + 4 * n) throw GuidanceContractError("wire: response length mismatch");
  GuidanceResponse r;
  r.weight = get_f32(payload.data() + kHeaderSize);
  r.grad_image = get_image(payload.data() + kHeaderSize + 4, n);
  return r;
}

std::vector<std::uint8_t> encode_error(const std::string& message) {
  std::vector<std::uint8_t> out;
  put_header(out, {kVersion, 0, 0, kFlagError});
  out.insert(out.end(), message.begin(), message.end());
  return out;
}

std::string decode_error(std::span<const std::uint8_t> payload) {
  if (payload.size() < kHeaderSize) return {};
  return std::string(payload.begin() + kHeaderSize, payload.end());
}

std::vector<std::uint8_t> encode_ping() {
  std::vector<std::uint8_t> out;
  put_header(out, {kVersion, 0, 0, kFlagPing});
  return out;
}

}  // namespace wire

BridgeAddress BridgeAddress::parse(const std::string& text) {
  BridgeAddress a;
  const auto colon = text.rfind(':');
  const std::string host = colon == std::string::npos ? text : text.substr(0, colon);
  if (!host.empty()) a.host = host;
  if (colon != std::string::npos) {
    const std::string port = text.substr(colon + 1);
    char* end = nullptr;
    const long v = std::strtol(port.c_str(), &end, 10);
    require(!port.empty() && *end == '\0' && v > 0 && v <= 65535, "bridge address: bad port in '" + text + "'");
    a.port = static_cast<std::uint16_t>(v);
  }
  return a;
}

BridgeAddress BridgeAddress::from_env() {
  const char* env = std::getenv("COMPC_BRIDGE_ADDR");
  return env && *env ? parse(env) : BridgeAddress{};
}

std::string BridgeAddress::to_string() const { return host + ":" + std::to_string(port); }

FrameSocket::FrameSocket(FrameSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

FrameSocket& FrameSocket::operator=(FrameSocket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

FrameSocket::~FrameSocket() { close(); }

void FrameSocket::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

FrameSocket FrameSocket::connect(const BridgeAddress& address, int timeout_ms) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(address.port);
  if (getaddrinfo(address.host.c_str(), port.c_str(), &hints, &res) != 0 || !res)
    throw TransportError("bridge: cannot resolve " + address.to_string());
  std::string last_error = "no address";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    const int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      rc = poll(&pfd, 1, timeout_ms) == 1 ? 0 : -1;
      if (rc == 0) {
        int err = 0;
        socklen_t len = sizeof(err);
        getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
          errno = err;
          rc = -1;
        }
      } else {
        errno = ETIMEDOUT;
      }
    }
    if (rc != 0) {
      last_error = std::strerror(errno);
      ::close(fd);
      continue;
    }
    fcntl(fd, F_SETFL, flags);
    timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
    setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    freeaddrinfo(res);
    return FrameSocket(fd);
  }
  freeaddrinfo(res);
  throw TransportError("bridge: cannot connect to " + address.to_string() + ": " + last_error);
}

void FrameSocket::send_all(const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::send(fd_, data, n, MSG_NOSIGNAL);
    if (k <= 0) {
      if (k < 0 && errno == EINTR) continue;
      close();
      throw TransportError("bridge: send failed");
    }
    data += k;
    n -= static_cast<std::size_t>(k);
  }
}

void FrameSocket::recv_all(std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::recv(fd_, data, n, 0);
    if (k <= 0) {
      if (k < 0 && errno == EINTR) continue;
      close();
      throw TransportError(k == 0 ? "bridge: connection closed" : "bridge: receive failed or timed out");
    }
    data += k;
    n -= static_cast<std::size_t>(k);
  }
}

void FrameSocket::send_frame(std::span<const std::uint8_t> payload) {
  if (!is_open()) throw TransportError("bridge: socket not connected");
  const auto n = static_cast<std::uint32_t>(payload.size());
  const std::uint8_t prefix[4] = {static_cast<std::uint8_t>(n), static_cast<std::uint8_t>(n >> 8),
                                  static_cast<std::uint8_t>(n >> 16), static_cast<std::uint8_t>(n >> 24)};
  send_all(prefix, 4);
  send_all(payload.data(), payload.size());
}

std::vector<std::uint8_t> FrameSocket::recv_frame() {
  if (!is_open()) throw TransportError("bridge: socket not connected");
  std::uint8_t prefix[4];
  recv_all(prefix, 4);
  const std::uint32_t n = prefix[0] | (prefix[1] << 8) | (prefix[2] << 16) | (static_cast<std::uint32_t>(prefix[3]) << 24);
  if (n > wire::kMaxFrameBytes) {
    close();
    throw TransportError("bridge: oversized frame");
  }
  std::vector<std::uint8_t> payload(n);
  recv_all(payload.data(), n);
  return payload;
}

BridgeProvider::BridgeProvider(BridgeAddress address, int timeout_ms)
    : address_(std::move(address)), timeout_ms_(timeout_ms) {}

GuidanceResponse BridgeProvider::image_gradient(const GuidanceRequest& request) {
  const auto frame = wire::encode_request(request);
  if (!socket_.is_open()) socket_ = FrameSocket::connect(address_, timeout_ms_);
  socket_.send_frame(frame);
  const auto reply = socket_.recv_frame();
  GuidanceResponse response;
  try {
    response = wire::decode_response(reply, request.width, request.height);
  } catch (const GuidanceContractError&) {
    socket_.close();
    throw;
  }
  check_response(request, response);
  return response;
}

bool healthcheck(const BridgeAddress& address, int timeout_ms) {
  try {
    FrameSocket s = FrameSocket::connect(address, timeout_ms);
    s.send_frame(wire::encode_ping());
    const auto reply = s.recv_frame();
    return (wire::parse_header(reply).flags & wire::kFlagPing) != 0;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace compc
