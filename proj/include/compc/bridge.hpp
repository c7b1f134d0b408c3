#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "compc/guidance.hpp"

namespace compc {

// Guidance wire protocol. Every frame on the socket is a u32 little-endian
// payload length followed by the payload. Payloads start with a 16-byte header:
//   "CPGD" | u16 version | u16 H | u16 W | u16 flags | 4 reserved bytes (zero)
// Request body:  f32 d_elevation, d_azimuth, d_radius, step_fraction,
//                reference image, current image (H x W x 3 f32 each).
// Response body: f32 weight, gradient image (H x W x 3 f32).
// Error frames set flags bit 0 and carry a UTF-8 message; ping frames set
// bit 1 with H = W = 0 and no body, and are answered by a ping frame.
// All numbers little-endian.
namespace wire {

inline constexpr std::array<char, 4> kMagic{'C', 'P', 'G', 'D'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 16;
inline constexpr std::uint16_t kFlagError = 1;
inline constexpr std::uint16_t kFlagPing = 2;
inline constexpr std::uint16_t kDefaultPort = 7631;
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 28;

struct Header {
  std::uint16_t version = kVersion;
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  std::uint16_t flags = 0;
};

void put_header(std::vector<std::uint8_t>& out, const Header& h);
// Throws GuidanceContractError on short input, wrong magic or version.
Header parse_header(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_request(const GuidanceRequest& request);
GuidanceRequest decode_request(std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> encode_response(const GuidanceResponse& response, int width, int height);
GuidanceResponse decode_response(std::span<const std::uint8_t> payload, int width, int height);
std::vector<std::uint8_t> encode_error(const std::string& message);
std::string decode_error(std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> encode_ping();

}  // namespace wire

struct BridgeAddress {
  std::string host = "127.0.0.1";
  std::uint16_t port = wire::kDefaultPort;
  // "host", "host:port" or ":port".
  static BridgeAddress parse(const std::string& text);
  // COMPC_BRIDGE_ADDR, or the default when unset.
  static BridgeAddress from_env();
  std::string to_string() const;
};

// Blocking TCP connection exchanging length-prefixed frames.
class FrameSocket {
 public:
  FrameSocket() = default;
  explicit FrameSocket(int fd) : fd_(fd) {}
  FrameSocket(const FrameSocket&) = delete;
  FrameSocket& operator=(const FrameSocket&) = delete;
  FrameSocket(FrameSocket&& other) noexcept;
  FrameSocket& operator=(FrameSocket&& other) noexcept;
  ~FrameSocket();

  // Throws TransportError when the connection cannot be made in time.
  static FrameSocket connect(const BridgeAddress& address, int timeout_ms);
  bool is_open() const { return fd_ >= 0; }
  void close();
  void send_frame(std::span<const std::uint8_t> payload);
  std::vector<std::uint8_t> recv_frame();

 private:
  void send_all(const std::uint8_t* data, std::size_t n);
  void recv_all(std::uint8_t* data, std::size_t n);
  int fd_ = -1;
};

// Client for an external guidance server. One request in flight; the
// connection is reopened lazily after a failure.
class BridgeProvider final : public GuidanceProvider {
 public:
  explicit BridgeProvider(BridgeAddress address = BridgeAddress::from_env(), int timeout_ms = 30000);
  GuidanceResponse image_gradient(const GuidanceRequest& request) override;
  std::string name() const override { return "bridge"; }
  const BridgeAddress& address() const { return address_; }

 private:
  BridgeAddress address_;
  int timeout_ms_;
  FrameSocket socket_;
};

// True when a ping is answered by a ping within the timeout.
bool healthcheck(const BridgeAddress& address, int timeout_ms = 2000);

}  // namespace compc
