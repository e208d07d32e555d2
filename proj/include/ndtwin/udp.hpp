// Minimal RAII wrapper over BSD UDP sockets (loopback/IPv4).
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ndtwin {

struct Endpoint {
    std::uint32_t ip_host_order = 0;  // INADDR_LOOPBACK by default
    std::uint16_t port = 0;

    bool operator==(const Endpoint&) const = default;
    bool operator<(const Endpoint& o) const {
        return ip_host_order != o.ip_host_order ? ip_host_order < o.ip_host_order
                                                : port < o.port;
    }
};

Endpoint loopback(std::uint16_t port);

class UdpSocket {
  public:
    UdpSocket();
    ~UdpSocket();
    UdpSocket(const UdpSocket&) = delete;
    UdpSocket& operator=(const UdpSocket&) = delete;
    UdpSocket(UdpSocket&& other) noexcept;
    UdpSocket& operator=(UdpSocket&& other) noexcept;

    /// Bind to loopback; port 0 picks an ephemeral port. Throws on failure.
    void bind_loopback(std::uint16_t port = 0);
    Endpoint local_endpoint() const;

    /// Fire-and-forget datagram; returns false on a send error.
    bool send_to(const Endpoint& to, std::string_view payload);

    struct Datagram {
        std::string payload;
        Endpoint from;
    };

    /// Blocking receive with timeout; nullopt on timeout.
    std::optional<Datagram> recv(int timeout_ms);

  private:
    int fd_ = -1;
};

}  // namespace ndtwin
