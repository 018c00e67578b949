#pragma once

// Framed translator protocol. Every frame is
//   u32 little-endian header length | UTF-8 JSON header | raw payload
// with header {"w","h","c","kind"}; kind is "request", "response" or "error" (errors also carry
// "message" and have no payload). A request payload is w*h*c pixel bytes followed by w*h mask
// bytes (0/1); a response payload is w*h*3 RGB bytes. Pixels are row-major and interleaved.

#include <json.hpp>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

namespace put {

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t max_header_bytes = 64 * 1024;
inline constexpr int max_frame_side = 1 << 15;

struct TranslatorRequest {
    int width = 0, height = 0, channels = 3;
    std::vector<std::uint8_t> pixels; ///< width * height * channels
    std::vector<std::uint8_t> mask;   ///< width * height, 0 or 1

    void validate() const {
        if (channels != 3 && channels != 4) throw ProtocolError("request channels must be 3 or 4");
        if (pixels.size() != static_cast<std::size_t>(width) * height * channels)
            throw ProtocolError("request pixel payload length mismatch");
        if (mask.size() != static_cast<std::size_t>(width) * height)
            throw ProtocolError("request mask payload length mismatch");
    }
};

struct TranslatorResponse {
    int width = 0, height = 0;
    std::vector<std::uint8_t> pixels; ///< width * height * 3
};

/// Byte source; read() returns 0 only at end of stream.
class ByteReader {
public:
    virtual ~ByteReader() = default;
    virtual std::size_t read(std::uint8_t* dst, std::size_t n) = 0;
};

class ByteWriter {
public:
    virtual ~ByteWriter() = default;
    virtual void write(const std::uint8_t* src, std::size_t n) = 0;
    virtual void flush() {}
};

class StreamReader : public ByteReader {
public:
    explicit StreamReader(std::istream& in) : in_(in) {}
    std::size_t read(std::uint8_t* dst, std::size_t n) override {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        return static_cast<std::size_t>(in_.gcount());
    }

private:
    std::istream& in_;
};

class StreamWriter : public ByteWriter {
public:
    explicit StreamWriter(std::ostream& out) : out_(out) {}
    void write(const std::uint8_t* src, std::size_t n) override {
        out_.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(n));
        if (!out_) throw ProtocolError("write to output stream failed");
    }
    void flush() override { out_.flush(); }

private:
    std::ostream& out_;
};

class FdReader : public ByteReader {
public:
    explicit FdReader(int fd) : fd_(fd) {}
    std::size_t read(std::uint8_t* dst, std::size_t n) override {
        for (;;) {
            const ssize_t r = ::read(fd_, dst, n);
            if (r >= 0) return static_cast<std::size_t>(r);
            if (errno != EINTR) throw ProtocolError(std::string("read failed: ") + std::strerror(errno));
        }
    }

private:
    int fd_;
};

class FdWriter : public ByteWriter {
public:
    explicit FdWriter(int fd) : fd_(fd) {}
    void write(const std::uint8_t* src, std::size_t n) override {
        while (n > 0) {
            const ssize_t w = ::write(fd_, src, n);
            if (w < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("write failed: ") + std::strerror(errno));
            }
            src += w;
            n -= static_cast<std::size_t>(w);
        }
    }

private:
    int fd_;
};

namespace detail {

/// Fills `n` bytes. Returns false if the stream ended before the first byte; throws on a short read.
inline bool read_exact(ByteReader& in, std::uint8_t* dst, std::size_t n, const char* what) {
    std::size_t got = 0;
    while (got < n) {
        const std::size_t r = in.read(dst + got, n - got);
        if (r == 0) {
            if (got == 0) return false;
            throw ProtocolError(std::string("truncated ") + what);
        }
        got += r;
    }
    return true;
}

inline void write_header(ByteWriter& out, const nlohmann::json& header) {
    const std::string text = header.dump();
    const auto len = static_cast<std::uint32_t>(text.size());
    const std::uint8_t prefix[4] = {static_cast<std::uint8_t>(len), static_cast<std::uint8_t>(len >> 8),
                                    static_cast<std::uint8_t>(len >> 16), static_cast<std::uint8_t>(len >> 24)};
    out.write(prefix, 4);
    out.write(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
}

/// Reads a frame header; nullopt on clean end of stream.
inline std::optional<nlohmann::json> read_header(ByteReader& in) {
    std::uint8_t prefix[4];
    if (!read_exact(in, prefix, 4, "header length")) return std::nullopt;
    const std::uint32_t len = prefix[0] | (prefix[1] << 8) | (prefix[2] << 16) | (static_cast<std::uint32_t>(prefix[3]) << 24);
    if (len == 0 || len > max_header_bytes) throw ProtocolError("header length " + std::to_string(len) + " out of range");
    std::string text(len, '\0');
    if (!read_exact(in, reinterpret_cast<std::uint8_t*>(text.data()), len, "header"))
        throw ProtocolError("truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("header is not valid JSON: ") + e.what());
    }
    if (!header.is_object() || !header.contains("kind") || !header["kind"].is_string())
        throw ProtocolError("header lacks a string \"kind\"");
    return header;
}

inline int header_dim(const nlohmann::json& h, const char* key, int lo, int hi) {
    if (!h.contains(key) || !h[key].is_number_integer()) throw ProtocolError(std::string("header lacks integer \"") + key + "\"");
    const auto v = h[key].get<long long>();
    if (v < lo || v > hi) throw ProtocolError(std::string("header field \"") + key + "\" out of range");
    return static_cast<int>(v);
}

} // namespace detail

inline void write_request(ByteWriter& out, const TranslatorRequest& req) {
    req.validate();
    detail::write_header(out, {{"w", req.width}, {"h", req.height}, {"c", req.channels}, {"kind", "request"}});
    out.write(req.pixels.data(), req.pixels.size());
    out.write(req.mask.data(), req.mask.size());
    out.flush();
}

inline void write_response(ByteWriter& out, const TranslatorResponse& resp) {
    if (resp.pixels.size() != static_cast<std::size_t>(resp.width) * resp.height * 3)
        throw ProtocolError("response pixel payload length mismatch");
    detail::write_header(out, {{"w", resp.width}, {"h", resp.height}, {"c", 3}, {"kind", "response"}});
    out.write(resp.pixels.data(), resp.pixels.size());
    out.flush();
}

inline void write_error(ByteWriter& out, const std::string& message) {
    detail::write_header(out, {{"w", 0}, {"h", 0}, {"c", 0}, {"kind", "error"}, {"message", message}});
    out.flush();
}

/// Reads the next request; nullopt on clean end of stream.
inline std::optional<TranslatorRequest> read_request(ByteReader& in) {
    auto header = detail::read_header(in);
    if (!header) return std::nullopt;
    if ((*header)["kind"] != "request") throw ProtocolError("expected a request frame");
    TranslatorRequest req;
    req.width = detail::header_dim(*header, "w", 1, max_frame_side);
    req.height = detail::header_dim(*header, "h", 1, max_frame_side);
    req.channels = detail::header_dim(*header, "c", 3, 4);
    req.pixels.resize(static_cast<std::size_t>(req.width) * req.height * req.channels);
    req.mask.resize(static_cast<std::size_t>(req.width) * req.height);
    if (!detail::read_exact(in, req.pixels.data(), req.pixels.size(), "request pixels"))
        throw ProtocolError("truncated request pixels");
    if (!detail::read_exact(in, req.mask.data(), req.mask.size(), "request mask"))
        throw ProtocolError("truncated request mask");
    return req;
}

/// Error frames from the peer surface as ProtocolError carrying the peer's message.
inline TranslatorResponse read_response(ByteReader& in) {
    auto header = detail::read_header(in);
    if (!header) throw ProtocolError("translator closed the stream before responding");
    const auto kind = (*header)["kind"].get<std::string>();
    if (kind == "error") {
        const auto msg = header->value("message", std::string("unspecified"));
        throw ProtocolError("translator reported an error: " + msg);
    }
    if (kind != "response") throw ProtocolError("expected a response frame, got \"" + kind + "\"");
    TranslatorResponse resp;
    resp.width = detail::header_dim(*header, "w", 1, max_frame_side);
    resp.height = detail::header_dim(*header, "h", 1, max_frame_side);
    if (detail::header_dim(*header, "c", 3, 3) != 3) throw ProtocolError("response must have 3 channels");
    resp.pixels.resize(static_cast<std::size_t>(resp.width) * resp.height * 3);
    if (!detail::read_exact(in, resp.pixels.data(), resp.pixels.size(), "response pixels"))
        throw ProtocolError("truncated response pixels");
    return resp;
}

using RequestHandler = std::function<TranslatorResponse(const TranslatorRequest&)>;

/// Serves requests in order until end of input. Returns 0 on clean shutdown; on a malformed frame
/// or handler failure an error frame is written and 1 is returned.
inline int serve_protocol(ByteReader& in, ByteWriter& out, const RequestHandler& handler) {
    for (;;) {
        std::optional<TranslatorRequest> req;
        try {
            req = read_request(in);
        } catch (const std::exception& e) {
            try { write_error(out, e.what()); } catch (...) {}
            return 1;
        }
        if (!req) return 0;
        try {
            auto resp = handler(*req);
            if (resp.width != req->width || resp.height != req->height)
                throw ProtocolError("handler changed the frame dimensions");
            write_response(out, resp);
        } catch (const std::exception& e) {
            try { write_error(out, e.what()); } catch (...) {}
            return 1;
        }
    }
}

} // namespace put
