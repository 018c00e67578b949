#pragma once

#include "put/image.hpp"
#include "put/protocol.hpp"
#include "put/render.hpp"

#include <csignal>
#include <memory>
#include <string>
#include <string_view>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

namespace put {

/// Translator failure tied to the pipeline iteration that triggered it.
class TranslatorError : public std::runtime_error {
public:
    TranslatorError(const std::string& what, std::uint32_t iteration)
        : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}
    std::uint32_t iteration() const { return iteration_; }

private:
    std::uint32_t iteration_;
};

/// How a frame is packed for the translator: merged gray+texture in 3 channels, or the white-material
/// rendering and the partial texture as separate planes (gray, R, G, B).
enum class InputLayout { merged_rgb, stacked_gray_rgb };

inline TranslatorRequest make_request(const PanoFrame& frame, InputLayout layout = InputLayout::merged_rgb) {
    TranslatorRequest req;
    req.width = frame.width();
    req.height = frame.height();
    req.channels = layout == InputLayout::merged_rgb ? 3 : 4;
    req.mask.resize(frame.mask.pixel_count());
    for (std::size_t i = 0; i < req.mask.size(); ++i) req.mask[i] = frame.mask.data()[i] ? 1 : 0;
    if (layout == InputLayout::merged_rgb) {
        req.pixels = quantize(frame.rgb).data();
        return req;
    }
    req.pixels.resize(frame.mask.pixel_count() * 4);
    for (std::size_t i = 0; i < frame.mask.pixel_count(); ++i) {
        req.pixels[4 * i] = to_byte(frame.gray.data()[i]);
        for (int c = 0; c < 3; ++c)
            req.pixels[4 * i + 1 + c] = req.mask[i] ? to_byte(frame.rgb.data()[3 * i + c]) : 0;
    }
    return req;
}

/// Collapses a request back to one RGB image: textured pixels keep their color, others the gray shading.
inline std::vector<std::uint8_t> merged_pixels(const TranslatorRequest& req) {
    if (req.channels == 3) return req.pixels;
    std::vector<std::uint8_t> out(req.mask.size() * 3);
    for (std::size_t i = 0; i < req.mask.size(); ++i)
        for (int c = 0; c < 3; ++c) out[3 * i + c] = req.mask[i] ? req.pixels[4 * i + 1 + c] : req.pixels[4 * i];
    return out;
}

/// The image translation network g, or a stand-in for it.
class Translator {
public:
    virtual ~Translator() = default;
    virtual TranslatorResponse handle(const TranslatorRequest& req) = 0;
    virtual std::string name() const = 0;
};

class IdentityTranslator : public Translator {
public:
    TranslatorResponse handle(const TranslatorRequest& req) override {
        return {req.width, req.height, merged_pixels(req)};
    }
    std::string name() const override { return "identity"; }
};

/// HSV (h in degrees) to RGB, components in [0,1].
inline std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    h = std::fmod(h, 360.0);
    if (h < 0) h += 360.0;
    const double c = v * s;
    const double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
    const double m = v - c;
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h / 60.0)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
    }
    return {r + m, g + m, b + m};
}

/// Deterministic stub: untextured pixels take a fixed hue at their own brightness; textured pixels
/// pass through untouched. (Rotating the hue of a gray pixel would leave it gray, so the gray
/// level is kept as value and the hue and saturation are imposed.)
class TintTranslator : public Translator {
public:
    explicit TintTranslator(double hue_deg = 25.0, double saturation = 0.5) : hue_(hue_deg), sat_(saturation) {}

    TranslatorResponse handle(const TranslatorRequest& req) override {
        TranslatorResponse resp{req.width, req.height, merged_pixels(req)};
        for (std::size_t i = 0; i < req.mask.size(); ++i) {
            if (req.mask[i]) continue;
            const double v = from_byte(resp.pixels[3 * i]);
            const auto rgb = hsv_to_rgb(hue_, sat_, v);
            for (int c = 0; c < 3; ++c) resp.pixels[3 * i + c] = to_byte(static_cast<float>(rgb[c]));
        }
        return resp;
    }
    std::string name() const override { return "stub"; }

private:
    double hue_, sat_;
};

/// Runs an external command (via /bin/sh -c) speaking the framed protocol on its stdin/stdout.
/// One request is in flight at a time.
class ExecTranslator : public Translator {
public:
    explicit ExecTranslator(std::string command) : command_(std::move(command)) {
        std::signal(SIGPIPE, SIG_IGN);
        int to_child[2], from_child[2];
        if (::pipe(to_child) != 0) throw ProtocolError("pipe() failed");
        if (::pipe(from_child) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw ProtocolError("pipe() failed");
        }
        pid_ = ::fork();
        if (pid_ < 0) throw ProtocolError("fork() failed");
        if (pid_ == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        in_fd_ = to_child[1];
        out_fd_ = from_child[0];
        ::fcntl(in_fd_, F_SETFD, FD_CLOEXEC);
        ::fcntl(out_fd_, F_SETFD, FD_CLOEXEC);
    }

    ExecTranslator(const ExecTranslator&) = delete;
    ExecTranslator& operator=(const ExecTranslator&) = delete;

    ~ExecTranslator() override { shutdown(); }

    TranslatorResponse handle(const TranslatorRequest& req) override {
        if (in_fd_ < 0) throw ProtocolError("translator process already shut down");
        FdWriter w(in_fd_);
        FdReader r(out_fd_);
        write_request(w, req);
        return read_response(r);
    }

    std::string name() const override { return "exec:" + command_; }

    /// Closes the child's stdin and waits for it. Returns its exit status, or -1 if it was
    /// killed by a signal or already reaped.
    int shutdown() {
        if (in_fd_ >= 0) ::close(in_fd_);
        if (out_fd_ >= 0) ::close(out_fd_);
        in_fd_ = out_fd_ = -1;
        if (pid_ <= 0) return -1;
        int status = 0;
        while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {}
        pid_ = -1;
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

private:
    std::string command_;
    pid_t pid_ = -1;
    int in_fd_ = -1;
    int out_fd_ = -1;
};

/// Parses `identity`, `stub` or `exec:<command>`.
inline std::unique_ptr<Translator> make_translator(std::string_view spec) {
    if (spec == "identity") return std::make_unique<IdentityTranslator>();
    if (spec == "stub") return std::make_unique<TintTranslator>();
    if (spec.starts_with("exec:")) {
        const auto cmd = spec.substr(5);
        if (cmd.empty()) throw std::invalid_argument("translator exec: needs a command");
        return std::make_unique<ExecTranslator>(std::string(cmd));
    }
    throw std::invalid_argument("unknown translator '" + std::string(spec) + "' (identity|stub|exec:<command>)");
}

/// Sends one frame through a translator and returns the generated RGB image in [0,1].
/// Any failure is rethrown as TranslatorError carrying the frame's iteration.
inline ImageF translate(Translator& translator, const PanoFrame& frame, InputLayout layout = InputLayout::merged_rgb) {
    const auto iteration = frame.viewpoint.iteration;
    TranslatorResponse resp;
    try {
        resp = translator.handle(make_request(frame, layout));
    } catch (const std::exception& e) {
        throw TranslatorError(e.what(), iteration);
    }
    if (resp.width != frame.width() || resp.height != frame.height())
        throw TranslatorError("translator returned " + std::to_string(resp.width) + "x" + std::to_string(resp.height) +
                                  " for a " + std::to_string(frame.width()) + "x" + std::to_string(frame.height()) + " frame",
                              iteration);
    if (resp.pixels.size() != static_cast<std::size_t>(resp.width) * resp.height * 3)
        throw TranslatorError("translator returned a malformed payload", iteration);
    Image8 img(resp.width, resp.height, 3);
    img.data() = std::move(resp.pixels);
    return dequantize(img);
}

} // namespace put
