#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <httplib.h>

#include "mmshap/wire_protocol.hpp"

namespace mmshap::wire {

namespace {

[[noreturn]] void transport_failure(const std::string& what) {
    throw Error(Errc::ProtocolViolation, what);
}

}  // namespace

ProcessTransport::ProcessTransport(const std::string& command, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0) transport_failure("pipe() failed: " + std::string(std::strerror(errno)));
    if (::pipe(out_pipe) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        transport_failure("pipe() failed: " + std::string(std::strerror(errno)));
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
        transport_failure("fork() failed: " + std::string(std::strerror(errno)));
    }
    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
    ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);
    ::signal(SIGPIPE, SIG_IGN);
}

ProcessTransport::~ProcessTransport() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    if (pid_ > 0) {
        // Closing stdin asks a well-behaved oracle to exit; give it a moment.
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
            ::usleep(10'000);
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, nullptr, 0);
    }
}

std::string ProcessTransport::roundtrip(const std::string& frame) {
    std::string out = frame;
    out.push_back('\n');
    std::size_t written = 0;
    while (written < out.size()) {
        const ssize_t n = ::write(to_child_, out.data() + written, out.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            transport_failure("write to oracle process failed: " + std::string(std::strerror(errno)));
        }
        written += static_cast<std::size_t>(n);
    }
    return read_line();
}

std::string ProcessTransport::read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return line;
        }
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            throw Error(Errc::OracleTimeout, "oracle process did not answer within " +
                                                 std::to_string(timeout_.count()) + " ms");
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
        if (ready < 0) {
            if (errno == EINTR) continue;
            transport_failure("poll on oracle process failed: " + std::string(std::strerror(errno)));
        }
        if (ready == 0) continue;
        char chunk[65536];
        const ssize_t n = ::read(from_child_, chunk, sizeof(chunk));
        if (n < 0) {
            if (errno == EINTR) continue;
            transport_failure("read from oracle process failed: " + std::string(std::strerror(errno)));
        }
        if (n == 0) transport_failure("oracle process closed its output");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

HttpTransport::HttpTransport(const std::string& url, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(Errc::ConfigError, "oracle URL '" + url + "' has no scheme");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::string HttpTransport::roundtrip(const std::string& frame) {
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(path_, frame + "\n", "application/x-ndjson");
    if (!res) {
        if (res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout) {
            throw Error(Errc::OracleTimeout, "HTTP oracle did not answer: " + httplib::to_string(res.error()));
        }
        transport_failure("HTTP oracle request failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        transport_failure("HTTP oracle returned status " + std::to_string(res->status));
    }
    std::string body = res->body;
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    if (body.find('\n') != std::string::npos) transport_failure("HTTP oracle replied with several frames");
    return body;
}

}  // namespace mmshap::wire
