#pragma once

#include <atomic>
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "flatpack/protocol.hpp"

namespace flatpack {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct ServerOptions {
    std::string host = "127.0.0.1";
    unsigned short port = 8765;  // 0: let the OS choose
    std::optional<std::filesystem::path> ui_dir;
    std::filesystem::path record_dir = "recordings";
    std::chrono::seconds ping_interval{20};
    Clock::duration idle_timeout = std::chrono::minutes(10);
    int threads = 2;
    std::size_t max_message_bytes = 1 << 20;
    // Lifecycle log lines; ignored when empty.
    std::function<void(const std::string&)> log;
};

namespace detail {

inline std::string_view mime_type(const std::filesystem::path& p) {
    const std::string ext = p.extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
    if (ext == ".js" || ext == ".mjs") return "text/javascript; charset=utf-8";
    if (ext == ".css") return "text/css; charset=utf-8";
    if (ext == ".json" || ext == ".map") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".ico") return "image/x-icon";
    if (ext == ".wasm") return "application/wasm";
    return "application/octet-stream";
}

/// Maps a request target onto a file under `root`, or nullopt when it would escape.
inline std::optional<std::filesystem::path> static_file(const std::filesystem::path& root, std::string_view target) {
    target = target.substr(0, target.find_first_of("?#"));
    if (target.empty() || target.front() != '/') return std::nullopt;
    std::filesystem::path rel(std::string(target.substr(1)));
    for (const auto& part : rel)
        if (part == "..") return std::nullopt;
    std::filesystem::path p = root / rel;
    if (target.back() == '/' || std::filesystem::is_directory(p)) p /= "index.html";
    return p;
}

}  // namespace detail

class Server {
    class WsConnection;

public:
    explicit Server(ServerOptions opts)
        : opts_(std::move(opts)),
          table_(SessionTableOptions{opts_.record_dir, opts_.idle_timeout}),
          acceptor_(net::make_strand(ioc_)),
          evict_timer_(ioc_) {}

    ~Server() { stop(); }

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts serving on background threads. Throws Error(io_error) when the address cannot be bound.
    void start() {
        beast::error_code ec;
        const auto address = net::ip::make_address(opts_.host, ec);
        if (ec) throw Error(Errc::io_error, "bad host '" + opts_.host + "': " + ec.message());
        const tcp::endpoint ep(address, opts_.port);
        acceptor_.open(ep.protocol(), ec);
        if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
        if (!ec) acceptor_.bind(ep, ec);
        if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
        if (ec) throw Error(Errc::io_error, "cannot listen on " + opts_.host + ":" + std::to_string(opts_.port) + ": " +
                                                ec.message());
        port_ = acceptor_.local_endpoint().port();
        do_accept();
        schedule_eviction();
        for (int i = 0; i < std::max(1, opts_.threads); ++i) threads_.emplace_back([this] { ioc_.run(); });
        log("listening on " + opts_.host + ":" + std::to_string(port_));
    }

    unsigned short port() const { return port_; }
    SessionTable& sessions() { return table_; }
    const ServerOptions& options() const { return opts_; }

    /// Stops accepting, sends close frames on every open connection, waits
    /// briefly for the handshakes, then tears everything down.
    void stop() {
        if (stopping_.exchange(true) || threads_.empty()) return;
        net::post(acceptor_.get_executor(), [this] {
            beast::error_code ec;
            acceptor_.close(ec);
        });
        net::post(ioc_, [this] { evict_timer_.cancel(); });
        for (const auto& c : live_connections()) c->shutdown();
        {
            std::unique_lock lock(conn_mutex_);
            conn_cv_.wait_for(lock, std::chrono::seconds(3), [this] { return connections_.empty(); });
        }
        ioc_.stop();
        for (auto& t : threads_) t.join();
        threads_.clear();
        for (const auto& id : table_.clear()) log("session " + id + " closed at shutdown");
        log("server stopped");
    }

    std::size_t connection_count() const {
        std::lock_guard lock(conn_mutex_);
        return connections_.size();
    }

private:
    // Serves plain HTTP (static UI files) until the client asks for a WebSocket upgrade.
    class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
    public:
        HttpConnection(Server& server, tcp::socket socket) : server_(server), stream_(std::move(socket)) {}

        void run() {
            net::dispatch(stream_.get_executor(), [self = shared_from_this()] { self->read(); });
        }

    private:
        void read() {
            parser_.emplace();
            parser_->body_limit(16 * 1024);
            stream_.expires_after(std::chrono::seconds(30));
            http::async_read(stream_, buffer_, *parser_,
                             [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
        }

        void on_read(beast::error_code ec) {
            if (ec) {
                stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
                return;
            }
            auto req = parser_->release();
            if (websocket::is_upgrade(req)) {
                stream_.expires_never();
                std::make_shared<WsConnection>(server_, stream_.release_socket())->accept(std::move(req));
                return;
            }
            respond(req);
        }

        void respond(const http::request<http::string_body>& req) {
            auto res = std::make_shared<http::response<http::string_body>>();
            res->version(req.version());
            res->keep_alive(req.keep_alive());
            res->set(http::field::server, kEngineVersion);
            const auto& ui = server_.opts_.ui_dir;
            std::optional<std::filesystem::path> file;
            if (ui && (req.method() == http::verb::get || req.method() == http::verb::head))
                file = detail::static_file(*ui, std::string_view(req.target().data(), req.target().size()));
            std::string body;
            if (file && std::filesystem::is_regular_file(*file)) {
                try {
                    body = read_text_file(*file);
                    res->result(http::status::ok);
                    res->set(http::field::content_type, std::string(detail::mime_type(*file)));
                } catch (const Error&) {
                    file.reset();
                }
            } else {
                file.reset();
            }
            if (!file) {
                res->result(ui ? http::status::not_found : http::status::upgrade_required);
                res->set(http::field::content_type, "text/plain");
                body = ui ? "not found\n" : "this endpoint speaks WebSocket; start the server with --ui to serve the client\n";
            }
            if (req.method() == http::verb::head) {
                res->content_length(body.size());
            } else {
                res->body() = std::move(body);
                res->prepare_payload();
            }
            http::async_write(stream_, *res,
                              [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
                                  if (ec || !res->keep_alive()) {
                                      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
                                      return;
                                  }
                                  self->read();
                              });
        }

        Server& server_;
        beast::tcp_stream stream_;
        beast::flat_buffer buffer_;
        std::optional<http::request_parser<http::string_body>> parser_;
    };

    class WsConnection : public std::enable_shared_from_this<WsConnection> {
    public:
        WsConnection(Server& server, tcp::socket socket)
            : server_(server), ws_(std::move(socket)), id_(++server.next_connection_id_) {}

        void accept(http::request<http::string_body> req) {
            websocket::stream_base::timeout t{};
            t.handshake_timeout = std::chrono::seconds(30);
            // Beast pings after half the idle timeout without traffic.
            t.idle_timeout = 2 * server_.opts_.ping_interval;
            t.keep_alive_pings = true;
            ws_.set_option(t);
            ws_.read_message_max(server_.opts_.max_message_bytes);
            ws_.set_option(websocket::stream_base::decorator(
                [](websocket::response_type& res) { res.set(http::field::server, kEngineVersion); }));
            if (!server_.register_connection(shared_from_this())) return;
            ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
                if (ec) return self->finish("handshake failed: " + ec.message());
                self->server_.log("connection " + std::to_string(self->id_) + " opened");
                self->read();
            });
        }

        void shutdown() {
            net::post(ws_.get_executor(), [self = shared_from_this()] {
                self->closing_ = true;
                if (!self->writing_) self->close();
            });
        }

    private:
        void read() {
            ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
        }

        void on_read(beast::error_code ec) {
            if (ec) return finish(ec == websocket::error::closed ? "closed by peer" : ec.message());
            const std::string text = beast::buffers_to_string(buffer_.data());
            buffer_.consume(buffer_.size());
            outbox_.push_back(handle_text(server_.table_, id_, text));
            write();
            // Replies go out in request order; the next request is read while this one is written.
            read();
        }

        void write() {
            if (writing_ || outbox_.empty() || closed_) return;
            writing_ = true;
            ws_.text(true);
            ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
                self->writing_ = false;
                self->outbox_.pop_front();
                if (ec) return self->finish(ec.message());
                if (self->closing_) return self->close();
                self->write();
            });
        }

        void close() {
            if (closed_) return;
            closed_ = true;
            ws_.async_close(websocket::close_code::going_away,
                            [self = shared_from_this()](beast::error_code) { self->finish("closed at shutdown"); });
        }

        void finish(const std::string& why) {
            if (finished_) return;
            finished_ = true;
            for (const auto& sid : server_.table_.erase_owner(id_)) server_.log("session " + sid + " closed");
            server_.log("connection " + std::to_string(id_) + " ended: " + why);
            server_.unregister_connection(this);
        }

        Server& server_;
        websocket::stream<beast::tcp_stream> ws_;
        beast::flat_buffer buffer_;
        std::deque<std::string> outbox_;
        ConnectionId id_;
        bool writing_ = false;
        bool closing_ = false;
        bool closed_ = false;
        bool finished_ = false;
    };

    void do_accept() {
        acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
            if (ec) {
                if (ec == net::error::operation_aborted || !acceptor_.is_open()) return;
            } else {
                std::make_shared<HttpConnection>(*this, std::move(socket))->run();
            }
            do_accept();
        });
    }

    void schedule_eviction() {
        const auto period = std::max<Clock::duration>(std::chrono::seconds(1), opts_.idle_timeout / 4);
        evict_timer_.expires_after(std::min<Clock::duration>(period, std::chrono::seconds(30)));
        evict_timer_.async_wait([this](beast::error_code ec) {
            if (ec || stopping_) return;
            for (const auto& id : table_.evict_idle()) log("session " + id + " evicted after idle timeout");
            schedule_eviction();
        });
    }

    bool register_connection(const std::shared_ptr<WsConnection>& c) {
        std::lock_guard lock(conn_mutex_);
        if (stopping_) return false;
        connections_.emplace(c.get(), c);
        return true;
    }

    void unregister_connection(WsConnection* c) {
        std::lock_guard lock(conn_mutex_);
        connections_.erase(c);
        conn_cv_.notify_all();
    }

    std::vector<std::shared_ptr<WsConnection>> live_connections() {
        std::lock_guard lock(conn_mutex_);
        std::vector<std::shared_ptr<WsConnection>> out;
        for (const auto& [ptr, weak] : connections_)
            if (auto c = weak.lock()) out.push_back(c);
        return out;
    }

    void log(const std::string& line) const {
        if (opts_.log) opts_.log(line);
    }

    ServerOptions opts_;
    SessionTable table_;
    net::io_context ioc_;
    tcp::acceptor acceptor_;
    net::steady_timer evict_timer_;
    std::vector<std::thread> threads_;
    std::atomic<bool> stopping_{false};
    std::atomic<ConnectionId> next_connection_id_{0};
    unsigned short port_ = 0;
    mutable std::mutex conn_mutex_;
    std::condition_variable conn_cv_;
    std::map<WsConnection*, std::weak_ptr<WsConnection>> connections_;
};

}  // namespace flatpack
