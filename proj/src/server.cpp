#include "lorentz/server.hpp"

#include <csignal>
#include <deque>
#include <fstream>
#include <istream>
#include <set>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "lorentz/errors.hpp"
#include "lorentz/protocol.hpp"

namespace lorentz {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using Message = std::shared_ptr<const std::string>;

class Connection;

namespace detail {
struct ServerImpl {
    ServerImpl(SessionSettings settings, ServerOptions opts);

    void start_accepting(tcp::acceptor& acceptor, bool websocket_listener);
    void schedule_tick();
    void on_tick();
    void broadcast(const Message& msg, bool telemetry);
    void shutdown();
    void flush_event_log();

    ServerOptions options;
    net::io_context io;
    tcp::acceptor tcp_acceptor{io};
    tcp::acceptor ws_acceptor{io};
    net::steady_timer timer{io};
    net::signal_set signals{io};
    SimSession session;
    std::set<std::shared_ptr<Connection>> connections;
    std::deque<std::pair<std::weak_ptr<Connection>, Command>> queue;
    std::chrono::steady_clock::time_point next_tick;
    std::uint64_t ticks = 0;
    std::uint64_t decimation = 1;
    bool stopping = false;
    bool flushed = false;
};
}  // namespace detail

class Connection : public std::enable_shared_from_this<Connection> {
public:
    explicit Connection(detail::ServerImpl& owner) : owner_(owner) {}
    virtual ~Connection() = default;

    virtual void start() = 0;
    virtual void close() = 0;

    void send(Message msg)
    {
        if (closed_) {
            return;
        }
        if (control_.size() >= owner_.options.max_pending_messages) {
            close();
            return;
        }
        control_.push_back(std::move(msg));
        pump();
    }

    // Telemetry is latest-only: an unsent snapshot is replaced by a newer one.
    void publish(Message msg)
    {
        if (closed_) {
            return;
        }
        telemetry_ = std::move(msg);
        pump();
    }

    bool greeted() const { return greeted_; }
    const std::string& client_id() const { return client_id_; }

protected:
    virtual void write_raw(const Message& msg) = 0;

    void on_written(const beast::error_code& ec)
    {
        writing_ = false;
        if (ec) {
            close();
            return;
        }
        pump();
    }

    void on_line(const std::string& line)
    {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            return;
        }
        protocol::ClientMessage msg;
        try {
            msg = protocol::parse_client_message(line);
        } catch (const SchemaError& e) {
            send(std::make_shared<const std::string>(protocol::dump_line(protocol::error_message(e.what()))));
            return;
        }
        if (const auto* hello = std::get_if<protocol::Hello>(&msg)) {
            if (greeted_) {
                send(make(protocol::error_message("duplicate hello")));
                return;
            }
            greeted_ = true;
            client_id_ = hello->client_id;
            role_ = hello->role;
            send(make(protocol::hello_ack(*hello, owner_.session)));
            return;
        }
        Command cmd = std::get<Command>(msg);
        if (!greeted_) {
            send(make(protocol::error_message("hello required before cmd")));
            return;
        }
        cmd.client_id = client_id_;
        if (role_ != protocol::Role::operator_role) {
            Ack ack;
            ack.client_id = client_id_;
            ack.sequence = cmd.sequence;
            ack.status = AckStatus::rejected;
            ack.reason = "observer role is read-only";
            send(make(protocol::to_json(ack)));
            return;
        }
        owner_.queue.emplace_back(weak_from_this(), std::move(cmd));
    }

    void on_closed()
    {
        if (closed_) {
            return;
        }
        closed_ = true;
        control_.clear();
        telemetry_.reset();
        auto self = shared_from_this();
        owner_.connections.erase(self);
        if (greeted_) {
            bool other = false;
            for (const auto& c : owner_.connections) {
                other = other || (c->greeted() && c->client_id() == client_id_);
            }
            if (!other) {
                owner_.session.release_client(client_id_);
            }
        }
    }

    static Message make(const nlohmann::json& j) { return std::make_shared<const std::string>(protocol::dump_line(j)); }

    detail::ServerImpl& owner_;
    bool closed_ = false;

private:
    void pump()
    {
        if (writing_ || closed_) {
            return;
        }
        Message next;
        if (!control_.empty()) {
            next = std::move(control_.front());
            control_.pop_front();
        } else if (telemetry_) {
            next = std::move(telemetry_);
            telemetry_.reset();
        } else {
            return;
        }
        writing_ = true;
        write_raw(next);
    }

    std::deque<Message> control_;
    Message telemetry_;
    bool writing_ = false;
    bool greeted_ = false;
    std::string client_id_;
    protocol::Role role_ = protocol::Role::observer;
};

namespace {

class TcpConnection final : public Connection {
public:
    TcpConnection(detail::ServerImpl& owner, tcp::socket socket)
        : Connection(owner), socket_(std::move(socket)), buffer_(1 << 20)
    {
    }

    void start() override { read(); }

    void close() override
    {
        beast::error_code ignored;
        socket_.shutdown(tcp::socket::shutdown_both, ignored);
        socket_.close(ignored);
        on_closed();
    }

private:
    void read()
    {
        net::async_read_until(socket_, buffer_, '\n', [self = shared_from_this(), this](beast::error_code ec, std::size_t) {
            if (ec) {
                close();
                return;
            }
            std::istream in(&buffer_);
            std::string line;
            std::getline(in, line);
            on_line(line);
            if (!closed_) {
                read();
            }
        });
    }

    void write_raw(const Message& msg) override
    {
        auto framed = std::make_shared<std::string>(*msg + "\n");
        net::async_write(socket_, net::buffer(*framed),
                         [self = shared_from_this(), this, framed](beast::error_code ec, std::size_t) {
                             on_written(ec);
                         });
    }

    tcp::socket socket_;
    net::streambuf buffer_;
};

class WsConnection final : public Connection {
public:
    WsConnection(detail::ServerImpl& owner, tcp::socket socket) : Connection(owner), ws_(std::move(socket)) {}

    void start() override
    {
        ws_.read_message_max(1 << 20);
        ws_.async_accept([self = shared_from_this(), this](beast::error_code ec) {
            if (ec) {
                close();
                return;
            }
            ws_.text(true);
            read();
        });
    }

    void close() override
    {
        beast::error_code ignored;
        beast::get_lowest_layer(ws_).close(ignored);
        on_closed();
    }

private:
    void read()
    {
        ws_.async_read(buffer_, [self = shared_from_this(), this](beast::error_code ec, std::size_t) {
            if (ec) {
                close();
                return;
            }
            const std::string text = beast::buffers_to_string(buffer_.data());
            buffer_.consume(buffer_.size());
            std::size_t start = 0;
            while (start <= text.size() && !closed_) {
                const std::size_t end = text.find('\n', start);
                on_line(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
                if (end == std::string::npos) {
                    break;
                }
                start = end + 1;
            }
            if (!closed_) {
                read();
            }
        });
    }

    void write_raw(const Message& msg) override
    {
        ws_.async_write(net::buffer(*msg), [self = shared_from_this(), this, msg](beast::error_code ec, std::size_t) {
            on_written(ec);
        });
    }

    websocket::stream<tcp::socket> ws_;
    beast::flat_buffer buffer_;
};

void bind_listener(tcp::acceptor& acceptor, const tcp::endpoint& endpoint)
{
    try {
        acceptor.open(endpoint.protocol());
        acceptor.set_option(net::socket_base::reuse_address(true));
        acceptor.bind(endpoint);
        acceptor.listen();
    } catch (const boost::system::system_error& e) {
        if (e.code() == net::error::address_in_use || e.code() == net::error::access_denied) {
            throw PortBusyError("cannot bind " + endpoint.address().to_string() + ":" +
                                std::to_string(endpoint.port()) + ": " + e.code().message());
        }
        throw;
    }
}

}  // namespace

detail::ServerImpl::ServerImpl(SessionSettings settings, ServerOptions opts)
    : options(std::move(opts)), session(std::move(settings))
{
    const auto address = net::ip::make_address(options.bind_address);
    bind_listener(tcp_acceptor, tcp::endpoint(address, options.port));
    const unsigned short wsp = options.ws_port.value_or(options.port == 0 ? 0 : options.port + 1);
    bind_listener(ws_acceptor, tcp::endpoint(address, wsp));
    const TeleopSettings& t = session.config().teleop;
    decimation = static_cast<std::uint64_t>(std::max(1.0, std::round(t.tick_rate / t.publish_rate)));
}

void detail::ServerImpl::start_accepting(tcp::acceptor& acceptor, bool websocket_listener)
{
    acceptor.async_accept([this, &acceptor, websocket_listener](beast::error_code ec, tcp::socket socket) {
        if (ec || stopping) {
            return;
        }
        std::shared_ptr<Connection> c;
        if (websocket_listener) {
            c = std::make_shared<WsConnection>(*this, std::move(socket));
        } else {
            c = std::make_shared<TcpConnection>(*this, std::move(socket));
        }
        connections.insert(c);
        c->start();
        start_accepting(acceptor, websocket_listener);
    });
}

void detail::ServerImpl::schedule_tick()
{
    next_tick += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(session.dt()));
    timer.expires_at(next_tick);
    timer.async_wait([this](beast::error_code ec) {
        if (!ec && !stopping) {
            on_tick();
        }
    });
}

void detail::ServerImpl::broadcast(const Message& msg, bool telemetry)
{
    const std::vector<std::shared_ptr<Connection>> targets(connections.begin(), connections.end());
    for (const auto& c : targets) {
        if (!c->greeted()) {
            continue;
        }
        if (telemetry) {
            c->publish(msg);
        } else {
            c->send(msg);
        }
    }
}

void detail::ServerImpl::on_tick()
{
    while (!queue.empty()) {
        auto [weak, cmd] = std::move(queue.front());
        queue.pop_front();
        const Ack ack = session.handle_command(cmd);
        if (auto c = weak.lock()) {
            c->send(std::make_shared<const std::string>(protocol::dump_line(protocol::to_json(ack))));
        }
    }
    const Telemetry t = session.step();
    ++ticks;
    for (const Event& e : session.take_events()) {
        broadcast(std::make_shared<const std::string>(protocol::dump_line(protocol::to_json(e))), false);
    }
    if (t.tick % decimation == 0) {
        broadcast(std::make_shared<const std::string>(protocol::dump_line(protocol::to_json(t))), true);
    }
    if (options.max_ticks && ticks >= *options.max_ticks) {
        shutdown();
        return;
    }
    schedule_tick();
}

void detail::ServerImpl::shutdown()
{
    if (stopping) {
        return;
    }
    stopping = true;
    beast::error_code ignored;
    tcp_acceptor.close(ignored);
    ws_acceptor.close(ignored);
    timer.cancel();
    signals.cancel(ignored);
    const std::vector<std::shared_ptr<Connection>> all(connections.begin(), connections.end());
    for (const auto& c : all) {
        c->close();
    }
    flush_event_log();
}

void detail::ServerImpl::flush_event_log()
{
    if (flushed || options.event_log.empty()) {
        return;
    }
    flushed = true;
    std::ofstream out(options.event_log);
    for (const Event& e : session.events()) {
        out << protocol::dump_line(protocol::to_json(e)) << '\n';
    }
}

TeleopServer::TeleopServer(SessionSettings settings, ServerOptions options)
    : impl_(std::make_unique<detail::ServerImpl>(std::move(settings), std::move(options)))
{
}

TeleopServer::~TeleopServer() = default;

void TeleopServer::run()
{
    detail::ServerImpl& s = *impl_;
    if (s.options.handle_signals) {
        s.signals.add(SIGINT);
        s.signals.add(SIGTERM);
        s.signals.async_wait([&s](beast::error_code ec, int) {
            if (!ec) {
                s.shutdown();
            }
        });
    }
    s.start_accepting(s.tcp_acceptor, false);
    s.start_accepting(s.ws_acceptor, true);
    s.next_tick = std::chrono::steady_clock::now();
    s.schedule_tick();
    s.io.run();
    s.flush_event_log();
}

void TeleopServer::stop()
{
    net::post(impl_->io, [this] { impl_->shutdown(); });
}

unsigned short TeleopServer::tcp_port() const
{
    return impl_->tcp_acceptor.local_endpoint().port();
}

unsigned short TeleopServer::ws_port() const
{
    return impl_->ws_acceptor.local_endpoint().port();
}

std::uint64_t TeleopServer::ticks() const
{
    return impl_->ticks;
}

}  // namespace lorentz
