#include "tribo/protocol.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <iostream>
#include <thread>

namespace tribo {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

constexpr std::size_t kMaxMessageBytes = 64 * 1024;

class Session : public std::enable_shared_from_this<Session> {
public:
    Session(tcp::socket socket, ProtocolHandler& handler) : ws_(std::move(socket)), handler_(handler) {}

    void run()
    {
        ws_.read_message_max(kMaxMessageBytes);
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (!ec)
                self->read();
        });
    }

private:
    void read()
    {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec)
                return; // closed or failed; the session ends
            self->on_message();
        });
    }

    void on_message()
    {
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        if (auto reply = handler_.handle(text))
            send(std::move(*reply));
        read();
    }

    void send(std::string text)
    {
        outbox_.push_back(std::move(text));
        if (outbox_.size() == 1)
            write_next();
    }

    void write_next()
    {
        ws_.text(true);
        ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec)
                return;
            self->outbox_.pop_front();
            if (!self->outbox_.empty())
                self->write_next();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    std::deque<std::string> outbox_;
    ProtocolHandler& handler_;
};

} // namespace

struct ControlServer::Impl {
    Impl(ProtocolHandler& h, std::uint16_t port, const std::string& address)
        : handler(h), acceptor(ioc)
    {
        const tcp::endpoint endpoint(net::ip::make_address(address), port);
        acceptor.open(endpoint.protocol());
        acceptor.set_option(net::socket_base::reuse_address(true));
        acceptor.bind(endpoint);
        acceptor.listen(net::socket_base::max_listen_connections);
    }

    void accept()
    {
        acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
            if (ec)
                return;
            std::make_shared<Session>(std::move(socket), handler)->run();
            accept();
        });
    }

    ProtocolHandler& handler;
    net::io_context ioc{1};
    tcp::acceptor acceptor;
    std::thread thread;
};

ControlServer::ControlServer(ProtocolHandler& handler, std::uint16_t port, std::string address)
    : impl_(std::make_unique<Impl>(handler, port, address))
{
}

ControlServer::~ControlServer()
{
    stop();
}

void ControlServer::start()
{
    if (impl_->thread.joinable())
        return;
    impl_->accept();
    impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

void ControlServer::stop()
{
    if (!impl_)
        return;
    impl_->ioc.stop();
    if (impl_->thread.joinable())
        impl_->thread.join();
}

std::uint16_t ControlServer::port() const
{
    return impl_->acceptor.local_endpoint().port();
}

} // namespace tribo
