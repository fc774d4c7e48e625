#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "bbrtune/agents/channel.hpp"
#include "bbrtune/agents/host_agent.hpp"
#include "bbrtune/agents/wire.hpp"

namespace bbrtune::agents {

enum ErrorCode : std::uint16_t { kErrOutOfRange = 1, kErrMalformed = 2, kErrUnexpected = 3 };

// Host end of the link: answers PARAMS with ACK or ERROR and ships STATS.
class HostEndpoint {
 public:
  HostEndpoint(HostAgent& host, const env::ActionGrid& grid, std::unique_ptr<Channel> ch)
      : host_(&host), grid_(grid), ch_(std::move(ch)) {}

  void hello() {
    WireMessage m{kWireVersion, MsgKind::kHello, host_->config().agent_id, 0, encode_hello({host_->owned_flows()})};
    ch_->send(encode_msg(m));
  }

  void send_report() {
    const StatsReport r = host_->report();
    ch_->send(encode_msg({kWireVersion, MsgKind::kStats, r.agent_id, r.epoch, encode_stats(r)}));
  }

  // Handles the next frame on the link (blocking on stream transports);
  // false if the link had nothing to deliver.
  bool serve_one() {
    auto f = ch_->receive();
    if (!f) return false;
    const std::uint32_t id = host_->config().agent_id;
    try {
      const WireMessage m = decode_checked(*f);
      if (m.kind != MsgKind::kParams) {
        reply_error(m.epoch, kErrUnexpected, "host expects PARAMS");
        return true;
      }
      const auto res = host_->tuner_apply(decode_params(m.payload), grid_);
      if (res.ok)
        ch_->send(encode_msg({kWireVersion, MsgKind::kAck, id, m.epoch, {}}));
      else
        reply_error(m.epoch, kErrOutOfRange, res.error);
    } catch (const DecodeError& e) {
      reply_error(0, kErrMalformed, e.what());
    }
    return true;
  }

  HostAgent& host() { return *host_; }

 private:
  void reply_error(std::uint64_t epoch, std::uint16_t code, const std::string& text) {
    ch_->send(encode_msg({kWireVersion, MsgKind::kError, host_->config().agent_id, epoch, encode_error({code, text})}));
  }

  HostAgent* host_;
  env::ActionGrid grid_;
  std::unique_ptr<Channel> ch_;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// RL-agent end of the link.
class RlHostInterface {
 public:
  RlHostInterface(std::uint32_t agent_id, std::unique_ptr<Channel> ch) : id_(agent_id), ch_(std::move(ch)) {}

  HelloBody receive_hello() {
    const auto m = next();
    if (m.kind != MsgKind::kHello) throw ProtocolError("expected HELLO");
    return decode_hello(m.payload);
  }

  StatsReport receive_stats() {
    const auto m = next();
    if (m.kind != MsgKind::kStats) throw ProtocolError("expected STATS");
    return decode_stats(m);
  }

  void send_params(const env::Windows& w) {
    ch_->send(encode_msg({kWireVersion, MsgKind::kParams, id_, epoch_++, encode_params(w)}));
  }

  // ACK -> ok; ERROR -> not ok with the host's text.
  ApplyResult receive_reply() {
    const auto m = next();
    if (m.kind == MsgKind::kAck) return {};
    if (m.kind == MsgKind::kError) return {false, decode_error(m.payload).text};
    throw ProtocolError("expected ACK or ERROR");
  }

 private:
  WireMessage next() {
    auto f = ch_->receive();
    if (!f) throw ProtocolError("host link closed or empty");
    return decode_checked(*f);
  }

  std::uint32_t id_;
  std::unique_ptr<Channel> ch_;
  std::uint64_t epoch_ = 0;
};

}  // namespace bbrtune::agents
