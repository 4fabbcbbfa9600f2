#pragma once

// Multi-process protocol harness. A referee drives two prover processes over
// length-prefixed JSON frames; a state-owner service performs the joint
// measurements, so neither prover ever sees the other's inputs. An in-memory
// channel implements the same endpoint contract for tests.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "magicrect/protocol.hpp"

namespace mr {

struct WireError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ChannelClosed : WireError {
    ChannelClosed() : WireError("channel closed") {}
};

// One reliable ordered message stream. send() delivers one payload; recv()
// returns the next payload, nullopt on timeout (timeout_ms < 0 blocks), and
// throws ChannelClosed once the peer has hung up and the queue is drained.
class Channel {
public:
    virtual ~Channel() = default;
    virtual void send(const std::string& payload) = 0;
    virtual std::optional<std::string> recv(int timeout_ms) = 0;
    virtual void close() = 0;
};

// Connected endpoint pair backed by in-process queues.
struct ChannelPair {
    std::shared_ptr<Channel> left, right;
};
ChannelPair memory_channel();

// Loopback TCP listener; port 0 picks an ephemeral port.
class Listener {
public:
    explicit Listener(int port);
    ~Listener();
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;
    int port() const { return port_; }
    std::unique_ptr<Channel> accept(int timeout_ms);

private:
    int fd_ = -1;
    int port_ = 0;
};

std::unique_ptr<Channel> tcp_connect(const std::string& host, int port, int timeout_ms,
                                     int retries = 0, int retry_delay_ms = 200);

// 4-byte big-endian length prefix around one payload.
std::string encode_frame(const std::string& payload);

// Message payloads. Serializers emit exactly the listed fields; in
// particular a question to Alice carries kind, round-id and x and nothing
// else, so her endpoint structurally cannot learn (c, y).
std::string msg_hello(const std::string& role, int n);
std::string msg_question_alice(long long round_id, int x);
std::string msg_question_bob(long long round_id, int c, int y);
std::string msg_answer(long long round_id, const std::vector<int>& outputs);
std::string msg_round_result(long long round_id, bool accept);
std::string msg_end_session(long long rounds);

struct WireRefereeConfig {
    RunConfig run;
    int hello_timeout_ms = 30000;
    int answer_timeout_ms = 10000;
};

// Full referee session over two prover channels (either role order; the
// hello handshake sorts them out). Per round: send both questions, await
// both answers, score with the in-process predicates, emit round-result.
// An answer timeout voids the round and the session continues; malformed
// frames, version/role conflicts and hangups abort by throwing.
Transcript referee_session(Channel& first, Channel& second, const WireRefereeConfig& cfg);

struct StateServiceConfig {
    int n = 3;
    uint64_t seed = 1;
    NoiseModel noise;
    int request_timeout_ms = 120000;
};

// Owns the shared state: each round it collects one measurement request per
// role, prepares a fresh noisy state, measures Alice's batch first with the
// round's dedicated stream (matching the in-process runner draw for draw)
// and replies with the outcomes. Returns when a prover hangs up.
void state_session(Channel& first, Channel& second, const StateServiceConfig& cfg);

struct ProverStats {
    long long answered = 0;
    long long accepted = 0;
};

struct ProverOptions {
    int recv_timeout_ms = 120000;
};

// Prover main loop for one role: measure through the state service, apply
// the device's output map, answer. Questions for the other role abort.
ProverStats prover_session(Channel& referee, Channel& state, const DeviceModel& dev,
                           const std::string& role, const ProverOptions& opts = {});

}  // namespace mr
