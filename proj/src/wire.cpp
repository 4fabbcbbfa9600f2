#include "magicrect/wire.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "magicrect/bell.hpp"

namespace mr {
namespace {

using nlohmann::json;

constexpr size_t kMaxFrame = 1 << 24;
const char* kVersion = "v1";

json parse_payload(const std::string& payload) {
    json j = json::parse(payload, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw WireError("malformed frame");
    return j;
}

std::string field_str(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw WireError("malformed frame");
    return j[key].get<std::string>();
}

long long field_int(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer()) throw WireError("malformed frame");
    return j[key].get<long long>();
}

// --- in-memory transport ----------------------------------------------------

struct MemCore {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::string> queue[2];  // queue[i]: messages waiting for endpoint i
    bool closed[2] = {false, false};
};

class MemChannel : public Channel {
public:
    MemChannel(std::shared_ptr<MemCore> core, int me) : core_(std::move(core)), me_(me) {}
    ~MemChannel() override { close(); }

    void send(const std::string& payload) override {
        std::lock_guard<std::mutex> lock(core_->mu);
        if (core_->closed[1 - me_] || core_->closed[me_]) throw ChannelClosed();
        core_->queue[1 - me_].push_back(payload);
        core_->cv.notify_all();
    }

    std::optional<std::string> recv(int timeout_ms) override {
        std::unique_lock<std::mutex> lock(core_->mu);
        auto ready = [&] { return !core_->queue[me_].empty() || core_->closed[1 - me_]; };
        if (timeout_ms < 0) {
            core_->cv.wait(lock, ready);
        } else if (!core_->cv.wait_for(lock, std::chrono::milliseconds(timeout_ms), ready)) {
            return std::nullopt;
        }
        if (!core_->queue[me_].empty()) {
            std::string out = std::move(core_->queue[me_].front());
            core_->queue[me_].pop_front();
            return out;
        }
        throw ChannelClosed();
    }

    void close() override {
        std::lock_guard<std::mutex> lock(core_->mu);
        core_->closed[me_] = true;
        core_->cv.notify_all();
    }

private:
    std::shared_ptr<MemCore> core_;
    int me_;
};

// --- TCP transport ----------------------------------------------------------

class FdChannel : public Channel {
public:
    // Frames are small and strictly request/response, so Nagle's algorithm
    // only adds delayed-ACK stalls; disable it.
    explicit FdChannel(int fd) : fd_(fd) {
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    ~FdChannel() override { close(); }

    void send(const std::string& payload) override {
        const std::string frame = encode_frame(payload);
        size_t off = 0;
        while (off < frame.size()) {
            ssize_t n = ::send(fd_, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ChannelClosed();
            }
            off += static_cast<size_t>(n);
        }
    }

    std::optional<std::string> recv(int timeout_ms) override {
        // The timeout covers waiting for the frame to start; once bytes are
        // flowing the remainder is read to completion.
        if (fd_ < 0) throw ChannelClosed();
        struct pollfd pfd{fd_, POLLIN, 0};
        int rc = ::poll(&pfd, 1, timeout_ms < 0 ? -1 : timeout_ms);
        if (rc == 0) return std::nullopt;
        if (rc < 0) throw ChannelClosed();
        unsigned char head[4];
        read_exact(head, 4);
        const size_t len = (size_t(head[0]) << 24) | (size_t(head[1]) << 16) |
                           (size_t(head[2]) << 8) | size_t(head[3]);
        if (len > kMaxFrame) throw WireError("oversized frame");
        std::string payload(len, '\0');
        read_exact(payload.data(), len);
        return payload;
    }

    void close() override {
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_RDWR);
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    void read_exact(void* buf, size_t len) {
        size_t off = 0;
        while (off < len) {
            ssize_t n = ::read(fd_, static_cast<char*>(buf) + off, len - off);
            if (n == 0) throw ChannelClosed();
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ChannelClosed();
            }
            off += static_cast<size_t>(n);
        }
    }

    int fd_;
};

// --- referee helpers --------------------------------------------------------

struct Hello {
    std::string role;
    int n = 0;
};

Hello read_hello(Channel& ch, int timeout_ms) {
    auto payload = ch.recv(timeout_ms);
    if (!payload) throw WireError("hello timeout");
    json j = parse_payload(*payload);
    if (field_str(j, "kind") != "hello" || field_str(j, "v") != kVersion)
        throw WireError("bad hello");
    Hello h{field_str(j, "role"), static_cast<int>(field_int(j, "n"))};
    if (h.role != "alice" && h.role != "bob") throw WireError("bad hello role");
    return h;
}

// Waits for this round's answer, discarding any stale late answers from
// voided rounds. Returns nullopt on timeout.
std::optional<std::vector<int>> await_answer(Channel& ch, long long round_id,
                                             std::chrono::steady_clock::time_point deadline) {
    for (;;) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - std::chrono::steady_clock::now())
                        .count();
        if (left < 0) left = 0;
        auto payload = ch.recv(static_cast<int>(left));
        if (!payload) return std::nullopt;
        json j = parse_payload(*payload);
        if (field_str(j, "kind") != "answer") throw WireError("unexpected message kind");
        const long long rid = field_int(j, "round-id");
        if (rid < round_id) continue;  // late answer for a voided round
        if (rid > round_id) throw WireError("answer for a future round");
        if (!j.contains("outputs") || !j["outputs"].is_array())
            throw WireError("malformed answer");
        std::vector<int> out;
        for (const auto& v : j["outputs"]) {
            if (!v.is_number_integer()) throw WireError("malformed answer");
            out.push_back(v.get<int>());
        }
        return out;
    }
}

}  // namespace

ChannelPair memory_channel() {
    auto core = std::make_shared<MemCore>();
    return {std::make_shared<MemChannel>(core, 0), std::make_shared<MemChannel>(core, 1)};
}

Listener::Listener(int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw WireError("socket failed");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        ::close(fd_);
        throw WireError("bind failed");
    }
    if (::listen(fd_, 8) < 0) {
        ::close(fd_);
        throw WireError("listen failed");
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

Listener::~Listener() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Channel> Listener::accept(int timeout_ms) {
    struct pollfd pfd{fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, timeout_ms < 0 ? -1 : timeout_ms);
    if (rc == 0) throw WireError("accept timeout");
    if (rc < 0) throw WireError("accept failed");
    int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) throw WireError("accept failed");
    return std::make_unique<FdChannel>(fd);
}

std::unique_ptr<Channel> tcp_connect(const std::string& host, int port, int timeout_ms,
                                     int retries, int retry_delay_ms) {
    (void)timeout_ms;
    for (int attempt = 0;; ++attempt) {
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd >= 0) {
            sockaddr_in addr{};
            addr.sin_family = AF_INET;
            addr.sin_port = htons(static_cast<uint16_t>(port));
            if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1 &&
                ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0)
                return std::make_unique<FdChannel>(fd);
            ::close(fd);
        }
        if (attempt >= retries) throw WireError("connect failed");
        std::this_thread::sleep_for(std::chrono::milliseconds(retry_delay_ms));
    }
}

std::string encode_frame(const std::string& payload) {
    if (payload.size() > kMaxFrame) throw WireError("oversized frame");
    std::string out;
    out.reserve(payload.size() + 4);
    const size_t len = payload.size();
    out.push_back(static_cast<char>((len >> 24) & 0xff));
    out.push_back(static_cast<char>((len >> 16) & 0xff));
    out.push_back(static_cast<char>((len >> 8) & 0xff));
    out.push_back(static_cast<char>(len & 0xff));
    out += payload;
    return out;
}

std::string msg_hello(const std::string& role, int n) {
    return json{{"kind", "hello"}, {"v", kVersion}, {"role", role}, {"n", n}}.dump();
}

std::string msg_question_alice(long long round_id, int x) {
    return json{{"kind", "question-alice"}, {"round-id", round_id}, {"x", x}}.dump();
}

std::string msg_question_bob(long long round_id, int c, int y) {
    return json{{"kind", "question-bob"}, {"round-id", round_id}, {"c", c}, {"y", y}}.dump();
}

std::string msg_answer(long long round_id, const std::vector<int>& outputs) {
    return json{{"kind", "answer"}, {"round-id", round_id}, {"outputs", outputs}}.dump();
}

std::string msg_round_result(long long round_id, bool accept) {
    return json{{"kind", "round-result"}, {"round-id", round_id}, {"accept", accept}}.dump();
}

std::string msg_end_session(long long rounds) {
    return json{{"kind", "end-session"}, {"rounds", rounds}}.dump();
}

Transcript referee_session(Channel& first, Channel& second, const WireRefereeConfig& cfg) {
    cfg.run.validate();
    const int n = cfg.run.n;
    const RoundMix mix = cfg.run.effective_mix();

    Hello h1 = read_hello(first, cfg.hello_timeout_ms);
    Hello h2 = read_hello(second, cfg.hello_timeout_ms);
    if (h1.role == h2.role) throw WireError("role conflict");
    if (h1.n != n || h2.n != n) throw WireError("prover n mismatch");
    Channel& alice = h1.role == "alice" ? first : second;
    Channel& bob = h1.role == "alice" ? second : first;

    Transcript t;
    t.n = n;
    t.seed = cfg.run.seed;
    t.mix = mix;
    t.device = "wire";

    for (int round = 0; round < cfg.run.rounds; ++round) {
        RngStream input_rng(cfg.run.seed, round, kInputLane);
        const Inputs in = sample_inputs(n, mix, input_rng);

        alice.send(msg_question_alice(round, in.x));
        bob.send(msg_question_bob(round, in.c, in.y));

        const auto deadline = std::chrono::steady_clock::now() +
                              std::chrono::milliseconds(cfg.answer_timeout_ms);
        auto a = await_answer(alice, round, deadline);
        auto b = await_answer(bob, round, deadline);
        if (!a || !b) {
            ++t.voided;
            std::fprintf(stderr, "round %d voided (answer timeout)\n", round);
            alice.send(msg_round_result(round, false));
            bob.send(msg_round_result(round, false));
            continue;
        }

        RoundRecord rec = score_round(n, round, in, *a, *b);
        t.records.push_back(rec);
        alice.send(msg_round_result(round, rec.accept));
        bob.send(msg_round_result(round, rec.accept));
    }

    const std::string end = msg_end_session(cfg.run.rounds);
    try {
        alice.send(end);
    } catch (const ChannelClosed&) {
    }
    try {
        bob.send(end);
    } catch (const ChannelClosed&) {
    }
    return t;
}

void state_session(Channel& first, Channel& second, const StateServiceConfig& cfg) {
    Hello h1 = read_hello(first, cfg.request_timeout_ms);
    Hello h2 = read_hello(second, cfg.request_timeout_ms);
    if (h1.role == h2.role) throw WireError("role conflict");
    if (h1.n != cfg.n || h2.n != cfg.n) throw WireError("prover n mismatch");
    Channel& alice = h1.role == "alice" ? first : second;
    Channel& bob = h1.role == "alice" ? second : first;

    auto read_request = [&](Channel& ch, const char* role) {
        auto payload = ch.recv(cfg.request_timeout_ms);
        if (!payload) throw WireError("state request timeout");
        json j = parse_payload(*payload);
        if (field_str(j, "kind") != "measure") throw WireError("unexpected message kind");
        if (field_str(j, "role") != role) throw WireError("request role mismatch");
        if (!j.contains("ops") || !j["ops"].is_array()) throw WireError("malformed request");
        return j;
    };

    for (;;) {
        json ja, jb;
        try {
            ja = read_request(alice, "alice");
            jb = read_request(bob, "bob");
        } catch (const ChannelClosed&) {
            return;  // session over
        }
        const long long round = field_int(ja, "round-id");
        if (field_int(jb, "round-id") != round) throw WireError("round desync");

        auto to_ops = [](const json& j) {
            std::vector<MeasureOp> ops;
            for (const auto& s : j["ops"]) {
                if (!s.is_string()) throw WireError("malformed request");
                ops.push_back(MeasureOp::from_pauli(PauliString::parse(s.get<std::string>())));
            }
            return ops;
        };
        std::vector<MeasureOp> aops = to_ops(ja), bops = to_ops(jb);

        SharedState st(cfg.n, cfg.noise);
        RngStream rng(cfg.seed, static_cast<uint64_t>(round), kMeasureLane);
        std::vector<int> avals = measure_joint(st, Side::Alice, aops, rng);
        std::vector<int> bvals = measure_joint(st, Side::Bob, bops, rng);

        alice.send(json{{"kind", "outcomes"}, {"round-id", round}, {"values", avals}}.dump());
        bob.send(json{{"kind", "outcomes"}, {"round-id", round}, {"values", bvals}}.dump());
    }
}

ProverStats prover_session(Channel& referee, Channel& state, const DeviceModel& dev,
                           const std::string& role, const ProverOptions& opts) {
    if (role != "alice" && role != "bob") throw WireError("bad role");
    if (!dev.wire_compatible())
        throw WireError("device has non-Pauli plans and cannot run over the wire");
    const int n = dev.pairs;
    referee.send(msg_hello(role, n));
    state.send(msg_hello(role, n));

    auto measure = [&](long long round, const MeasurePlan& plan) {
        json ops = json::array();
        for (const MeasureOp& op : plan.ops) ops.push_back(op.pauli.str());
        state.send(json{{"kind", "measure"},
                        {"round-id", round},
                        {"role", role},
                        {"ops", std::move(ops)}}
                       .dump());
        auto payload = state.recv(opts.recv_timeout_ms);
        if (!payload) throw WireError("state service timeout");
        json j = parse_payload(*payload);
        if (field_str(j, "kind") != "outcomes" || field_int(j, "round-id") != round)
            throw WireError("bad outcomes");
        std::vector<int> values;
        for (const auto& v : j["values"]) values.push_back(v.get<int>());
        return apply_outputs(plan, values);
    };

    ProverStats stats;
    for (;;) {
        auto payload = referee.recv(opts.recv_timeout_ms);
        if (!payload) throw WireError("referee timeout");
        json j = parse_payload(*payload);
        const std::string kind = field_str(j, "kind");
        if (kind == "end-session") break;
        if (kind == "round-result") {
            if (j.value("accept", false)) ++stats.accepted;
            continue;
        }
        if (kind == "question-alice") {
            if (role != "alice") throw WireError("question for the other role");
            const long long round = field_int(j, "round-id");
            const int x = static_cast<int>(field_int(j, "x"));
            if (x < 1 || x > 3) throw WireError("bad question");
            referee.send(msg_answer(round, measure(round, dev.alice_plan(x))));
            ++stats.answered;
            continue;
        }
        if (kind == "question-bob") {
            if (role != "bob") throw WireError("question for the other role");
            const long long round = field_int(j, "round-id");
            const int c = static_cast<int>(field_int(j, "c"));
            const int y = static_cast<int>(field_int(j, "y"));
            if (c < 0 || c > 2 || y < 1 || y > n) throw WireError("bad question");
            referee.send(msg_answer(round, measure(round, dev.bob_plan(c, y))));
            ++stats.answered;
            continue;
        }
        throw WireError("unexpected message kind");
    }
    state.close();
    return stats;
}

}  // namespace mr
