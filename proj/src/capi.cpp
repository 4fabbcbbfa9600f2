// C ABI layer: opaque handles own core objects, every entry point maps
// exceptions to status codes, and failure text lands in a thread-local
// buffer served by mr_last_error.

#include "magicrect.h"

#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "magicrect/bell.hpp"
#include "magicrect/bounds.hpp"
#include "magicrect/coloring.hpp"
#include "magicrect/games.hpp"
#include "magicrect/pauli.hpp"
#include "magicrect/protocol.hpp"
#include "magicrect/strategies.hpp"
#include "magicrect/wire.hpp"

using json = nlohmann::json;

struct mr_device {
    mr::DeviceModel model;
};

struct mr_transcript {
    mr::Transcript t;
};

struct mr_report {
    std::string text;
};

namespace {

thread_local std::string t_error;

mr_status fail(mr_status code, const std::string& msg) {
    t_error = msg;
    return code;
}

template <typename Fn>
mr_status guarded(Fn&& fn) {
    try {
        t_error.clear();
        return fn();
    } catch (const mr::WireError& e) {
        return fail(MR_ERR_PROTOCOL, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(MR_ERR_INVALID_ARGUMENT, e.what());
    } catch (const json::exception& e) {
        return fail(MR_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::runtime_error& e) {
        return fail(MR_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(MR_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(MR_ERR_INTERNAL, "unknown error");
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

json parse_object(const char* text, const char* what) {
    if (text == nullptr || *text == '\0') return json::object();
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw std::invalid_argument(std::string(what) + " must be a JSON object");
    return j;
}

mr_status emit(std::string text, mr_report** out) {
    *out = new mr_report{std::move(text)};
    return MR_OK;
}

mr::NoiseModel noise_field(const json& j, int n) {
    if (!j.contains("noise") || j["noise"].is_null()) return mr::NoiseModel::none();
    return mr::noise_from_json(j["noise"].dump(), n);
}

mr::DeviceModel build_device(const char* descriptor) {
    require(descriptor != nullptr && *descriptor != '\0', "empty device descriptor");
    json j = parse_object(descriptor, "device descriptor");
    if (j.contains("file")) return mr::device_from_file(j.at("file").get<std::string>());
    const std::string kind = j.value("kind", "custom");
    if (kind == "honest") {
        const int n = j.value("n", 3);
        return mr::make_honest_device(n, noise_field(j, n));
    }
    if (kind == "baseline-square") return mr::make_baseline_square_device();
    if (kind == "padded") return mr::make_padded_device(j.value("n", 7));
    if (kind == "custom") return mr::device_from_json(descriptor);
    throw std::invalid_argument("unknown device kind \"" + kind + "\"");
}

const char* kind_name(mr::DeviceKind k) {
    switch (k) {
        case mr::DeviceKind::Honest: return "honest";
        case mr::DeviceKind::BaselineSquare: return "baseline-square";
        case mr::DeviceKind::Padded: return "padded";
        case mr::DeviceKind::Custom: return "custom";
    }
    return "custom";
}

mr::RunConfig run_config(const json& j, int pairs) {
    mr::RunConfig cfg;
    cfg.n = j.value("n", pairs);
    cfg.seed = j.value("seed", uint64_t{1});
    cfg.rounds = j.value("rounds", 1000);
    cfg.threads = j.value("threads", 0);
    if (j.contains("mix")) {
        const json& m = j.at("mix");
        cfg.mix.game = m.value("game", 0.0);
        cfg.mix.local = m.value("local", 0.0);
        cfg.mix.pair = m.value("pair", 0.0);
    }
    return cfg;
}

std::string summary_json(const mr::Transcript& t) {
    return json{{"kind", "transcript-summary"},
                {"n", t.n},
                {"seed", t.seed},
                {"rounds", t.records.size() + static_cast<std::size_t>(t.voided)},
                {"scored", t.records.size()},
                {"accepted", t.accepted()},
                {"voided", t.voided},
                {"device", t.device},
                {"mix",
                 {{"game", t.mix.game}, {"local", t.mix.local}, {"pair", t.mix.pair}}}}
        .dump();
}

std::string normalize_role(std::string role) {
    if (role == "A" || role == "a" || role == "alice") return "alice";
    if (role == "B" || role == "b" || role == "bob") return "bob";
    throw std::invalid_argument("role must be alice or bob");
}

// Joins on scope exit so a referee failure cannot leak a running thread.
struct ThreadJoiner {
    std::thread t;
    ~ThreadJoiner() {
        if (t.joinable()) t.join();
    }
};

}  // namespace

extern "C" {

const char* mr_version(void) { return "0.1.0"; }

const char* mr_last_error(void) { return t_error.c_str(); }

mr_status mr_device_create(const char* descriptor_json, mr_device** out) {
    return guarded([&]() -> mr_status {
        require(out != nullptr, "null output pointer");
        auto dev = std::make_unique<mr_device>();
        dev->model = build_device(descriptor_json);
        *out = dev.release();
        return MR_OK;
    });
}

void mr_device_free(mr_device* dev) { delete dev; }

mr_status mr_device_describe(const mr_device* dev, mr_report** out) {
    return guarded([&]() -> mr_status {
        require(dev != nullptr && out != nullptr, "null argument");
        return emit(json{{"kind", "device"},
                         {"name", dev->model.name},
                         {"device-kind", kind_name(dev->model.kind)},
                         {"pairs", dev->model.pairs},
                         {"wire-compatible", dev->model.wire_compatible()}}
                        .dump(),
                    out);
    });
}

mr_status mr_run_protocol(const mr_device* dev, const char* config_json,
                          mr_transcript** out) {
    return guarded([&]() -> mr_status {
        require(dev != nullptr && out != nullptr, "null argument");
        const json j = parse_object(config_json, "run config");
        auto t = std::make_unique<mr_transcript>();
        t->t = mr::run_protocol(dev->model, run_config(j, dev->model.pairs));
        *out = t.release();
        return MR_OK;
    });
}

mr_status mr_transcript_save(const mr_transcript* t, const char* path) {
    return guarded([&]() -> mr_status {
        require(t != nullptr && path != nullptr, "null argument");
        mr::transcript_save(t->t, path);
        return MR_OK;
    });
}

mr_status mr_transcript_load(const char* path, mr_transcript** out) {
    return guarded([&]() -> mr_status {
        require(path != nullptr && out != nullptr, "null argument");
        auto t = std::make_unique<mr_transcript>();
        t->t = mr::transcript_load(path);
        *out = t.release();
        return MR_OK;
    });
}

mr_status mr_transcript_summary(const mr_transcript* t, mr_report** out) {
    return guarded([&]() -> mr_status {
        require(t != nullptr && out != nullptr, "null argument");
        return emit(summary_json(t->t), out);
    });
}

void mr_transcript_free(mr_transcript* t) { delete t; }

mr_status mr_estimate(const mr_transcript* t, double alpha, mr_report** out) {
    return guarded([&]() -> mr_status {
        require(t != nullptr && out != nullptr, "null argument");
        require(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
        return emit(mr::epsilon_report_json(mr::estimate_epsilons(t->t, alpha)), out);
    });
}

mr_status mr_bound_catalog(int n, double eps0, double eps1, double eps2,
                           mr_report** out) {
    return guarded([&]() -> mr_status {
        require(out != nullptr, "null output pointer");
        return emit(mr::bound_report_json(mr::bound_catalog(n, eps0, eps1, eps2)), out);
    });
}

mr_status mr_ledger_verify(const mr_device* dev, const char* options_json,
                           mr_report** out) {
    return guarded([&]() -> mr_status {
        require(dev != nullptr && out != nullptr, "null argument");
        if (dev->model.kind != mr::DeviceKind::Honest)
            return fail(MR_ERR_UNSUPPORTED, "norm verification runs on honest devices only");
        const json j = parse_object(options_json, "ledger options");
        mr::LedgerOptions opts;
        opts.inject_bug = j.value("inject_bug", false);
        opts.max_instances = j.value("max_instances", 0);
        opts.sample_seed = j.value("sample_seed", uint64_t{7});
        opts.sigma_samples = j.value("sigma_samples", 6);
        opts.threads = j.value("threads", 0);
        return emit(mr::bound_report_json(mr::ledger_verify(dev->model, opts)), out);
    });
}

mr_status mr_final_robustness(int n, double eps, double* out_delta) {
    return guarded([&]() -> mr_status {
        require(out_delta != nullptr, "null output pointer");
        *out_delta = mr::final_robustness(n, eps);
        return MR_OK;
    });
}

mr_status mr_classical_value(const char* game_json, long long* out_num,
                             long long* out_den) {
    return guarded([&]() -> mr_status {
        require(out_num != nullptr && out_den != nullptr, "null output pointer");
        const json j = parse_object(game_json, "game");
        mr::RectangleGame game;
        game.alpha = j.at("alpha").get<std::vector<int>>();
        game.beta = j.at("beta").get<std::vector<int>>();
        const mr::Fraction v = mr::classical_value(game);
        *out_num = v.num;
        *out_den = v.den;
        return MR_OK;
    });
}

mr_status mr_coloring(int n, mr_report** out) {
    return guarded([&]() -> mr_status {
        require(out != nullptr, "null output pointer");
        json classes = json::array();
        for (int v = 1; v <= n; ++v) {
            json edges = json::array();
            for (const auto& [i, j2] : mr::edges_of_color(n, v))
                edges.push_back(json::array({i, j2}));
            classes.push_back(json{{"color", v}, {"edges", std::move(edges)}});
        }
        return emit(json{{"kind", "coloring"},
                         {"n", n},
                         {"proper", mr::coloring_is_proper(n)},
                         {"classes", std::move(classes)}}
                        .dump(),
                    out);
    });
}

mr_status mr_bell_expectation(const mr_device* dev, const char* alice,
                              const char* bob, double* out) {
    return guarded([&]() -> mr_status {
        require(dev != nullptr && alice != nullptr && bob != nullptr && out != nullptr,
                "null argument");
        const mr::PauliString pa = mr::PauliString::parse(alice);
        const mr::PauliString pb = mr::PauliString::parse(bob);
        *out = mr::bell_expectation(dev->model.pairs, pa, pb, dev->model.noise);
        return MR_OK;
    });
}

mr_status mr_serve_referee(const char* config_json, mr_report** out) {
    return guarded([&]() -> mr_status {
        require(out != nullptr, "null output pointer");
        const json j = parse_object(config_json, "referee config");

        mr::WireRefereeConfig wc;
        wc.run = run_config(j, j.value("n", 3));
        wc.hello_timeout_ms = j.value("hello_timeout_ms", 30000);
        wc.answer_timeout_ms = j.value("answer_timeout_ms", 10000);
        wc.run.validate();

        mr::Listener referee_listener(j.value("port", 0));
        std::unique_ptr<mr::Listener> state_listener;
        if (j.value("state_service", true))
            state_listener = std::make_unique<mr::Listener>(j.value("state_port", 0));

        std::printf("referee port %d\n", referee_listener.port());
        if (state_listener) std::printf("state port %d\n", state_listener->port());
        std::fflush(stdout);

        auto a = referee_listener.accept(wc.hello_timeout_ms);
        auto b = referee_listener.accept(wc.hello_timeout_ms);

        std::unique_ptr<mr::Channel> sa, sb;
        ThreadJoiner state_thread;
        if (state_listener) {
            sa = state_listener->accept(wc.hello_timeout_ms);
            sb = state_listener->accept(wc.hello_timeout_ms);
            mr::StateServiceConfig sc;
            sc.n = wc.run.n;
            sc.seed = wc.run.seed;
            sc.noise = noise_field(j, wc.run.n);
            sc.request_timeout_ms = j.value("request_timeout_ms", 120000);
            state_thread.t = std::thread([&sa, &sb, sc] {
                try {
                    mr::state_session(*sa, *sb, sc);
                } catch (const std::exception& e) {
                    std::fprintf(stderr, "state service: %s\n", e.what());
                }
            });
        }

        mr::Transcript t;
        try {
            t = mr::referee_session(*a, *b, wc);
        } catch (...) {
            // Unblock the provers so the state thread can wind down before
            // the joiner waits on it.
            a->close();
            b->close();
            throw;
        }
        a->close();
        b->close();

        if (j.contains("transcript_path"))
            mr::transcript_save(t, j.at("transcript_path").get<std::string>());
        if (j.contains("report_path")) {
            const double alpha = j.value("alpha", 0.01);
            require(alpha > 0.0 && alpha < 1.0, "alpha must be in (0, 1)");
            std::ofstream f(j.at("report_path").get<std::string>());
            if (!f) throw std::runtime_error("cannot open report file");
            f << mr::epsilon_report_json(mr::estimate_epsilons(t, alpha)) << "\n";
        }
        return emit(summary_json(t), out);
    });
}

mr_status mr_run_prover(const mr_device* dev, const char* config_json,
                        mr_report** out) {
    return guarded([&]() -> mr_status {
        require(dev != nullptr && out != nullptr, "null argument");
        if (!dev->model.wire_compatible())
            return fail(MR_ERR_UNSUPPORTED,
                        "device has non-Pauli plans and cannot run over the wire");
        const json j = parse_object(config_json, "prover config");
        const std::string role = normalize_role(j.at("role").get<std::string>());
        const std::string host = j.value("host", "127.0.0.1");
        const int port = j.at("port").get<int>();
        const std::string state_host = j.value("state_host", host);
        const int state_port = j.at("state_port").get<int>();
        const int timeout = j.value("timeout_ms", 120000);
        const int retries = j.value("retries", 25);
        const int retry_delay = j.value("retry_delay_ms", 200);

        auto referee = mr::tcp_connect(host, port, timeout, retries, retry_delay);
        auto state = mr::tcp_connect(state_host, state_port, timeout, retries, retry_delay);
        mr::ProverOptions opts;
        opts.recv_timeout_ms = timeout;
        const mr::ProverStats stats =
            mr::prover_session(*referee, *state, dev->model, role, opts);
        return emit(json{{"kind", "prover-stats"},
                         {"role", role},
                         {"answered", stats.answered},
                         {"accepted", stats.accepted}}
                        .dump(),
                    out);
    });
}

mr_status mr_run_state_service(const char* config_json) {
    return guarded([&]() -> mr_status {
        const json j = parse_object(config_json, "state service config");
        mr::StateServiceConfig sc;
        sc.n = j.value("n", 3);
        sc.seed = j.value("seed", uint64_t{1});
        sc.noise = noise_field(j, sc.n);
        sc.request_timeout_ms = j.value("request_timeout_ms", 120000);

        mr::Listener listener(j.value("port", 0));
        std::printf("state port %d\n", listener.port());
        std::fflush(stdout);

        const int accept_timeout = j.value("accept_timeout_ms", 120000);
        auto a = listener.accept(accept_timeout);
        auto b = listener.accept(accept_timeout);
        mr::state_session(*a, *b, sc);
        return MR_OK;
    });
}

const char* mr_report_json(const mr_report* rep) {
    return rep != nullptr ? rep->text.c_str() : "";
}

void mr_report_free(mr_report* rep) { delete rep; }

}  // extern "C"
