// Command-line front end. Talks to the library exclusively through the C
// API; everything here is flag parsing, JSON plumbing and table printing.
// Exit codes: 0 success, 1 verification/session failure, 2 usage or config
// error.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "magicrect.h"

using json = nlohmann::json;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct CliError {
    int code;
    std::string msg;
};

[[noreturn]] void die(const std::string& msg) { throw CliError{kExitUsage, msg}; }

int code_for(mr_status st) {
    switch (st) {
        case MR_ERR_INVALID_ARGUMENT:
        case MR_ERR_UNSUPPORTED:
        case MR_ERR_IO:
            return kExitUsage;
        default:
            return kExitFail;
    }
}

void check(mr_status st) {
    if (st != MR_OK) throw CliError{code_for(st), mr_last_error()};
}

struct Device {
    mr_device* d = nullptr;
    ~Device() { mr_device_free(d); }
};

struct TranscriptHandle {
    mr_transcript* t = nullptr;
    ~TranscriptHandle() { mr_transcript_free(t); }
};

struct Report {
    mr_report* r = nullptr;
    ~Report() { mr_report_free(r); }
    std::string text() const { return mr_report_json(r); }
    json object() const { return json::parse(text()); }
};

std::string out_dir() {
    const char* env = std::getenv("MR_OUTPUT_DIR");
    return env != nullptr && *env != '\0' ? std::string(env) : std::string(".");
}

std::string default_path(const std::string& stem) { return out_dir() + "/" + stem; }

json load_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) die(std::string("cannot open ") + what + " " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) die(std::string(what) + " " + path + " is not valid JSON");
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) die("cannot write " + path);
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

// honest | noisy | baseline-square | padded | <descriptor file>
std::string device_descriptor(const std::string& device, int n, double theta,
                              bool theta_given) {
    json d;
    if (device == "honest" || device == "noisy") {
        if (device == "noisy" && !theta_given) die("--device noisy needs --theta");
        d = {{"kind", "honest"}, {"n", n}};
        if (theta_given && theta != 0.0)
            d["noise"] = {{"kind", "uniform"}, {"theta", theta}};
    } else if (device == "baseline-square") {
        d = {{"kind", "baseline-square"}};
    } else if (device == "padded") {
        d = {{"kind", "padded"}, {"n", n}};
    } else {
        d = {{"file", device}};
    }
    return d.dump();
}

std::pair<std::string, int> split_host_port(const std::string& text, const char* what) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon + 1 >= text.size())
        die(std::string(what) + " must be host:port");
    int port = 0;
    try {
        port = std::stoi(text.substr(colon + 1));
    } catch (const std::exception&) {
        die(std::string(what) + " has a bad port");
    }
    std::string host = text.substr(0, colon);
    if (host.empty()) host = "127.0.0.1";
    return {host, port};
}

void print_family_table(const json& rep) {
    for (const auto& f : rep.at("families")) {
        std::printf("  %-5s eps_hat %-14.12g half-width %-14.12g upper %-14.12g%s\n",
                    f.at("name").get<std::string>().c_str(),
                    f.at("eps_hat").get<double>(), f.at("half_width").get<double>(),
                    f.at("upper").get<double>(),
                    f.at("complete").get<bool>() ? "" : " (incomplete)");
    }
}

void print_summary(const json& s) {
    std::printf("device %s  n %d  seed %llu\n", s.at("device").get<std::string>().c_str(),
                s.at("n").get<int>(),
                static_cast<unsigned long long>(s.at("seed").get<uint64_t>()));
    std::printf("rounds %lld  accepted %lld  voided %d\n",
                s.at("rounds").get<long long>(), s.at("accepted").get<long long>(),
                s.at("voided").get<int>());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"magic-rectangle protocol toolkit"};
    app.require_subcommand(1);
    int rc = 0;

    // ---- simulate ----------------------------------------------------------
    auto* sim = app.add_subcommand("simulate",
                                   "run protocol rounds and estimate the test epsilons");
    int sim_n = 3;
    std::string sim_device = "honest";
    double sim_theta = 0.0;
    uint64_t sim_seed = 1;
    int sim_rounds = 1000;
    int sim_threads = 0;
    double sim_alpha = 0.01;
    double sim_mix_game = 0.0, sim_mix_local = 0.0, sim_mix_pair = 0.0;
    std::string sim_transcript, sim_report, sim_config;
    sim->add_option("--n", sim_n, "sites per side (3 or 7, 11, ...)");
    sim->add_option("--device", sim_device,
                    "honest | noisy | baseline-square | padded | <descriptor file>");
    sim->add_option("--theta", sim_theta, "uniform noise angle (radians)");
    sim->add_option("--rounds", sim_rounds, "number of protocol rounds");
    sim->add_option("--seed", sim_seed, "run seed (echoed into output headers)");
    sim->add_option("--threads", sim_threads, "worker threads (0 = hardware)");
    sim->add_option("--alpha", sim_alpha, "estimator confidence parameter");
    sim->add_option("--mix-game", sim_mix_game, "game round probability");
    sim->add_option("--mix-local", sim_mix_local, "local check probability");
    sim->add_option("--mix-pair", sim_mix_pair, "pair check probability");
    sim->add_option("--transcript", sim_transcript, "transcript output path");
    sim->add_option("--report", sim_report, "epsilon report output path");
    sim->add_option("--config", sim_config, "JSON config file (flags take precedence)");
    sim->callback([&] {
        json cfg = sim_config.empty() ? json::object()
                                      : load_json_file(sim_config, "config file");
        auto pick = [&](const char* flag, const char* key, auto& slot) {
            if (sim->count(flag) == 0 && cfg.contains(key))
                slot = cfg.at(key).get<std::decay_t<decltype(slot)>>();
        };
        pick("--n", "n", sim_n);
        pick("--device", "device", sim_device);
        pick("--theta", "theta", sim_theta);
        pick("--rounds", "rounds", sim_rounds);
        pick("--seed", "seed", sim_seed);
        pick("--threads", "threads", sim_threads);
        pick("--alpha", "alpha", sim_alpha);
        pick("--transcript", "transcript", sim_transcript);
        pick("--report", "report", sim_report);
        const bool theta_given = sim->count("--theta") > 0 || cfg.contains("theta");
        bool mix_given = sim->count("--mix-game") + sim->count("--mix-local") +
                             sim->count("--mix-pair") >
                         0;
        if (!mix_given && cfg.contains("mix")) {
            const json& m = cfg.at("mix");
            sim_mix_game = m.value("game", 0.0);
            sim_mix_local = m.value("local", 0.0);
            sim_mix_pair = m.value("pair", 0.0);
            mix_given = true;
        }

        Device dev;
        check(mr_device_create(
            device_descriptor(sim_device, sim_n, sim_theta, theta_given).c_str(), &dev.d));

        json run{{"seed", sim_seed}, {"rounds", sim_rounds}, {"threads", sim_threads}};
        if (mix_given)
            run["mix"] = {{"game", sim_mix_game},
                          {"local", sim_mix_local},
                          {"pair", sim_mix_pair}};
        TranscriptHandle t;
        check(mr_run_protocol(dev.d, run.dump().c_str(), &t.t));

        Report summary;
        check(mr_transcript_summary(t.t, &summary.r));
        const json s = summary.object();
        const std::string tag =
            "-n" + std::to_string(s.at("n").get<int>()) + "-seed" + std::to_string(sim_seed);
        if (sim_transcript.empty())
            sim_transcript = default_path("transcript" + tag + ".jsonl");
        if (sim_report.empty()) sim_report = default_path("epsilons" + tag + ".json");

        check(mr_transcript_save(t.t, sim_transcript.c_str()));
        Report est;
        check(mr_estimate(t.t, sim_alpha, &est.r));
        write_text_file(sim_report, est.text());

        print_summary(s);
        print_family_table(est.object());
        std::printf("transcript %s\nreport %s\n", sim_transcript.c_str(),
                    sim_report.c_str());
    });

    // ---- bounds ------------------------------------------------------------
    auto* bnd = app.add_subcommand(
        "bounds", "closed-form bound catalog and the robustness radius delta");
    int bnd_n = 0;
    double bnd_eps0 = -1, bnd_eps1 = -1, bnd_eps2 = -1, bnd_eps = -1;
    std::string bnd_from, bnd_out;
    bnd->add_option("--n", bnd_n, "sites per side");
    bnd->add_option("--eps0", bnd_eps0, "game-round epsilon");
    bnd->add_option("--eps1", bnd_eps1, "local-check epsilon");
    bnd->add_option("--eps2", bnd_eps2, "pair-check epsilon");
    bnd->add_option("--eps", bnd_eps, "sets all three epsilons at once");
    bnd->add_option("--from-report", bnd_from,
                    "take n and the epsilon upper confidence ends from a simulate report");
    bnd->add_option("--out", bnd_out, "bound report output path");
    bnd->callback([&] {
        if (!bnd_from.empty()) {
            const json rep = load_json_file(bnd_from, "epsilon report");
            if (rep.value("kind", "") != "epsilon-report")
                die(bnd_from + " is not an epsilon report");
            if (bnd->count("--n") == 0) bnd_n = rep.at("n").get<int>();
            bnd_eps0 = bnd_eps1 = bnd_eps2 = 0.0;
            for (const auto& f : rep.at("families")) {
                const std::string name = f.at("name").get<std::string>();
                const double upper = f.at("upper").get<double>();
                if (name == "eps0") bnd_eps0 = upper;
                if (name == "eps1") bnd_eps1 = upper;
                if (name == "eps2") bnd_eps2 = upper;
            }
        } else {
            if (bnd_eps >= 0) {
                if (bnd_eps0 < 0) bnd_eps0 = bnd_eps;
                if (bnd_eps1 < 0) bnd_eps1 = bnd_eps;
                if (bnd_eps2 < 0) bnd_eps2 = bnd_eps;
            }
            if (bnd_n <= 0) die("bounds needs --n (or --from-report)");
            if (bnd_n == 3 && bnd_eps2 < 0) bnd_eps2 = 0.0;
            if (bnd_eps0 < 0 || bnd_eps1 < 0 || bnd_eps2 < 0)
                die("bounds needs --eps or all of --eps0/--eps1/--eps2");
        }
        for (double e : {bnd_eps0, bnd_eps1, bnd_eps2})
            if (e < 0 || e > 2) die("epsilons must lie in [0, 2]");

        Report rep;
        check(mr_bound_catalog(bnd_n, bnd_eps0, bnd_eps1, bnd_eps2, &rep.r));
        if (bnd_out.empty())
            bnd_out = default_path("bounds-n" + std::to_string(bnd_n) + ".jsonl");
        write_text_file(bnd_out, rep.text());

        std::istringstream lines(rep.text());
        std::string line;
        double delta = 0;
        std::string note;
        std::printf("n %d  eps %.12g / %.12g / %.12g\n", bnd_n, bnd_eps0, bnd_eps1,
                    bnd_eps2);
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line);
            if (j.value("kind", "") == "bound-report") {
                delta = j.at("delta").get<double>();
                note = j.at("note").get<std::string>();
                continue;
            }
            // Catalog-only reports carry no instance counts.
            const int instances = j.at("instances").get<int>();
            char counted[16] = "";
            if (instances > 0) std::snprintf(counted, sizeof counted, "%5d x", instances);
            std::printf("  %-22s %-9s %-7s  rhs %.12g\n",
                        j.at("name").get<std::string>().c_str(),
                        j.at("category").get<std::string>().c_str(), counted,
                        j.at("rhs").get<double>());
        }
        std::printf("delta %.12g\n%s\nreport %s\n", delta, note.c_str(), bnd_out.c_str());
    });

    // ---- verify-norms ------------------------------------------------------
    auto* ver = app.add_subcommand(
        "verify-norms", "measure every catalog bound on the honest shared state");
    int ver_n = 3;
    std::vector<double> ver_thetas;
    bool ver_inject = false;
    int ver_max_inst = 0;
    int ver_sigma = 6;
    uint64_t ver_sample_seed = 7;
    int ver_threads = 0;
    std::string ver_out;
    ver->add_option("--n", ver_n, "sites per side (3, 7 or 11)");
    ver->add_option("--theta", ver_thetas, "noise angles to verify at")->delimiter(',');
    ver->add_flag("--inject-bug", ver_inject,
                  "self-test: flip one catalog sign; the run must then fail");
    ver->add_option("--max-instances", ver_max_inst,
                    "cap enumerated instances per family (0 = default)");
    ver->add_option("--sigma-samples", ver_sigma,
                    "permutations per permutation-quantified family");
    ver->add_option("--sample-seed", ver_sample_seed,
                    "seed for capped instance selection (echoed in the header)");
    ver->add_option("--threads", ver_threads, "worker threads (0 = hardware)");
    ver->add_option("--out", ver_out, "ledger output path");
    ver->callback([&] {
        if (ver_thetas.empty()) ver_thetas = {0.0, 0.05, 0.1, 0.2, 0.5};
        if (ver_out.empty())
            ver_out = default_path("norms-n" + std::to_string(ver_n) + ".jsonl");
        std::ofstream file(ver_out);
        if (!file) die("cannot write " + ver_out);
        file << json{{"kind", "norm-ledger"},
                     {"n", ver_n},
                     {"thetas", ver_thetas},
                     {"seed", ver_sample_seed},
                     {"sigma_samples", ver_sigma},
                     {"inject_bug", ver_inject}}
                    .dump()
             << '\n';

        const json opts{{"inject_bug", ver_inject},
                        {"max_instances", ver_max_inst},
                        {"sample_seed", ver_sample_seed},
                        {"sigma_samples", ver_sigma},
                        {"threads", ver_threads}};
        bool all_pass = true;
        for (double theta : ver_thetas) {
            json desc{{"kind", "honest"}, {"n", ver_n}};
            if (theta != 0.0) desc["noise"] = {{"kind", "uniform"}, {"theta", theta}};
            Device dev;
            check(mr_device_create(desc.dump().c_str(), &dev.d));
            Report rep;
            check(mr_ledger_verify(dev.d, opts.dump().c_str(), &rep.r));
            file << rep.text();
            if (rep.text().empty() || rep.text().back() != '\n') file << '\n';

            std::istringstream lines(rep.text());
            std::string line;
            while (std::getline(lines, line)) {
                if (line.empty()) continue;
                const json j = json::parse(line);
                if (j.value("kind", "") == "bound-report") {
                    std::printf("theta %-6.12g delta %-14.12g %s\n",
                                j.at("theta").get<double>(), j.at("delta").get<double>(),
                                j.at("all_pass").get<bool>() ? "all entries hold"
                                                             : "ENTRIES FAILED");
                    all_pass = all_pass && j.at("all_pass").get<bool>();
                } else if (!j.at("pass").get<bool>()) {
                    std::printf("  FAIL %-22s %-28s lhs %.12g rhs %.12g margin %.12g\n",
                                j.at("name").get<std::string>().c_str(),
                                j.at("instance").get<std::string>().c_str(),
                                j.at("lhs").get<double>(), j.at("rhs").get<double>(),
                                j.at("margin").get<double>());
                }
            }
        }
        std::printf("norm ledger %s\n%s\n", all_pass ? "PASS" : "FAIL", ver_out.c_str());
        if (!all_pass) rc = kExitFail;
    });

    // ---- classical-value ---------------------------------------------------
    auto* cls = app.add_subcommand("classical-value",
                                   "exact classical value of a rectangle game");
    std::string cls_spec, cls_game;
    cls->add_option("spec", cls_spec,
                    "game spec file: {\"alpha\":[...],\"beta\":[...]} with +1/-1 entries");
    cls->add_option("--game", cls_game, "built-in game: magic-square | three-by-N");
    cls->callback([&] {
        json g;
        if (!cls_spec.empty()) {
            g = load_json_file(cls_spec, "game spec");
        } else if (cls_game == "magic-square") {
            g = {{"alpha", {1, 1, 1}}, {"beta", {-1, -1, -1}}};
        } else if (cls_game.rfind("three-by-", 0) == 0) {
            int n = 0;
            try {
                n = std::stoi(cls_game.substr(9));
            } catch (const std::exception&) {
                die("bad --game " + cls_game);
            }
            g = {{"alpha", {1, 1, 1}}, {"beta", std::vector<int>(n, -1)}};
        } else {
            die("classical-value needs a spec file or --game");
        }
        long long num = 0, den = 1;
        check(mr_classical_value(g.dump().c_str(), &num, &den));
        std::printf("%lld/%lld\n", num, den);
    });

    // ---- coloring ----------------------------------------------------------
    auto* col = app.add_subcommand("coloring", "round-robin edge coloring of K_n");
    int col_n = 7;
    col->add_option("--n", col_n, "odd number of vertices")->required();
    col->callback([&] {
        Report rep;
        check(mr_coloring(col_n, &rep.r));
        const json j = rep.object();
        for (const auto& cls_entry : j.at("classes")) {
            std::printf("%d:", cls_entry.at("color").get<int>());
            for (const auto& e : cls_entry.at("edges"))
                std::printf(" (%d,%d)", e.at(0).get<int>(), e.at(1).get<int>());
            std::printf("\n");
        }
        if (j.at("proper").get<bool>()) {
            std::printf("partition verified\n");
        } else {
            std::printf("IMPROPER COLORING\n");
            rc = kExitFail;
        }
    });

    // ---- serve-referee -----------------------------------------------------
    auto* srv = app.add_subcommand(
        "serve-referee", "host a wire referee session (plus the state service)");
    int srv_n = 3;
    uint64_t srv_seed = 1;
    int srv_rounds = 1000;
    int srv_port = 0, srv_state_port = 0;
    bool srv_no_state = false;
    double srv_theta = 0.0;
    double srv_mix_game = 0.0, srv_mix_local = 0.0, srv_mix_pair = 0.0;
    double srv_alpha = 0.01;
    int srv_hello = 30000, srv_answer = 10000;
    std::string srv_transcript, srv_report;
    srv->add_option("--n", srv_n, "sites per side");
    srv->add_option("--seed", srv_seed, "run seed");
    srv->add_option("--rounds", srv_rounds, "number of rounds");
    srv->add_option("--listen", srv_port, "referee port (0 = ephemeral, echoed)");
    srv->add_option("--state-listen", srv_state_port, "state service port (0 = ephemeral)");
    srv->add_flag("--no-state-service", srv_no_state,
                  "do not host the shared state (provers point elsewhere)");
    srv->add_option("--theta", srv_theta, "uniform noise angle for the hosted state");
    srv->add_option("--mix-game", srv_mix_game, "game round probability");
    srv->add_option("--mix-local", srv_mix_local, "local check probability");
    srv->add_option("--mix-pair", srv_mix_pair, "pair check probability");
    srv->add_option("--alpha", srv_alpha, "estimator confidence parameter");
    srv->add_option("--hello-timeout-ms", srv_hello, "handshake timeout");
    srv->add_option("--answer-timeout-ms", srv_answer, "per-round answer timeout");
    srv->add_option("--transcript", srv_transcript, "transcript output path");
    srv->add_option("--report", srv_report, "epsilon report output path");
    srv->callback([&] {
        json cfg{{"n", srv_n},
                 {"seed", srv_seed},
                 {"rounds", srv_rounds},
                 {"port", srv_port},
                 {"state_port", srv_state_port},
                 {"state_service", !srv_no_state},
                 {"alpha", srv_alpha},
                 {"hello_timeout_ms", srv_hello},
                 {"answer_timeout_ms", srv_answer}};
        if (srv->count("--mix-game") + srv->count("--mix-local") +
                srv->count("--mix-pair") >
            0)
            cfg["mix"] = {{"game", srv_mix_game},
                          {"local", srv_mix_local},
                          {"pair", srv_mix_pair}};
        if (srv_theta != 0.0) cfg["noise"] = {{"kind", "uniform"}, {"theta", srv_theta}};
        if (!srv_transcript.empty()) cfg["transcript_path"] = srv_transcript;
        if (!srv_report.empty()) cfg["report_path"] = srv_report;
        Report rep;
        check(mr_serve_referee(cfg.dump().c_str(), &rep.r));
        print_summary(rep.object());
    });

    // ---- state-service -----------------------------------------------------
    auto* sts = app.add_subcommand("state-service",
                                   "host the shared entangled state for two provers");
    int sts_n = 3;
    uint64_t sts_seed = 1;
    double sts_theta = 0.0;
    int sts_port = 0;
    int sts_timeout = 120000;
    sts->add_option("--n", sts_n, "sites per side");
    sts->add_option("--seed", sts_seed, "run seed (must match the referee)");
    sts->add_option("--theta", sts_theta, "uniform noise angle");
    sts->add_option("--listen", sts_port, "port (0 = ephemeral, echoed)");
    sts->add_option("--request-timeout-ms", sts_timeout, "per-request timeout");
    sts->callback([&] {
        json cfg{{"n", sts_n},
                 {"seed", sts_seed},
                 {"port", sts_port},
                 {"request_timeout_ms", sts_timeout}};
        if (sts_theta != 0.0) cfg["noise"] = {{"kind", "uniform"}, {"theta", sts_theta}};
        check(mr_run_state_service(cfg.dump().c_str()));
        std::printf("state service done\n");
    });

    // ---- prover ------------------------------------------------------------
    auto* prv = app.add_subcommand("prover", "run one prover endpoint");
    std::string prv_role;
    std::string prv_device = "honest";
    int prv_n = 3;
    std::string prv_connect, prv_state;
    int prv_timeout = 120000;
    int prv_retries = 25;
    prv->add_option("--role", prv_role, "alice | bob")->required();
    prv->add_option("--device", prv_device,
                    "honest | baseline-square | padded | <descriptor file>");
    prv->add_option("--n", prv_n, "sites per side");
    prv->add_option("--connect", prv_connect, "referee host:port")->required();
    prv->add_option("--state", prv_state, "state service host:port")->required();
    prv->add_option("--timeout-ms", prv_timeout, "receive timeout");
    prv->add_option("--retries", prv_retries, "connection retry attempts");
    prv->callback([&] {
        const auto [host, port] = split_host_port(prv_connect, "--connect");
        const auto [state_host, state_port] = split_host_port(prv_state, "--state");
        Device dev;
        check(mr_device_create(device_descriptor(prv_device, prv_n, 0.0, false).c_str(),
                               &dev.d));
        json cfg{{"role", prv_role},       {"host", host},
                 {"port", port},           {"state_host", state_host},
                 {"state_port", state_port}, {"timeout_ms", prv_timeout},
                 {"retries", prv_retries}};
        Report rep;
        check(mr_run_prover(dev.d, cfg.dump().c_str(), &rep.r));
        const json j = rep.object();
        std::printf("prover %s answered %lld accepted %lld\n",
                    j.at("role").get<std::string>().c_str(),
                    j.at("answered").get<long long>(),
                    j.at("accepted").get<long long>());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const CliError& e) {
        std::fprintf(stderr, "error: %s\n", e.msg.c_str());
        return e.code;
    }
    return rc;
}
