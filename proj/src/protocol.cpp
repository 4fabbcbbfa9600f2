#include "magicrect/protocol.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "magicrect/coloring.hpp"

namespace mr {

namespace {

using nlohmann::json;

bool sign_vector(const std::vector<int>& v, std::size_t want) {
    if (v.size() != want) return false;
    for (int s : v)
        if (s != 1 && s != -1) return false;
    return true;
}

std::string key_game(int x, int y) {
    return "g:" + std::to_string(x) + "," + std::to_string(y);
}
std::string key_local(char axis, int q) { return std::string(1, axis) + ":" + std::to_string(q); }
std::string key_pair(char axis, int i, int j) {
    return std::string(2, axis) + ":" + std::to_string(i) + "," + std::to_string(j);
}

}  // namespace

RoundMix RoundMix::standard(int n) {
    if (n == 3) return {0.5, 0.5, 0.0};
    return {1.0 / 3, 1.0 / 3, 1.0 / 3};
}

bool RoundMix::valid(int n) const {
    if (game < 0 || local < 0 || pair < 0) return false;
    if (std::abs(game + local + pair - 1.0) > 1e-9) return false;
    if (n == 3 && pair != 0.0) return false;
    return true;
}

RoundMix RunConfig::effective_mix() const {
    if (mix.game == 0 && mix.local == 0 && mix.pair == 0) return RoundMix::standard(n);
    return mix;
}

void RunConfig::validate() const {
    if (n != 3 && (n < 7 || n % 4 != 3))
        throw std::invalid_argument("n must be 3 or congruent to 3 mod 4");
    if (n > kMaxDensePairs) throw std::invalid_argument("n exceeds the dense engine limit");
    if (rounds <= 0) throw std::invalid_argument("round count must be positive");
    if (!effective_mix().valid(n)) throw std::invalid_argument("round mix is invalid for n");
}

Inputs sample_inputs(int n, const RoundMix& mix, RngStream& rng) {
    Inputs in;
    const double u = rng.uniform();
    in.c = u < mix.game ? 0 : u < mix.game + mix.local ? 1 : 2;
    in.x = 1 + static_cast<int>(rng.integer(3));
    in.y = 1 + static_cast<int>(rng.integer(n));
    return in;
}

std::vector<std::string> round_member_keys(int n, int c, int x, int y) {
    std::vector<std::string> keys;
    if (c == 0) {
        keys.push_back(key_game(x, y));
    } else if (c == 1) {
        if (x == 1) keys.push_back(key_local('X', y));
        if (x == 3)
            for (int j = 1; j <= n; ++j)
                if (j != y) keys.push_back(key_local('Z', j));
    } else {
        if (x == 1 || x == 3)
            for (auto [i, j] : edges_of_color(n, y))
                keys.push_back(key_pair(x == 1 ? 'X' : 'Z', i, j));
    }
    return keys;
}

RoundRecord score_round(int n, int round_id, const Inputs& in,
                        const std::vector<int>& a, const std::vector<int>& b) {
    RoundRecord rec;
    rec.round = round_id;
    rec.c = in.c;
    rec.x = in.x;
    rec.y = in.y;
    rec.a = a;
    rec.b = b;

    const std::size_t b_arity = in.c == 0 ? 3 : in.c == 1 ? n : n - 1;
    bool wellformed = sign_vector(a, n) && sign_vector(b, b_arity);
    if (wellformed && in.c == 0 && b[0] * b[1] * b[2] != -1) wellformed = false;

    const std::size_t member_count = round_member_keys(n, in.c, in.x, in.y).size();
    rec.sub.assign(member_count, 0);
    if (!wellformed) {
        rec.accept = false;
        return rec;
    }

    rec.accept = true;
    auto set_sub = [&](std::size_t idx, bool ok) {
        rec.sub[idx] = ok ? 1 : 0;
        if (!ok) rec.accept = false;
    };

    if (in.c == 0) {
        int p = 1;
        for (int k = 1; k <= n; ++k)
            if (k != in.y) p *= a[k - 1];
        set_sub(0, p == b[in.x - 1]);
    } else if (in.c == 1) {
        if (in.x == 1) set_sub(0, a[in.y - 1] * b[in.y - 1] == 1);
        if (in.x == 3) {
            std::size_t idx = 0;
            for (int j = 1; j <= n; ++j)
                if (j != in.y) set_sub(idx++, a[j - 1] * b[j - 1] == 1);
        }
    } else if (in.x == 1 || in.x == 3) {
        const auto edges = edges_of_color(n, in.y);
        const std::size_t half = edges.size();
        for (std::size_t k = 0; k < half; ++k) {
            auto [i, j] = edges[k];
            const int bk = b[in.x == 1 ? k : half + k];
            set_sub(k, a[i - 1] * a[j - 1] * bk == 1);
        }
    }
    return rec;
}

long long Transcript::accepted() const {
    long long acc = 0;
    for (const RoundRecord& r : records) acc += r.accept ? 1 : 0;
    return acc;
}

// --- epsilon estimation ----------------------------------------------------

double MemberStat::rate_half_width(double alpha) const {
    if (samples <= 0) return 2.0;
    return std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(samples)));
}

bool FamilyEstimate::complete() const {
    for (const MemberStat& m : members)
        if (m.samples == 0) return false;
    return !members.empty();
}

double FamilyEstimate::eps_hat() const {
    double v = 0;
    for (const MemberStat& m : members)
        if (m.samples > 0) v = std::max(v, m.eps());
    return v;
}

double FamilyEstimate::half_width() const {
    double v = 0;
    for (const MemberStat& m : members)
        if (m.samples > 0) v = std::max(v, m.eps_half_width(alpha_member));
    return v;
}

double FamilyEstimate::upper() const {
    if (!complete()) return 2.0;
    double v = 0;
    for (const MemberStat& m : members)
        v = std::max(v, m.eps() + m.eps_half_width(alpha_member));
    return std::min(v, 2.0);
}

const FamilyEstimate& EpsilonReport::family(const std::string& name) const {
    for (const FamilyEstimate& f : families)
        if (f.name == name) return f;
    throw std::out_of_range("no such family " + name);
}

EpsilonReport make_empty_report(int n, double alpha) {
    EpsilonReport rep;
    rep.n = n;
    rep.alpha = alpha;

    FamilyEstimate e0{"eps0"};
    for (int x = 1; x <= 3; ++x)
        for (int y = 1; y <= n; ++y) e0.members.push_back({key_game(x, y)});
    FamilyEstimate e1{"eps1"};
    for (int i = 1; i <= n; ++i) e1.members.push_back({key_local('X', i)});
    for (int i = 1; i <= n; ++i) e1.members.push_back({key_local('Z', i)});
    rep.families = {std::move(e0), std::move(e1)};
    if (n > 3) {
        FamilyEstimate e2{"eps2"};
        for (char axis : {'X', 'Z'})
            for (int i = 1; i <= n; ++i)
                for (int j = i + 1; j <= n; ++j) e2.members.push_back({key_pair(axis, i, j)});
        rep.families.push_back(std::move(e2));
    }
    for (FamilyEstimate& f : rep.families)
        f.alpha_member = alpha / static_cast<double>(f.members.size());
    return rep;
}

void tally_record(EpsilonReport& report, int n, const RoundRecord& rec) {
    const auto keys = round_member_keys(n, rec.c, rec.x, rec.y);
    if (keys.size() != rec.sub.size())
        throw std::invalid_argument("record sub-accept arity does not match its inputs");
    if (keys.empty()) return;
    FamilyEstimate& fam = report.families.at(rec.c);
    for (std::size_t i = 0; i < keys.size(); ++i) {
        bool found = false;
        for (MemberStat& m : fam.members) {
            if (m.key == keys[i]) {
                ++m.samples;
                m.passes += rec.sub[i] ? 1 : 0;
                found = true;
                break;
            }
        }
        if (!found) throw std::logic_error("unknown member key " + keys[i]);
    }
}

EpsilonReport estimate_epsilons(const Transcript& t, double alpha) {
    EpsilonReport rep = make_empty_report(t.n, alpha);
    rep.seed = t.seed;
    for (const RoundRecord& rec : t.records) {
        tally_record(rep, t.n, rec);
        ++rep.rounds;
    }
    return rep;
}

// --- protocol runner --------------------------------------------------------

RoundRecord run_round(const DeviceModel& dev, const RunConfig& cfg, int round_id) {
    RngStream input_rng(cfg.seed, round_id, kInputLane);
    const Inputs in = sample_inputs(dev.pairs, cfg.effective_mix(), input_rng);

    SharedState st(dev.pairs, dev.noise);
    RngStream measure_rng(cfg.seed, round_id, kMeasureLane);
    const MeasurePlan& ap = dev.alice_plan(in.x);
    std::vector<int> a = apply_outputs(ap, measure_joint(st, Side::Alice, ap.ops, measure_rng));
    const MeasurePlan& bp = dev.bob_plan(in.c, in.y);
    std::vector<int> b = apply_outputs(bp, measure_joint(st, Side::Bob, bp.ops, measure_rng));

    return score_round(dev.pairs, round_id, in, a, b);
}

Transcript run_protocol(const DeviceModel& dev, const RunConfig& cfg,
                        EpsilonReport* streaming) {
    RunConfig local = cfg;
    if (local.n == 0) local.n = dev.pairs;
    local.validate();
    if (local.n != dev.pairs)
        throw std::invalid_argument("config n does not match the device");
    if (local.effective_mix().pair > 0 && !dev.has_pair_rounds())
        throw std::invalid_argument("device has no pair-check plans");

    Transcript t;
    t.n = dev.pairs;
    t.seed = local.seed;
    t.mix = local.effective_mix();
    t.device = dev.name;
    t.records.resize(local.rounds);

    unsigned hw = std::thread::hardware_concurrency();
    int nthreads = local.threads > 0 ? local.threads : static_cast<int>(hw ? hw : 1);
    nthreads = std::max(1, std::min(nthreads, local.rounds));

    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::string error;
    std::mutex error_mu;
    auto worker = [&] {
        int r;
        while (!failed.load(std::memory_order_relaxed) &&
               (r = next.fetch_add(1)) < local.rounds) {
            try {
                t.records[r] = run_round(dev, local, r);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mu);
                failed = true;
                error = e.what();
            }
        }
    };
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    if (failed) throw std::runtime_error(error);

    if (streaming) {
        *streaming = make_empty_report(t.n, streaming->alpha > 0 ? streaming->alpha : 0.01);
        streaming->seed = t.seed;
        for (const RoundRecord& rec : t.records) {
            tally_record(*streaming, t.n, rec);
            ++streaming->rounds;
        }
    }
    return t;
}

// --- serialization ----------------------------------------------------------

void transcript_save(const Transcript& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    json header = {
        {"kind", "transcript"},
        {"n", t.n},
        {"seed", t.seed},
        {"rounds", t.records.size()},
        {"mix", {{"game", t.mix.game}, {"local", t.mix.local}, {"pair", t.mix.pair}}},
        {"device", t.device},
        {"voided", t.voided},
    };
    out << header.dump() << '\n';
    for (const RoundRecord& r : t.records) {
        json rec = {
            {"round", r.round}, {"c", r.c},   {"x", r.x},
            {"y", r.y},         {"a", r.a},   {"b", r.b},
            {"accept", r.accept},
            {"sub", std::vector<int>(r.sub.begin(), r.sub.end())},
        };
        out << rec.dump() << '\n';
    }
}

Transcript transcript_load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty transcript " + path);
    json header = json::parse(line);
    if (header.value("kind", "") != "transcript")
        throw std::runtime_error("not a transcript file: " + path);
    Transcript t;
    t.n = header.at("n").get<int>();
    t.seed = header.at("seed").get<uint64_t>();
    t.mix.game = header.at("mix").at("game").get<double>();
    t.mix.local = header.at("mix").at("local").get<double>();
    t.mix.pair = header.at("mix").at("pair").get<double>();
    t.device = header.value("device", "");
    t.voided = header.value("voided", 0);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        RoundRecord r;
        r.round = rec.at("round").get<int>();
        r.c = rec.at("c").get<int>();
        r.x = rec.at("x").get<int>();
        r.y = rec.at("y").get<int>();
        r.a = rec.at("a").get<std::vector<int>>();
        r.b = rec.at("b").get<std::vector<int>>();
        r.accept = rec.at("accept").get<bool>();
        for (int s : rec.at("sub").get<std::vector<int>>())
            r.sub.push_back(static_cast<uint8_t>(s));
        t.records.push_back(std::move(r));
    }
    return t;
}

std::string epsilon_report_json(const EpsilonReport& report) {
    json fams = json::array();
    for (const FamilyEstimate& f : report.families) {
        json members = json::array();
        for (const MemberStat& m : f.members) {
            members.push_back({
                {"key", m.key},
                {"samples", m.samples},
                {"passes", m.passes},
                {"rate", m.rate()},
                {"eps", m.eps()},
                {"rate_half_width", m.rate_half_width(f.alpha_member)},
                {"eps_half_width", m.eps_half_width(f.alpha_member)},
            });
        }
        fams.push_back({
            {"name", f.name},
            {"alpha_member", f.alpha_member},
            {"eps_hat", f.eps_hat()},
            {"half_width", f.half_width()},
            {"upper", f.upper()},
            {"complete", f.complete()},
            {"members", std::move(members)},
        });
    }
    json out = {
        {"kind", "epsilon-report"},
        {"n", report.n},
        {"seed", report.seed},
        {"alpha", report.alpha},
        {"rounds", report.rounds},
        {"families", std::move(fams)},
    };
    return out.dump();
}

}  // namespace mr
