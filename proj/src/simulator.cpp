#include "mmexit/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>
#include <type_traits>

#include "mmexit/errors.hpp"

namespace mmexit {

std::mt19937_64 block_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t block)
{
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), lo(stream), hi(stream), lo(block), hi(block)};
    return std::mt19937_64(seq);
}

namespace {

double uniform(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

double exponential(std::mt19937_64& rng, double rate) { return std::exponential_distribution<double>(rate)(rng); }

// Draw from the normalized sub-distribution; 0 when it carries no mass.
double sample_jump(const NegJumpDist& d, std::mt19937_64& rng)
{
    double total = d.total_mass();
    if (!(total > 0.0)) return 0.0;
    double pick = uniform(rng) * total;
    for (const auto& e : d.exponentials) {
        if (pick < e.weight) return -exponential(rng, e.rate);
        pick -= e.weight;
    }
    for (const auto& a : d.atoms) {
        if (pick < a.weight) return a.location;
        pick -= a.weight;
    }
    // Rounding left `pick` past the last component.
    if (!d.atoms.empty()) return d.atoms.back().location;
    return -exponential(rng, d.exponentials.back().rate);
}

int sample_row(const RealMatrix& P, int k, std::mt19937_64& rng)
{
    double pick = uniform(rng);
    const int m = static_cast<int>(P.cols());
    int last = k;
    for (int r = 0; r < m; ++r) {
        if (P(k, r) <= 0.0) continue;
        last = r;
        if (pick < P(k, r)) return r;
        pick -= P(k, r);
    }
    return last;
}

struct StopPlan {
    double horizon = std::numeric_limits<double>::infinity();
    bool exits = false;
    double upper = 0.0;
    double lower = 0.0;
    bool risk = false;
    double B = 0.0;
};

StopPlan plan_for(const StopRule& stop, std::mt19937_64& rng)
{
    StopPlan p;
    std::visit(
        [&](const auto& rule) {
            using R = std::decay_t<decltype(rule)>;
            if constexpr (std::is_same_v<R, FixedTime>) {
                if (!(rule.t >= 0.0)) throw ArgumentError("simulate: fixed time must be >= 0");
                p.horizon = rule.t;
            } else if constexpr (std::is_same_v<R, ExpKill>) {
                if (!(rule.s > 0.0)) throw ArgumentError("simulate: killing rate must be > 0");
                p.horizon = exponential(rng, rule.s);
            } else if constexpr (std::is_same_v<R, ExitInterval>) {
                if (!(rule.T > 0.0 && rule.x > 0.0 && rule.x < rule.T)) {
                    throw ArgumentError("simulate: exit interval needs 0 < x < T");
                }
                if (rule.s < 0.0) throw ArgumentError("simulate: killing rate must be >= 0");
                if (rule.s > 0.0) p.horizon = exponential(rng, rule.s);
                p.exits = true;
                p.upper = rule.x;
                p.lower = rule.x - rule.T;
            } else {
                if (!(rule.u > 0.0 && rule.u <= rule.B)) throw ArgumentError("simulate: reserve needs 0 < u <= B");
                if (rule.s > 0.0) {
                    p.horizon = exponential(rng, rule.s);
                } else if (rule.t > 0.0) {
                    p.horizon = rule.t;
                } else {
                    throw ArgumentError("simulate: risk run needs s > 0 or t > 0");
                }
                p.risk = true;
                p.B = rule.B;
            }
        },
        stop);
    return p;
}

} // namespace

PathSummary simulate_until(const ModelSpec& spec, int start, std::mt19937_64& rng, const StopRule& stop,
                           const SimulationOptions& opts, std::vector<PathEvent>* trace)
{
    if (start < 0 || start >= spec.m) throw ArgumentError("simulate: start state out of range");
    const StopPlan plan = plan_for(stop, rng);
    PathSummary out;
    out.state = start;
    if (plan.risk) out.reserve = std::get<RiskBarrier>(stop).u;
    double t = 0.0;
    auto record = [&](EventKind kind) {
        if (trace) trace->push_back({t, kind, out.state, out.xi});
    };
    while (true) {
        const int k = out.state;
        const double total = spec.nu(k) + spec.lambda(k);
        const double dt = total > 0.0 ? exponential(rng, total) : std::numeric_limits<double>::infinity();
        if (t + dt >= plan.horizon) {
            if (!std::isfinite(plan.horizon)) throw ArgumentError("simulate: path can never stop");
            out.stop_time = plan.horizon;
            return out;
        }
        if (++out.events > opts.max_events) {
            throw ConvergenceError("simulate: event budget exhausted before the stop rule", t);
        }
        t += dt;
        double jump = 0.0;
        EventKind kind;
        if (uniform(rng) * total < spec.nu(k)) {
            int r = sample_row(spec.P, k, rng);
            jump = sample_jump(spec.trans_jump[k][r], rng);
            out.state = r;
            kind = EventKind::chain_switch;
        } else if (uniform(rng) < spec.pos_jump_prob(k)) {
            jump = exponential(rng, spec.c(k));
            kind = EventKind::pos_jump;
        } else {
            jump = sample_jump(spec.neg_jump[k], rng);
            kind = plan.risk ? EventKind::claim : EventKind::neg_jump;
        }
        out.xi += jump;
        out.sup = std::max(out.sup, out.xi);
        if (plan.risk) {
            out.reserve += jump;
            if (out.reserve >= plan.B) {
                out.dividends += out.reserve - plan.B;
                out.reserve = plan.B;
                ++out.barrier_hits;
                kind = EventKind::barrier_hit;
            }
        }
        record(kind);
        if (plan.exits) {
            if (out.xi >= plan.upper) {
                out.side = ExitSide::up;
                out.overshoot = out.xi - plan.upper;
            } else if (out.xi <= plan.lower) {
                out.side = ExitSide::down;
                out.overshoot = out.xi - plan.lower;
            }
            if (out.side != ExitSide::none) {
                out.stop_time = t;
                return out;
            }
        }
    }
}

namespace {

using Functional = std::function<double(const PathSummary&, double, const McQuery&)>;

struct EstimandDef {
    std::string name;
    std::string level;
    bool risk = false;
    std::function<StopRule(const McQuery&)> stop;
    Functional value;
};

StopRule exit_rule(const McQuery& q) { return ExitInterval{q.x, q.T, q.s}; }
StopRule kill_rule(const McQuery& q) { return ExpKill{q.s}; }
StopRule risk_rule(const McQuery& q) { return RiskBarrier{q.B, q.u, q.s, 0.0}; }

double flag(bool b) { return b ? 1.0 : 0.0; }

const std::vector<EstimandDef>& definitions()
{
    using P = const PathSummary&;
    using Q = const McQuery&;
    static const std::vector<EstimandDef> defs = {
        {"BT", "unused", false, exit_rule, [](P p, double, Q) { return flag(p.side == ExitSide::up); }},
        {"BTlow", "unused", false, exit_rule, [](P p, double, Q) { return flag(p.side == ExitSide::down); }},
        {"B", "unused", false, exit_rule, [](P p, double, Q) { return flag(p.side != ExitSide::none); }},
        {"nonexit", "unused", false, exit_rule, [](P p, double, Q) { return flag(p.side == ExitSide::none); }},
        {"exitProb", "unused; runs without killing", false,
         [](Q q) { return StopRule(ExitInterval{q.x, q.T, 0.0}); },
         [](P p, double, Q) { return flag(p.side == ExitSide::up); }},
        {"killedCdf", "z: P{no exit, xi(theta) <= z}", false, exit_rule,
         [](P p, double z, Q) { return flag(p.side == ExitSide::none && p.xi <= z); }},
        {"overshootCdf", "z >= 0: P{upper exit, overshoot <= z}", false, exit_rule,
         [](P p, double z, Q) { return flag(p.side == ExitSide::up && p.overshoot <= z); }},
        {"upperTail", "z > x: P{upper exit, xi(tau) > z}", false, exit_rule,
         [](P p, double z, Q) { return flag(p.side == ExitSide::up && p.xi > z); }},
        {"lowerTail", "z < x - T: P{lower exit, xi(tau) < z}", false, exit_rule,
         [](P p, double z, Q) { return flag(p.side == ExitSide::down && p.xi < z); }},
        {"supTail", "x > 0: P{sup > x}", false, kill_rule, [](P p, double x, Q) { return flag(p.sup > x); }},
        {"pplus", "unused", false, kill_rule, [](P p, double, Q) { return flag(p.sup == 0.0); }},
        {"minusCdf", "y <= 0: P{xi - sup < y}", false, kill_rule,
         [](P p, double y, Q) { return flag(p.xi - p.sup < y); }},
        {"thetaCdf", "t: P{theta <= t}", false, kill_rule, [](P p, double t, Q) { return flag(p.stop_time <= t); }},
        {"occupancy", "unused; state at the fixed time t", false, [](Q q) { return StopRule(FixedTime{q.t}); },
         [](P, double, Q) { return 1.0; }},
        {"etaCfRe", "alpha: E cos(alpha eta)", true, risk_rule, [](P p, double a, Q) { return std::cos(a * p.reserve); }},
        {"etaCfIm", "alpha: E sin(alpha eta)", true, risk_rule, [](P p, double a, Q) { return std::sin(a * p.reserve); }},
        {"dividendLaplace", "mu >= 0: E exp(-mu Y)", true, risk_rule,
         [](P p, double mu, Q) { return std::exp(-mu * p.dividends); }},
        {"dividendMean", "unused", true, risk_rule, [](P p, double, Q) { return p.dividends; }},
        {"etaAtomLongRun", "unused; indicator eta(t) = B at the fixed time t", true,
         [](Q q) { return StopRule(RiskBarrier{q.B, q.u, 0.0, q.t}); },
         [](P p, double, Q q) { return flag(p.reserve == q.B); }},
    };
    return defs;
}

const EstimandDef& find_definition(const std::string& name)
{
    for (const auto& d : definitions()) {
        if (d.name == name) return d;
    }
    std::ostringstream os;
    os << "unknown estimand '" << name << "'; available:";
    for (const auto& d : definitions()) os << " " << d.name;
    throw ArgumentError(os.str());
}

// Neumaier compensated sum.
struct CompensatedSum {
    double sum = 0.0;
    double comp = 0.0;
    void add(double v)
    {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + comp; }
};

} // namespace

const std::vector<std::pair<std::string, std::string>>& estimand_catalog()
{
    static const std::vector<std::pair<std::string, std::string>> cat = [] {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& d : definitions()) out.emplace_back(d.name, d.level);
        return out;
    }();
    return cat;
}

bool is_risk_estimand(const std::string& name) { return find_definition(name).risk; }

int default_thread_count()
{
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("MMEXIT_THREADS")) {
        char* end = nullptr;
        long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1) n = std::min<long>(n, cap);
    }
    return n;
}

std::vector<McEstimate> estimate(const ModelSpec& spec, const McQuery& query, const std::vector<double>& levels_in,
                                 const McOptions& opts)
{
    const EstimandDef& def = find_definition(query.estimand);
    if (opts.n < 1) throw ArgumentError("estimate: n must be >= 1");
    require_valid(spec);
    const std::vector<double> levels = levels_in.empty() ? std::vector<double>{0.0} : levels_in;
    const int m = spec.m;
    const int L = static_cast<int>(levels.size());
    const StopRule rule = def.stop(query);

    // Work items are (start state, block); each keeps plain sums and squares per (level, end state).
    const long long blocks_per_state = (opts.n + kReplicationBlock - 1) / kReplicationBlock;
    const long long items = blocks_per_state * m;
    const std::size_t width = static_cast<std::size_t>(L) * m;
    std::vector<std::vector<double>> sums(items), squares(items);
    std::vector<std::exception_ptr> errors(items);

    std::atomic<long long> next{0};
    auto worker = [&] {
        for (long long item = next++; item < items; item = next++) {
            const int k = static_cast<int>(item / blocks_per_state);
            const long long b = item % blocks_per_state;
            const long long first = b * kReplicationBlock;
            const long long last = std::min(opts.n, first + kReplicationBlock);
            std::vector<double> s(width, 0.0), q(width, 0.0);
            try {
                auto rng = block_engine(opts.seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(b));
                for (long long i = first; i < last; ++i) {
                    PathSummary p = simulate_until(spec, k, rng, rule, opts.sim);
                    for (int l = 0; l < L; ++l) {
                        double v = def.value(p, levels[l], query);
                        std::size_t at = static_cast<std::size_t>(l) * m + p.state;
                        s[at] += v;
                        q[at] += v * v;
                    }
                }
            } catch (...) {
                errors[item] = std::current_exception();
            }
            sums[item] = std::move(s);
            squares[item] = std::move(q);
        }
    };
    int threads = opts.threads > 0 ? opts.threads : default_thread_count();
    threads = static_cast<int>(std::min<long long>(threads, items));
    std::vector<std::thread> pool;
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::vector<McEstimate> out(L);
    const double n = static_cast<double>(opts.n);
    for (int l = 0; l < L; ++l) {
        McEstimate& est = out[l];
        est.value = RealMatrix::Zero(m, m);
        est.std_err = RealMatrix::Zero(m, m);
        est.n = opts.n;
        est.seed = opts.seed;
        for (int k = 0; k < m; ++k) {
            for (int r = 0; r < m; ++r) {
                CompensatedSum s, q;
                std::size_t at = static_cast<std::size_t>(l) * m + r;
                for (long long b = 0; b < blocks_per_state; ++b) {
                    s.add(sums[k * blocks_per_state + b][at]);
                    q.add(squares[k * blocks_per_state + b][at]);
                }
                double mean = s.value() / n;
                double var = opts.n > 1 ? std::max(0.0, (q.value() - n * mean * mean) / (n - 1.0)) : 0.0;
                est.value(k, r) = mean;
                est.std_err(k, r) = std::sqrt(var / n);
            }
        }
    }
    return out;
}

std::vector<McEstimate> estimate(const RiskModelSpec& rs, McQuery query, const std::vector<double>& levels,
                                 const McOptions& opts)
{
    require_valid(rs);
    query.B = rs.B;
    query.u = rs.u;
    return estimate(rs.base, query, levels, opts);
}

} // namespace mmexit
