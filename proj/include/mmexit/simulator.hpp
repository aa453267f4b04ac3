#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "mmexit/linalg.hpp"
#include "mmexit/model.hpp"
#include "mmexit/risk_dividend.hpp"

namespace mmexit {

/// Replications are simulated in blocks of this size, each block with its own engine.
inline constexpr long long kReplicationBlock = 2048;

/// Engine of block `block` in stream `stream` of a run seeded with `seed`.
///
/// Streams separate independent uses of one seed (one per start state in `estimate`).
/// Block b covers replications [b * kReplicationBlock, (b + 1) * kReplicationBlock).
std::mt19937_64 block_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t block);

enum class EventKind { chain_switch, pos_jump, neg_jump, claim, barrier_hit };

struct PathEvent {
    double time = 0.0;
    EventKind kind = EventKind::chain_switch;
    int state = 0;
    double xi = 0.0;
};

struct FixedTime {
    double t = 0.0;
};
struct ExpKill {
    double s = 0.0;
};
/// Run until xi leaves (x - T, x), killed at an independent Exp(s) time (s = 0: never killed).
struct ExitInterval {
    double x = 0.0;
    double T = 0.0;
    double s = 0.0;
};
/// Reserve u + xi reflected below B, run to an Exp(s) time (s > 0) or to a fixed time t.
struct RiskBarrier {
    double B = 0.0;
    double u = 0.0;
    double s = 0.0;
    double t = 0.0;
};
using StopRule = std::variant<FixedTime, ExpKill, ExitInterval, RiskBarrier>;

enum class ExitSide { none, up, down };

struct PathSummary {
    double stop_time = 0.0;
    int state = 0;
    double xi = 0.0;
    double sup = 0.0;      // running supremum of xi, starts at 0
    ExitSide side = ExitSide::none;
    double overshoot = 0.0; // xi(tau) - x above, xi(tau) - (x - T) below
    double reserve = 0.0;
    double dividends = 0.0;
    long long barrier_hits = 0;
    long long events = 0;
};

struct SimulationOptions {
    long long max_events = 10'000'000;
};

/// Event-driven path from (xi, state) = (0, start). Records every event when `trace` is set.
///
/// In the risk stop rule positive jumps are premiums and negative ones claims; a premium
/// that would lift the reserve above B is cut there and the excess is paid as dividend.
PathSummary simulate_until(const ModelSpec& spec, int start, std::mt19937_64& rng, const StopRule& stop,
                           const SimulationOptions& opts = {}, std::vector<PathEvent>* trace = nullptr);

struct McEstimate {
    RealMatrix value;
    RealMatrix std_err;
    long long n = 0;
    std::uint64_t seed = 0;
};

/// Named Monte Carlo functional. Row k of every estimate uses n paths started in state k;
/// entry (k, r) averages the functional times the indicator of the final state r.
struct McQuery {
    std::string estimand;
    double s = 1.0;
    double x = 0.5;
    double T = 1.0;
    double t = 0.0;
    double B = 0.0;
    double u = 0.0;
};

/// Estimand names with the meaning of their level argument.
const std::vector<std::pair<std::string, std::string>>& estimand_catalog();
bool is_risk_estimand(const std::string& name);

struct McOptions {
    long long n = 100'000;
    std::uint64_t seed = 1;
    /// 0 picks the hardware concurrency, capped by MMEXIT_THREADS.
    int threads = 0;
    SimulationOptions sim;
};

/// One estimate per level, all computed on the same paths. Throws ArgumentError for an
/// unknown estimand (the message lists the catalog).
std::vector<McEstimate> estimate(const ModelSpec& spec, const McQuery& query,
                                 const std::vector<double>& levels, const McOptions& opts);
/// Risk estimands take B and u from the scenario.
std::vector<McEstimate> estimate(const RiskModelSpec& rs, McQuery query, const std::vector<double>& levels,
                                 const McOptions& opts);

/// Threads used by `estimate` when opts.threads == 0.
int default_thread_count();

} // namespace mmexit
