#include "skylink/pat.hpp"

#include <algorithm>
#include <ostream>

#include "skylink/errors.hpp"

namespace skylink {

const char* to_string(LinkStateId s) {
    switch (s) {
        case LinkStateId::IDLE: return "IDLE";
        case LinkStateId::PROGRAM_TRACK: return "PROGRAM_TRACK";
        case LinkStateId::ACQUIRING: return "ACQUIRING";
        case LinkStateId::CLOSED_LOOP_TRACKING: return "CLOSED_LOOP_TRACKING";
        case LinkStateId::QKD_ACTIVE: return "QKD_ACTIVE";
        case LinkStateId::REACQUIRING: return "REACQUIRING";
        case LinkStateId::LOST: return "LOST";
        case LinkStateId::PASS_COMPLETE: return "PASS_COMPLETE";
    }
    return "?";
}

const char* to_string(LinkEventKind k) {
    switch (k) {
        case LinkEventKind::pass_start: return "pass_start";
        case LinkEventKind::uplink_beacon_detected: return "uplink_beacon_detected";
        case LinkEventKind::downlink_detected: return "downlink_detected";
        case LinkEventKind::downlink_lost: return "downlink_lost";
        case LinkEventKind::cloud_start: return "cloud_start";
        case LinkEventKind::cloud_end: return "cloud_end";
        case LinkEventKind::timeout: return "timeout";
        case LinkEventKind::pass_end: return "pass_end";
    }
    return "?";
}

LinkStateMachine::LinkStateMachine(double t0_s)
    : entered_at_s_(t0_s), last_event_s_(t0_s) {
    history_.push_back({state_, t0_s});
}

LinkStateMachine::StepResult LinkStateMachine::step(const LinkEvent& event) {
    if (event.t_s < last_event_s_)
        throw SequencingError("link event at t=" + std::to_string(event.t_s) +
                              " precedes t=" + std::to_string(last_event_s_));
    last_event_s_ = event.t_s;

    using S = LinkStateId;
    using E = LinkEventKind;
    StepResult result{state_, {}};

    // pass_end terminates the pass from every state.
    if (event.kind == E::pass_end) {
        if (state_ == S::QKD_ACTIVE) result.actions.push_back(LinkAction::qkd_halt);
        result.state = S::PASS_COMPLETE;
    } else {
        switch (state_) {
            case S::IDLE:
            case S::PASS_COMPLETE:
                if (event.kind == E::pass_start) result.state = S::PROGRAM_TRACK;
                break;
            case S::PROGRAM_TRACK:
                if (event.kind == E::uplink_beacon_detected) result.state = S::ACQUIRING;
                break;
            case S::ACQUIRING:
                if (event.kind == E::downlink_detected) {
                    result.state = S::CLOSED_LOOP_TRACKING;
                    result.actions.push_back(LinkAction::qkd_go);
                }
                break;
            case S::CLOSED_LOOP_TRACKING:
                if (event.kind == E::downlink_detected) {
                    // Steady downlink confirmation: transmission may start.
                    result.state = S::QKD_ACTIVE;
                } else if (event.kind == E::downlink_lost || event.kind == E::cloud_start) {
                    result.state = S::REACQUIRING;
                }
                break;
            case S::QKD_ACTIVE:
                if (event.kind == E::downlink_lost || event.kind == E::cloud_start) {
                    result.state = S::REACQUIRING;
                    result.actions.push_back(LinkAction::qkd_halt);
                }
                break;
            case S::REACQUIRING:
                if (event.kind == E::downlink_detected) {
                    result.state = S::CLOSED_LOOP_TRACKING;
                    result.actions.push_back(LinkAction::qkd_go);
                } else if (event.kind == E::timeout) {
                    result.state = S::LOST;
                } else if (event.kind == E::cloud_end || event.kind == E::cloud_start) {
                    // Waiting out the blockage: a handled no-op.
                }
                break;
            case S::LOST:
                break;
        }
        // Anything that did not change state and is not an explicitly
        // handled wait is a logged self-loop.
        bool handled_noop =
            state_ == S::REACQUIRING &&
            (event.kind == E::cloud_end || event.kind == E::cloud_start);
        if (result.state == state_ && !handled_noop)
            result.actions.push_back(LinkAction::warn_unhandled);
    }

    if (result.state != state_) {
        state_ = result.state;
        entered_at_s_ = event.t_s;
        history_.push_back({state_, event.t_s});
    }
    return result;
}

void PatTimingConfig::validate() const {
    for (double d : {uplink_acquire_delay_s, downlink_acquire_delay_s,
                     tracking_settle_delay_s, reacquire_delay_s})
        if (d < 0.0)
            throw ConfigError("pat delays must be >= 0");
    if (!(reacquire_timeout_s > 0.0))
        throw ConfigError("pat.reacquire_timeout_s must be > 0");
}

PassTimeline run_pass(const std::vector<PassSample>& pass,
                      const std::vector<std::pair<double, double>>& cloud_blockages,
                      const PatTimingConfig& delays, std::uint64_t seed) {
    (void)seed; // delays are currently deterministic; seed reserved for jitter
    delays.validate();

    PassTimeline out;
    if (pass.empty())
        return out; // no visibility: empty timeline, availability 0

    const double t0 = pass.front().t_s;
    const double t_end = pass.back().t_s;
    out.pass_start_s = t0;
    out.pass_end_s = t_end;

    auto clouds = cloud_blockages;
    std::sort(clouds.begin(), clouds.end());
    for (std::size_t i = 0; i < clouds.size(); ++i) {
        if (clouds[i].second <= clouds[i].first)
            throw ConfigError("run_pass: empty or inverted cloud interval");
        if (clouds[i].first < t0 || clouds[i].second > t_end)
            throw ConfigError("run_pass: cloud interval outside the pass window");
        if (i > 0 && clouds[i].first < clouds[i - 1].second)
            throw ConfigError("run_pass: overlapping cloud intervals");
    }

    // A downlink detection cannot happen while a cloud is in the way.
    auto blocked = [&clouds](double t) {
        for (const auto& [cs, ce] : clouds)
            if (t >= cs && t < ce) return true;
        return false;
    };

    // Event schedule. Acquisition chain, then per-cloud interruption and
    // re-acquisition (or timeout), all clipped to the pass window.
    std::vector<LinkEvent> events;
    events.push_back({LinkEventKind::pass_start, t0});
    double t_beacon = t0 + delays.uplink_acquire_delay_s;
    double t_track = t_beacon + delays.downlink_acquire_delay_s;
    double t_go = t_track + delays.tracking_settle_delay_s;
    if (t_beacon <= t_end) events.push_back({LinkEventKind::uplink_beacon_detected, t_beacon});
    if (t_track <= t_end && !blocked(t_track))
        events.push_back({LinkEventKind::downlink_detected, t_track});
    if (t_go <= t_end && !blocked(t_go))
        events.push_back({LinkEventKind::downlink_detected, t_go});

    bool lost = false;
    double reacq_since = -1.0; // start of the current re-acquisition span
    for (const auto& [cs, ce] : clouds) {
        if (lost) break; // LOST is terminal for the pass
        events.push_back({LinkEventKind::cloud_start, cs});
        events.push_back({LinkEventKind::cloud_end, ce});
        if (reacq_since < 0.0) reacq_since = cs;

        double t_redetect = ce + delays.reacquire_delay_s;
        if (t_redetect - reacq_since > delays.reacquire_timeout_s) {
            double t_lost = reacq_since + delays.reacquire_timeout_s;
            if (t_lost <= t_end) {
                events.push_back({LinkEventKind::timeout, t_lost});
                lost = true;
            }
            continue;
        }
        if (blocked(t_redetect))
            continue; // the next cloud is already in the way: span continues
        double t_reconfirm = t_redetect + delays.tracking_settle_delay_s;
        if (t_redetect <= t_end) events.push_back({LinkEventKind::downlink_detected, t_redetect});
        if (t_reconfirm <= t_end && !blocked(t_reconfirm))
            events.push_back({LinkEventKind::downlink_detected, t_reconfirm});
        reacq_since = -1.0;
    }
    events.push_back({LinkEventKind::pass_end, t_end});

    std::stable_sort(events.begin(), events.end(),
                     [](const LinkEvent& a, const LinkEvent& b) { return a.t_s < b.t_s; });

    LinkStateMachine machine(t0);
    for (const LinkEvent& e : events) machine.step(e);

    out.events = std::move(events);
    out.timeline = machine.history();
    out.lost = lost;

    // Interval arithmetic over the recorded transitions.
    double active = 0.0;
    for (std::size_t i = 0; i + 1 < out.timeline.size(); ++i) {
        if (out.timeline[i].state != LinkStateId::QKD_ACTIVE) continue;
        double a = out.timeline[i].t_s;
        double b = out.timeline[i + 1].t_s;
        active += b - a;
        out.qkd_windows.emplace_back(a, b);
    }
    double total = t_end - t0;
    out.availability_fraction = total > 0.0 ? active / total : 0.0;
    return out;
}

void write_timeline_csv(std::ostream& out, const std::vector<LinkTransition>& timeline) {
    out << "t_s,state\n";
    for (const auto& t : timeline) out << t.t_s << ',' << to_string(t.state) << '\n';
}

} // namespace skylink
