// Pointing-acquisition-tracking link state machine and the pass driver
// that schedules acquisition, cloud interruptions, re-acquisition and
// timeout events over a pass profile.

#ifndef SKYLINK_PAT_HPP
#define SKYLINK_PAT_HPP

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "skylink/pass_geometry.hpp"

namespace skylink {

enum class LinkStateId : std::uint8_t {
    IDLE,
    PROGRAM_TRACK,
    ACQUIRING,
    CLOSED_LOOP_TRACKING,
    QKD_ACTIVE,
    REACQUIRING,
    LOST,
    PASS_COMPLETE,
};
const char* to_string(LinkStateId s);

enum class LinkEventKind : std::uint8_t {
    pass_start,
    uplink_beacon_detected,
    downlink_detected,
    downlink_lost,
    cloud_start,
    cloud_end,
    timeout,
    pass_end,
};
const char* to_string(LinkEventKind k);
constexpr int kLinkEventKindCount = 8;

struct LinkEvent {
    LinkEventKind kind = LinkEventKind::pass_start;
    double t_s = 0.0;
};

enum class LinkAction : std::uint8_t { qkd_go, qkd_halt, warn_unhandled };

struct LinkTransition {
    LinkStateId state = LinkStateId::IDLE;
    double t_s = 0.0;
};

// Deterministic total transition function. Events must not move backwards
// in time; undefined (state, event) pairs self-loop and emit
// warn_unhandled. pass_end reaches PASS_COMPLETE from every state, and
// QKD_ACTIVE is only reachable from CLOSED_LOOP_TRACKING.
class LinkStateMachine {
public:
    explicit LinkStateMachine(double t0_s = 0.0);

    struct StepResult {
        LinkStateId state;
        std::vector<LinkAction> actions;
    };
    StepResult step(const LinkEvent& event);

    LinkStateId state() const { return state_; }
    double entered_at_s() const { return entered_at_s_; }
    const std::vector<LinkTransition>& history() const { return history_; }

private:
    LinkStateId state_ = LinkStateId::IDLE;
    double entered_at_s_ = 0.0;
    double last_event_s_ = 0.0;
    std::vector<LinkTransition> history_;
};

struct PatTimingConfig {
    double uplink_acquire_delay_s = 2.0;
    double downlink_acquire_delay_s = 2.0;
    double tracking_settle_delay_s = 0.5;
    double reacquire_delay_s = 1.0;    // downlink redetection after a cloud clears
    double reacquire_timeout_s = 30.0; // REACQUIRING gives up and goes LOST

    void validate() const;
};

struct PassTimeline {
    std::vector<LinkTransition> timeline;
    std::vector<LinkEvent> events;
    double pass_start_s = 0.0;
    double pass_end_s = 0.0;
    double availability_fraction = 0.0;                 // time in QKD_ACTIVE / pass time
    std::vector<std::pair<double, double>> qkd_windows; // [start, end) in QKD_ACTIVE
    bool lost = false;
};

// Drives a full pass. Cloud blockages are absolute-time [start, end)
// intervals inside the pass window, non-overlapping. The timeline is a
// pure function of the inputs and seed.
PassTimeline run_pass(const std::vector<PassSample>& pass,
                      const std::vector<std::pair<double, double>>& cloud_blockages,
                      const PatTimingConfig& delays, std::uint64_t seed);

// CSV with header `t_s,state`.
void write_timeline_csv(std::ostream& out, const std::vector<LinkTransition>& timeline);

} // namespace skylink

#endif
