#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <sstream>

#include "skylink/errors.hpp"
#include "skylink/pat.hpp"
#include "skylink/rng.hpp"

using namespace skylink;

namespace {
std::vector<PassSample> flat_pass(double duration_s, double step_s = 1.0) {
    std::vector<PassSample> pass;
    for (double t = 0.0; t <= duration_s + 1e-9; t += step_s)
        pass.push_back({t, 45.0, 180.0, 1000.0});
    return pass;
}

bool contains(const std::vector<LinkAction>& actions, LinkAction a) {
    for (auto x : actions)
        if (x == a) return true;
    return false;
}
} // namespace

TEST_CASE("acquisition sequence reaches QKD through closed-loop tracking") {
    LinkStateMachine m;
    CHECK(m.state() == LinkStateId::IDLE);

    CHECK(m.step({LinkEventKind::pass_start, 0.0}).state == LinkStateId::PROGRAM_TRACK);
    CHECK(m.step({LinkEventKind::uplink_beacon_detected, 1.0}).state == LinkStateId::ACQUIRING);

    auto r = m.step({LinkEventKind::downlink_detected, 2.0});
    CHECK(r.state == LinkStateId::CLOSED_LOOP_TRACKING);
    CHECK(contains(r.actions, LinkAction::qkd_go));

    CHECK(m.step({LinkEventKind::downlink_detected, 2.5}).state == LinkStateId::QKD_ACTIVE);
}

TEST_CASE("cloud interruption and re-acquisition return to QKD") {
    LinkStateMachine m;
    m.step({LinkEventKind::pass_start, 0.0});
    m.step({LinkEventKind::uplink_beacon_detected, 1.0});
    m.step({LinkEventKind::downlink_detected, 2.0});
    m.step({LinkEventKind::downlink_detected, 2.5});
    REQUIRE(m.state() == LinkStateId::QKD_ACTIVE);

    auto halt = m.step({LinkEventKind::cloud_start, 10.0});
    CHECK(halt.state == LinkStateId::REACQUIRING);
    CHECK(contains(halt.actions, LinkAction::qkd_halt));

    // Waiting out the cloud is a handled no-op, not a warning.
    auto wait = m.step({LinkEventKind::cloud_end, 20.0});
    CHECK(wait.state == LinkStateId::REACQUIRING);
    CHECK(wait.actions.empty());

    CHECK(m.step({LinkEventKind::downlink_detected, 21.0}).state ==
          LinkStateId::CLOSED_LOOP_TRACKING);
    CHECK(m.step({LinkEventKind::downlink_detected, 21.5}).state == LinkStateId::QKD_ACTIVE);
}

TEST_CASE("re-acquisition timeout goes LOST, then the pass completes") {
    LinkStateMachine m;
    m.step({LinkEventKind::pass_start, 0.0});
    m.step({LinkEventKind::uplink_beacon_detected, 1.0});
    m.step({LinkEventKind::downlink_detected, 2.0});
    m.step({LinkEventKind::downlink_detected, 2.5});
    m.step({LinkEventKind::cloud_start, 10.0});
    REQUIRE(m.state() == LinkStateId::REACQUIRING);

    CHECK(m.step({LinkEventKind::timeout, 40.0}).state == LinkStateId::LOST);
    CHECK(m.step({LinkEventKind::pass_end, 100.0}).state == LinkStateId::PASS_COMPLETE);
}

TEST_CASE("pass_end reaches PASS_COMPLETE from every reachable state") {
    // Drive into each state via an event prefix, then end the pass.
    using E = LinkEventKind;
    std::vector<std::vector<E>> prefixes{
        {},
        {E::pass_start},
        {E::pass_start, E::uplink_beacon_detected},
        {E::pass_start, E::uplink_beacon_detected, E::downlink_detected},
        {E::pass_start, E::uplink_beacon_detected, E::downlink_detected, E::downlink_detected},
        {E::pass_start, E::uplink_beacon_detected, E::downlink_detected, E::downlink_detected,
         E::cloud_start},
        {E::pass_start, E::uplink_beacon_detected, E::downlink_detected, E::downlink_detected,
         E::cloud_start, E::timeout},
    };
    for (const auto& prefix : prefixes) {
        LinkStateMachine m;
        double t = 1.0;
        for (auto e : prefix) m.step({e, t++});
        CHECK(m.step({LinkEventKind::pass_end, t}).state == LinkStateId::PASS_COMPLETE);
    }
}

TEST_CASE("PASS_COMPLETE is absorbing until a new pass starts") {
    LinkStateMachine m;
    m.step({LinkEventKind::pass_start, 0.0});
    m.step({LinkEventKind::pass_end, 1.0});
    REQUIRE(m.state() == LinkStateId::PASS_COMPLETE);

    double t = 2.0;
    for (auto e : {LinkEventKind::uplink_beacon_detected, LinkEventKind::downlink_detected,
                   LinkEventKind::cloud_start, LinkEventKind::cloud_end, LinkEventKind::timeout,
                   LinkEventKind::downlink_lost, LinkEventKind::pass_end}) {
        auto r = m.step({e, t++});
        CHECK(r.state == LinkStateId::PASS_COMPLETE);
    }
    CHECK(m.step({LinkEventKind::pass_start, t}).state == LinkStateId::PROGRAM_TRACK);
}

TEST_CASE("events moving backwards in time are rejected") {
    LinkStateMachine m;
    m.step({LinkEventKind::pass_start, 5.0});
    CHECK_THROWS_AS(m.step({LinkEventKind::uplink_beacon_detected, 4.0}), SequencingError);
}

TEST_CASE("exhaustive event strings: QKD_ACTIVE always follows CLOSED_LOOP_TRACKING") {
    // Depth-6 exhaustive check here; the acceptance suite runs depth 8.
    std::function<void(const LinkStateMachine&, int)> dfs =
        [&](const LinkStateMachine& m, int depth) {
            if (depth == 0) return;
            for (int k = 0; k < kLinkEventKindCount; ++k) {
                LinkStateMachine next = m;
                next.step({static_cast<LinkEventKind>(k),
                           next.entered_at_s() + 1.0});
                const auto& h = next.history();
                for (std::size_t i = 1; i < h.size(); ++i) {
                    if (h[i].state == LinkStateId::QKD_ACTIVE)
                        REQUIRE(h[i - 1].state == LinkStateId::CLOSED_LOOP_TRACKING);
                }
                dfs(next, depth - 1);
            }
        };
    LinkStateMachine start;
    dfs(start, 6);
}

TEST_CASE("fuzzed event streams never break the machine") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        LinkStateMachine m;
        double t = 0.0;
        for (int k = 0; k < 100; ++k) {
            t += rng.uniform();
            auto r = m.step({static_cast<LinkEventKind>(rng.uniform_int(8)), t});
            (void)r;
        }
    }
}

TEST_CASE("run_pass: clear sky with zero delays gives full availability") {
    PatTimingConfig delays;
    delays.uplink_acquire_delay_s = 0.0;
    delays.downlink_acquire_delay_s = 0.0;
    delays.tracking_settle_delay_s = 0.0;
    delays.reacquire_delay_s = 0.0;
    auto result = run_pass(flat_pass(100.0), {}, delays, 1);
    CHECK(result.availability_fraction == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(result.timeline.back().state == LinkStateId::PASS_COMPLETE);
}

TEST_CASE("run_pass: one blockage of 20% costs exactly that availability") {
    PatTimingConfig delays;
    delays.uplink_acquire_delay_s = 0.0;
    delays.downlink_acquire_delay_s = 0.0;
    delays.tracking_settle_delay_s = 0.0;
    delays.reacquire_delay_s = 0.0;
    auto result = run_pass(flat_pass(100.0), {{30.0, 50.0}}, delays, 1);
    CHECK(result.availability_fraction == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(!result.lost);
    REQUIRE(result.qkd_windows.size() == 2);
}

TEST_CASE("run_pass: blockage beyond the timeout strands the pass in LOST") {
    PatTimingConfig delays;
    delays.uplink_acquire_delay_s = 0.0;
    delays.downlink_acquire_delay_s = 0.0;
    delays.tracking_settle_delay_s = 0.0;
    delays.reacquire_delay_s = 0.0;
    delays.reacquire_timeout_s = 10.0;
    auto result = run_pass(flat_pass(100.0), {{30.0, 90.0}}, delays, 1);
    CHECK(result.lost);
    CHECK(result.availability_fraction == doctest::Approx(0.3).epsilon(1e-12));
    bool saw_lost = false;
    for (const auto& t : result.timeline) saw_lost |= t.state == LinkStateId::LOST;
    CHECK(saw_lost);
    CHECK(result.timeline.back().state == LinkStateId::PASS_COMPLETE);
}

TEST_CASE("run_pass: validation and degenerate inputs") {
    PatTimingConfig delays;
    CHECK_THROWS_AS(run_pass(flat_pass(100.0), {{10.0, 40.0}, {30.0, 60.0}}, delays, 1),
                    ConfigError);
    CHECK_THROWS_AS(run_pass(flat_pass(100.0), {{40.0, 40.0}}, delays, 1), ConfigError);
    CHECK_THROWS_AS(run_pass(flat_pass(100.0), {{90.0, 150.0}}, delays, 1), ConfigError);

    auto empty = run_pass({}, {}, delays, 1);
    CHECK(empty.availability_fraction == 0.0);
    CHECK(empty.timeline.empty());
}

TEST_CASE("run_pass: deterministic timelines") {
    PatTimingConfig delays;
    auto a = run_pass(flat_pass(300.0), {{100.0, 120.0}, {200.0, 210.0}}, delays, 7);
    auto b = run_pass(flat_pass(300.0), {{100.0, 120.0}, {200.0, 210.0}}, delays, 7);
    REQUIRE(a.timeline.size() == b.timeline.size());
    for (std::size_t i = 0; i < a.timeline.size(); ++i) {
        CHECK(a.timeline[i].state == b.timeline[i].state);
        CHECK(a.timeline[i].t_s == b.timeline[i].t_s);
    }
    CHECK(a.availability_fraction == b.availability_fraction);
}

TEST_CASE("timeline CSV header") {
    std::vector<LinkTransition> timeline{{LinkStateId::IDLE, 0.0},
                                         {LinkStateId::PROGRAM_TRACK, 1.0}};
    std::ostringstream out;
    write_timeline_csv(out, timeline);
    CHECK(out.str() == "t_s,state\n0,IDLE\n1,PROGRAM_TRACK\n");
}
