#include <doctest.h>

#include "dhtsim/sim/engine.hpp"

using namespace dhtsim::sim;

TEST_CASE("events dispatch in (time, seq) order and the clock never goes back") {
    Engine eng;
    std::vector<int> order;
    eng.after(10, EventTag::other, [&] { order.push_back(2); });
    eng.after(5, EventTag::other, [&] { order.push_back(1); });
    eng.after(10, EventTag::other, [&] { order.push_back(3); });  // same time, later seq
    eng.after(20, EventTag::other, [&] { order.push_back(4); });
    Time seen = 0;
    eng.after(0, EventTag::other, [&] { order.push_back(0); });
    while (eng.step()) {
        CHECK(eng.now() >= seen);
        seen = eng.now();
    }
    CHECK(order == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(eng.dispatched() == 5);
}

TEST_CASE("nested scheduling during dispatch") {
    Engine eng;
    std::vector<Time> fired;
    eng.after(1, EventTag::other, [&] {
        fired.push_back(eng.now());
        eng.after(1, EventTag::other, [&] { fired.push_back(eng.now()); });
        eng.after(0, EventTag::other, [&] { fired.push_back(eng.now()); });
    });
    eng.run();
    CHECK(fired == std::vector<Time>{1, 1, 2});
}

TEST_CASE("trace hash is deterministic and order-sensitive") {
    auto run_once = [](bool swap) {
        Engine eng;
        eng.after(swap ? 2 : 1, EventTag::other, [] {});
        eng.after(swap ? 1 : 2, EventTag::other, [] {});
        eng.run();
        return eng.trace_hash();
    };
    CHECK(run_once(false) == run_once(false));
    CHECK(run_once(false) != run_once(true));
}

namespace {

Op<int> add_later(Engine& eng, int a, int b) {
    co_await Delay{eng, 3};
    co_return a + b;
}

Op<int> chain(Engine& eng) {
    int x = co_await add_later(eng, 1, 2);
    int y = co_await add_later(eng, x, 10);
    co_return y;
}

Task driver(Engine& eng, int& out) {
    out = co_await chain(eng);
}

}  // namespace

TEST_CASE("awaitable operations chain and resume through the engine") {
    Engine eng;
    int result = 0;
    driver(eng, result);
    CHECK(result == 0);  // suspended on the first delay
    eng.run();
    CHECK(result == 13);
    CHECK(eng.now() == 6);  // two sequential 3-tick delays
}

TEST_CASE("stop halts dispatch") {
    Engine eng;
    int fired = 0;
    eng.after(1, EventTag::other, [&] {
        ++fired;
        eng.stop();
    });
    eng.after(2, EventTag::other, [&] { ++fired; });
    eng.run();
    CHECK(fired == 1);
    CHECK(eng.stopped());
}
