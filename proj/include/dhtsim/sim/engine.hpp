#pragma once

#include <algorithm>
#include <cassert>
#include <coroutine>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "dhtsim/rng.hpp"

namespace dhtsim::sim {

// Virtual time: one tick per message hop; timers use seconds = ticks.
using Time = std::uint64_t;

enum class EventTag : std::uint8_t {
    message_delivery,
    timer_fire,
    node_join,
    node_fail,
    fetch_launch,
    other,
};

// Deterministic discrete-event loop.  Events fire in (time, seq) order;
// the sequence number is assigned at enqueue time.
//
// Coroutines are resumed only from event dispatch, never nested inside
// another coroutine's execution; awaitable completions go through the
// queue.  One engine per thread at a time.
class Engine {
public:
    Engine() { current_ = this; }
    ~Engine() {
        if (current_ == this) current_ = nullptr;
    }
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    static Engine* current() { return current_; }

    Time now() const { return now_; }

    void at(Time when, EventTag tag, std::function<void()> fn) {
        assert(when >= now_);
        heap_.push_back(Ev{when, seq_++, tag, std::move(fn)});
        std::push_heap(heap_.begin(), heap_.end(), Later{});
    }

    void after(Time delay, EventTag tag, std::function<void()> fn) {
        at(now_ + delay, tag, std::move(fn));
    }

    bool step() {
        if (heap_.empty() || stopped_) return false;
        std::pop_heap(heap_.begin(), heap_.end(), Later{});
        Ev ev = std::move(heap_.back());
        heap_.pop_back();
        assert(ev.at >= now_);
        now_ = ev.at;
        ++dispatched_;
        trace_ = splitmix64(trace_ ^ (ev.at * 0x100000001b3ull + ev.seq * 131 +
                                      static_cast<std::uint64_t>(ev.tag)));
        ev.fn();
        return true;
    }

    void run() {
        while (step()) {
        }
    }

    void stop() { stopped_ = true; }
    bool stopped() const { return stopped_; }
    bool idle() const { return heap_.empty(); }

    std::uint64_t dispatched() const { return dispatched_; }
    std::uint64_t trace_hash() const { return trace_; }

private:
    struct Ev {
        Time at;
        std::uint64_t seq;
        EventTag tag;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Ev& a, const Ev& b) const {
            return a.at != b.at ? a.at > b.at : a.seq > b.seq;
        }
    };

    static thread_local Engine* current_;

    std::vector<Ev> heap_;
    Time now_ = 0;
    std::uint64_t seq_ = 0;
    std::uint64_t dispatched_ = 0;
    std::uint64_t trace_ = 0xcbf29ce484222325ull;
    bool stopped_ = false;
};

inline thread_local Engine* Engine::current_ = nullptr;

// Detached fire-and-forget coroutine; starts eagerly, frees itself when done.
struct Task {
    struct promise_type {
        Task get_return_object() noexcept { return {}; }
        std::suspend_never initial_suspend() noexcept { return {}; }
        std::suspend_never final_suspend() noexcept { return {}; }
        void return_void() noexcept {}
        void unhandled_exception() { std::terminate(); }
    };
};

// Awaitable coroutine returning T.  Starts eagerly; if still pending when
// awaited, the awaiter is resumed on completion.  The Op object owns the
// frame and must outlive the coroutine, which holds for plain co_await use.
//
// NOTE: awaitables are always bound to a named local before co_await
// ("auto op = ...; co_await op;").  GCC 11 destroys non-trivial temporaries
// of a co_await full-expression twice (fixed in later releases); keeping
// the await operand an lvalue sidesteps that.
template <typename T>
class [[nodiscard]] Op {
public:
    struct promise_type {
        T value{};
        std::coroutine_handle<> continuation;
        bool done = false;

        Op get_return_object() {
            return Op{std::coroutine_handle<promise_type>::from_promise(*this)};
        }
        std::suspend_never initial_suspend() noexcept { return {}; }
        struct FinalAwaiter {
            bool await_ready() noexcept { return false; }
            void await_suspend(std::coroutine_handle<promise_type> h) noexcept {
                auto& p = h.promise();
                p.done = true;
                // Never resume the awaiter nested inside this frame's
                // execution; hand it to the engine instead.
                if (p.continuation) {
                    auto cont = p.continuation;
                    Engine::current()->after(0, EventTag::other, [cont]() { cont.resume(); });
                }
            }
            void await_resume() noexcept {}
        };
        FinalAwaiter final_suspend() noexcept { return {}; }
        void return_value(T v) noexcept { value = std::move(v); }
        void unhandled_exception() { std::terminate(); }
    };

    explicit Op(std::coroutine_handle<promise_type> h) : handle_(h) {}
    Op(Op&& other) noexcept : handle_(std::exchange(other.handle_, {})) {}
    Op(const Op&) = delete;
    Op& operator=(const Op&) = delete;
    Op& operator=(Op&& other) noexcept {
        if (handle_) handle_.destroy();
        handle_ = std::exchange(other.handle_, {});
        return *this;
    }
    ~Op() {
        // A pending coroutine still has resumption events in flight;
        // destroying it here would leave them dangling.
        assert(!handle_ || handle_.promise().done);
        if (handle_) handle_.destroy();
    }

    bool await_ready() const noexcept { return handle_.promise().done; }
    void await_suspend(std::coroutine_handle<> cont) noexcept {
        handle_.promise().continuation = cont;
    }
    T await_resume() { return std::move(handle_.promise().value); }

private:
    std::coroutine_handle<promise_type> handle_;
};

// co_await Delay{engine, ticks}
struct Delay {
    Engine& engine;
    Time ticks;
    EventTag tag = EventTag::timer_fire;

    bool await_ready() const noexcept { return ticks == 0; }
    void await_suspend(std::coroutine_handle<> h) {
        engine.after(ticks, tag, [h]() { h.resume(); });
    }
    void await_resume() const noexcept {}
};

}  // namespace dhtsim::sim
