// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Upload rate limiter.
//!
//! Credit is granted in discrete ticks (50 ms by default) and tracked
//! cumulatively from the first send: by the end of tick `k` the sender may
//! have emitted `rate * (k + 1) * tick` bytes, overshooting by at most the
//! frame that crosses the line. At most `burst` bytes start within a single
//! tick, so a sender that fell behind (e.g. a full socket buffer) catches up
//! gradually instead of in one burst.

pub const DEFAULT_TICK: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct RateLimiter {
    rate: f64,
    tick: f64,
    burst: f64,
    origin: Option<f64>,
    sent: u64,
    tick_index: i64,
    sent_in_tick: u64,
}

impl RateLimiter {
    /// `frame_len` is the largest frame the sender emits; the per-tick burst
    /// is `max(frame_len, rate * tick)`.
    pub fn new(rate: f64, tick: f64, frame_len: u64) -> Self {
        assert!(rate > 0.0 && tick > 0.0, "rate and tick must be positive");
        Self {
            rate,
            tick,
            burst: (frame_len as f64).max(rate * tick),
            origin: None,
            sent: 0,
            tick_index: -1,
            sent_in_tick: 0,
        }
    }

    pub fn with_default_tick(rate: f64, frame_len: u64) -> Self {
        Self::new(rate, DEFAULT_TICK, frame_len)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn burst(&self) -> f64 {
        self.burst
    }

    pub fn sent(&self) -> u64 {
        self.sent
    }

    fn tick_of(&self, origin: f64, now: f64) -> i64 {
        ((now - origin) / self.tick + 1e-9).floor() as i64
    }

    fn tick_start(&self, origin: f64, k: i64) -> f64 {
        origin + k as f64 * self.tick
    }

    /// Asks permission to send `bytes` at `now`. On refusal returns the
    /// time of the next tick, when the caller should ask again.
    pub fn try_send(&mut self, now: f64, bytes: u64) -> Result<(), f64> {
        let origin = *self.origin.get_or_insert(now);
        let k = self.tick_of(origin, now).max(0);
        if k != self.tick_index {
            self.tick_index = k;
            self.sent_in_tick = 0;
        }
        let allowance = self.rate * (k + 1) as f64 * self.tick;
        if (self.sent as f64) < allowance && (self.sent_in_tick as f64) < self.burst {
            self.sent += bytes;
            self.sent_in_tick += bytes;
            Ok(())
        } else {
            Err(self.tick_start(origin, k + 1))
        }
    }
}
