#![allow(dead_code)]

use std::time::{Duration, Instant};

use gdlab::{Recipe1D, Recipe2D};

pub fn kick_recipes() -> [(Recipe1D, Option<usize>); 4] {
    let r = |m, n, x_big, b, gamma| Recipe1D { m, n, x_big, b, gamma, w0: 10.0 };
    [
        (r(250, 200, 20.0, 6, 1.9), Some(4)),
        (r(250, 200, 70.0, 15, 1.5), Some(7)),
        (r(200, 190, 270.0, 25, 1.4), Some(37)),
        (r(250, 200, 60.0, 15, 1.5), None),
    ]
}

pub fn planar_recipe() -> Recipe2D {
    Recipe2D {
        m1: 500,
        n1: 30,
        m2: 5,
        n2: 1,
        kick1: ([45.0, -70.0], 7),
        kick2: ([7.5, 50.0], 10),
        gamma: 0.4,
        w0: [15.0, 4.0],
    }
}

pub fn basin_recipe() -> Recipe2D {
    Recipe2D { m1: 160, gamma: 0.95, ..planar_recipe() }
}

/// Prints one line per criterion and fails the test when `ok` is false.
pub struct Criterion {
    id: &'static str,
    start: Instant,
    limit: Duration,
}

impl Criterion {
    pub fn start(id: &'static str, limit_secs: u64) -> Self {
        Criterion { id, start: Instant::now(), limit: Duration::from_secs(limit_secs) }
    }

    pub fn finish(self, checks: &[(&str, bool)]) {
        let elapsed = self.start.elapsed();
        let in_time = elapsed <= self.limit;
        let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
        let ok = failed.is_empty() && in_time;
        println!(
            "[{}] {} ({:.2}s of {}s){}",
            if ok { "PASS" } else { "FAIL" },
            self.id,
            elapsed.as_secs_f64(),
            self.limit.as_secs(),
            if failed.is_empty() { String::new() } else { format!(" failed: {}", failed.join("; ")) }
        );
        assert!(in_time, "{} exceeded its time limit: {:?}", self.id, elapsed);
        assert!(failed.is_empty(), "{} failed: {}", self.id, failed.join("; "));
    }
}
