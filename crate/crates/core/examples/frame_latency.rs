//! Per-frame latency of the capture pipeline on synthetic 1920×1080 hand frames.
//!
//! Usage: `frame_latency [FRAMES] [SEED]` (defaults 15 and 1). Runs sequentially on one
//! thread and prints one line per frame, then the median and the maximum.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use touchprint_core::geometry::HandSide;
use touchprint_core::par::Exec;
use touchprint_core::pipeline::analyze_frame;
use touchprint_core::synth::{capture_hand, render_hand};
use touchprint_core::PipelineConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let frames: usize = args.next().map(|a| a.parse().expect("FRAMES must be a count")).unwrap_or(15);
    let seed: u64 = args.next().map(|a| a.parse().expect("SEED must be an integer")).unwrap_or(1);
    let cfg = PipelineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut times = Vec::with_capacity(frames);
    for k in 0..frames {
        let spec = capture_hand(&mut rng, HandSide::Right);
        let frame = render_hand(&spec, &mut rng).image;
        let t = Instant::now();
        let out = analyze_frame(&frame, HandSide::Right, &cfg, Exec::Sequential);
        let dt = t.elapsed();
        let status = match &out {
            Ok(samples) => format!("{} fingers, {} passed", samples.len(), samples.iter().filter(|s| s.quality.passed).count()),
            Err(e) => format!("error {e}"),
        };
        println!("frame {k:>3} {:>8.1} ms  {status}", ms(dt));
        times.push(dt);
    }
    if times.is_empty() {
        return;
    }
    times.sort();
    println!("median {:.1} ms  max {:.1} ms  over {} frames", ms(times[times.len() / 2]), ms(times[times.len() - 1]), times.len());
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}
