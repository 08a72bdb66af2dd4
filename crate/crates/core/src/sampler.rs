//! Kinetic Monte Carlo on a jump chain: the controlled walk with restarts
//! from the exit distribution, and the uncontrolled baseline.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::control::ControlledChain;
use crate::error::{read_text, Error, Result};
use crate::generator::JumpChain;

/// A reactive segment `records[start_step..=end_step]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub start_step: usize,
    pub end_step: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub states: Vec<usize>,
    /// Waiting time spent in `states[k]`.
    pub dt: Vec<f64>,
    pub segments: Vec<Segment>,
    pub jumps: usize,
    pub seed: u64,
    pub stream: u64,
}

impl TrajectoryRecord {
    pub fn total_time(&self) -> f64 {
        self.dt.iter().sum()
    }

    pub fn transitions(&self) -> usize {
        self.segments.len()
    }
}

/// Generator for walker `stream` of a run seeded with `seed`.
pub fn walker_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn waiting_time(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    loop {
        let e: f64 = rng.sample(Exp1);
        if e > 0.0 {
            return e / rate;
        }
    }
}

/// Smallest `s` with `p_1 + ... + p_s >= eta`, scanning in the given order.
fn invert_cdf(items: impl Iterator<Item = (usize, f64)>, eta: f64) -> Option<usize> {
    let mut acc = 0.0;
    let mut last = None;
    for (j, p) in items {
        acc += p;
        last = Some(j);
        if acc >= eta {
            return last;
        }
    }
    last
}

fn next_state(jc: &JumpChain, i: usize, rng: &mut ChaCha8Rng) -> usize {
    let eta: f64 = rng.random();
    invert_cdf(jc.neighbors(i).iter().copied().zip(jc.probabilities(i).iter().copied()), eta).expect("state with positive jump rate has neighbours")
}

fn draw_exit(chain: &ControlledChain, rng: &mut ChaCha8Rng) -> usize {
    let eta: f64 = rng.random();
    invert_cdf(chain.exit.iter().copied(), eta).expect("exit distribution is nonempty")
}

fn mask(n: usize, set: &[usize], name: &str) -> Result<Vec<bool>> {
    let mut m = vec![false; n];
    for &i in set {
        if i >= n {
            return Err(Error::InvalidArgument(format!("set {name} contains {i}, but there are {n} states")));
        }
        m[i] = true;
    }
    Ok(m)
}

fn checked_rate(jc: &JumpChain, i: usize) -> Result<f64> {
    let r = jc.rate(i);
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::IsolatedState(i))
    }
}

/// Controlled random walk: start from the exit distribution, wait
/// `Exp(lambda^q_i)` at each state, jump by CDF inversion over neighbours in
/// ascending order; on reaching `B` record that state, close the segment
/// and restart from the exit distribution. Stops after `jumps` jumps.
pub fn run_controlled_walk(chain: &ControlledChain, b: &[usize], jumps: usize, seed: u64) -> Result<TrajectoryRecord> {
    run_controlled_walker(chain, b, jumps, seed, 0)
}

pub fn run_controlled_walker(chain: &ControlledChain, b: &[usize], jumps: usize, seed: u64, stream: u64) -> Result<TrajectoryRecord> {
    let jc = &chain.jump;
    let n = jc.len();
    let in_b = mask(n, b, "B")?;
    if b.is_empty() {
        return Err(Error::InvalidArgument("set B is empty".into()));
    }
    if let Some(&i) = chain.a.iter().find(|&&i| in_b[i]) {
        return Err(Error::OverlappingSets(vec![i]));
    }
    let mut rng = walker_rng(seed, stream);
    let mut rec = TrajectoryRecord {
        states: Vec::with_capacity(jumps + 1),
        dt: Vec::with_capacity(jumps + 1),
        segments: Vec::new(),
        jumps,
        seed,
        stream,
    };
    let mut state = draw_exit(chain, &mut rng);
    let mut start = 0;
    loop {
        let rate = checked_rate(jc, state)?;
        rec.states.push(state);
        rec.dt.push(waiting_time(&mut rng, rate));
        let k = rec.states.len() - 1;
        if k == jumps {
            break;
        }
        if in_b[state] {
            rec.segments.push(Segment { start_step: start, end_step: k });
            start = k + 1;
            state = draw_exit(chain, &mut rng);
        } else {
            state = next_state(jc, state, &mut rng);
        }
    }
    Ok(rec)
}

/// Independent controlled walkers on streams `0..walkers` of one seed.
pub fn run_controlled_walkers(chain: &ControlledChain, b: &[usize], jumps: usize, seed: u64, walkers: usize) -> Result<Vec<TrajectoryRecord>> {
    (0..walkers as u64)
        .into_par_iter()
        .map(|s| run_controlled_walker(chain, b, jumps, seed, s))
        .collect()
}

/// Free run of the controlled chain from `start` without restarts.
pub fn run_controlled_free(chain: &ControlledChain, start: usize, jumps: usize, seed: u64) -> Result<TrajectoryRecord> {
    run_free(&chain.jump, start, jumps, seed, None)
}

/// Uncontrolled walk from `start` (a state of `A`). A segment is recorded
/// each time the walk enters `B` having last visited `A`; it starts at the
/// step after the last visit to `A`.
pub fn run_uncontrolled_walk(jc: &JumpChain, a: &[usize], b: &[usize], start: usize, jumps: usize, seed: u64) -> Result<TrajectoryRecord> {
    let n = jc.len();
    let in_a = mask(n, a, "A")?;
    let in_b = mask(n, b, "B")?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("sets A and B must be nonempty".into()));
    }
    if let Some(i) = (0..n).find(|&i| in_a[i] && in_b[i]) {
        return Err(Error::OverlappingSets(vec![i]));
    }
    if start >= n {
        return Err(Error::InvalidArgument(format!("start state {start} out of range")));
    }
    run_free(jc, start, jumps, seed, Some((&in_a, &in_b)))
}

fn run_free(jc: &JumpChain, start: usize, jumps: usize, seed: u64, sets: Option<(&[bool], &[bool])>) -> Result<TrajectoryRecord> {
    let mut rng = walker_rng(seed, 0);
    let mut rec = TrajectoryRecord {
        states: Vec::with_capacity(jumps + 1),
        dt: Vec::with_capacity(jumps + 1),
        segments: Vec::new(),
        jumps,
        seed,
        stream: 0,
    };
    let mut state = start;
    let mut last_a: Option<usize> = None;
    loop {
        let rate = checked_rate(jc, state)?;
        rec.states.push(state);
        rec.dt.push(waiting_time(&mut rng, rate));
        let k = rec.states.len() - 1;
        if let Some((in_a, in_b)) = sets {
            if in_a[state] {
                last_a = Some(k);
            } else if in_b[state] {
                if let Some(la) = last_a.take() {
                    rec.segments.push(Segment { start_step: la + 1, end_step: k });
                }
            }
        }
        if k == jumps {
            break;
        }
        state = next_state(jc, state, &mut rng);
    }
    Ok(rec)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Occupation {
    pub visits: usize,
    pub time: f64,
}

/// Visit counts and total residence time per state.
pub fn occupation_statistics(record: &TrajectoryRecord, n: usize) -> Vec<Occupation> {
    let mut occ = vec![Occupation::default(); n];
    for (&i, &dt) in record.states.iter().zip(&record.dt) {
        occ[i].visits += 1;
        occ[i].time += dt;
    }
    occ
}

pub fn save_trajectory(record: &TrajectoryRecord, path: &Path) -> Result<()> {
    let mut out = String::from("step,id,dt\n");
    for (k, (&i, &dt)) in record.states.iter().zip(&record.dt).enumerate() {
        writeln!(out, "{k},{i},{dt}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn save_segments(record: &TrajectoryRecord, path: &Path) -> Result<()> {
    let mut out = String::from("segment,start_step,end_step\n");
    for (s, seg) in record.segments.iter().enumerate() {
        writeln!(out, "{s},{},{}", seg.start_step, seg.end_step).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a `step,id,dt` file back; segments are not part of the file.
pub fn load_trajectory(path: &Path) -> Result<TrajectoryRecord> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    let mut rec = TrajectoryRecord {
        states: Vec::new(),
        dt: Vec::new(),
        segments: Vec::new(),
        jumps: 0,
        seed: 0,
        stream: 0,
    };
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match f[..] {
            [_, id, dt] => id.parse::<usize>().ok().zip(dt.parse::<f64>().ok().filter(|d| *d > 0.0)),
            _ => None,
        };
        let (id, dt) = parsed.ok_or_else(|| Error::Parse {
            source_name: name.clone(),
            row: line_no + 1,
            message: format!("expected step,id,dt, found {line:?}"),
        })?;
        rec.states.push(id);
        rec.dt.push(dt);
    }
    rec.jumps = rec.states.len().saturating_sub(1);
    Ok(rec)
}
