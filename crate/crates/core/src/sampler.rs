//! Path generation for random bridges, by two independent constructions:
//! terminal value first followed by a bridge, or sequential Markov
//! transitions. Path `i` of a run with seed `s` always draws from substream
//! `(s, i)`, so path sets do not depend on the worker count.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bridge::{check_grid, sample_bridge_path, BridgeSpec};
use crate::error::{LrbError, Result};
use crate::lrb::LrbSpec;
use crate::numerics::{invert_cdf, Node, Singularity};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SamplePath {
    /// Value at grid time `t`, if `t` is on the grid.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.times.iter().position(|&u| u == t).map(|i| self.values[i])
    }
}

/// Deterministic random stream identified by `(seed, substream)`.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    substream: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, substream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(substream);
        Self { seed, substream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream(&self) -> u64 {
        self.substream
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerMethod {
    #[default]
    TerminalFirst,
    Markov,
}

fn check_lrb_grid(spec: &LrbSpec, grid: &[f64]) -> Result<()> {
    let Some(&first) = grid.first() else {
        return Err(LrbError::domain("empty time grid"));
    };
    if first < 0.0 {
        return Err(LrbError::domain(format!("grid point {first} is negative")));
    }
    if first == 0.0 {
        if grid.len() == 1 {
            return Ok(());
        }
        return check_grid(&grid[1..], 0.0, spec.horizon);
    }
    check_grid(grid, 0.0, spec.horizon)
}

/// Draws `L_T ~ ν`, then the Lévy bridge from `(0, 0)` to `(T, L_T)`.
pub fn sample_lrb_terminal_first<R: Rng + ?Sized>(spec: &LrbSpec, grid: &[f64], rng: &mut R) -> Result<SamplePath> {
    check_lrb_grid(spec, grid)?;
    let z = spec.terminal.sample(rng)?;
    let bridge = BridgeSpec::new(spec.kernel, 0.0, 0.0, spec.horizon, z).map_err(|e| match e {
        LrbError::InvalidPin { .. } => LrbError::spec(format!("terminal value {z} is not a valid pin: {e}")),
        other => other,
    })?;
    let start = grid.iter().take_while(|&&t| t == 0.0).count();
    let mut values = vec![0.0; start];
    if start < grid.len() {
        values.extend(sample_bridge_path(&bridge, &grid[start..], rng)?.values);
    }
    Ok(SamplePath { times: grid.to_vec(), values })
}

/// Sequential draws from the transition law by numeric inversion, with the
/// terminal value drawn from the posterior at the last grid time before `T`.
pub fn sample_lrb_markov<R: Rng + ?Sized>(spec: &LrbSpec, grid: &[f64], rng: &mut R) -> Result<SamplePath> {
    check_lrb_grid(spec, grid)?;
    let (mut s, mut x) = (0.0, 0.0);
    let mut values = Vec::with_capacity(grid.len());
    for &t in grid {
        if t == 0.0 {
            values.push(0.0);
            continue;
        }
        let y = if t == spec.horizon {
            spec.terminal_posterior(s, x)?.sample(rng)?
        } else {
            markov_step(spec, s, x, t, rng)?
        };
        values.push(y);
        s = t;
        x = y;
    }
    Ok(SamplePath { times: grid.to_vec(), values })
}

fn markov_step<R: Rng + ?Sized>(spec: &LrbSpec, s: f64, x: f64, t: f64, rng: &mut R) -> Result<f64> {
    let u: f64 = rng.random();
    if spec.kernel.is_discrete() {
        let psi_s = spec.psi_reachable(s, x)?;
        let (_, hi) = spec.terminal.support_bounds();
        let top = (hi - x).floor().max(0.0) as i64;
        let mut acc = 0.0;
        for j in 0..=top {
            let y = x + j as f64;
            acc += spec.kernel.law(t - s, j as f64) * spec.psi_node(t, &Node::at(y)) / psi_s;
            if u < acc {
                return Ok(y);
            }
        }
        // Rounding left a sliver of mass; it belongs to the last reachable point.
        return Ok(x + top as f64);
    }
    let (lo, hi, breaks, sing) = spec.transition_shape(s, x, t);
    let sing: Vec<Singularity> =
        sing.into_iter().map(|s| Singularity { exponent: s.exponent.max(-1.0 + 1e-6), ..s }).collect();
    let density = |n: &Node| {
        let f = spec.kernel.law(t - s, n.offset_from(x));
        if f == 0.0 {
            0.0
        } else {
            f * spec.psi_node(t, n)
        }
    };
    Ok(invert_cdf(density, lo, hi, &breaks, &sing, u, spec.tol)?)
}

pub fn sample_path<R: Rng + ?Sized>(
    spec: &LrbSpec,
    grid: &[f64],
    method: SamplerMethod,
    rng: &mut R,
) -> Result<SamplePath> {
    match method {
        SamplerMethod::TerminalFirst => sample_lrb_terminal_first(spec, grid, rng),
        SamplerMethod::Markov => sample_lrb_markov(spec, grid, rng),
    }
}

/// Runs `job(i, stream_i)` for `i in 0..n` on `workers` threads and returns
/// the results in index order.
pub fn run_indexed<T, F>(n: usize, seed: u64, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut RandomStream) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| LrbError::domain(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = RandomStream::new(seed, i as u64);
                job(i, &mut rng)
            })
            .collect()
    })
}

/// `n` paths on `grid`; path `i` uses substream `i` of `seed`.
pub fn simulate_paths(
    spec: &LrbSpec,
    grid: &[f64],
    seed: u64,
    n: usize,
    method: SamplerMethod,
    workers: usize,
) -> Result<Vec<SamplePath>> {
    check_lrb_grid(spec, grid)?;
    run_indexed(n, seed, workers, |_, rng| sample_path(spec, grid, method, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;
    use crate::terminal::TerminalLaw;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map({
            let mut r = RandomStream::new(7, 3);
            move |_| r.next_u64()
        }).collect();
        let b: Vec<u64> = (0..4).map({
            let mut r = RandomStream::new(7, 3);
            move |_| r.next_u64()
        }).collect();
        let c = RandomStream::new(7, 4).next_u64();
        assert_eq!(a, b);
        assert_ne!(a[0], c);
    }

    #[test]
    fn point_mass_paths_end_at_the_pin() {
        let spec = LrbSpec::new(KernelFamily::Gamma { m: 1.0 }, 1.0, TerminalLaw::point_mass(2.0).unwrap()).unwrap();
        let mut rng = RandomStream::new(1, 0);
        for method in [SamplerMethod::TerminalFirst, SamplerMethod::Markov] {
            let p = sample_path(&spec, &[1.0], method, &mut rng).unwrap();
            assert_eq!(p.values, vec![2.0]);
            let p = sample_path(&spec, &[0.0, 0.25, 0.5, 1.0], method, &mut rng).unwrap();
            assert_eq!(p.values[0], 0.0);
            assert_eq!(p.values[3], 2.0);
            assert!(p.values.windows(2).all(|w| w[1] >= w[0]), "{:?}", p.values);
        }
    }

    #[test]
    fn parallel_runs_match_serial_runs() {
        let spec = LrbSpec::new(KernelFamily::Brownian, 1.0, TerminalLaw::binary(0.0, 1.0, 0.4).unwrap()).unwrap();
        let grid = [0.25, 0.5, 1.0];
        let one = simulate_paths(&spec, &grid, 11, 40, SamplerMethod::TerminalFirst, 1).unwrap();
        let four = simulate_paths(&spec, &grid, 11, 40, SamplerMethod::TerminalFirst, 4).unwrap();
        assert_eq!(one, four);
        let m1 = simulate_paths(&spec, &grid, 11, 5, SamplerMethod::Markov, 1).unwrap();
        let m2 = simulate_paths(&spec, &grid, 11, 5, SamplerMethod::Markov, 3).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn bad_grids_are_rejected() {
        let spec = LrbSpec::new(KernelFamily::Brownian, 1.0, TerminalLaw::point_mass(0.0).unwrap()).unwrap();
        let mut rng = RandomStream::new(0, 0);
        assert!(sample_lrb_terminal_first(&spec, &[0.5, 0.5], &mut rng).is_err());
        assert!(sample_lrb_terminal_first(&spec, &[0.5, 1.5], &mut rng).is_err());
        assert!(sample_lrb_markov(&spec, &[], &mut rng).is_err());
    }
}
