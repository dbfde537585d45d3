//! Exact path simulation for models without Brownian parts.
//!
//! Between events the surplus grows linearly, so the time spent below zero is
//! known in closed form on every segment. Reach and survival probabilities are
//! estimated by the mean of `exp(-sum_j omega_j A_j)`, the conditional
//! probability that no observation falls in the time spent below zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{MapModel, PhaseType};
use crate::numerics::RMatrix;

/// Paths beyond this time are abandoned and reported as capped.
pub const TIME_CAP: f64 = 1e6;

/// Paths per independently seeded chunk.
pub const CHUNK: usize = 4096;

/// Exponent beyond which the observation weight is treated as zero.
const WEIGHT_CUTOFF: f64 = 745.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PathFunctional {
    /// Time spent strictly below zero in each state before the passage.
    pub occupation: Vec<f64>,
    /// Environment state at the passage time, if the level was reached.
    pub end_state: Option<usize>,
    pub reached: bool,
    /// First time the surplus was below zero.
    pub classical_ruin_time: Option<f64>,
    /// Simulation stopped at the time cap.
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    /// One estimate per starting state.
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Paths per starting state.
    pub paths: usize,
    pub seed: u64,
    /// Paths that hit the time cap, over all starting states.
    pub capped: usize,
}

/// Estimate of a matrix of probabilities split by the state at passage.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEstimate {
    pub matrix: RMatrix,
    pub matrix_stderr: RMatrix,
    /// Row sums and their standard errors.
    pub rows: EstimateReport,
}

#[derive(Clone, Copy)]
enum Stop {
    Never,
    /// Stop once the observation weight underflows.
    Weight,
    /// Stop at the first time below zero.
    Ruin,
}

fn require_simulable(model: &MapModel) -> Result<()> {
    if let Some(state) = model.sigma().iter().position(|&s| s > 0.0) {
        return Err(Error::BrownianUnsupported { state });
    }
    Ok(())
}

fn exp_sample<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / rate
}

fn pick<R: Rng>(rng: &mut R, weights: impl Iterator<Item = (usize, f64)> + Clone, total: f64) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, w) in weights {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = k;
        if target < acc {
            return k;
        }
    }
    last
}

fn sample_phase_type<R: Rng>(law: &PhaseType, rng: &mut R) -> f64 {
    if let Some(rate) = law.as_exponential() {
        return exp_sample(rng, rate);
    }
    let alpha = law.alpha();
    let t = law.sub_generator();
    let exit = law.exit_rates();
    let m = alpha.len();
    let mut phase = pick(rng, alpha.iter().copied().enumerate(), 1.0);
    let mut total = 0.0;
    loop {
        let rate = -t[(phase, phase)];
        total += exp_sample(rng, rate);
        let target = rng.random::<f64>() * rate;
        if target < exit[phase] {
            return total;
        }
        let moves = (0..m).filter(|&k| k != phase).map(|k| (k, t[(phase, k)]));
        phase = pick(rng, moves, rate - exit[phase]);
    }
}

/// Time in `[0, dt]` spent below zero on a segment starting at `level` with
/// slope `c > 0`.
fn below_zero(level: f64, c: f64, dt: f64) -> f64 {
    if level >= 0.0 {
        0.0
    } else {
        (-level / c).min(dt)
    }
}

fn simulate<R: Rng>(
    model: &MapModel,
    start: usize,
    u: f64,
    target: f64,
    stop: Stop,
    rng: &mut R,
) -> PathFunctional {
    let n = model.states();
    let q = model.generator();
    let omega = model.omega();
    let mut path = PathFunctional {
        occupation: vec![0.0; n],
        end_state: None,
        reached: false,
        classical_ruin_time: None,
        capped: false,
    };
    let (mut state, mut level, mut time) = (start, u, 0.0);
    if level >= target {
        path.end_state = Some(state);
        path.reached = true;
        return path;
    }
    let mut exponent = 0.0;
    loop {
        let c = model.premium()[state];
        let switch = -q[(state, state)];
        let claims = model.claim_rate()[state];
        let rate = switch + claims;
        let dt = if rate > 0.0 { exp_sample(rng, rate) } else { f64::INFINITY };
        let to_target = (target - level) / c;
        if to_target <= dt {
            let below = below_zero(level, c, to_target);
            path.occupation[state] += below;
            path.end_state = Some(state);
            path.reached = true;
            return path;
        }
        let below = below_zero(level, c, dt);
        path.occupation[state] += below;
        exponent += omega[state] * below;
        level += c * dt;
        time += dt;
        if time >= TIME_CAP {
            path.capped = true;
            return path;
        }
        if matches!(stop, Stop::Weight) && exponent > WEIGHT_CUTOFF {
            return path;
        }

        if rng.random::<f64>() * rate < claims {
            level -= sample_phase_type(&model.claims()[state], rng);
        } else {
            let next = pick(
                rng,
                (0..n).filter(|&j| j != state).map(|j| (j, q[(state, j)])),
                switch,
            );
            if let Some(law) = model.jump(state, next) {
                level -= sample_phase_type(law, rng);
            }
            state = next;
        }
        if level < 0.0 && path.classical_ruin_time.is_none() {
            path.classical_ruin_time = Some(time);
            if matches!(stop, Stop::Ruin) {
                return path;
            }
        }
    }
}

/// Simulate one path from `(u, start)` until the first passage over
/// `target`.
pub fn simulate_path<R: Rng>(
    model: &MapModel,
    start: usize,
    u: f64,
    target: f64,
    rng: &mut R,
) -> Result<PathFunctional> {
    require_simulable(model)?;
    check_levels(model, start, u, target)?;
    Ok(simulate(model, start, u, target, Stop::Never, rng))
}

/// Observation weight `exp(-sum_j omega_j A_j)` of a path; zero if the level
/// was not reached.
pub fn path_weight(model: &MapModel, path: &PathFunctional) -> f64 {
    if !path.reached {
        return 0.0;
    }
    let exponent: f64 = model
        .omega()
        .iter()
        .zip(&path.occupation)
        .map(|(w, a)| w * a)
        .sum();
    (-exponent).exp()
}

fn check_levels(model: &MapModel, start: usize, u: f64, target: f64) -> Result<()> {
    if start >= model.states() {
        return Err(Error::InvalidArgument(format!("no state {start}")));
    }
    if !(u >= 0.0 && u <= target && target.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "levels must satisfy 0 <= u <= x (u = {u}, x = {target})"
        )));
    }
    Ok(())
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of chunk `chunk` for starting state `start`.
pub fn chunk_seed(seed: u64, start: usize, chunk: usize) -> u64 {
    mix(mix(mix(seed) ^ start as u64) ^ chunk as u64)
}

#[derive(Clone)]
struct Sums {
    by_end: Vec<f64>,
    by_end_sq: Vec<f64>,
    total: f64,
    total_sq: f64,
    capped: usize,
}

impl Sums {
    fn new(n: usize) -> Self {
        Sums {
            by_end: vec![0.0; n],
            by_end_sq: vec![0.0; n],
            total: 0.0,
            total_sq: 0.0,
            capped: 0,
        }
    }

    fn merge(mut self, other: &Sums) -> Self {
        for j in 0..self.by_end.len() {
            self.by_end[j] += other.by_end[j];
            self.by_end_sq[j] += other.by_end_sq[j];
        }
        self.total += other.total;
        self.total_sq += other.total_sq;
        self.capped += other.capped;
        self
    }
}

fn mean_and_stderr(sum: f64, sum_sq: f64, paths: usize) -> (f64, f64) {
    let m = paths as f64;
    let mean = sum / m;
    if paths < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
    (mean, (var / m).sqrt())
}

fn run(
    model: &MapModel,
    u: f64,
    target: f64,
    paths: usize,
    seed: u64,
    stop: Stop,
    weight: impl Fn(&PathFunctional) -> f64 + Sync,
) -> Result<MatrixEstimate> {
    require_simulable(model)?;
    if paths == 0 {
        return Err(Error::InvalidArgument("at least one path is needed".into()));
    }
    let n = model.states();
    check_levels(model, 0, u, target)?;
    let chunks = paths.div_ceil(CHUNK);
    let mut matrix = RMatrix::zeros(n, n);
    let mut matrix_stderr = RMatrix::zeros(n, n);
    let mut value = vec![0.0; n];
    let mut stderr = vec![0.0; n];
    let mut capped = 0;
    for start in 0..n {
        let parts: Vec<Sums> = (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = ChaCha8Rng::seed_from_u64(chunk_seed(seed, start, chunk));
                let count = CHUNK.min(paths - chunk * CHUNK);
                let mut sums = Sums::new(n);
                for _ in 0..count {
                    let path = simulate(model, start, u, target, stop, &mut rng);
                    if path.capped {
                        sums.capped += 1;
                    }
                    let w = weight(&path);
                    if let Some(j) = path.end_state {
                        sums.by_end[j] += w;
                        sums.by_end_sq[j] += w * w;
                    }
                    sums.total += w;
                    sums.total_sq += w * w;
                }
                sums
            })
            .collect();
        let sums = parts.iter().fold(Sums::new(n), |acc, s| acc.merge(s));
        for j in 0..n {
            let (m, se) = mean_and_stderr(sums.by_end[j], sums.by_end_sq[j], paths);
            matrix[(start, j)] = m;
            matrix_stderr[(start, j)] = se;
        }
        let (m, se) = mean_and_stderr(sums.total, sums.total_sq, paths);
        value[start] = m;
        stderr[start] = se;
        capped += sums.capped;
    }
    Ok(MatrixEstimate {
        matrix,
        matrix_stderr,
        rows: EstimateReport {
            value,
            stderr,
            paths,
            seed,
            capped,
        },
    })
}

/// Estimate `R(u, x)` entrywise, `paths` paths per starting state.
pub fn estimate_reach(
    model: &MapModel,
    u: f64,
    x: f64,
    paths: usize,
    seed: u64,
) -> Result<MatrixEstimate> {
    run(model, u, x, paths, seed, Stop::Weight, |p| path_weight(model, p))
}

/// Estimate `phi(u)` by the probability of reaching `x_max` unobserved.
///
/// The truncation bias is non-negative and decreases in `x_max`.
pub fn estimate_survival(
    model: &MapModel,
    u: f64,
    x_max: f64,
    paths: usize,
    seed: u64,
) -> Result<EstimateReport> {
    let mu = model.drift().mu;
    if mu <= 0.0 {
        return Err(Error::NonPositiveDrift { mu });
    }
    Ok(estimate_reach(model, u, x_max, paths, seed)?.rows)
}

/// Estimate the classical probabilities of reaching `x` from `u` without
/// going below zero, entrywise by the state at passage.
pub fn estimate_classical(
    model: &MapModel,
    u: f64,
    x: f64,
    paths: usize,
    seed: u64,
) -> Result<MatrixEstimate> {
    run(model, u, x, paths, seed, Stop::Ruin, |p| {
        if p.reached && p.classical_ruin_time.is_none() {
            1.0
        } else {
            0.0
        }
    })
}

/// Whether `estimate` lies within `k` standard errors plus `slack` of `exact`.
pub fn within(exact: f64, estimate: f64, stderr: f64, k: f64, slack: f64) -> bool {
    (exact - estimate).abs() <= k * stderr + slack
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn no_claims() -> MapModel {
        MapModel::new(
            RMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]),
            vec![1.0, 2.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![PhaseType::exponential(1.0).unwrap(), PhaseType::exponential(1.0).unwrap()],
            vec![0.4, 0.2],
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn deterministic_drift_never_goes_below_zero() {
        let m = no_claims();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = simulate_path(&m, 0, 0.0, 3.0, &mut rng).unwrap();
        assert!(p.reached && p.occupation == vec![0.0, 0.0]);
        assert!(p.classical_ruin_time.is_none());
        let r = estimate_reach(&m, 0.0, 3.0, 500, 3).unwrap();
        assert_eq!(r.rows.value, vec![1.0, 1.0]);
        assert_eq!(r.rows.stderr, vec![0.0, 0.0]);
        let c = estimate_classical(&m, 0.0, 3.0, 500, 3).unwrap();
        assert_eq!(c.rows.value, vec![1.0, 1.0]);
    }

    #[test]
    fn unobserved_reach_is_certain() {
        let m = MapModel::two_state_example().with_omega(vec![0.0, 0.0]).unwrap();
        let r = estimate_reach(&m, 0.0, 2.0, 2000, 9).unwrap();
        assert_eq!(r.rows.value, vec![1.0, 1.0]);
        assert_eq!(r.rows.stderr, vec![0.0, 0.0]);
    }

    #[test]
    fn start_at_target() {
        let m = MapModel::two_state_example();
        let r = estimate_reach(&m, 0.0, 0.0, 100, 1).unwrap();
        assert_eq!(r.matrix, RMatrix::identity(2, 2));
    }

    #[test]
    fn deterministic_given_seed() {
        let m = MapModel::two_state_example();
        let a = estimate_reach(&m, 0.0, 1.0, 5000, 42).unwrap();
        let b = estimate_reach(&m, 0.0, 1.0, 5000, 42).unwrap();
        assert_eq!(a, b);
        let c = estimate_reach(&m, 0.0, 1.0, 5000, 43).unwrap();
        assert_ne!(a.rows.value, c.rows.value);
    }

    #[test]
    fn weights_are_probabilities() {
        let m = MapModel::two_state_example();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..500 {
            let p = simulate_path(&m, k % 2, 0.0, 2.0, &mut rng).unwrap();
            let w = path_weight(&m, &p);
            assert!(p.reached && w > 0.0 && w <= 1.0);
            assert!(p.occupation.iter().all(|&a| a >= 0.0));
        }
    }

    #[test]
    fn phase_type_sampling_mean() {
        let law = PhaseType::erlang(3, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mean = (0..n).map(|_| sample_phase_type(&law, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn brownian_models_are_rejected() {
        let m = MapModel::new(
            RMatrix::zeros(1, 1),
            vec![1.0],
            vec![0.5],
            vec![0.5],
            vec![PhaseType::exponential(1.0).unwrap()],
            vec![0.3],
            BTreeMap::new(),
        )
        .unwrap();
        assert!(matches!(
            estimate_reach(&m, 0.0, 1.0, 10, 1),
            Err(Error::BrownianUnsupported { state: 0 })
        ));
    }

    #[test]
    fn chunk_seeds_differ() {
        let s: Vec<u64> = (0..4).map(|c| chunk_seed(42, 0, c)).collect();
        assert!(s.windows(2).all(|w| w[0] != w[1]));
        assert_ne!(chunk_seed(42, 0, 0), chunk_seed(42, 1, 0));
    }
}
