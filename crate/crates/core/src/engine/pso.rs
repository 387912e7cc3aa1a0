//! Global-best particle swarm with restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Swarm configuration. `bounds` fixes the dimension of the search.
#[derive(Debug, Clone, PartialEq)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
    pub restarts: usize,
    /// Seeded into the swarm of every restart before random particles.
    pub initial_points: Vec<Vec<f64>>,
}

impl PsoParams {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        PsoParams {
            swarm_size: 10,
            iterations: 200,
            inertia: 0.7298,
            cognitive: 1.49618,
            social: 1.49618,
            bounds,
            seed: 0,
            restarts: 5,
            initial_points: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.swarm_size < 2 {
            bad.push("swarm_size must be at least 2".to_string());
        }
        if self.iterations < 1 {
            bad.push("iterations must be at least 1".to_string());
        }
        if self.restarts < 1 {
            bad.push("restarts must be at least 1".to_string());
        }
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                bad.push(format!("bounds[{i}] = [{lo}, {hi}] is not a finite interval"));
            }
        }
        for (k, p) in self.initial_points.iter().enumerate() {
            if p.len() != self.bounds.len() {
                bad.push(format!("initial_points[{k}] has dimension {}", p.len()));
            }
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
        ] {
            if !v.is_finite() {
                bad.push(format!("{name} must be finite"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidPolicy(bad.join("; ")))
        }
    }
}

/// Anything the swarm can rank.
pub trait Score: Clone + Send {
    /// Strictly better than `other`.
    fn better_than(&self, other: &Self) -> bool;
    /// Scalar reported in the convergence trace.
    fn trace_value(&self) -> f64;
}

/// Plain minimization.
impl Score for f64 {
    fn better_than(&self, other: &Self) -> bool {
        self < other || (other.is_nan() && !self.is_nan())
    }

    fn trace_value(&self) -> f64 {
        *self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult<S> {
    pub best_position: Vec<f64>,
    pub best: S,
    /// `(iteration, best-so-far)` with iterations numbered across restarts;
    /// iteration 0 of each restart is its initial swarm.
    pub trace: Vec<(usize, f64)>,
    pub evaluations: usize,
}

struct Particle<S> {
    x: Vec<f64>,
    v: Vec<f64>,
    best_x: Vec<f64>,
    best: S,
}

fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let mut y = x;
    if y > hi {
        y = hi - (y - hi);
    }
    if y < lo {
        y = lo + (lo - y);
    }
    y.clamp(lo, hi)
}

fn evaluate_all<S, F>(eval: &F, xs: &[Vec<f64>]) -> Vec<S>
where
    S: Score,
    F: Fn(&[f64]) -> S + Sync,
{
    xs.par_iter().map(|x| eval(x)).collect()
}

/// Runs `params.restarts` independent swarms and keeps the best point.
///
/// Velocities are clamped per dimension to the bound width and positions
/// leaving the box are mirrored back inside. Evaluations inside an
/// iteration run in parallel but are merged in particle order, so the
/// result depends only on the seed.
pub fn pso_run<S, F>(eval: F, params: &PsoParams) -> Result<PsoResult<S>>
where
    S: Score,
    F: Fn(&[f64]) -> S + Sync,
{
    params.validate()?;
    let dim = params.bounds.len();
    let width: Vec<f64> = params.bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let clamp_in = |p: &[f64]| -> Vec<f64> {
        p.iter()
            .zip(&params.bounds)
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    };

    let mut global: Option<(Vec<f64>, S)> = None;
    let mut trace = Vec::with_capacity(params.restarts * (params.iterations + 1));
    let mut evaluations = 0;
    let mut tick = 0;

    for restart in 0..params.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(restart as u64);

        let mut starts: Vec<Vec<f64>> = params.initial_points.iter().map(|p| clamp_in(p)).collect();
        while starts.len() < params.swarm_size {
            starts.push(
                params
                    .bounds
                    .iter()
                    .map(|(lo, hi)| if hi > lo { rng.random_range(*lo..=*hi) } else { *lo })
                    .collect(),
            );
        }
        let scores = evaluate_all(&eval, &starts);
        evaluations += starts.len();

        // Surplus initial points only seed the best-so-far.
        let mut swarm: Vec<Particle<S>> = Vec::with_capacity(params.swarm_size);
        let mut local: Option<(Vec<f64>, S)> = None;
        for (k, (x, s)) in starts.into_iter().zip(scores).enumerate() {
            if local.as_ref().is_none_or(|(_, b)| s.better_than(b)) {
                local = Some((x.clone(), s.clone()));
            }
            if k < params.swarm_size {
                let v = width
                    .iter()
                    .map(|w| {
                        if *w > 0.0 {
                            0.1 * w * rng.random_range(-1.0..=1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                swarm.push(Particle {
                    best_x: x.clone(),
                    x,
                    v,
                    best: s,
                });
            }
        }
        let (mut gx, mut gs) = local.expect("swarm is non-empty");
        merge(&mut global, &gx, &gs);
        trace.push((tick, global.as_ref().unwrap().1.trace_value()));
        tick += 1;

        for _ in 0..params.iterations {
            for p in swarm.iter_mut() {
                for d in 0..dim {
                    if width[d] <= 0.0 {
                        p.v[d] = 0.0;
                        p.x[d] = params.bounds[d].0;
                        continue;
                    }
                    let r1: f64 = rng.random();
                    let r2: f64 = rng.random();
                    let v = params.inertia * p.v[d]
                        + params.cognitive * r1 * (p.best_x[d] - p.x[d])
                        + params.social * r2 * (gx[d] - p.x[d]);
                    p.v[d] = v.clamp(-width[d], width[d]);
                    p.x[d] = reflect(p.x[d] + p.v[d], params.bounds[d].0, params.bounds[d].1);
                }
            }
            let xs: Vec<Vec<f64>> = swarm.iter().map(|p| p.x.clone()).collect();
            let scores = evaluate_all(&eval, &xs);
            evaluations += xs.len();
            for (p, s) in swarm.iter_mut().zip(scores) {
                if s.better_than(&p.best) {
                    p.best_x.clone_from(&p.x);
                    p.best = s.clone();
                }
                if s.better_than(&gs) {
                    gx.clone_from(&p.x);
                    gs = s;
                }
            }
            merge(&mut global, &gx, &gs);
            trace.push((tick, global.as_ref().unwrap().1.trace_value()));
            tick += 1;
        }
    }

    let (best_position, best) = global.expect("at least one restart");
    Ok(PsoResult {
        best_position,
        best,
        trace,
        evaluations,
    })
}

fn merge<S: Score>(global: &mut Option<(Vec<f64>, S)>, x: &[f64], s: &S) {
    if global.as_ref().is_none_or(|(_, b)| s.better_than(b)) {
        *global = Some((x.to_vec(), s.clone()));
    }
}
