//! Penalty-based particle swarm search over element placements.
//!
//! A particle encodes all `M` element positions. Positions stay inside
//! their subareas through projection after every move; the minimum spacing
//! and the power budget enter the fitness as `τ`-weighted penalties. Each
//! element reads the channel at its nearest preset, so fitness is a function
//! of the snapped lattice placement.
//!
//! Randomness for particle `i` at iteration `t` comes from its own ChaCha
//! stream, so results do not depend on evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::geometry::{spacing_violations, Placement, Point, SurfaceGeometry};
use crate::rate::{coherent_gain, report_from_gains, RateReport};

/// Default cap on the number of lattice combinations the oracle enumerates.
pub const ORACLE_CAP: u128 = 1_000_000;

/// Base term of the fitness before penalties.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// `min(R_r, R_t)`.
    #[default]
    Min,
    /// `R_r + R_t` under the max-min split.
    Sum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub n_particles: usize,
    pub n_iterations: usize,
    /// Inertia weight `w`.
    pub inertia: f64,
    /// Cognitive factor `c1`.
    pub cognitive: f64,
    /// Social factor `c2`.
    pub social: f64,
    /// Penalty coefficient `τ`.
    pub penalty: f64,
    pub seed: u64,
    #[serde(default)]
    pub objective: Objective,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            n_particles: 50,
            n_iterations: 100,
            inertia: 0.4,
            cognitive: 0.5,
            social: 0.5,
            penalty: 1e6,
            seed: 0,
            objective: Objective::Min,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 || self.n_iterations == 0 {
            return Err(Error::Config(
                "PSO needs at least one particle and one iteration".into(),
            ));
        }
        let finite_nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !finite_nonneg(self.inertia)
            || !finite_nonneg(self.cognitive)
            || !finite_nonneg(self.social)
        {
            return Err(Error::Config(
                "inertia and learning factors must be non-negative".into(),
            ));
        }
        if !(self.penalty > 0.0) {
            return Err(Error::Config("penalty coefficient must be positive".into()));
        }
        Ok(())
    }
}

/// `max{0, P_r + P_t − P}`.
pub fn penalty_power(p_r: f64, p_t: f64, p: f64) -> f64 {
    (p_r + p_t - p).max(0.0)
}

/// One coordinate of the velocity update with explicit random draws.
#[allow(clippy::too_many_arguments)]
pub fn velocity_component(
    v: f64,
    pos: f64,
    personal_best: f64,
    global_best: f64,
    inertia: f64,
    cognitive: f64,
    social: f64,
    r1: f64,
    r2: f64,
) -> f64 {
    inertia * v + cognitive * r1 * (personal_best - pos) + social * r2 * (global_best - pos)
}

/// Velocity update with `r1`, `r2` drawn per coordinate.
pub fn update_velocity<R: Rng + ?Sized>(
    v: &[Point],
    pos: &[Point],
    personal_best: &[Point],
    global_best: &[Point],
    cfg: &PsoConfig,
    rng: &mut R,
) -> Vec<Point> {
    let mut step = |v: f64, x: f64, p: f64, g: f64| {
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        velocity_component(v, x, p, g, cfg.inertia, cfg.cognitive, cfg.social, r1, r2)
    };
    v.iter()
        .zip(pos)
        .zip(personal_best.iter().zip(global_best))
        .map(|((v, x), (p, g))| Point::new(step(v.x, x.x, p.x, g.x), step(v.y, x.y, p.y, g.y)))
        .collect()
}

/// Moves every element by its velocity and projects it back into its subarea.
pub fn update_position(pos: &[Point], v: &[Point], geom: &SurfaceGeometry) -> Vec<Point> {
    pos.iter()
        .zip(v)
        .enumerate()
        .map(|(m, (p, dv))| {
            geom.project_to_subarea(&Point::new(p.x + dv.x, p.y + dv.y), m)
                .expect("particle dimension matches geometry")
        })
        .collect()
}

/// Fitness context: per-preset channel amplitude products for both users.
#[derive(Clone, Debug)]
pub struct Problem<'a> {
    geom: &'a SurfaceGeometry,
    amp_r: Vec<f64>,
    amp_t: Vec<f64>,
    power: f64,
    noise: f64,
    objective: Objective,
    penalty: f64,
}

/// Outcome of one fitness evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub indices: Vec<usize>,
    pub report: RateReport,
    pub violations: usize,
}

impl<'a> Problem<'a> {
    pub fn new(
        realization: &ChannelRealization,
        geom: &'a SurfaceGeometry,
        power: f64,
        noise: f64,
        objective: Objective,
        penalty: f64,
    ) -> Result<Self> {
        if realization.len() != geom.num_presets() {
            return Err(Error::LengthMismatch {
                expected: geom.num_presets(),
                actual: realization.len(),
            });
        }
        let product = |h: &[num_complex::Complex64]| -> Vec<f64> {
            realization
                .h_f
                .iter()
                .zip(h)
                .map(|(f, u)| f.norm() * u.norm())
                .collect()
        };
        Ok(Self {
            geom,
            amp_r: product(&realization.h_r),
            amp_t: product(&realization.h_t),
            power,
            noise,
            objective,
            penalty,
        })
    }

    pub fn geometry(&self) -> &SurfaceGeometry {
        self.geom
    }

    /// Rates for lattice indices, identical to [`crate::rate::evaluate`].
    pub fn report(&self, indices: &[usize]) -> RateReport {
        let s_r: f64 = indices.iter().map(|&i| self.amp_r[i]).sum();
        let s_t: f64 = indices.iter().map(|&i| self.amp_t[i]).sum();
        report_from_gains(
            coherent_gain(s_r, self.power, self.noise),
            coherent_gain(s_t, self.power, self.noise),
        )
    }

    fn base(&self, report: &RateReport) -> f64 {
        match self.objective {
            Objective::Min => report.effective,
            Objective::Sum => report.sum_rate(),
        }
    }

    pub fn evaluate_indices(&self, indices: Vec<usize>) -> Evaluation {
        let report = self.report(&indices);
        let positions: Vec<Point> = indices
            .iter()
            .map(|&i| self.geom.lattice_point(i))
            .collect();
        let violations = spacing_violations(&positions, self.geom.min_spacing());
        // P_t is formed as P − P_r so the budget holds with equality
        let p_r = report.beta_r * self.power;
        let p_t = self.power - p_r;
        let penalty = penalty_power(p_r, p_t, self.power) + violations as f64;
        Evaluation {
            fitness: self.base(&report) - self.penalty * penalty,
            indices,
            report,
            violations,
        }
    }

    pub fn evaluate(&self, positions: &[Point]) -> Result<Evaluation> {
        if positions.len() != self.geom.num_elements() {
            return Err(Error::LengthMismatch {
                expected: self.geom.num_elements(),
                actual: positions.len(),
            });
        }
        let indices = positions
            .iter()
            .enumerate()
            .map(|(m, p)| self.geom.snap_to_subarea(p, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.evaluate_indices(indices))
    }
}

/// Penalized fitness of `placement`.
pub fn fitness(
    placement: &Placement,
    realization: &ChannelRealization,
    geom: &SurfaceGeometry,
    power: f64,
    noise: f64,
    cfg: &PsoConfig,
) -> Result<f64> {
    let problem = Problem::new(realization, geom, power, noise, cfg.objective, cfg.penalty)?;
    Ok(problem.evaluate(&placement.positions)?.fitness)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwarmState {
    pub positions: Vec<Vec<Point>>,
    pub velocities: Vec<Vec<Point>>,
    pub personal_best_pos: Vec<Vec<Point>>,
    pub personal_best_fit: Vec<f64>,
    pub global_best_pos: Vec<Point>,
    pub global_best_fit: f64,
    /// Global best fitness after initialization, then after each iteration.
    pub history: Vec<f64>,
}

fn substream(seed: u64, iteration: usize, particle: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((iteration as u64) << 32) | particle as u64);
    rng
}

/// Random initial swarm. Particles `0..inject.len()` start at the injected
/// placements (projected into their subareas) instead.
pub fn init_swarm(problem: &Problem, cfg: &PsoConfig, inject: &[Placement]) -> Result<SwarmState> {
    cfg.validate()?;
    let geom = problem.geometry();
    let m = geom.num_elements();
    let bounds = (0..m)
        .map(|k| geom.subarea_bounds(k))
        .collect::<Result<Vec<_>>>()?;
    let mut positions = Vec::with_capacity(cfg.n_particles);
    let mut velocities = Vec::with_capacity(cfg.n_particles);
    for i in 0..cfg.n_particles {
        let mut rng = substream(cfg.seed, 0, i);
        let mut pos: Vec<Point> = bounds
            .iter()
            .map(|r| {
                Point::new(
                    rng.random_range(r.x_min..=r.x_max),
                    rng.random_range(r.y_min..=r.y_max),
                )
            })
            .collect();
        let vel: Vec<Point> = bounds
            .iter()
            .map(|r| {
                let (sx, sy) = (0.1 * r.width(), 0.1 * r.height());
                Point::new(rng.random_range(-sx..=sx), rng.random_range(-sy..=sy))
            })
            .collect();
        if let Some(seeded) = inject.get(i) {
            if seeded.len() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    actual: seeded.len(),
                });
            }
            pos = seeded
                .positions
                .iter()
                .zip(&bounds)
                .map(|(p, r)| r.clamp(p))
                .collect();
        }
        positions.push(pos);
        velocities.push(vel);
    }
    let fits = positions
        .iter()
        .map(|p| problem.evaluate(p).map(|e| e.fitness))
        .collect::<Result<Vec<_>>>()?;
    let best = argmax(&fits);
    Ok(SwarmState {
        global_best_pos: positions[best].clone(),
        global_best_fit: fits[best],
        personal_best_pos: positions.clone(),
        personal_best_fit: fits,
        positions,
        velocities,
        history: Vec::with_capacity(cfg.n_iterations + 1),
    })
}

// first index of the maximum
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl SwarmState {
    /// One synchronous iteration: every particle moves against the global
    /// best of the previous iteration, then bests are refreshed.
    pub fn step(&mut self, problem: &Problem, cfg: &PsoConfig, iteration: usize) -> Result<()> {
        let geom = problem.geometry();
        let (side_x, side_y) = geom.subarea_size();
        for i in 0..self.positions.len() {
            let mut rng = substream(cfg.seed, iteration, i);
            let mut v = update_velocity(
                &self.velocities[i],
                &self.positions[i],
                &self.personal_best_pos[i],
                &self.global_best_pos,
                cfg,
                &mut rng,
            );
            for dv in &mut v {
                dv.x = dv.x.clamp(-side_x, side_x);
                dv.y = dv.y.clamp(-side_y, side_y);
            }
            self.positions[i] = update_position(&self.positions[i], &v, geom);
            self.velocities[i] = v;
            let fit = problem.evaluate(&self.positions[i])?.fitness;
            if fit > self.personal_best_fit[i] {
                self.personal_best_fit[i] = fit;
                self.personal_best_pos[i] = self.positions[i].clone();
            }
        }
        let best = argmax(&self.personal_best_fit);
        if self.personal_best_fit[best] > self.global_best_fit {
            self.global_best_fit = self.personal_best_fit[best];
            self.global_best_pos = self.personal_best_pos[best].clone();
        }
        Ok(())
    }
}

/// Result of a swarm run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsoOutcome {
    /// Final element positions, on lattice presets.
    pub placement: Placement,
    /// 0-based lattice indices of the final positions.
    pub indices: Vec<usize>,
    pub report: RateReport,
    /// Global best fitness after initialization and after each iteration.
    pub history: Vec<f64>,
    /// Whether the spacing repair pass changed the swarm's best placement.
    pub repaired: bool,
}

/// Runs the swarm and returns the best feasible lattice placement found.
pub fn optimize(
    realization: &ChannelRealization,
    geom: &SurfaceGeometry,
    cfg: &PsoConfig,
    power: f64,
    noise: f64,
    inject: &[Placement],
) -> Result<PsoOutcome> {
    let problem = Problem::new(realization, geom, power, noise, cfg.objective, cfg.penalty)?;
    optimize_problem(&problem, cfg, inject)
}

pub fn optimize_problem(
    problem: &Problem,
    cfg: &PsoConfig,
    inject: &[Placement],
) -> Result<PsoOutcome> {
    let mut swarm = init_swarm(problem, cfg, inject)?;
    swarm.history.push(swarm.global_best_fit);
    for t in 1..=cfg.n_iterations {
        swarm.step(problem, cfg, t)?;
        swarm.history.push(swarm.global_best_fit);
    }
    let best = problem.evaluate(&swarm.global_best_pos)?;
    let (indices, repaired) = if best.violations > 0 {
        (repair_spacing(problem, best.indices), true)
    } else {
        (best.indices, false)
    };
    let geom = problem.geometry();
    Ok(PsoOutcome {
        placement: Placement::new(indices.iter().map(|&i| geom.lattice_point(i)).collect()),
        report: problem.report(&indices),
        indices,
        history: swarm.history,
        repaired,
    })
}

/// Walks the elements in order and moves any element that sits too close to
/// an earlier one. The moved element takes the best preset of its subarea
/// that keeps the spacing to every earlier element, or the preset farthest
/// from them when none does.
pub fn repair_spacing(problem: &Problem, mut indices: Vec<usize>) -> Vec<usize> {
    let geom = problem.geometry();
    let d = geom.min_spacing();
    for m in 1..indices.len() {
        let fixed: Vec<Point> = indices[..m]
            .iter()
            .map(|&i| geom.lattice_point(i))
            .collect();
        let clearance = |flat: usize| {
            let p = geom.lattice_point(flat);
            fixed
                .iter()
                .map(|q| p.distance(q))
                .fold(f64::INFINITY, f64::min)
        };
        if clearance(indices[m]) >= d {
            continue;
        }
        let candidates = geom
            .preset_indices(m)
            .expect("element index within geometry");
        let mut best: Option<(f64, usize)> = None;
        for &flat in candidates.iter().filter(|&&f| clearance(f) >= d) {
            let mut trial = indices.clone();
            trial[m] = flat;
            let fit = problem.evaluate_indices(trial).fitness;
            if best.is_none_or(|(b, _)| fit > b) {
                best = Some((fit, flat));
            }
        }
        indices[m] = match best {
            Some((_, flat)) => flat,
            None => {
                let mut far = candidates[0];
                for &flat in &candidates {
                    if clearance(flat) > clearance(far) {
                        far = flat;
                    }
                }
                far
            }
        };
    }
    indices
}

/// Exhaustive search result.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleOutcome {
    pub placement: Placement,
    pub indices: Vec<usize>,
    pub report: RateReport,
    /// Number of spacing-feasible combinations evaluated.
    pub evaluated: usize,
}

/// Tries every spacing-feasible choice of one preset per subarea and keeps
/// the highest effective rate; ties keep the lexicographically smallest
/// index tuple.
pub fn brute_force_oracle(
    realization: &ChannelRealization,
    geom: &SurfaceGeometry,
    power: f64,
    noise: f64,
    cap: u128,
) -> Result<OracleOutcome> {
    let problem = Problem::new(realization, geom, power, noise, Objective::Min, 1.0)?;
    let choices = (0..geom.num_elements())
        .map(|m| geom.preset_indices(m))
        .collect::<Result<Vec<_>>>()?;
    let combinations = choices
        .iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
        .unwrap_or(u128::MAX);
    if combinations > cap {
        return Err(Error::SearchSpace { combinations, cap });
    }
    let d = geom.min_spacing();
    let points: Vec<Vec<Point>> = choices
        .iter()
        .map(|c| c.iter().map(|&i| geom.lattice_point(i)).collect())
        .collect();
    let mut digits = vec![0usize; choices.len()];
    let mut current = Vec::with_capacity(choices.len());
    let mut best: Option<(f64, Vec<usize>, RateReport)> = None;
    let mut evaluated = 0;
    loop {
        let feasible = (0..digits.len()).all(|a| {
            (a + 1..digits.len()).all(|b| points[a][digits[a]].distance(&points[b][digits[b]]) >= d)
        });
        if feasible {
            current.clear();
            current.extend(digits.iter().zip(&choices).map(|(&k, c)| c[k]));
            let report = problem.report(&current);
            evaluated += 1;
            if best.as_ref().is_none_or(|(b, _, _)| report.effective > *b) {
                best = Some((report.effective, current.clone(), report));
            }
        }
        // odometer, last digit fastest: lexicographic order
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                let (_, indices, report) = best.ok_or_else(|| {
                    Error::Geometry("no spacing-feasible lattice placement exists".into())
                })?;
                return Ok(OracleOutcome {
                    placement: Placement::new(
                        indices.iter().map(|&i| geom.lattice_point(i)).collect(),
                    ),
                    indices,
                    report,
                    evaluated,
                });
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < choices[pos].len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelModel, ChannelParams, LinkParams};
    use crate::geometry::{partition_surface, Aperture, PresetDensity, SubareaGrid};
    use crate::rate::evaluate;

    fn link(distance: f64, az: f64, el: f64) -> LinkParams {
        LinkParams {
            rician_k: 5.0,
            distance,
            path_loss_exponent: 2.5,
            azimuth: az,
            elevation: el,
        }
    }

    fn params() -> ChannelParams {
        ChannelParams {
            bs_departure: 0.4,
            incident: link(100.0, 0.5, 1.2),
            reflect: link(200.0, 2.1, 0.7),
            transmit: link(200.0, 1.3, 2.6),
        }
    }

    fn tiny(seed: u64) -> (SurfaceGeometry, ChannelRealization) {
        let lambda = 0.0857;
        let geom = SurfaceGeometry::with_grid(
            Aperture::new(2.0, 2.0),
            SubareaGrid::new(2, 1),
            PresetDensity::square(3),
            lambda / 2.0,
            lambda,
        )
        .unwrap();
        let model = ChannelModel::new(geom.clone()).unwrap();
        let h = model
            .synthesize(&params(), &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap();
        (geom, h)
    }

    const P: f64 = 10.0;
    const NOISE: f64 = 1e-12;

    #[test]
    fn velocity_examples() {
        let z = Point::new(0.0, 0.0);
        let cfg = PsoConfig {
            inertia: 0.0,
            cognitive: 0.0,
            social: 0.0,
            ..PsoConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = update_velocity(
            &[Point::new(3.0, -2.0)],
            &[Point::new(0.1, 0.2)],
            &[Point::new(1.0, 1.0)],
            &[Point::new(2.0, 2.0)],
            &cfg,
            &mut rng,
        );
        assert_eq!(v, vec![z]);
        let p = Point::new(0.3, 0.7);
        let v = update_velocity(&[z], &[p], &[p], &[p], &PsoConfig::default(), &mut rng);
        assert_eq!(v, vec![z]);
        let v = velocity_component(1.0, 0.0, 1.0, 2.0, 0.4, 0.5, 0.5, 1.0, 1.0);
        assert!((v - 1.9).abs() < 1e-15);
    }

    #[test]
    fn position_examples() {
        let (geom, _) = tiny(1);
        let pos = [Point::new(0.10, 0.5), Point::new(1.5, 1.0)];
        let zero = [Point::new(0.0, 0.0); 2];
        assert_eq!(update_position(&pos, &zero, &geom), pos.to_vec());
        let moved = update_position(&pos, &[Point::new(0.05, 0.0), Point::new(5.0, -5.0)], &geom);
        assert!((moved[0].x - 0.15).abs() < 1e-15);
        assert_eq!(moved[1], Point::new(2.0, 0.0));
    }

    #[test]
    fn power_penalty_examples() {
        assert_eq!(penalty_power(0.3, 0.7, 1.0), 0.0);
        assert!((penalty_power(1.0, 0.5, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(penalty_power(0.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn feasible_fitness_is_effective_rate() {
        let (geom, h) = tiny(2);
        let placement = Placement::new(vec![Point::new(0.5, 1.0), Point::new(1.5, 1.0)]);
        let cfg = PsoConfig::default();
        let f = fitness(&placement, &h, &geom, P, NOISE, &cfg).unwrap();
        let r = evaluate(&h, &placement, &geom, P, NOISE).unwrap();
        assert_eq!(f, r.effective);
    }

    #[test]
    fn spacing_violation_dominates() {
        let (geom, h) = tiny(2);
        // both elements snap to the shared-edge columns, 2/5 m apart
        let big = SurfaceGeometry::with_grid(
            geom.aperture(),
            geom.grid(),
            geom.presets(),
            1.0,
            geom.wavelength(),
        )
        .unwrap();
        let placement = Placement::new(vec![Point::new(1.0, 0.0), Point::new(1.0, 0.0)]);
        let cfg = PsoConfig::default();
        let f = fitness(&placement, &h, &big, P, NOISE, &cfg).unwrap();
        let r = evaluate(&h, &placement, &big, P, NOISE).unwrap();
        assert!(f <= r.effective - 1e6);
    }

    #[test]
    fn oracle_counts_and_dominates() {
        let (geom, h) = tiny(3);
        let o = brute_force_oracle(&h, &geom, P, NOISE, ORACLE_CAP).unwrap();
        assert_eq!(o.evaluated, 81);
        // exhaustive check of the oracle's own claim
        for a in geom.preset_indices(0).unwrap() {
            for b in geom.preset_indices(1).unwrap() {
                let pl = Placement::new(vec![geom.lattice_point(a), geom.lattice_point(b)]);
                let e = evaluate(&h, &pl, &geom, P, NOISE).unwrap().effective;
                assert!(e <= o.report.effective);
                let cfg = PsoConfig::default();
                assert!(fitness(&pl, &h, &geom, P, NOISE, &cfg).unwrap() <= o.report.effective);
            }
        }
    }

    #[test]
    fn oracle_skips_infeasible_combinations() {
        let (geom, h) = tiny(3);
        // spacing 0.5 m: the shared-edge columns (x = 0.8 and 1.2) clash
        let g = SurfaceGeometry::with_grid(
            geom.aperture(),
            geom.grid(),
            geom.presets(),
            0.5,
            geom.wavelength(),
        )
        .unwrap();
        let o = brute_force_oracle(&h, &g, P, NOISE, ORACLE_CAP).unwrap();
        let mut feasible = 0;
        for a in g.preset_indices(0).unwrap() {
            for b in g.preset_indices(1).unwrap() {
                if g.lattice_point(a).distance(&g.lattice_point(b)) >= 0.5 {
                    feasible += 1;
                }
            }
        }
        assert!(feasible < 81);
        assert_eq!(o.evaluated, feasible);
        assert_eq!(o.placement.spacing_violations(0.5), 0);
    }

    #[test]
    fn oracle_single_element_is_argmax() {
        let lambda = 0.0857;
        let geom = partition_surface(
            Aperture::new(1.0, 1.0),
            1,
            PresetDensity::square(4),
            lambda / 2.0,
            lambda,
        )
        .unwrap();
        let h = ChannelModel::new(geom.clone())
            .unwrap()
            .synthesize(&params(), &mut ChaCha8Rng::seed_from_u64(4))
            .unwrap();
        let o = brute_force_oracle(&h, &geom, P, NOISE, ORACLE_CAP).unwrap();
        assert_eq!(o.evaluated, 16);
        let best = (0..16)
            .map(|i| {
                let pl = Placement::new(vec![geom.lattice_point(i)]);
                evaluate(&h, &pl, &geom, P, NOISE).unwrap().effective
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(o.report.effective, best);
    }

    #[test]
    fn oracle_refuses_large_spaces() {
        let (geom, h) = tiny(3);
        assert!(matches!(
            brute_force_oracle(&h, &geom, P, NOISE, 80),
            Err(Error::SearchSpace {
                combinations: 81,
                cap: 80
            })
        ));
    }

    #[test]
    fn init_respects_subareas_and_seed() {
        let (geom, h) = tiny(5);
        let problem = Problem::new(&h, &geom, P, NOISE, Objective::Min, 1e6).unwrap();
        let cfg = PsoConfig {
            seed: 17,
            ..PsoConfig::default()
        };
        let a = init_swarm(&problem, &cfg, &[]).unwrap();
        let b = init_swarm(&problem, &cfg, &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.positions.len(), 50);
        for p in &a.positions {
            assert!(geom.contains(&Placement::new(p.clone())));
        }
    }

    #[test]
    fn injected_placement_seeds_swarm() {
        let (geom, h) = tiny(5);
        let problem = Problem::new(&h, &geom, P, NOISE, Objective::Min, 1e6).unwrap();
        let seeded = Placement::new(vec![Point::new(0.5, 1.0), Point::new(1.5, 1.0)]);
        let s = init_swarm(
            &problem,
            &PsoConfig::default(),
            std::slice::from_ref(&seeded),
        )
        .unwrap();
        assert_eq!(s.positions[0], seeded.positions);
        let f = problem.evaluate(&seeded.positions).unwrap().fitness;
        assert!(s.global_best_fit >= f);
    }

    #[test]
    fn optimize_is_deterministic_and_monotone() {
        let (geom, h) = tiny(6);
        let cfg = PsoConfig {
            n_iterations: 30,
            seed: 3,
            ..PsoConfig::default()
        };
        let a = optimize(&h, &geom, &cfg, P, NOISE, &[]).unwrap();
        let b = optimize(&h, &geom, &cfg, P, NOISE, &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 31);
        assert!(a.history.windows(2).all(|w| w[1] >= w[0]));
        let o = brute_force_oracle(&h, &geom, P, NOISE, ORACLE_CAP).unwrap();
        assert!(o.report.effective >= a.report.effective);
    }

    #[test]
    fn oracle_dominates_swarm() {
        for seed in 0..20 {
            let (geom, h) = tiny(100 + seed);
            let cfg = PsoConfig {
                seed,
                ..PsoConfig::default()
            };
            let out = optimize(&h, &geom, &cfg, P, NOISE, &[]).unwrap();
            let o = brute_force_oracle(&h, &geom, P, NOISE, ORACLE_CAP).unwrap();
            assert!(o.report.effective >= out.report.effective);
            assert!(out.report.effective > 0.0);
        }
    }

    #[test]
    fn repair_restores_spacing() {
        let (geom, h) = tiny(7);
        let g = SurfaceGeometry::with_grid(
            geom.aperture(),
            geom.grid(),
            geom.presets(),
            0.5,
            geom.wavelength(),
        )
        .unwrap();
        let problem = Problem::new(&h, &g, P, NOISE, Objective::Min, 1e6).unwrap();
        // column 2 of subarea 0 and column 0 of subarea 1 are 0.4 m apart
        let a = g.preset_indices(0).unwrap()[2];
        let b = g.preset_indices(1).unwrap()[0];
        let fixed = repair_spacing(&problem, vec![a, b]);
        assert_eq!(fixed[0], a);
        assert_eq!(g.subarea_of_preset(fixed[1]), 1);
        let pts: Vec<Point> = fixed.iter().map(|&i| g.lattice_point(i)).collect();
        assert_eq!(spacing_violations(&pts, 0.5), 0);
        // the replacement is the best feasible choice for element 1
        for c in g.preset_indices(1).unwrap() {
            if g.lattice_point(c).distance(&pts[0]) >= 0.5 {
                assert!(
                    problem.evaluate_indices(vec![a, c]).fitness
                        <= problem.evaluate_indices(fixed.clone()).fitness
                );
            }
        }
    }

    #[test]
    fn repair_falls_back_to_farthest_preset() {
        let (geom, h) = tiny(7);
        let g = SurfaceGeometry::with_grid(
            geom.aperture(),
            geom.grid(),
            geom.presets(),
            10.0,
            geom.wavelength(),
        )
        .unwrap();
        let problem = Problem::new(&h, &g, P, NOISE, Objective::Min, 1e6).unwrap();
        let a = g.preset_indices(0).unwrap()[0];
        let fixed = repair_spacing(&problem, vec![a, g.preset_indices(1).unwrap()[0]]);
        // (0,0) is fixed; the farthest preset of subarea 1 is the top-right corner
        assert_eq!(g.lattice_point(fixed[1]), Point::new(2.0, 2.0));
    }

    #[test]
    fn sum_objective_is_selectable() {
        let (geom, h) = tiny(8);
        let cfg = PsoConfig {
            objective: Objective::Sum,
            n_iterations: 20,
            ..PsoConfig::default()
        };
        let out = optimize(&h, &geom, &cfg, P, NOISE, &[]).unwrap();
        let top = out.history.last().copied().unwrap();
        assert!((top - out.report.sum_rate()).abs() < 1e-9 || out.repaired);
    }

    #[test]
    fn invalid_config_rejected() {
        let (geom, h) = tiny(8);
        for cfg in [
            PsoConfig {
                n_particles: 0,
                ..PsoConfig::default()
            },
            PsoConfig {
                n_iterations: 0,
                ..PsoConfig::default()
            },
            PsoConfig {
                inertia: -1.0,
                ..PsoConfig::default()
            },
            PsoConfig {
                penalty: 0.0,
                ..PsoConfig::default()
            },
        ] {
            assert!(optimize(&h, &geom, &cfg, P, NOISE, &[]).is_err());
        }
    }
}
