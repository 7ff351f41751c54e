//! Sampled trajectories and bundles with the shift flow.
//!
//! A [`Trajectory`] is a path sampled on the uniform time grid
//! `{k0*dt, ..., (k0+m-1)*dt}`. Shifts are restricted to integer multiples
//! of the step so the flow laws hold exactly, not approximately. A
//! [`SolutionBundle`] is a finite family of trajectories with shared step
//! and space together with a provenance record.

use crate::error::{Error, Result};
use crate::space::{CellSet, Grid, Point, SpaceDescriptor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Snap tolerance for recognizing grid times, in step units.
const NODE_SNAP: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    space: Arc<SpaceDescriptor>,
    dt: f64,
    start_index: i64,
    samples: Vec<Point>,
    pub left_truncated: bool,
    pub right_truncated: bool,
}

impl Trajectory {
    pub fn new(
        space: Arc<SpaceDescriptor>,
        dt: f64,
        start_index: i64,
        samples: Vec<Point>,
    ) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidDescriptor(format!("step must be positive, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::InvalidDescriptor("trajectory needs at least one sample".into()));
        }
        let samples: Vec<Point> = samples.iter().map(|p| space.canonicalize(p)).collect();
        for p in &samples {
            if !space.contains(p) {
                return Err(Error::InvalidDescriptor(format!("sample {p:?} outside the space")));
            }
        }
        Ok(Trajectory {
            space,
            dt,
            start_index,
            samples,
            left_truncated: false,
            right_truncated: false,
        })
    }

    pub fn with_flags(mut self, left: bool, right: bool) -> Self {
        self.left_truncated = left;
        self.right_truncated = right;
        self
    }

    pub fn space(&self) -> &Arc<SpaceDescriptor> {
        &self.space
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn start_index(&self) -> i64 {
        self.start_index
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least one sample by construction
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    pub fn sample(&self, k: usize) -> &Point {
        &self.samples[k]
    }

    /// First and last sampled time.
    pub fn window(&self) -> (f64, f64) {
        (
            self.start_index as f64 * self.dt,
            (self.start_index + self.samples.len() as i64 - 1) as f64 * self.dt,
        )
    }

    /// Whether time 0 lies on the sampled window (`k0 <= 0 < k0 + m`).
    pub fn defined_at_zero(&self) -> bool {
        self.start_index <= 0 && 0 < self.start_index + self.samples.len() as i64
    }

    /// Sample at time 0, when defined.
    pub fn value_at_zero(&self) -> Option<&Point> {
        if self.defined_at_zero() {
            Some(&self.samples[(-self.start_index) as usize])
        } else {
            None
        }
    }

    /// Shift by `k` steps: `shift(phi, k)(t) = phi(t + k*dt)`. Samples are
    /// untouched; only the start index moves, so flow laws are exact.
    pub fn shift(&self, k: i64) -> Trajectory {
        let mut out = self.clone();
        out.start_index -= k;
        out
    }

    /// Shift by a model time that must be an integer multiple of the step.
    pub fn shift_time(&self, t: f64) -> Result<Trajectory> {
        let steps = t / self.dt;
        let k = steps.round();
        if (steps - k).abs() > NODE_SNAP {
            return Err(Error::GridAlignment {
                value: t,
                step: self.dt,
            });
        }
        Ok(self.shift(k as i64))
    }

    /// Value at time `t` inside the window: exact at grid times, linear
    /// interpolation between bracketing samples (shortest-arc on tori, ties
    /// broken toward the positive direction; previous sample on finite spaces).
    pub fn evaluate(&self, t: f64) -> Result<Point> {
        let s = t / self.dt - self.start_index as f64;
        let m = self.samples.len();
        let nearest = s.round();
        if (s - nearest).abs() <= NODE_SNAP && nearest >= 0.0 && (nearest as usize) < m {
            return Ok(self.samples[nearest as usize].clone());
        }
        if s < 0.0 || s > (m - 1) as f64 {
            let (t_min, t_max) = self.window();
            return Err(Error::OutsideWindow { t, t_min, t_max });
        }
        let i = s.floor() as usize;
        let theta = s - i as f64;
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let out: Point = match self.space.as_ref() {
            SpaceDescriptor::Torus { bounds } => a
                .iter()
                .zip(b)
                .zip(bounds)
                .map(|((&x, &y), &(lo, hi))| {
                    let period = hi - lo;
                    let mut d = (y - x).rem_euclid(period);
                    if d > period / 2.0 {
                        d -= period;
                    }
                    x + theta * d
                })
                .collect(),
            SpaceDescriptor::Finite { .. } => a.clone(),
            SpaceDescriptor::Box { .. } => a
                .iter()
                .zip(b)
                .map(|(&x, &y)| x + theta * (y - x))
                .collect(),
        };
        Ok(self.space.canonicalize(&out))
    }

    /// Sum of step distances over the window.
    pub fn total_variation(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| self.space.distance(&w[0], &w[1]))
            .sum()
    }

    /// Largest per-step displacement divided by the step: a Lipschitz
    /// witness for the sampled path.
    pub fn max_step_rate(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| self.space.distance(&w[0], &w[1]) / self.dt)
            .fold(0.0, f64::max)
    }

    /// Splice `self` (before `tau`) with `other` (at and after `tau`). Both
    /// must be sampled at `tau` and agree there within `tol`; the value of
    /// `other` is adopted at the junction.
    pub fn concatenate(&self, other: &Trajectory, tau: f64, tol: f64) -> Result<Trajectory> {
        if self.dt != other.dt {
            return Err(Error::GridAlignment {
                value: other.dt,
                step: self.dt,
            });
        }
        let idx_a = self.node_index(tau)?;
        let idx_b = other.node_index(tau)?;
        let gap = self.space.distance(&self.samples[idx_a], &other.samples[idx_b]);
        if gap > tol {
            return Err(Error::SwitchingGap { gap, at: tau, tol });
        }
        let mut samples = self.samples[..idx_a].to_vec();
        samples.extend_from_slice(&other.samples[idx_b..]);
        Ok(Trajectory {
            space: self.space.clone(),
            dt: self.dt,
            start_index: self.start_index,
            samples,
            left_truncated: self.left_truncated,
            right_truncated: other.right_truncated,
        })
    }

    fn node_index(&self, t: f64) -> Result<usize> {
        let s = t / self.dt - self.start_index as f64;
        let k = s.round();
        if (s - k).abs() > NODE_SNAP {
            return Err(Error::GridAlignment {
                value: t,
                step: self.dt,
            });
        }
        if k < 0.0 || k as usize >= self.samples.len() {
            let (t_min, t_max) = self.window();
            return Err(Error::OutsideWindow { t, t_min, t_max });
        }
        Ok(k as usize)
    }
}

/// Largest distance between two trajectories over the grid times of a
/// window; both must be defined on the whole window.
pub fn cu_distance(a: &Trajectory, b: &Trajectory, window: (f64, f64)) -> Result<f64> {
    if a.dt != b.dt {
        return Err(Error::GridAlignment {
            value: b.dt,
            step: a.dt,
        });
    }
    for traj in [a, b] {
        let (t_min, t_max) = traj.window();
        if window.0 < t_min - NODE_SNAP * a.dt || window.1 > t_max + NODE_SNAP * a.dt {
            return Err(Error::OutsideWindow {
                t: if window.0 < t_min { window.0 } else { window.1 },
                t_min,
                t_max,
            });
        }
    }
    let k_min = (window.0 / a.dt - NODE_SNAP).ceil() as i64;
    let k_max = (window.1 / a.dt + NODE_SNAP).floor() as i64;
    let mut sup: f64 = 0.0;
    for k in k_min..=k_max {
        let t = k as f64 * a.dt;
        let (x, y) = (a.evaluate(t)?, b.evaluate(t)?);
        sup = sup.max(a.space.distance(&x, &y));
    }
    Ok(sup)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub solver: String,
    pub seed: u64,
    pub horizon: (f64, f64),
}

impl Provenance {
    pub fn new(solver: impl Into<String>, seed: u64, horizon: (f64, f64)) -> Self {
        Provenance {
            solver: solver.into(),
            seed,
            horizon,
        }
    }
}

/// Finite family of trajectories with shared step and space.
#[derive(Clone, Debug)]
pub struct SolutionBundle {
    dt: f64,
    space: Arc<SpaceDescriptor>,
    members: Vec<Trajectory>,
    pub provenance: Provenance,
}

impl SolutionBundle {
    pub fn new(
        space: Arc<SpaceDescriptor>,
        dt: f64,
        members: Vec<Trajectory>,
        provenance: Provenance,
    ) -> Result<Self> {
        for m in &members {
            if m.dt != dt {
                return Err(Error::GridAlignment {
                    value: m.dt,
                    step: dt,
                });
            }
            if m.space.as_ref() != space.as_ref() {
                return Err(Error::InvalidDescriptor("member space differs from bundle space".into()));
            }
        }
        Ok(SolutionBundle {
            dt,
            space,
            members,
            provenance,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn space(&self) -> &Arc<SpaceDescriptor> {
        &self.space
    }

    pub fn members(&self) -> &[Trajectory] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn push(&mut self, t: Trajectory) -> Result<()> {
        if t.dt != self.dt {
            return Err(Error::GridAlignment {
                value: t.dt,
                step: self.dt,
            });
        }
        self.members.push(t);
        Ok(())
    }

    /// Sub-bundle of members defined at time 0 whose value there satisfies
    /// the predicate.
    pub fn section_by(&self, pred: impl Fn(&Point) -> bool) -> SolutionBundle {
        let members = self
            .members
            .iter()
            .filter(|m| m.value_at_zero().map(&pred).unwrap_or(false))
            .cloned()
            .collect();
        SolutionBundle {
            dt: self.dt,
            space: self.space.clone(),
            members,
            provenance: self.provenance.clone(),
        }
    }

    /// Sub-bundle of members whose time-0 value lies in the cell set.
    pub fn section(&self, cells: &CellSet) -> Result<SolutionBundle> {
        if cells.grid().space() != self.space.as_ref() {
            return Err(Error::GridMismatch);
        }
        let grid = cells.grid().clone();
        Ok(self.section_by(move |p| grid.locate(p).map(|c| cells.contains(c)).unwrap_or(false)))
    }

    /// Cells containing `phi(0)` for members whose total variation over
    /// their window is at most `tol`.
    pub fn equilibrium_points(&self, grid: &Arc<Grid>, tol: f64) -> Result<CellSet> {
        if grid.space() != self.space.as_ref() {
            return Err(Error::GridMismatch);
        }
        let mut out = CellSet::empty(grid.clone());
        for m in &self.members {
            if m.total_variation() <= tol {
                if let Some(p) = m.value_at_zero() {
                    out.insert(grid.locate(p)?);
                }
            }
        }
        Ok(out)
    }
}

/// Settings for the axiom diagnostics.
#[derive(Clone, Debug)]
pub struct AxiomCheckConfig {
    /// Window over which pointwise comparisons run.
    pub window: (f64, f64),
    /// Matching tolerance for uniqueness grouping and switching splices.
    pub tol: f64,
    /// Declared uniform bound on trajectory speed; the compactness witness
    /// fails when any sampled step rate exceeds it beyond `tol`.
    pub lipschitz_cap: f64,
    /// Seed for the randomized spot checks.
    pub seed: u64,
    /// Number of random spot checks per category.
    pub spot_checks: usize,
}

/// Diagnostics report. The compactness entry is a witness in the
/// Arzelà–Ascoli sense: a finite Lipschitz bound plus boundedness on a
/// compact space witness sequential precompactness at sampling scale; it is
/// not a proof of properness of the evaluation map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxiomReport {
    /// Fraction of grid cells containing some member's time-0 value.
    pub existence_coverage: f64,
    pub existence_pass: bool,
    /// Largest pointwise divergence among members sharing a start cell.
    pub uniqueness_max_divergence: f64,
    pub uniqueness_pass: bool,
    /// Largest observed per-step displacement over the step.
    pub lipschitz_witness: f64,
    pub compactness_pass: bool,
    /// Flow-law spot checks: evaluations of shifted members must agree
    /// exactly with evaluations of the originals at shifted times.
    pub shift_checks: usize,
    pub shift_pass: bool,
    /// Splices of near-coincident member pairs must keep the step rate
    /// within the declared bound.
    pub switching_checks: usize,
    pub switching_max_rate: f64,
    pub switching_pass: bool,
    /// Largest spread within a start-cell cluster: the sampled stand-in for
    /// the convergent-subsequence condition. Informational; any cluster
    /// member is itself a pointwise limit of the constant subsequence.
    pub ball4_max_cluster_spread: f64,
    pub ball4_pass: bool,
    /// Conjunction of existence, compactness, shift and switching checks.
    pub overall: bool,
}

/// Axiom diagnostics for a bundle: existence coverage over the grid,
/// uniqueness divergence among members sharing a start cell, a Lipschitz /
/// boundedness compactness witness, and randomized shift- and
/// switching-closure spot checks.
pub fn check_axioms(
    bundle: &SolutionBundle,
    grid: &Arc<Grid>,
    cfg: &AxiomCheckConfig,
) -> Result<AxiomReport> {
    if bundle.is_empty() {
        return Err(Error::EmptyBundle);
    }
    if grid.space() != bundle.space().as_ref() {
        return Err(Error::GridMismatch);
    }
    let mut covered = CellSet::empty(grid.clone());
    let mut clusters: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (idx, m) in bundle.members().iter().enumerate() {
        if let Some(p) = m.value_at_zero() {
            let cell = grid.locate(p)?;
            covered.insert(cell);
            clusters.entry(cell).or_default().push(idx);
        }
    }
    let existence_coverage = covered.count() as f64 / grid.cell_count() as f64;
    let existence_pass = existence_coverage >= 1.0 - 1e-12;

    let common_window = |a: &Trajectory, b: &Trajectory| -> Option<(f64, f64)> {
        let (a0, a1) = a.window();
        let (b0, b1) = b.window();
        let lo = a0.max(b0).max(cfg.window.0);
        let hi = a1.min(b1).min(cfg.window.1);
        (lo <= hi).then_some((lo, hi))
    };

    let mut uniqueness_max = 0.0f64;
    let mut ball4_spread = 0.0f64;
    for members in clusters.values() {
        let mut cluster_min_pair = f64::INFINITY;
        for (i, &a_idx) in members.iter().enumerate() {
            for &b_idx in &members[i + 1..] {
                let (a, b) = (&bundle.members()[a_idx], &bundle.members()[b_idx]);
                if let Some(w) = common_window(a, b) {
                    let d = cu_distance(a, b, w)?;
                    uniqueness_max = uniqueness_max.max(d);
                    cluster_min_pair = cluster_min_pair.min(d);
                }
            }
        }
        if cluster_min_pair.is_finite() {
            ball4_spread = ball4_spread.max(cluster_min_pair);
        }
    }

    let lipschitz_witness = bundle
        .members()
        .iter()
        .map(Trajectory::max_step_rate)
        .fold(0.0, f64::max);
    let compactness_pass = lipschitz_witness <= cfg.lipschitz_cap + cfg.tol;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut shift_pass = true;
    let mut shift_checks = 0;
    for _ in 0..cfg.spot_checks {
        let m = &bundle.members()[rng.gen_range(0..bundle.len())];
        let span = m.len() as i64;
        let k = rng.gen_range(-span..=span);
        let shifted = m.shift(k);
        // grid times where both the original and the shifted member are defined
        let lo = m.start_index.max(shifted.start_index + k);
        let hi = (m.start_index + span - 1).min(shifted.start_index + span - 1 + k);
        if lo > hi {
            continue;
        }
        let j = rng.gen_range(lo..=hi);
        let t = j as f64 * m.dt();
        let a = shifted.evaluate(t - k as f64 * m.dt());
        let b = m.evaluate(t);
        shift_checks += 1;
        match (a, b) {
            (Ok(x), Ok(y)) if x == y => {}
            _ => shift_pass = false,
        }
    }

    let mut switching_checks = 0;
    let mut switching_max_rate = 0.0f64;
    for _ in 0..cfg.spot_checks {
        let a = &bundle.members()[rng.gen_range(0..bundle.len())];
        let b = &bundle.members()[rng.gen_range(0..bundle.len())];
        let Some((lo, hi)) = common_window(a, b) else {
            continue;
        };
        let k_min = (lo / a.dt() - NODE_SNAP).ceil() as i64;
        let k_max = (hi / a.dt() + NODE_SNAP).floor() as i64;
        if k_min > k_max {
            continue;
        }
        let tau = rng.gen_range(k_min..=k_max) as f64 * a.dt();
        let (x, y) = (a.evaluate(tau)?, b.evaluate(tau)?);
        if bundle.space().distance(&x, &y) <= cfg.tol {
            let spliced = a.concatenate(b, tau, cfg.tol)?;
            switching_checks += 1;
            switching_max_rate = switching_max_rate.max(spliced.max_step_rate());
        }
    }
    let switching_slack = cfg.tol / bundle.dt() + cfg.tol;
    let switching_pass = switching_max_rate <= cfg.lipschitz_cap + switching_slack;

    let overall = existence_pass && compactness_pass && shift_pass && switching_pass;
    Ok(AxiomReport {
        existence_coverage,
        existence_pass,
        uniqueness_max_divergence: uniqueness_max,
        uniqueness_pass: uniqueness_max <= cfg.tol,
        lipschitz_witness,
        compactness_pass,
        shift_checks,
        shift_pass,
        switching_checks,
        switching_max_rate,
        switching_pass,
        ball4_max_cluster_spread: ball4_spread,
        ball4_pass: true,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_space() -> Arc<SpaceDescriptor> {
        Arc::new(SpaceDescriptor::boxed(vec![(-10.0, 10.0)]).unwrap())
    }

    fn traj(samples: &[f64], k0: i64, dt: f64) -> Trajectory {
        Trajectory::new(
            line_space(),
            dt,
            k0,
            samples.iter().map(|&x| vec![x]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn shift_obeys_flow_laws() {
        let phi = traj(&[0.0, 1.0, 2.0], 0, 0.1);
        assert_eq!(phi.shift(0), phi);
        assert_eq!(phi.shift(2).shift(3), phi.shift(5));
        let shifted = phi.shift(1);
        assert_eq!(shifted.start_index(), -1);
        assert_eq!(shifted.samples(), phi.samples());
    }

    #[test]
    fn shift_time_rejects_off_grid() {
        let phi = traj(&[0.0, 1.0], 0, 0.1);
        assert!(phi.shift_time(0.2).is_ok());
        assert!(matches!(
            phi.shift_time(0.05),
            Err(Error::GridAlignment { .. })
        ));
    }

    #[test]
    fn evaluate_exact_at_nodes_and_linear_between() {
        let phi = traj(&[0.0, 1.0], 0, 0.1);
        assert_eq!(phi.evaluate(0.1).unwrap(), vec![1.0]);
        assert!((phi.evaluate(0.05).unwrap()[0] - 0.5).abs() < 1e-12);
        assert!(matches!(
            phi.evaluate(0.3),
            Err(Error::OutsideWindow { .. })
        ));
    }

    #[test]
    fn shift_and_evaluate_commute() {
        let phi = traj(&[0.0, 0.5, 2.0, 1.0], -1, 0.5);
        let k = 2;
        let shifted = phi.shift(k);
        for j in 0..4 {
            let t = (-1 + j) as f64 * 0.5;
            assert_eq!(
                shifted.evaluate(t - k as f64 * 0.5).unwrap(),
                phi.evaluate(t).unwrap()
            );
        }
    }

    #[test]
    fn torus_interpolation_takes_shortest_arc() {
        let space = Arc::new(SpaceDescriptor::circle());
        let phi = Trajectory::new(space, 0.1, 0, vec![vec![0.95], vec![0.05]]).unwrap();
        let mid = phi.evaluate(0.05).unwrap();
        // wraps through 1.0 rather than crossing the long way
        assert!((mid[0] - 0.0).abs() < 1e-12 || (mid[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn concatenate_cases() {
        let phi = traj(&[2.0, 1.0, 0.0, 0.0], 0, 1.0);
        // self-splice is the identity
        assert_eq!(phi.concatenate(&phi, 2.0, 0.0).unwrap(), phi);
        let psi = traj(&[0.0, 0.0, 0.0], 2, 1.0);
        let spliced = phi.concatenate(&psi, 2.0, 1e-9).unwrap();
        assert_eq!(spliced.samples().len(), 5);
        assert_eq!(spliced.window(), (0.0, 4.0));
        let far = traj(&[0.5, 0.5], 2, 1.0);
        assert!(matches!(
            phi.concatenate(&far, 2.0, 1e-9),
            Err(Error::SwitchingGap { .. })
        ));
    }

    #[test]
    fn concatenate_is_associative_at_exact_junctions() {
        let a = traj(&[0.0, 1.0, 2.0], 0, 1.0);
        let b = traj(&[2.0, 3.0, 4.0], 2, 1.0);
        let c = traj(&[4.0, 5.0], 4, 1.0);
        let left = a.concatenate(&b, 2.0, 0.0).unwrap().concatenate(&c, 4.0, 0.0).unwrap();
        let right = a
            .concatenate(&b.concatenate(&c, 4.0, 0.0).unwrap(), 2.0, 0.0)
            .unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn cu_distance_basics() {
        let phi = traj(&[1.0, 1.0, 1.0], 0, 1.0);
        let psi = traj(&[4.0, 4.0, 4.0], 0, 1.0);
        assert_eq!(cu_distance(&phi, &phi, (0.0, 2.0)).unwrap(), 0.0);
        assert_eq!(cu_distance(&phi, &psi, (0.0, 2.0)).unwrap(), 3.0);
        assert_eq!(
            cu_distance(&phi, &psi, (0.0, 2.0)).unwrap(),
            cu_distance(&psi, &phi, (0.0, 2.0)).unwrap()
        );
        assert!(matches!(
            cu_distance(&phi, &psi, (0.0, 5.0)),
            Err(Error::OutsideWindow { .. })
        ));
    }

    #[test]
    fn sections_filter_on_time_zero() {
        let space = line_space();
        let members = vec![
            traj(&[0.1, 0.2], 0, 1.0),
            traj(&[5.0, 5.0], 0, 1.0),
            traj(&[0.15, 0.2], 1, 1.0), // not defined at 0
        ];
        let bundle = SolutionBundle::new(space, 1.0, members, Provenance::new("test", 0, (0.0, 1.0)))
            .unwrap();
        let all = bundle.section_by(|_| true);
        assert_eq!(all.len(), 2);
        let none = bundle.section_by(|_| false);
        assert_eq!(none.len(), 0);
        let grid = Arc::new(
            Grid::new(SpaceDescriptor::boxed(vec![(-10.0, 10.0)]).unwrap(), vec![20]).unwrap(),
        );
        let cells = CellSet::from_cells(grid, &[10]); // [0,1)
        let sec = bundle.section(&cells).unwrap();
        assert_eq!(sec.len(), 1);
        assert_eq!(sec.members()[0].value_at_zero().unwrap(), &vec![0.1]);
    }

    #[test]
    fn equilibria_are_low_variation_members() {
        let space = line_space();
        let members = vec![traj(&[2.0, 2.0, 2.0], 0, 1.0), traj(&[0.0, 1.0, 2.0], 0, 1.0)];
        let bundle = SolutionBundle::new(space, 1.0, members, Provenance::new("test", 0, (0.0, 2.0)))
            .unwrap();
        let grid = Arc::new(
            Grid::new(SpaceDescriptor::boxed(vec![(-10.0, 10.0)]).unwrap(), vec![20]).unwrap(),
        );
        let eq = bundle.equilibrium_points(&grid, 1e-9).unwrap();
        assert_eq!(eq.to_indices(), vec![grid.locate(&[2.0]).unwrap()]);
    }

    #[test]
    fn axiom_report_flags_unbounded_slopes() {
        let space = line_space();
        // per-step displacement grows without bound
        let runaway: Vec<f64> = (0..6).map(|k| (k * k) as f64 / 4.0).collect();
        let members = vec![traj(&runaway, 0, 1.0)];
        let bundle = SolutionBundle::new(space, 1.0, members, Provenance::new("test", 0, (0.0, 5.0)))
            .unwrap();
        let grid = Arc::new(
            Grid::new(SpaceDescriptor::boxed(vec![(-10.0, 10.0)]).unwrap(), vec![4]).unwrap(),
        );
        let cfg = AxiomCheckConfig {
            window: (0.0, 5.0),
            tol: 1e-9,
            lipschitz_cap: 1.0,
            seed: 7,
            spot_checks: 32,
        };
        let report = check_axioms(&bundle, &grid, &cfg).unwrap();
        assert!(!report.compactness_pass);
        assert!(!report.overall);
    }

    #[test]
    fn axiom_report_passes_on_constant_net() {
        let grid = Arc::new(
            Grid::new(SpaceDescriptor::boxed(vec![(-10.0, 10.0)]).unwrap(), vec![10]).unwrap(),
        );
        let members: Vec<Trajectory> = (0..10)
            .map(|c| {
                let p = grid.cell_center(c);
                Trajectory::new(line_space(), 1.0, 0, vec![p.clone(), p.clone(), p]).unwrap()
            })
            .collect();
        let bundle =
            SolutionBundle::new(line_space(), 1.0, members, Provenance::new("net", 0, (0.0, 2.0)))
                .unwrap();
        let cfg = AxiomCheckConfig {
            window: (0.0, 2.0),
            tol: 1e-9,
            lipschitz_cap: 0.0,
            seed: 7,
            spot_checks: 64,
        };
        let report = check_axioms(&bundle, &grid, &cfg).unwrap();
        assert_eq!(report.existence_coverage, 1.0);
        assert!(report.uniqueness_pass);
        assert!(report.overall);
    }
}
