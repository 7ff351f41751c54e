//! Bundle generators: inclusion sampling by piecewise-constant measurable
//! selections, piecewise-smooth integration with sliding on a switching
//! surface, and greedy backward extension by splicing.
//!
//! Integration is explicit Euler with piecewise-constant selections per
//! dwell window. RNG streams are split deterministically: the pair
//! `(seed index i, selection index j)` uses the master seed with ChaCha
//! stream id `i * n_per_seed + j`, so outputs are bit-identical regardless
//! of evaluation order.

use crate::error::{Error, Result};
use crate::space::{Grid, Point, SpaceDescriptor};
use crate::trajectory::{Provenance, SolutionBundle, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Axis-aligned interval hull, one `(lo, hi)` pair per dimension.
pub type BoxHull = Vec<(f64, f64)>;

/// Scalar field callback.
pub type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Vector field callback.
pub type VectorFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Interval-hull field callback.
pub type HullFn = Box<dyn Fn(&[f64]) -> BoxHull + Send + Sync>;

fn validate_hull(hull: &BoxHull, cell: usize) -> Result<()> {
    if hull.is_empty() || hull.iter().any(|&(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::EmptyBox { cell });
    }
    Ok(())
}

/// Set-valued right-hand side `x -> F(x)` as an interval hull.
pub enum SetValuedField {
    /// Deterministic callback returning the hull of `F(x)`.
    Callback {
        space: Arc<SpaceDescriptor>,
        hull: HullFn,
        /// Declared bound on `|v|` over the space, used as the Lipschitz cap
        /// in diagnostics and envelope tests.
        speed_bound: f64,
    },
    /// One hull per grid cell; `None` marks cells where the field is undefined.
    CellTable {
        grid: Arc<Grid>,
        boxes: Vec<Option<BoxHull>>,
        speed_bound: f64,
    },
}

impl SetValuedField {
    /// The rotation-by-an-interval system on the unit circle: `F(x) = [1, 2]`.
    pub fn interval_rotation() -> Self {
        SetValuedField::Callback {
            space: Arc::new(SpaceDescriptor::circle()),
            hull: Box::new(|_| vec![(1.0, 2.0)]),
            speed_bound: 2.0,
        }
    }

    /// Constant single-valued field.
    pub fn constant(space: Arc<SpaceDescriptor>, v: Vec<f64>) -> Self {
        let speed = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        SetValuedField::Callback {
            space,
            hull: Box::new(move |_| v.iter().map(|&x| (x, x)).collect()),
            speed_bound: speed,
        }
    }

    pub fn from_table(grid: Arc<Grid>, boxes: Vec<Option<BoxHull>>) -> Result<Self> {
        let mut speed = 0.0f64;
        for (cell, b) in boxes.iter().enumerate() {
            if let Some(hull) = b {
                validate_hull(hull, cell)?;
                let s = hull
                    .iter()
                    .map(|&(lo, hi)| lo.abs().max(hi.abs()).powi(2))
                    .sum::<f64>()
                    .sqrt();
                speed = speed.max(s);
            }
        }
        Ok(SetValuedField::CellTable {
            grid,
            boxes,
            speed_bound: speed,
        })
    }

    pub fn space_arc(&self) -> Arc<SpaceDescriptor> {
        match self {
            SetValuedField::Callback { space, .. } => space.clone(),
            SetValuedField::CellTable { grid, .. } => Arc::new(grid.space().clone()),
        }
    }

    pub fn speed_bound(&self) -> f64 {
        match self {
            SetValuedField::Callback { speed_bound, .. }
            | SetValuedField::CellTable { speed_bound, .. } => *speed_bound,
        }
    }

    /// Interval hull of `F(x)`.
    pub fn hull_at(&self, x: &[f64]) -> Result<BoxHull> {
        match self {
            SetValuedField::Callback { hull, .. } => {
                let h = hull(x);
                validate_hull(&h, usize::MAX)?;
                Ok(h)
            }
            SetValuedField::CellTable { grid, boxes, .. } => {
                let cell = grid.locate(x)?;
                boxes
                    .get(cell)
                    .and_then(|b| b.clone())
                    .ok_or(Error::FieldUndefined { cell })
            }
        }
    }
}

/// How a velocity is drawn from the hull at each dwell-window start.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionLaw {
    /// A uniformly random corner of the hull.
    UniformCorner,
    /// A uniform point inside the hull.
    UniformInBox,
    /// One of the two speed-extreme corners, chosen uniformly.
    ExtremeVelocity,
}

#[derive(Clone, Debug)]
pub struct SelectionPolicy {
    pub seed: u64,
    /// Dwell length in steps; the selected velocity is held constant this long.
    pub dwell_steps: usize,
    pub law: SelectionLaw,
}

impl SelectionPolicy {
    pub fn new(seed: u64, dwell_steps: usize, law: SelectionLaw) -> Result<Self> {
        if dwell_steps == 0 {
            return Err(Error::InvalidDescriptor("dwell must be at least one step".into()));
        }
        Ok(SelectionPolicy {
            seed,
            dwell_steps,
            law,
        })
    }
}

fn draw_velocity(hull: &BoxHull, law: SelectionLaw, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match law {
        SelectionLaw::UniformCorner => hull
            .iter()
            .map(|&(lo, hi)| if rng.gen::<bool>() { hi } else { lo })
            .collect(),
        SelectionLaw::UniformInBox => hull
            .iter()
            .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
            .collect(),
        SelectionLaw::ExtremeVelocity => {
            let slow: Vec<f64> = hull
                .iter()
                .map(|&(lo, hi)| if lo.abs() <= hi.abs() { lo } else { hi })
                .collect();
            let fast: Vec<f64> = hull
                .iter()
                .map(|&(lo, hi)| if lo.abs() > hi.abs() { lo } else { hi })
                .collect();
            if rng.gen::<bool>() {
                fast
            } else {
                slow
            }
        }
    }
}

fn steps_for(horizon: f64, dt: f64) -> Result<usize> {
    let s = horizon / dt;
    let k = s.round();
    if (s - k).abs() > 1e-9 {
        return Err(Error::GridAlignment {
            value: horizon,
            step: dt,
        });
    }
    Ok(k as usize)
}

/// Sample trajectories of the inclusion `x' ∈ F(x)` by explicit Euler with
/// piecewise-constant selections. Each seed produces `n_per_seed` members:
/// forward over `[0, t_plus]` and backward over `[t_minus, 0]` by the
/// time-reversed inclusion `x' ∈ -F(x)`. Members leaving a box space are
/// truncated at the exit and flagged.
pub fn sample_inclusion(
    field: &SetValuedField,
    seeds: &[Point],
    t_minus: f64,
    t_plus: f64,
    dt: f64,
    n_per_seed: usize,
    policy: &SelectionPolicy,
) -> Result<SolutionBundle> {
    if t_minus > 0.0 || t_plus < 0.0 {
        return Err(Error::InvalidDescriptor(format!(
            "horizons must satisfy t_minus <= 0 <= t_plus, got [{t_minus}, {t_plus}]"
        )));
    }
    let steps_fwd = steps_for(t_plus, dt)?;
    let steps_bwd = steps_for(-t_minus, dt)?;
    let space = field.space_arc();
    let mut members = Vec::new();
    for (i, seed_point) in seeds.iter().enumerate() {
        for j in 0..n_per_seed {
            let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
            rng.set_stream((i * n_per_seed + j) as u64);
            let member = sample_one(
                field, &space, seed_point, steps_fwd, steps_bwd, dt, policy, &mut rng,
            )?;
            members.push(member);
        }
    }
    SolutionBundle::new(
        space,
        dt,
        members,
        Provenance::new("inclusion-euler", policy.seed, (t_minus, t_plus)),
    )
}

fn sample_one(
    field: &SetValuedField,
    space: &Arc<SpaceDescriptor>,
    seed_point: &Point,
    steps_fwd: usize,
    steps_bwd: usize,
    dt: f64,
    policy: &SelectionPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    let start = space.canonicalize(seed_point);
    if !space.contains(&start) {
        return Err(Error::InvalidDescriptor(format!("seed {seed_point:?} outside the space")));
    }

    let integrate = |steps: usize, sign: f64, rng: &mut ChaCha8Rng| -> Result<(Vec<Point>, bool)> {
        let mut x = start.clone();
        let mut out = Vec::with_capacity(steps);
        let mut v: Vec<f64> = Vec::new();
        for k in 0..steps {
            if k % policy.dwell_steps == 0 {
                let hull = field.hull_at(&x)?;
                v = draw_velocity(&hull, policy.law, rng);
            }
            let next: Point = x.iter().zip(&v).map(|(a, b)| a + sign * dt * b).collect();
            let next = space.canonicalize(&next);
            if !space.contains(&next) {
                return Ok((out, true)); // truncated at the exit
            }
            out.push(next.clone());
            x = next;
        }
        Ok((out, false))
    };

    let (fwd, right_truncated) = integrate(steps_fwd, 1.0, rng)?;
    let (bwd, left_truncated) = integrate(steps_bwd, -1.0, rng)?;

    let mut samples: Vec<Point> = bwd.into_iter().rev().collect();
    let start_index = -(samples.len() as i64);
    samples.push(start.clone());
    samples.extend(fwd);
    Ok(Trajectory::new(space.clone(), dt, start_index, samples)?
        .with_flags(left_truncated, right_truncated))
}

/// Piecewise-smooth field split by the sign of a scalar surface function.
pub struct PiecewiseField {
    pub space: Arc<SpaceDescriptor>,
    /// Signed surface function; the switching surface is `h = 0`.
    pub surface: ScalarFn,
    /// Analytic surface gradient; finite differences when absent.
    pub surface_gradient: Option<VectorFn>,
    /// Field on `h > 0`.
    pub field_pos: VectorFn,
    /// Field on `h < 0`.
    pub field_neg: VectorFn,
    /// Optional explicit field on the surface, used when both sides are tangent.
    pub field_surface: Option<VectorFn>,
    pub speed_bound: f64,
}

/// Surface closeness in `h`-units.
pub const SURFACE_TOL: f64 = 1e-9;
const BISECTION_STEPS: usize = 64;
const GRADIENT_FD_STEP: f64 = 1e-6;

impl PiecewiseField {
    /// Planar absorption onto the horizontal axis: descend above it, ascend
    /// below it, rest on it.
    pub fn filippov_absorb(space: Arc<SpaceDescriptor>) -> Self {
        PiecewiseField {
            space,
            surface: Box::new(|p| p[1]),
            surface_gradient: Some(Box::new(|_| vec![0.0, 1.0])),
            field_pos: Box::new(|_| vec![0.0, -1.0]),
            field_neg: Box::new(|_| vec![0.0, 1.0]),
            field_surface: Some(Box::new(|_| vec![0.0, 0.0])),
            speed_bound: 1.0,
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        if let Some(g) = &self.surface_gradient {
            return g(x);
        }
        let mut out = vec![0.0; x.len()];
        let mut probe = x.to_vec();
        for (d, slot) in out.iter_mut().enumerate() {
            probe[d] = x[d] + GRADIENT_FD_STEP;
            let hi = (self.surface)(&probe);
            probe[d] = x[d] - GRADIENT_FD_STEP;
            let lo = (self.surface)(&probe);
            probe[d] = x[d];
            *slot = (hi - lo) / (2.0 * GRADIENT_FD_STEP);
        }
        out
    }

    /// Velocity at a point per Filippov's convexification: the one-sided
    /// field off the surface; on it, the tangent convex combination when the
    /// sides disagree about the crossing direction, or the crossing field
    /// when they agree.
    fn velocity(&self, x: &[f64], sign: f64) -> Result<Vec<f64>> {
        let h = (self.surface)(x);
        if h > SURFACE_TOL {
            return Ok(scale(&(self.field_pos)(x), sign));
        }
        if h < -SURFACE_TOL {
            return Ok(scale(&(self.field_neg)(x), sign));
        }
        let fp = scale(&(self.field_pos)(x), sign);
        let fm = scale(&(self.field_neg)(x), sign);
        let g = self.gradient(x);
        let ap = dot(&g, &fp);
        let am = dot(&g, &fm);
        if ap.abs() <= SURFACE_TOL && am.abs() <= SURFACE_TOL {
            // both tangent
            if let Some(f0) = &self.field_surface {
                return Ok(scale(&f0(x), sign));
            }
            return Ok(fp.iter().zip(&fm).map(|(a, b)| 0.5 * (a + b)).collect());
        }
        if ap > 0.0 && am > 0.0 {
            // transversal crossing into h > 0
            return Ok(fp);
        }
        if ap < 0.0 && am < 0.0 {
            // transversal crossing into h < 0
            return Ok(fm);
        }
        // opposite signs: solve lambda*ap + (1-lambda)*am = 0 for the tangent mix
        let lambda = am / (am - ap);
        if !(0.0..=1.0).contains(&lambda) || !lambda.is_finite() {
            return Err(Error::SlidingAmbiguity { point: x.to_vec() });
        }
        Ok(fp
            .iter()
            .zip(&fm)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect())
    }
}

fn scale(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| s * x).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Integrate a piecewise-smooth field from `x0` over `[t_minus, t_plus]`.
/// Within a step, a sign change of the surface function is bisected to the
/// hitting time and the step lands on the surface; backward time integrates
/// the negated field with the same logic.
pub fn simulate_filippov(
    field: &PiecewiseField,
    x0: &Point,
    t_minus: f64,
    t_plus: f64,
    dt: f64,
) -> Result<Trajectory> {
    if t_minus > 0.0 || t_plus < 0.0 {
        return Err(Error::InvalidDescriptor(format!(
            "horizons must satisfy t_minus <= 0 <= t_plus, got [{t_minus}, {t_plus}]"
        )));
    }
    let steps_fwd = steps_for(t_plus, dt)?;
    let steps_bwd = steps_for(-t_minus, dt)?;
    let space = &field.space;
    let start = space.canonicalize(x0);
    if !space.contains(&start) {
        return Err(Error::InvalidDescriptor(format!("start {x0:?} outside the space")));
    }

    let integrate = |steps: usize, sign: f64| -> Result<(Vec<Point>, bool)> {
        let mut x = start.clone();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let h_here = (field.surface)(&x);
            let v = field.velocity(&x, sign)?;
            let full: Point = x.iter().zip(&v).map(|(a, b)| a + dt * b).collect();
            let h_next = (field.surface)(&full);
            let mut next: Point = if h_here.abs() > SURFACE_TOL
                && h_next.abs() > SURFACE_TOL
                && h_here.signum() != h_next.signum()
            {
                // crossing inside the step: bisect the hitting fraction
                let mut lo = 0.0f64;
                let mut hi = 1.0f64;
                for _ in 0..BISECTION_STEPS {
                    let mid = 0.5 * (lo + hi);
                    let probe: Point = x.iter().zip(&v).map(|(a, b)| a + mid * dt * b).collect();
                    let h_mid = (field.surface)(&probe);
                    if h_mid.abs() <= SURFACE_TOL {
                        lo = mid;
                        break;
                    }
                    if h_mid.signum() == h_here.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                x.iter().zip(&v).map(|(a, b)| a + lo * dt * b).collect()
            } else {
                full
            };
            // landing in the surface band: project onto the surface so
            // residues do not straddle it (exact for linear surfaces)
            let h_land = (field.surface)(&next);
            if h_land != 0.0 && h_land.abs() <= SURFACE_TOL {
                let g = field.gradient(&next);
                let g2 = dot(&g, &g);
                if g2 > 0.0 {
                    for (slot, gd) in next.iter_mut().zip(&g) {
                        *slot -= h_land / g2 * gd;
                    }
                }
            }
            let next = space.canonicalize(&next);
            if !space.contains(&next) {
                return Ok((out, true));
            }
            out.push(next.clone());
            x = next;
        }
        Ok((out, false))
    };

    let (fwd, right_truncated) = integrate(steps_fwd, 1.0)?;
    let (bwd, left_truncated) = integrate(steps_bwd, -1.0)?;

    let mut samples: Vec<Point> = bwd.into_iter().rev().collect();
    let start_index = -(samples.len() as i64);
    samples.push(start);
    samples.extend(fwd);
    Ok(Trajectory::new(space.clone(), dt, start_index, samples)?
        .with_flags(left_truncated, right_truncated))
}

/// Result of a backward extension: the spliced trajectory and how many of
/// the requested stages matched.
#[derive(Clone, Debug)]
pub struct BackwardExtension {
    pub trajectory: Trajectory,
    pub achieved_depth: usize,
}

/// Greedily extend `phi` backward by splicing bundle members whose window
/// end matches `phi`'s window start within `tol`; first match in bundle
/// order wins. Stops early when no member matches, reporting the achieved
/// depth.
pub fn extend_backward(
    bundle: &SolutionBundle,
    phi: &Trajectory,
    depth: usize,
    tol: f64,
) -> Result<BackwardExtension> {
    let mut current = phi.clone();
    let mut achieved = 0;
    for _ in 0..depth {
        let (t_start, _) = current.window();
        let head = current.samples().first().expect("nonempty").clone();
        let candidate = bundle.members().iter().find(|m| {
            let (m_start, m_end) = m.window();
            m_end + 1e-9 >= t_start
                && m_start < t_start - 1e-9
                && m
                    .evaluate(t_start)
                    .map(|p| bundle.space().distance(&p, &head) <= tol)
                    .unwrap_or(false)
        });
        match candidate {
            Some(m) => {
                current = m.concatenate(&current, t_start, tol)?;
                achieved += 1;
            }
            None => break,
        }
    }
    Ok(BackwardExtension {
        trajectory: current,
        achieved_depth: achieved,
    })
}
