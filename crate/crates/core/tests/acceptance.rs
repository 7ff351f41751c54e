//! Acceptance suite: one test per criterion, each printing a pass line.
//!
//! The finite-state criteria run exactly (zero tolerance) on a fixed sweep
//! of 100 seeded random relations with at most 8 states; the continuous
//! criteria run the circle inclusion and the planar absorption system on
//! fixed grids with pinned tolerances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use std::time::Instant;
use ydyn_core::bits::BitSet;
use ydyn_core::limits::{default_step_budget, omega_limit_grid, recurrent_cells};
use ydyn_core::measures::{
    check_strict_invariance, check_subinvariance, default_test_family, dyadic_intervals,
    krylov_bogoliubov_relation, poincare_check, recurrent_set_full_measure, DiscreteMeasure,
    RecurrenceVerdict,
};
use ydyn_core::relation::Relation;
use ydyn_core::semigroup::{
    build_cell_relation_from_bundle, build_cell_relation_from_field, CellRelation,
};
use ydyn_core::solvers::{
    sample_inclusion, simulate_filippov, PiecewiseField, SelectionLaw, SelectionPolicy,
    SetValuedField,
};
use ydyn_core::space::{CellSet, Grid, SpaceDescriptor};
use ydyn_core::trajectory::{check_axioms, AxiomCheckConfig, Provenance, SolutionBundle, Trajectory};

// ---------------------------------------------------------------------------
// shared fixtures

/// The fixed relation sweep: 100 seeded random relations with 1..=8 states
/// and nonempty viable cores.
fn relation_sweep() -> Vec<Relation> {
    let mut out = Vec::new();
    let mut seed = 0xD15EA5Eu64;
    while out.len() < 100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        seed += 1;
        let n = rng.gen_range(1..=8);
        let p = [0.15, 0.3, 0.5][out.len() % 3];
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if rng.gen_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        let r = Relation::new(n, &edges).unwrap();
        if !r.core().is_empty() {
            out.push(r);
        }
    }
    out
}

/// Random positive weights on every edge of the viable core: every charged
/// state keeps outgoing weight, so the chain is closed.
fn core_weights(r: &Relation, seed: u64) -> Vec<(usize, usize, f64)> {
    let core = r.core();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    r.edges()
        .iter()
        .filter(|(i, j)| core.contains(*i) && core.contains(*j))
        .map(|&(i, j)| (i, j, rng.gen_range(0.5..1.5)))
        .collect()
}

/// Independent weak-invariance oracle: every state of `a` must reach a cycle
/// inside `a` both forward and backward, checked by plain graph search with
/// no trimming.
fn oracle_weakly_invariant(r: &Relation, a: &BitSet) -> bool {
    let reach_within = |from: usize, forward: bool| -> BitSet {
        let mut seen = BitSet::empty(r.state_count());
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            let next = if forward {
                r.successors(x)
            } else {
                r.predecessors(x)
            };
            for &y in next {
                if a.contains(y) && !seen.contains(y) {
                    seen.insert(y);
                    stack.push(y);
                }
            }
        }
        seen
    };
    // states on a cycle within `a`: they reach themselves in >= 1 step
    let mut cycle_states = BitSet::empty(r.state_count());
    for s in a.iter() {
        if reach_within(s, true).contains(s) {
            cycle_states.insert(s);
        }
    }
    a.iter().all(|x| {
        let mut fwd = reach_within(x, true);
        if cycle_states.contains(x) {
            fwd.insert(x);
        }
        let mut bwd = reach_within(x, false);
        if cycle_states.contains(x) {
            bwd.insert(x);
        }
        fwd.intersects(&cycle_states) && bwd.intersects(&cycle_states)
    })
}

fn circle_grid() -> Arc<Grid> {
    Arc::new(Grid::new(SpaceDescriptor::circle(), vec![100]).unwrap())
}

fn circle_relation() -> CellRelation {
    build_cell_relation_from_field(
        &SetValuedField::interval_rotation(),
        circle_grid(),
        0.05,
        1,
    )
    .unwrap()
}

/// Planar absorption fixture: box [0,1] x [-1,1], 10 x 20 cells, members
/// from every cell center plus one resting member per surface-row column.
struct AbsorptionFixture {
    grid: Arc<Grid>,
    bundle: SolutionBundle,
    relation: CellRelation,
    surface_row: Vec<usize>,
}

fn absorption_fixture() -> AbsorptionFixture {
    let space = Arc::new(SpaceDescriptor::boxed(vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap());
    let grid = Arc::new(Grid::new(space.as_ref().clone(), vec![10, 20]).unwrap());
    let field = PiecewiseField::filippov_absorb(space.clone());
    let dt = 1e-3;
    let mut members = Vec::new();
    for cell in 0..grid.cell_count() {
        let center = grid.cell_center(cell);
        members.push(simulate_filippov(&field, &center, 0.0, 2.5, dt).unwrap());
    }
    for ix in 0..10 {
        let x = 0.05 + 0.1 * ix as f64;
        members.push(simulate_filippov(&field, &vec![x, 0.0], 0.0, 2.5, dt).unwrap());
    }
    let bundle = SolutionBundle::new(
        space,
        dt,
        members,
        Provenance::new("filippov-fixture", 0, (0.0, 2.5)),
    )
    .unwrap();
    // relation step = one cell height of vertical motion
    let relation = build_cell_relation_from_bundle(&bundle, grid.clone(), 0.1).unwrap();
    let surface_row: Vec<usize> = (0..10).map(|ix| grid.locate(&[0.05 + 0.1 * ix as f64, 0.0]).unwrap()).collect();
    AbsorptionFixture {
        grid,
        bundle,
        relation,
        surface_row,
    }
}

// ---------------------------------------------------------------------------
// criteria

#[test]
fn criterion_01_weak_invariance_enumeration_matches_oracle() {
    let start = Instant::now();
    for r in relation_sweep() {
        let n = r.state_count();
        let enumerated = r.enumerate_weakly_invariant().unwrap();
        for mask in 0..(1u64 << n) {
            let a = BitSet::from_mask(n, mask);
            // enumeration agrees with the path-based oracle
            assert_eq!(
                enumerated.contains(&a),
                oracle_weakly_invariant(&r, &a),
                "enumeration disagrees with oracle on {a:?}"
            );
            // the viable core of any subset is its unique maximal weakly
            // invariant subset
            let core = r.viable_core(&a);
            assert!(core.is_subset(&a));
            assert!(enumerated.contains(&core), "core {core:?} not enumerated");
            for b in &enumerated {
                if b.is_subset(&a) {
                    assert!(
                        b.is_subset(&core),
                        "weakly invariant {b:?} inside {a:?} escapes the core {core:?}"
                    );
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}, limit 30 s");
    println!("criterion 01 (weak-invariance enumeration vs oracle, exact): PASS ({elapsed:?})");
}

#[test]
fn criterion_02_omega_limits_are_weakly_invariant() {
    let start = Instant::now();
    for r in relation_sweep() {
        for x in r.core().iter() {
            let omega = r.omega_limit(x).unwrap();
            assert!(
                r.is_weakly_invariant(&omega),
                "omega of {x} not weakly invariant: {omega:?}"
            );
            assert!(
                oracle_weakly_invariant(&r, &omega),
                "oracle rejects omega of {x}: {omega:?}"
            );
        }
    }
    println!(
        "criterion 02 (omega-limit sets weakly invariant, exact): PASS ({:?})",
        start.elapsed()
    );
}

#[test]
fn criterion_03_preimage_identities_exhaustive() {
    let start = Instant::now();
    for r in relation_sweep() {
        let n = r.state_count();
        let core = r.core();
        // per-state forward reach sets for t = 1..3
        let fwd: Vec<Vec<BitSet>> = (0..n)
            .map(|x| {
                (1..=3)
                    .map(|t| r.reach(&BitSet::from_indices(n, &[x]), t))
                    .collect()
            })
            .collect();
        for mask in 0..(1u64 << n) {
            let e = BitSet::from_mask(n, mask);
            for t in 1..=3i64 {
                let back = r.reach(&e, -t);
                // V(t)^{-1} E = V(-t) E
                let mut dual = BitSet::empty(n);
                for x in core.iter() {
                    if fwd[x][(t - 1) as usize].intersects(&e) {
                        dual.insert(x);
                    }
                }
                assert_eq!(dual, back, "duality fails, t={t} e={e:?}");
                // E ∩ core ⊆ V(t) V(-t) E
                let round = r.reach(&back, t);
                assert!(
                    e.intersection(&core).is_subset(&round),
                    "round trip fails, t={t} e={e:?}"
                );
            }
        }
    }
    println!(
        "criterion 03 (preimage duality and round trip, exhaustive, exact): PASS ({:?})",
        start.elapsed()
    );
}

#[test]
fn criterion_04_circle_subinvariance_and_full_circle_omega() {
    let start = Instant::now();
    let v = circle_relation();
    let grid = v.grid().clone();
    let mu = DiscreteMeasure::uniform(grid.clone());
    let family = dyadic_intervals(&grid);
    // t in {0.05, 0.5, 1.0} model time = {1, 10, 20} steps
    let report = check_subinvariance(&mu, &v, &family, &[1, 10, 20], 1e-9).unwrap();
    assert!(
        report.pass && report.max_violation <= 1e-9,
        "uniform measure violates sub-invariance: {report:?}"
    );
    for k in 0..10 {
        let base = k * 10 + 3;
        let limit = omega_limit_grid(&v, base, default_step_budget(&v), 1).unwrap();
        assert!(limit.stabilized, "omega from {base} did not stabilize");
        assert_eq!(
            limit.omega.count(),
            grid.cell_count(),
            "omega from {base} is not the full circle"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, limit 60 s");
    println!("criterion 04 (circle: uniform sub-invariance <= 1e-9, omega = full circle): PASS ({elapsed:?})");
}

#[test]
fn criterion_05_absorption_example() {
    let start = Instant::now();
    let space = Arc::new(SpaceDescriptor::boxed(vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap());
    let field = PiecewiseField::filippov_absorb(space);
    let dt = 1e-3;

    // closed form: y(t) = max(y0 - t, 0), x constant
    let traj = simulate_filippov(&field, &vec![0.3, 1.0], 0.0, 2.0, dt).unwrap();
    for k in 0..traj.len() {
        let t = k as f64 * dt;
        let expected = (1.0 - t).max(0.0);
        assert!(
            (traj.sample(k)[1] - expected).abs() <= 2.0 * dt,
            "y deviates at t={t}"
        );
        assert!(
            (traj.sample(k)[0] - 0.3).abs() <= 1e-9,
            "x drifts at t={t}"
        );
    }

    let fx = absorption_fixture();

    // equilibrium cells are exactly the surface row
    let eq = fx.bundle.equilibrium_points(&fx.grid, 1e-9).unwrap();
    let mut expected_row = fx.surface_row.clone();
    expected_row.sort_unstable();
    assert_eq!(eq.to_indices(), expected_row, "equilibrium cells");

    // omega of the cell of (0.3, 1.0) is the cell of (0.3, 0), within 1 cell
    let base = fx.grid.locate(&[0.3, 1.0]).unwrap();
    let target = fx.grid.locate(&[0.3, 0.0]).unwrap();
    let limit = omega_limit_grid(&fx.relation, base, default_step_budget(&fx.relation), 1).unwrap();
    assert!(limit.stabilized);
    let target_set = CellSet::from_cells(fx.grid.clone(), &[target]);
    let distance = limit.omega.hausdorff_distance(&target_set).unwrap();
    assert!(
        distance <= 1,
        "omega {:?} not within 1 cell of {target}",
        limit.omega.to_indices()
    );

    // recurrence lives exactly on the surface row
    let rec = recurrent_cells(&fx.relation, default_step_budget(&fx.relation)).unwrap();
    assert_eq!(rec.to_indices(), expected_row, "recurrent cells");

    // the uniform measure on the surface row is sub-invariant but not
    // strictly invariant
    let line = CellSet::from_cells(fx.grid.clone(), &fx.surface_row);
    let mu = DiscreteMeasure::uniform_on(&line).unwrap();
    let family = default_test_family(&fx.grid, 100, 31);
    let sub = check_subinvariance(&mu, &fx.relation, &family, &[1, 10], 1e-9).unwrap();
    assert!(sub.pass, "line measure fails sub-invariance: {sub:?}");

    // strip y in [0.2, 0.4]: all columns of the two rows above the surface
    let strip_cells: Vec<usize> = (0..10)
        .flat_map(|ix| {
            [0.25, 0.35]
                .iter()
                .map(|&y| fx.grid.locate(&[0.05 + 0.1 * ix as f64, y]).unwrap())
                .collect::<Vec<_>>()
        })
        .collect();
    let strip = CellSet::from_cells(fx.grid.clone(), &strip_cells);
    let strict = check_strict_invariance(&mu, &fx.relation, std::slice::from_ref(&strip), &[10], 1e-9).unwrap();
    assert!(
        !strict.pass && strict.max_violation > 0.0,
        "strict invariance should fail with a positive violation: {strict:?}"
    );
    // restricted to the surface its dynamics is the identity: strict
    // equality holds for subsets of the row
    let row_part = CellSet::from_cells(fx.grid.clone(), &fx.surface_row[2..7]);
    let on_row = check_strict_invariance(&mu, &fx.relation, &[row_part], &[10], 1e-9).unwrap();
    assert!(on_row.pass, "{on_row:?}");

    // viability: the surface row is its own kernel, the strip's kernel is
    // empty, and the row is strongly invariant at grid scale
    assert_eq!(
        fx.relation.viability_kernel(&line).unwrap(),
        line,
        "surface row kernel"
    );
    assert!(fx.relation.viability_kernel(&strip).unwrap().is_empty());
    assert!(ydyn_core::limits::strong_invariance_grid(&fx.relation, &line).unwrap());

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, limit 60 s");
    println!("criterion 05 (absorption: closed form within 2dt, equilibria exact, omega within 1 cell, line measure sub-invariant but not strict): PASS ({elapsed:?})");
}

#[test]
fn criterion_06_poincare_recurrence() {
    let start = Instant::now();
    // exact equality on the relation sweep, exhaustive over B
    for (idx, r) in relation_sweep().iter().enumerate() {
        let weights = core_weights(r, 1000 + idx as u64);
        if weights.is_empty() {
            continue;
        }
        let v = CellRelation::from_relation(r);
        let mu = DiscreteMeasure::new(v.grid().clone(), r.markov_measure(&weights).unwrap()).unwrap();
        let n = r.state_count();
        for mask in 0..(1u64 << n) {
            let b = CellSet::from_bits(v.grid().clone(), BitSet::from_mask(n, mask));
            let report = poincare_check(&mu, &v, &b, 4096, 0.0).unwrap();
            assert!(report.stabilized, "preimage cycle not found");
            assert_eq!(
                report.verdict,
                RecurrenceVerdict::Pass,
                "relation {idx}, B mask {mask}: defect {}",
                report.defect
            );
        }
    }
    // circle: uniform measure, 20 seeded random arcs, equality within 1e-9
    let v = circle_relation();
    let mu = DiscreteMeasure::uniform(v.grid().clone());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20 {
        let from = rng.gen_range(0..100usize);
        let len = rng.gen_range(1..=100usize);
        let cells: Vec<usize> = (0..len).map(|k| (from + k) % 100).collect();
        let b = CellSet::from_cells(v.grid().clone(), &cells);
        let report = poincare_check(&mu, &v, &b, 4096, 1e-9).unwrap();
        assert_eq!(
            report.verdict,
            RecurrenceVerdict::Pass,
            "arc from {from} len {len}: defect {}",
            report.defect
        );
    }
    println!(
        "criterion 06 (recurrence mass equality: exact on relations, 1e-9 on the circle): PASS ({:?})",
        start.elapsed()
    );
}

#[test]
fn criterion_07_recurrent_set_carries_full_measure() {
    let start = Instant::now();
    for (idx, r) in relation_sweep().iter().enumerate() {
        let weights = core_weights(r, 9000 + idx as u64);
        if weights.is_empty() {
            continue;
        }
        let mu_weights = r.markov_measure(&weights).unwrap();
        let recurrent = r.recurrent_states();
        for (state, &w) in mu_weights.iter().enumerate() {
            assert!(
                w == 0.0 || recurrent.contains(state),
                "relation {idx}: state {state} charged ({w}) but not recurrent"
            );
        }
        let v = CellRelation::from_relation(r);
        let mu = DiscreteMeasure::new(v.grid().clone(), mu_weights).unwrap();
        let rec_cells = CellSet::from_bits(v.grid().clone(), recurrent);
        assert!(
            recurrent_set_full_measure(&mu, &rec_cells, 0, 0.0).unwrap(),
            "relation {idx}: recurrent set lacks full measure"
        );
    }
    // circle: every cell is recurrent and the uniform measure sees all of them
    let v = circle_relation();
    let rec = recurrent_cells(&v, default_step_budget(&v)).unwrap();
    assert_eq!(rec.count(), v.cell_count(), "circle recurrent cells");
    let mu = DiscreteMeasure::uniform(v.grid().clone());
    assert!(recurrent_set_full_measure(&mu, &rec, 0, 0.0).unwrap());
    println!(
        "criterion 07 (Markov support inside the recurrent set, exact; circle all-recurrent): PASS ({:?})",
        start.elapsed()
    );
}

#[test]
fn criterion_08_averaged_measures_approach_sub_invariance() {
    let start = Instant::now();
    let v = circle_relation();
    let family = default_test_family(v.grid(), 100, 47);
    let horizons = [125usize, 250, 500, 1000];
    let mut raw = Vec::new();
    for &t_steps in &horizons {
        let mu = krylov_bogoliubov_relation(&v, 0, t_steps).unwrap();
        let report = check_subinvariance(&mu, &v, &family, &[1], 1.0).unwrap();
        raw.push(report.max_violation);
    }
    let violations: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    for w in violations.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-12,
            "violation did not decrease along {violations:?}"
        );
    }
    let last = *violations.last().unwrap();
    assert!(last <= 0.01, "violation at T=1000 is {last}");
    let observed_c: Vec<f64> = violations
        .iter()
        .zip(&horizons)
        .map(|(v, &t)| v * t as f64)
        .collect();
    println!(
        "criterion 08 (averaged occupation measures: violations {violations:?} (raw {raw:?}) \
         non-increasing, <= 0.01 at T=1000; observed C {observed_c:?}): PASS ({:?})",
        start.elapsed()
    );
}

#[test]
fn criterion_09_flow_laws_and_section_identity() {
    let start = Instant::now();
    // flow laws on 1000 seeded random trajectories, exact
    let space = Arc::new(SpaceDescriptor::boxed(vec![(-100.0, 100.0)]).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    for _ in 0..1000 {
        let len = rng.gen_range(1..=30usize);
        let k0 = rng.gen_range(-40i64..40);
        let samples: Vec<Vec<f64>> = (0..len).map(|_| vec![rng.gen_range(-99.0..99.0)]).collect();
        let phi = Trajectory::new(space.clone(), 0.125, k0, samples).unwrap();
        let (j, k) = (rng.gen_range(-10i64..10), rng.gen_range(-10i64..10));
        assert_eq!(phi.shift(0), phi);
        assert_eq!(phi.shift(j).shift(k), phi.shift(j + k));
    }

    // section identity on a from-bundle relation: evaluating the shifted
    // section equals evaluating members at the shifted time, and both stay
    // inside the relation's reach set
    let field = SetValuedField::interval_rotation();
    let policy = SelectionPolicy::new(88, 2, SelectionLaw::UniformInBox).unwrap();
    let seeds: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0]).collect();
    let bundle = sample_inclusion(&field, &seeds, 0.0, 1.0, 0.05, 5, &policy).unwrap();
    let grid = circle_grid();
    let v = build_cell_relation_from_bundle(&bundle, grid.clone(), 0.05).unwrap();
    for arc_start in [0usize, 25, 60, 90] {
        let cells: Vec<usize> = (0..10).map(|k| (arc_start + k) % 100).collect();
        let a = CellSet::from_cells(grid.clone(), &cells);
        let section = bundle.section(&a).unwrap();
        for k in 0..=10i64 {
            let t = k as f64 * 0.05;
            let mut via_shift = Vec::new();
            let mut via_evaluate = Vec::new();
            for m in section.members() {
                let shifted = m.shift_time(t).unwrap();
                via_shift.push(grid.locate(shifted.value_at_zero().unwrap()).unwrap());
                via_evaluate.push(grid.locate(&m.evaluate(t).unwrap()).unwrap());
            }
            assert_eq!(via_shift, via_evaluate, "section identity at t={t}");
            // containment in the k-step reach set of the section's start cells
            let starts: Vec<usize> = section
                .members()
                .iter()
                .map(|m| grid.locate(m.value_at_zero().unwrap()).unwrap())
                .collect();
            let start_set = CellSet::from_cells(grid.clone(), &starts);
            let reach = v.reach_set(&start_set, k).unwrap();
            for &c in &via_evaluate {
                assert!(reach.contains(c), "cell {c} escapes reach at k={k}");
            }
        }
    }
    println!(
        "criterion 09 (flow laws on 1000 trajectories; section identity, zero tolerance): PASS ({:?})",
        start.elapsed()
    );
}

#[test]
fn criterion_10_axiom_diagnostics_fixtures() {
    let start = Instant::now();
    // interval rotation: Lipschitz witness <= 2 + 1e-9, coverage 1.0
    let field = SetValuedField::interval_rotation();
    let grid = circle_grid();
    let seeds: Vec<Vec<f64>> = (0..100).map(|c| grid.cell_center(c)).collect();
    let policy = SelectionPolicy::new(1234, 5, SelectionLaw::ExtremeVelocity).unwrap();
    let bundle = sample_inclusion(&field, &seeds, 0.0, 2.0, 0.05, 3, &policy).unwrap();
    let cfg = AxiomCheckConfig {
        window: (0.0, 2.0),
        tol: 1e-9,
        lipschitz_cap: 2.0,
        seed: 99,
        spot_checks: 200,
    };
    let report = check_axioms(&bundle, &grid, &cfg).unwrap();
    assert_eq!(report.existence_coverage, 1.0, "{report:?}");
    assert!(report.lipschitz_witness <= 2.0 + 1e-9, "{report:?}");
    assert!(report.compactness_pass && report.overall, "{report:?}");

    // synthetic member with unbounded slope growth: compactness fails
    let space = Arc::new(SpaceDescriptor::boxed(vec![(0.0, 1e6)]).unwrap());
    let runaway: Vec<Vec<f64>> = (0..100).map(|k| vec![(k * k) as f64]).collect();
    let synthetic = SolutionBundle::new(
        space.clone(),
        1.0,
        vec![Trajectory::new(space, 1.0, 0, runaway).unwrap()],
        Provenance::new("synthetic-runaway", 0, (0.0, 99.0)),
    )
    .unwrap();
    let bad_grid = Arc::new(
        Grid::new(SpaceDescriptor::boxed(vec![(0.0, 1e6)]).unwrap(), vec![10]).unwrap(),
    );
    let cfg = AxiomCheckConfig {
        window: (0.0, 99.0),
        tol: 1e-9,
        lipschitz_cap: 10.0,
        seed: 99,
        spot_checks: 50,
    };
    let report = check_axioms(&synthetic, &bad_grid, &cfg).unwrap();
    assert!(!report.compactness_pass && !report.overall, "{report:?}");
    println!(
        "criterion 10 (axiom diagnostics: rotation passes, runaway fixture fails compactness): PASS ({:?})",
        start.elapsed()
    );
}
