//! Exact finite-state kernel: the solution space is the set of bi-infinite
//! paths of a relation, and every invariance, limit-set and measure statement
//! is decided with no tolerance.
//!
//! A state lies on a bi-infinite path inside a set exactly when it survives
//! iterated removal of states lacking a successor or predecessor in the set;
//! that fixed point is the [`viable core`](Relation::viable_core) and carries
//! the whole theory: reachability is computed inside it, limit sets are the
//! eventual cycles of reach-set sequences, and stationary Markov chains on
//! its edges provide invariant measures.

use crate::bits::BitSet;
use crate::error::{Error, Result};

/// Set of states of a [`Relation`], as membership bits.
pub type StateSet = BitSet;

/// Finite-state set-valued map: `j ∈ succ(i)` whenever the edge `i -> j`
/// is present. Edges are stored deduplicated and sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    n: usize,
    edges: Vec<(usize, usize)>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

/// Subset enumeration cap: `enumerate_weakly_invariant` scans `2^n` subsets.
pub const ENUMERATION_CAP: usize = 20;

/// Exact stationary solve is used up to this state count; power iteration after.
const EXACT_SOLVE_CAP: usize = 50;

const POWER_TOL: f64 = 1e-12;
const POWER_CAP: usize = 1_000_000;

impl Relation {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDescriptor("relation needs at least one state".into()));
        }
        let mut sorted: Vec<(usize, usize)> = edges.to_vec();
        for &(i, j) in &sorted {
            if i >= n || j >= n {
                return Err(Error::InvalidDescriptor(format!(
                    "edge {i} -> {j} out of range for {n} states"
                )));
            }
        }
        sorted.sort_unstable();
        sorted.dedup();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for &(i, j) in &sorted {
            succ[i].push(j);
            pred[j].push(i);
        }
        for p in &mut pred {
            p.sort_unstable();
        }
        Ok(Relation {
            n,
            edges: sorted,
            succ,
            pred,
        })
    }

    pub fn state_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn predecessors(&self, i: usize) -> &[usize] {
        &self.pred[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.succ[i].binary_search(&j).is_ok()
    }

    pub fn full_set(&self) -> StateSet {
        BitSet::full(self.n)
    }

    pub fn empty_set(&self) -> StateSet {
        BitSet::empty(self.n)
    }

    fn check_len(&self, a: &StateSet) -> StateSet {
        assert_eq!(a.len(), self.n, "state set size does not match relation");
        a.clone()
    }

    /// Largest subset of `a` in which every state has both a successor and a
    /// predecessor inside the subset, i.e. lies on a bi-infinite path in `a`.
    /// Computed by iterated removal to a fixed point.
    pub fn viable_core(&self, a: &StateSet) -> StateSet {
        let mut core = self.check_len(a);
        loop {
            let mut changed = false;
            let snapshot = core.clone();
            for i in snapshot.iter() {
                let has_succ = self.succ[i].iter().any(|&j| snapshot.contains(j));
                let has_pred = self.pred[i].iter().any(|&j| snapshot.contains(j));
                if !has_succ || !has_pred {
                    core.remove(i);
                    changed = true;
                }
            }
            if !changed {
                return core;
            }
        }
    }

    /// Viable core of the full state set: the union of all bi-infinite paths.
    pub fn core(&self) -> StateSet {
        self.viable_core(&self.full_set())
    }

    /// A set is weakly invariant when every one of its states lies on a
    /// bi-infinite path staying inside the set.
    pub fn is_weakly_invariant(&self, a: &StateSet) -> bool {
        self.viable_core(a) == *a
    }

    /// A set is strongly invariant when no bi-infinite path meets both the
    /// set and its complement: equivalently, the set is closed under
    /// successors and predecessors within the viable core.
    pub fn is_strongly_invariant(&self, a: &StateSet) -> bool {
        let core = self.core();
        for i in a.intersection(&core).iter() {
            for &j in &self.succ[i] {
                if core.contains(j) && !a.contains(j) {
                    return false;
                }
            }
            for &j in &self.pred[i] {
                if core.contains(j) && !a.contains(j) {
                    return false;
                }
            }
        }
        true
    }

    /// All weakly invariant subsets, by exhaustive scan. Capped at
    /// [`ENUMERATION_CAP`] states.
    pub fn enumerate_weakly_invariant(&self) -> Result<Vec<StateSet>> {
        if self.n > ENUMERATION_CAP {
            return Err(Error::CapacityExceeded {
                states: self.n,
                cap: ENUMERATION_CAP,
            });
        }
        let mut out = Vec::new();
        for mask in 0..(1u64 << self.n) {
            let a = BitSet::from_mask(self.n, mask);
            if self.is_weakly_invariant(&a) {
                out.push(a);
            }
        }
        Ok(out)
    }

    fn image(&self, e: &StateSet) -> StateSet {
        let mut out = BitSet::empty(self.n);
        for i in e.iter() {
            for &j in &self.succ[i] {
                out.insert(j);
            }
        }
        out
    }

    fn preimage(&self, e: &StateSet) -> StateSet {
        let mut out = BitSet::empty(self.n);
        for i in e.iter() {
            for &j in &self.pred[i] {
                out.insert(j);
            }
        }
        out
    }

    /// `n`-step successor set (`n >= 0`) or `|n|`-step predecessor set
    /// (`n < 0`) along complete trajectories: the iteration stays inside the
    /// viable core, and `reach(e, 0) = e ∩ core`.
    pub fn reach(&self, e: &StateSet, steps: i64) -> StateSet {
        let core = self.core();
        let mut current = self.check_len(e).intersection(&core);
        for _ in 0..steps.unsigned_abs() {
            let next = if steps >= 0 {
                self.image(&current)
            } else {
                self.preimage(&current)
            };
            current = next.intersection(&core);
        }
        current
    }

    /// ω-limit set of a state: the union over one period of the eventual
    /// cycle of `n -> reach({x}, n)`, i.e. the states visited at infinitely
    /// many forward times. Errors when `x` lies on no complete trajectory.
    pub fn omega_limit(&self, x: usize) -> Result<StateSet> {
        self.limit_set(x, true)
    }

    /// α-limit set of a state, by the same construction backward in time.
    pub fn alpha_limit(&self, x: usize) -> Result<StateSet> {
        self.limit_set(x, false)
    }

    fn limit_set(&self, x: usize, forward: bool) -> Result<StateSet> {
        let core = self.core();
        if !core.contains(x) {
            return Err(Error::NoCompleteTrajectory { state: x });
        }
        let start = BitSet::from_indices(self.n, &[x]);
        let step = |s: &BitSet| {
            let img = if forward { self.image(s) } else { self.preimage(s) };
            img.intersection(&core)
        };
        let cycle = crate::cycles::eventually_periodic_union(start, step, usize::MAX)
            .expect("subset sequences on a finite set are eventually periodic");
        Ok(cycle.union_over_period)
    }

    /// States recurrent for the path dynamics: `x` in the viable core with
    /// `x ∈ omega_limit(x)`.
    pub fn recurrent_states(&self) -> StateSet {
        let core = self.core();
        let mut out = BitSet::empty(self.n);
        for x in core.iter() {
            if self.omega_limit(x).map(|w| w.contains(x)).unwrap_or(false) {
                out.insert(x);
            }
        }
        out
    }

    /// Stationary state marginal of the Markov chain with the given positive
    /// edge weights. Weights must sit on edges of the viable core and every
    /// weighted edge must target a state that itself carries outgoing weight,
    /// so the chain is closed on its charged states. Below 50 charged states
    /// the distribution is solved exactly (per closed communicating class,
    /// mixed by absorption probabilities from the uniform start); above, by
    /// pure power iteration to 1e-12.
    pub fn markov_measure(&self, weights: &[(usize, usize, f64)]) -> Result<Vec<f64>> {
        let core = self.core();
        for &(i, j, w) in weights {
            if i >= self.n || j >= self.n || !self.has_edge(i, j) {
                return Err(Error::NonEdgeWeight { from: i, to: j });
            }
            if !core.contains(i) || !core.contains(j) {
                return Err(Error::EdgeOffCore { from: i, to: j });
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::NonPositiveWeight {
                    from: i,
                    to: j,
                    weight: w,
                });
            }
        }
        let mut out_weight = vec![0.0f64; self.n];
        for &(i, _, w) in weights {
            out_weight[i] += w;
        }
        for &(i, j, _) in weights {
            if out_weight[j] == 0.0 {
                return Err(Error::UnchargedTarget { from: i, to: j });
            }
        }
        let charged: Vec<usize> = (0..self.n).filter(|&i| out_weight[i] > 0.0).collect();
        if charged.is_empty() {
            return Err(Error::EmptySet);
        }
        let index_of: std::collections::HashMap<usize, usize> =
            charged.iter().enumerate().map(|(k, &s)| (s, k)).collect();
        let m = charged.len();
        // Row-stochastic transition matrix on the charged states.
        let mut p = vec![vec![0.0f64; m]; m];
        for &(i, j, w) in weights {
            p[index_of[&i]][index_of[&j]] += w / out_weight[i];
        }
        let pi = if m <= EXACT_SOLVE_CAP {
            stationary_exact(&p)
        } else {
            stationary_power(&p)?
        };
        let mut full = vec![0.0f64; self.n];
        for (k, &s) in charged.iter().enumerate() {
            full[s] = pi[k];
        }
        Ok(full)
    }
}

/// Exact stationary distribution of a row-stochastic matrix: the Cesàro
/// limit of the chain started uniformly. Closed communicating classes get
/// their unique stationary vector; classes are mixed by the absorption
/// probability from the uniform start; transient states get exactly zero.
fn stationary_exact(p: &[Vec<f64>]) -> Vec<f64> {
    let m = p.len();
    let classes = strongly_connected_components(p);
    // A class is closed when no member has positive weight out of the class.
    let mut class_of = vec![0usize; m];
    for (c, members) in classes.iter().enumerate() {
        for &s in members {
            class_of[s] = c;
        }
    }
    let closed: Vec<usize> = (0..classes.len())
        .filter(|&c| {
            classes[c]
                .iter()
                .all(|&s| (0..m).all(|j| p[s][j] == 0.0 || class_of[j] == c))
        })
        .collect();
    let transient: Vec<usize> = (0..m)
        .filter(|&s| !closed.contains(&class_of[s]))
        .collect();

    // Absorption probability into each closed class from the uniform start.
    let uniform = 1.0 / m as f64;
    let mut class_mass = vec![0.0f64; classes.len()];
    for &c in &closed {
        class_mass[c] = classes[c].len() as f64 * uniform;
    }
    if !transient.is_empty() {
        let t = transient.len();
        for &c in &closed {
            // Solve (I - Q) h = r, with Q the transient-to-transient block and
            // r the one-step probability of entering class c.
            let mut a = vec![vec![0.0f64; t + 1]; t];
            for (row, &s) in transient.iter().enumerate() {
                for (col, &u) in transient.iter().enumerate() {
                    a[row][col] = f64::from(row == col) - p[s][u];
                }
                a[row][t] = (0..m)
                    .filter(|&j| class_of[j] == c)
                    .map(|j| p[s][j])
                    .sum();
            }
            let h = solve_dense(&mut a);
            for hk in h.iter().take(transient.len()) {
                class_mass[c] += uniform * hk;
            }
        }
    }

    let mut pi = vec![0.0f64; m];
    for &c in &closed {
        let members = &classes[c];
        let local = stationary_irreducible(p, members);
        for (k, &s) in members.iter().enumerate() {
            pi[s] = class_mass[c] * local[k];
        }
    }
    pi
}

/// Unique stationary vector of the chain restricted to one closed
/// communicating class, via a dense solve of `pi P = pi, sum pi = 1`.
fn stationary_irreducible(p: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let k = members.len();
    if k == 1 {
        return vec![1.0];
    }
    // Rows: (P^T - I) pi = 0 with the last row replaced by the mass constraint.
    let mut a = vec![vec![0.0f64; k + 1]; k];
    for row in 0..k {
        for col in 0..k {
            a[row][col] = p[members[col]][members[row]] - f64::from(row == col);
        }
    }
    for col in 0..k {
        a[k - 1][col] = 1.0;
    }
    a[k - 1][k] = 1.0;
    solve_dense(&mut a)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve_dense(a: &mut [Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        let diag = a[col][col];
        if diag.abs() < 1e-14 {
            continue;
        }
        for row in 0..n {
            if row != col {
                let factor = a[row][col] / diag;
                for k in col..=n {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
    }
    (0..n)
        .map(|i| {
            let d = a[i][i];
            if d.abs() < 1e-14 {
                0.0
            } else {
                a[i][n] / d
            }
        })
        .collect()
}

/// Tarjan's strongly connected components over the positive entries of `p`,
/// returned with members sorted for determinism.
fn strongly_connected_components(p: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let m = p.len();
    let mut index = vec![usize::MAX; m];
    let mut low = vec![0usize; m];
    let mut on_stack = vec![false; m];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut components: Vec<Vec<usize>> = Vec::new();

    // Iterative Tarjan to avoid recursion limits.
    enum Frame {
        Enter(usize),
        Resume(usize, usize),
    }
    for start in 0..m {
        if index[start] != usize::MAX {
            continue;
        }
        let mut call = vec![Frame::Enter(start)];
        while let Some(frame) = call.pop() {
            match frame {
                Frame::Enter(v) => {
                    index[v] = next_index;
                    low[v] = next_index;
                    next_index += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    call.push(Frame::Resume(v, 0));
                }
                Frame::Resume(v, mut next_edge) => {
                    let mut descended = false;
                    while next_edge < m {
                        let w = next_edge;
                        next_edge += 1;
                        if p[v][w] <= 0.0 {
                            continue;
                        }
                        if index[w] == usize::MAX {
                            call.push(Frame::Resume(v, next_edge));
                            call.push(Frame::Enter(w));
                            descended = true;
                            break;
                        } else if on_stack[w] {
                            low[v] = low[v].min(index[w]);
                        }
                    }
                    if descended {
                        continue;
                    }
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        while let Some(w) = stack.pop() {
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        components.push(comp);
                    }
                    if let Some(Frame::Resume(parent, _)) = call.last() {
                        let parent = *parent;
                        low[parent] = low[parent].min(low[v]);
                    }
                }
            }
        }
    }
    components.sort_by_key(|c| c[0]);
    components
}

/// Pure power iteration from the uniform start, tolerance 1e-12.
fn stationary_power(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = p.len();
    let mut pi = vec![1.0 / m as f64; m];
    for _ in 0..POWER_CAP {
        let mut next = vec![0.0f64; m];
        for (i, row) in p.iter().enumerate() {
            let w = pi[i];
            if w == 0.0 {
                continue;
            }
            for (j, &q) in row.iter().enumerate() {
                next[j] += w * q;
            }
        }
        let delta: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if delta <= POWER_TOL {
            return Ok(pi);
        }
    }
    Err(Error::Convergence {
        iterations: POWER_CAP,
    })
}
