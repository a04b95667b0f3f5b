//! Precision / recall / F1 under tolerance-parameterized one-to-one matching.
//!
//! A reference/estimate pair is admissible when pitches agree, onsets are
//! within the onset tolerance, and (optionally) offsets are within
//! `max(offset_tolerance, offset_ratio × reference duration)` and velocities
//! agree after normalization. Scores come from a maximum-cardinality matching
//! over the admissible pairs.
//!
//! Velocities are compared as `v / 127` after the estimate is rescaled by one
//! global least-squares factor. The factor is fit on the pairs of a
//! maximum timing matching of least total onset (and offset) distance.

use std::collections::VecDeque;

use crate::events::{NoteEvent, PedalEvent};
use crate::grid::RegressionGrid;
use crate::{Error, Result};

/// Slack added to every tolerance comparison so that distances equal to a
/// tolerance match despite floating-point error in the event times.
const DISTANCE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub onset_tolerance_seconds: f64,
    pub use_offset: bool,
    pub offset_tolerance_seconds: f64,
    pub offset_ratio: f64,
    pub use_velocity: bool,
    pub velocity_tolerance: f64,
    /// Score reported when both lists are empty.
    pub empty_score: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            onset_tolerance_seconds: 0.05,
            use_offset: false,
            offset_tolerance_seconds: 0.05,
            offset_ratio: 0.2,
            use_velocity: false,
            velocity_tolerance: 0.1,
            empty_score: 1.0,
        }
    }
}

impl MatchConfig {
    pub fn onset_only() -> Self {
        Self::default()
    }

    pub fn with_offset() -> Self {
        Self { use_offset: true, ..Self::default() }
    }

    pub fn with_offset_and_velocity() -> Self {
        Self { use_offset: true, use_velocity: true, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("onset tolerance", self.onset_tolerance_seconds),
            ("offset tolerance", self.offset_tolerance_seconds),
            ("velocity tolerance", self.velocity_tolerance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.offset_ratio.is_finite() && self.offset_ratio >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "offset ratio must be non-negative, got {}",
                self.offset_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// (reference index, estimate index), sorted by reference index.
    pub matched_pairs: Vec<(usize, usize)>,
}

impl EvalResult {
    fn from_counts(matches: usize, num_ref: usize, num_est: usize, empty_score: f64) -> Self {
        if num_ref == 0 && num_est == 0 {
            return Self { precision: empty_score, recall: empty_score, f1: empty_score, matched_pairs: vec![] };
        }
        let ratio = |n: usize| if n == 0 { 0.0 } else { matches as f64 / n as f64 };
        let precision = ratio(num_est);
        let recall = ratio(num_ref);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { precision, recall, f1, matched_pairs: vec![] }
    }
}

/// Anything with an onset and offset that can be matched.
pub trait TimedEvent {
    fn onset(&self) -> f64;
    fn offset(&self) -> f64;
    fn pitch(&self) -> Option<u8> {
        None
    }
    fn velocity(&self) -> Option<u8> {
        None
    }
}

impl TimedEvent for NoteEvent {
    fn onset(&self) -> f64 {
        self.onset_seconds()
    }
    fn offset(&self) -> f64 {
        self.offset_seconds()
    }
    fn pitch(&self) -> Option<u8> {
        Some(NoteEvent::pitch(self))
    }
    fn velocity(&self) -> Option<u8> {
        Some(NoteEvent::velocity(self))
    }
}

impl TimedEvent for PedalEvent {
    fn onset(&self) -> f64 {
        self.onset_seconds()
    }
    fn offset(&self) -> f64 {
        self.offset_seconds()
    }
}

fn timing_admissible<E: TimedEvent>(r: &E, e: &E, cfg: &MatchConfig) -> bool {
    if r.pitch() != e.pitch() {
        return false;
    }
    if (r.onset() - e.onset()).abs() > cfg.onset_tolerance_seconds + DISTANCE_SLACK {
        return false;
    }
    if cfg.use_offset {
        let window = cfg.offset_tolerance_seconds.max(cfg.offset_ratio * (r.offset() - r.onset()));
        if (r.offset() - e.offset()).abs() > window + DISTANCE_SLACK {
            return false;
        }
    }
    true
}

/// Admissibility graph: for each reference, the estimates it may pair with.
fn admissible_pairs<E: TimedEvent>(reference: &[E], estimate: &[E], cfg: &MatchConfig) -> Vec<Vec<usize>> {
    // estimates sorted by onset so each reference scans a window only
    let mut order: Vec<usize> = (0..estimate.len()).collect();
    order.sort_by(|&a, &b| estimate[a].onset().total_cmp(&estimate[b].onset()));
    let onsets: Vec<f64> = order.iter().map(|&i| estimate[i].onset()).collect();
    let reach = cfg.onset_tolerance_seconds + DISTANCE_SLACK;

    let mut graph: Vec<Vec<usize>> = reference
        .iter()
        .map(|r| {
            let start = onsets.partition_point(|&t| t < r.onset() - reach);
            let mut adj: Vec<usize> = order[start..]
                .iter()
                .take_while(|&&i| estimate[i].onset() <= r.onset() + reach)
                .copied()
                .filter(|&i| timing_admissible(r, &estimate[i], cfg))
                .collect();
            adj.sort_unstable();
            adj
        })
        .collect();

    let velocities_known = reference.iter().chain(estimate).all(|e| e.velocity().is_some());
    if cfg.use_velocity && velocities_known {
        let norm = |e: &E| e.velocity().unwrap() as f64 / 127.0;
        // fit on one timing-optimal pairing, not on every admissible pair, so
        // near-miss neighbors cannot drag the scale away from the true pairs
        let (mut cross, mut square) = (0.0, 0.0);
        for (ri, ei) in closest_maximum_matching(reference, estimate, &graph, cfg) {
            cross += norm(&reference[ri]) * norm(&estimate[ei]);
            square += norm(&estimate[ei]).powi(2);
        }
        let scale = if square > 0.0 { cross / square } else { 1.0 };
        for (ri, adj) in graph.iter_mut().enumerate() {
            let r = norm(&reference[ri]);
            adj.retain(|&ei| (r - scale * norm(&estimate[ei])).abs() <= cfg.velocity_tolerance + DISTANCE_SLACK);
        }
    }
    graph
}

fn timing_cost<E: TimedEvent>(r: &E, e: &E, cfg: &MatchConfig) -> f64 {
    let onset = (r.onset() - e.onset()).abs();
    if cfg.use_offset {
        onset + (r.offset() - e.offset()).abs()
    } else {
        onset
    }
}

/// Among maximum-cardinality matchings of `graph`, one with the least total
/// timing distance. Solved per connected component with the Hungarian method.
fn closest_maximum_matching<E: TimedEvent>(
    reference: &[E],
    estimate: &[E],
    graph: &[Vec<usize>],
    cfg: &MatchConfig,
) -> Vec<(usize, usize)> {
    let n_ref = reference.len();
    let mut parent: Vec<usize> = (0..n_ref + estimate.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (ri, adj) in graph.iter().enumerate() {
        for &ei in adj {
            let (a, b) = (find(&mut parent, ri), find(&mut parent, n_ref + ei));
            parent[a] = b;
        }
    }
    let mut components: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>)> = Default::default();
    for (ri, adj) in graph.iter().enumerate() {
        if !adj.is_empty() {
            components.entry(find(&mut parent, ri)).or_default().0.push(ri);
        }
    }
    for ei in 0..estimate.len() {
        let root = find(&mut parent, n_ref + ei);
        if let Some(c) = components.get_mut(&root) {
            c.1.push(ei);
        }
    }

    let mut pairs = Vec::new();
    for (refs, ests) in components.values() {
        let k = refs.len().max(ests.len());
        let raw: Vec<Vec<Option<f64>>> = refs
            .iter()
            .map(|&ri| {
                ests.iter()
                    .map(|ei| graph[ri].binary_search(ei).ok().map(|_| timing_cost(&reference[ri], &estimate[*ei], cfg)))
                    .collect()
            })
            .collect();
        let largest = raw.iter().flatten().flatten().copied().fold(0.0, f64::max);
        // admissible costs stay below 0.5 each, so any extra admissible pair
        // outweighs every possible saving in distance
        let missing = k as f64 + 1.0;
        let cost: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| match raw.get(i).and_then(|row| row.get(j)).copied().flatten() {
                        Some(c) if largest > 0.0 => c / (2.0 * largest),
                        Some(_) => 0.0,
                        None => missing,
                    })
                    .collect()
            })
            .collect();
        for (i, j) in hungarian(&cost).into_iter().enumerate() {
            if i < refs.len() && j < ests.len() && raw[i][j].is_some() {
                pairs.push((refs[i], ests[j]));
            }
        }
    }
    pairs
}

/// Minimum-cost perfect assignment on a square matrix; returns the column
/// assigned to each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let (mut u, mut v) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    let (mut p, mut way) = (vec![0usize; n + 1], vec![0usize; n + 1]);
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let (mut delta, mut j1) = (f64::INFINITY, 0);
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Hopcroft–Karp maximum-cardinality bipartite matching.
/// Returns, for each left vertex, its matched right vertex.
pub fn maximum_matching(adjacency: &[Vec<usize>], num_right: usize) -> Vec<Option<usize>> {
    const FREE: usize = usize::MAX;
    let n = adjacency.len();
    let mut match_left = vec![FREE; n];
    let mut match_right = vec![FREE; num_right];
    let mut dist = vec![0usize; n];

    loop {
        // BFS layering from free left vertices
        let mut queue = VecDeque::new();
        for u in 0..n {
            if match_left[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                let w = match_right[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        // iterative DFS along the layers
        let mut next_edge = vec![0usize; n];
        for root in 0..n {
            if match_left[root] != FREE {
                continue;
            }
            let mut stack = vec![root];
            while let Some(&u) = stack.last() {
                if next_edge[u] >= adjacency[u].len() {
                    dist[u] = usize::MAX;
                    stack.pop();
                    continue;
                }
                let v = adjacency[u][next_edge[u]];
                next_edge[u] += 1;
                let w = match_right[v];
                if w == FREE {
                    // augment along the stack
                    let mut v = v;
                    while let Some(u) = stack.pop() {
                        let prev = match_left[u];
                        match_left[u] = v;
                        match_right[v] = u;
                        v = prev;
                    }
                    break;
                } else if dist[w] == dist[u] + 1 {
                    stack.push(w);
                }
            }
        }
    }
    match_left.into_iter().map(|m| (m != FREE).then_some(m)).collect()
}

fn match_events<E: TimedEvent>(reference: &[E], estimate: &[E], cfg: &MatchConfig) -> EvalResult {
    let graph = admissible_pairs(reference, estimate, cfg);
    let matching = maximum_matching(&graph, estimate.len());
    let pairs: Vec<(usize, usize)> =
        matching.iter().enumerate().filter_map(|(r, e)| e.map(|e| (r, e))).collect();
    let mut result = EvalResult::from_counts(pairs.len(), reference.len(), estimate.len(), cfg.empty_score);
    result.matched_pairs = pairs;
    result
}

pub fn match_notes(reference: &[NoteEvent], estimate: &[NoteEvent], cfg: &MatchConfig) -> EvalResult {
    match_events(reference, estimate, cfg)
}

/// Pedal matching: no pitch clause and no velocity clause.
pub fn match_pedals(reference: &[PedalEvent], estimate: &[PedalEvent], cfg: &MatchConfig) -> EvalResult {
    let cfg = MatchConfig { use_velocity: false, ..*cfg };
    match_events(reference, estimate, &cfg)
}

/// Cell-wise scores of two binary rolls of identical shape.
pub fn frame_metrics(reference: &RegressionGrid, estimate: &RegressionGrid) -> Result<EvalResult> {
    if reference.grid() != estimate.grid() {
        return Err(Error::ShapeMismatch(format!(
            "reference roll {:?} vs estimate roll {:?}",
            reference.grid(),
            estimate.grid()
        )));
    }
    let (mut tp, mut n_ref, mut n_est) = (0, 0, 0);
    for (&r, &e) in reference.values().iter().zip(estimate.values()) {
        let (r, e) = (r >= 0.5, e >= 0.5);
        n_ref += r as usize;
        n_est += e as usize;
        tp += (r && e) as usize;
    }
    Ok(EvalResult::from_counts(tp, n_ref, n_est, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Vary the onset tolerance; offsets and velocity ignored.
    Onset,
    /// Onset tolerance fixed at 50 ms, offset ratio 0.2; vary the offset tolerance.
    Offset,
}

/// Table-style grids of tolerances, in seconds.
pub const ONSET_SWEEP_TOLERANCES: [f64; 6] = [0.002, 0.005, 0.010, 0.020, 0.050, 0.100];
pub const OFFSET_SWEEP_TOLERANCES: [f64; 6] = [0.010, 0.020, 0.050, 0.100, 0.200, 0.500];

pub fn tolerance_sweep<E: TimedEvent>(
    reference: &[E],
    estimate: &[E],
    tolerances: &[f64],
    mode: SweepMode,
) -> Result<Vec<(f64, EvalResult)>> {
    if let Some(bad) = tolerances.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::InvalidParameter(format!("sweep tolerances must be positive, got {bad}")));
    }
    if tolerances.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("sweep tolerances must be sorted".into()));
    }
    Ok(tolerances
        .iter()
        .map(|&tol| {
            let cfg = match mode {
                SweepMode::Onset => MatchConfig { onset_tolerance_seconds: tol, ..MatchConfig::onset_only() },
                SweepMode::Offset => MatchConfig { offset_tolerance_seconds: tol, ..MatchConfig::with_offset() },
            };
            (tol, match_events(reference, estimate, &cfg))
        })
        .collect())
}

/// `tolerance,precision,recall,f1` CSV for a sweep.
pub fn sweep_csv(rows: &[(f64, EvalResult)]) -> String {
    let mut out = String::from("tolerance,precision,recall,f1\n");
    for (tol, r) in rows {
        out.push_str(&format!("{tol},{},{},{}\n", r.precision, r.recall, r.f1));
    }
    out
}
