//! Finite function classes on a sample and their covering numbers under the
//! empirical metric `ρ(f, g) = √((1/n) Σ (f(x_i) − g(x_i))²)`.

use super::combinatorics::monotone_sequences;
use super::OracleError;

/// Members above which [`CoverStrategy::Auto`] switches to the greedy search.
pub const EXACT_AUTO_LIMIT: usize = 20;
/// Largest class the exact search accepts.
pub const EXACT_MAX_MEMBERS: usize = 128;
/// Largest class any search accepts.
pub const MAX_MEMBERS: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunctionClass {
    pub points: Vec<f64>,
    /// One value vector per member, each of length `points.len()`.
    pub members: Vec<Vec<f64>>,
}

impl SampledFunctionClass {
    pub fn new(points: Vec<f64>, members: Vec<Vec<f64>>) -> Result<Self, OracleError> {
        if points.is_empty() {
            return Err(OracleError::OutOfRange("a class needs at least one sample point".into()));
        }
        if let Some(bad) = members.iter().position(|m| m.len() != points.len()) {
            return Err(OracleError::OutOfRange(format!(
                "member {bad} has {} values for {} points",
                members[bad].len(),
                points.len()
            )));
        }
        Ok(Self { points, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn sample_size(&self) -> usize {
        self.points.len()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        empirical_distance(&self.members[i], &self.members[j])
    }

    /// `sup_f √((1/n) Σ f(x_i)²)`.
    pub fn sup_l2(&self) -> f64 {
        let n = self.sample_size() as f64;
        self.members.iter().map(|m| (m.iter().map(|v| v * v).sum::<f64>() / n).sqrt()).fold(0.0, f64::max)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self { points: self.points.clone(), members: indices.iter().map(|&i| self.members[i].clone()).collect() }
    }
}

pub fn empirical_distance(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Nondecreasing step functions `Σ_k a_k Δy 𝟙[kΔx, (k+1)Δx)` with integer
/// levels `0 ≤ a_0 ≤ … ≤ a_{N−1} ≤ N`, `Δx = L/N`, `Δy = V/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaircaseClass {
    pub grid: usize,
    pub horizon: f64,
    pub range: f64,
    pub levels: Vec<Vec<u8>>,
}

impl StaircaseClass {
    pub fn new(grid: usize, horizon: f64, range: f64) -> Result<Self, OracleError> {
        if grid == 0 || grid > 12 {
            return Err(OracleError::OutOfRange(format!("staircase grid must be in 1..=12, got {grid}")));
        }
        if !(horizon > 0.0) || !(range > 0.0) {
            return Err(OracleError::OutOfRange("horizon and range must be positive".into()));
        }
        Ok(Self { grid, horizon, range, levels: monotone_sequences(grid) })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Value of member `index` at `x ∈ [0, L]`; the last cell is closed.
    pub fn eval(&self, index: usize, x: f64) -> f64 {
        let cell = ((x / self.horizon * self.grid as f64).floor() as usize).min(self.grid - 1);
        f64::from(self.levels[index][cell]) * self.range / self.grid as f64
    }

    /// Samples every member at one point per cell, the cell midpoint.
    pub fn at_midpoints(&self) -> SampledFunctionClass {
        let dx = self.horizon / self.grid as f64;
        let points: Vec<f64> = (0..self.grid).map(|k| (k as f64 + 0.5) * dx).collect();
        self.sampled(&points)
    }

    pub fn sampled(&self, points: &[f64]) -> SampledFunctionClass {
        let members = (0..self.len()).map(|i| points.iter().map(|&x| self.eval(i, x)).collect()).collect();
        SampledFunctionClass { points: points.to_vec(), members }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverStrategy {
    /// Exact up to [`EXACT_AUTO_LIMIT`] members, greedy above.
    Auto,
    Exact,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverResult {
    pub size: usize,
    /// Indices of the chosen centers; the cover is proper.
    pub centers: Vec<usize>,
    /// False for greedy covers, which only bound the minimum from above.
    pub exact: bool,
}

/// Size of a minimal (exact) or small (greedy farthest-point) proper τ-cover.
pub fn exact_covering_number(
    class: &SampledFunctionClass,
    tau: f64,
    strategy: CoverStrategy,
) -> Result<CoverResult, OracleError> {
    if !(tau > 0.0) {
        return Err(OracleError::OutOfRange(format!("tau must be positive, got {tau}")));
    }
    if class.is_empty() {
        return Err(OracleError::EmptyClass);
    }
    if class.len() > MAX_MEMBERS {
        return Err(OracleError::OutOfRange(format!("class has {} members, limit {MAX_MEMBERS}", class.len())));
    }
    let exact = match strategy {
        CoverStrategy::Auto => class.len() <= EXACT_AUTO_LIMIT,
        CoverStrategy::Exact => true,
        CoverStrategy::Greedy => false,
    };
    if exact {
        exact_cover(class, tau)
    } else {
        Ok(farthest_point_cover(class, tau))
    }
}

fn farthest_point_cover(class: &SampledFunctionClass, tau: f64) -> CoverResult {
    let mut nearest = vec![f64::INFINITY; class.len()];
    let mut centers = Vec::new();
    let mut next = 0;
    loop {
        centers.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(class.distance(next, i));
        }
        let (far, dist) = nearest.iter().enumerate().fold((0, 0.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        if dist <= tau {
            break;
        }
        next = far;
    }
    CoverResult { size: centers.len(), centers, exact: false }
}

type Bits = u128;

fn exact_cover(class: &SampledFunctionClass, tau: f64) -> Result<CoverResult, OracleError> {
    let m = class.len();
    if m > EXACT_MAX_MEMBERS {
        return Err(OracleError::OutOfRange(format!("exact cover supports at most {EXACT_MAX_MEMBERS} members, got {m}")));
    }
    let balls: Vec<Bits> = (0..m)
        .map(|c| (0..m).filter(|&i| class.distance(c, i) <= tau).fold(0, |acc, i| acc | (1 << i)))
        .collect();
    let all: Bits = if m == 128 { Bits::MAX } else { (1 << m) - 1 };
    let upper = farthest_point_cover(class, tau);
    let mut chosen = Vec::new();
    for k in 1..upper.size {
        if search(&balls, all, 0, k, &mut chosen) {
            return Ok(CoverResult { size: chosen.len(), centers: chosen, exact: true });
        }
    }
    Ok(CoverResult { exact: true, ..upper })
}

/// Depth-first search for a cover of `all` with at most `budget` more balls,
/// branching on the centers that cover the least-covered uncovered member.
fn search(balls: &[Bits], all: Bits, covered: Bits, budget: usize, chosen: &mut Vec<usize>) -> bool {
    let uncovered = all & !covered;
    if uncovered == 0 {
        return true;
    }
    if budget == 0 {
        return false;
    }
    let best_gain = balls.iter().map(|b| (b & uncovered).count_ones()).max().unwrap_or(0);
    if (best_gain as usize) * budget < uncovered.count_ones() as usize {
        return false;
    }
    let mut pivot = 0;
    let mut fewest = usize::MAX;
    let mut rest = uncovered;
    while rest != 0 {
        let i = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        let options = balls.iter().filter(|b| *b >> i & 1 == 1).count();
        if options < fewest {
            fewest = options;
            pivot = i;
        }
    }
    for (c, ball) in balls.iter().enumerate() {
        if ball >> pivot & 1 == 1 {
            chosen.push(c);
            if search(balls, all, covered | ball, budget - 1, chosen) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}
