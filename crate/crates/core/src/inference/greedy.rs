use rayon::prelude::*;

use crate::error::{NdppError, Result};
use crate::kernel::InferenceKernel;
use crate::matcore::{dot, Mat};

/// Selected gains at or below this stop greedy selection.
pub const DEGENERATE_GAIN: f64 = 1e-12;

const PAR_CHUNK: usize = 2048;

/// Incremental marginal-gain state for a kernel `L = B C Bᵀ`.
///
/// Holds the rank-one factors `pⱼ, qⱼ` with
/// `Σ pⱼᵀ qⱼ = B_Yᵀ (B_Y C B_Yᵀ)⁻¹ B_Y`, so that for every `i ∉ Y`,
/// `delta[i] = det(L_{Y∪{i}}) / det(L_Y)`.
#[derive(Clone, Debug)]
pub struct GreedyState<'a> {
    kernel: &'a InferenceKernel,
    bc: Mat,
    bct: Mat,
    chosen: Vec<usize>,
    in_y: Vec<bool>,
    p_rows: Vec<Vec<f64>>,
    q_rows: Vec<Vec<f64>>,
    delta: Vec<f64>,
    log_det: f64,
    sign: f64,
}

impl<'a> GreedyState<'a> {
    /// `Δᵢ = bᵢ C bᵢᵀ = Lᵢᵢ`, in `O(M r²)`.
    pub fn new(kernel: &'a InferenceKernel) -> Self {
        let b = kernel.btilde();
        let bc = b.matmul(kernel.ctilde());
        let bct = b.matmul_t(kernel.ctilde());
        let delta = (0..kernel.m()).map(|i| dot(bc.row(i), b.row(i))).collect();
        GreedyState {
            kernel,
            bc,
            bct,
            chosen: Vec::new(),
            in_y: vec![false; kernel.m()],
            p_rows: Vec::new(),
            q_rows: Vec::new(),
            delta,
            log_det: 0.0,
            sign: 1.0,
        }
    }

    pub fn kernel(&self) -> &InferenceKernel {
        self.kernel
    }

    pub fn chosen(&self) -> &[usize] {
        &self.chosen
    }

    pub fn contains(&self, i: usize) -> bool {
        self.in_y[i]
    }

    pub fn p_rows(&self) -> &[Vec<f64>] {
        &self.p_rows
    }

    pub fn q_rows(&self) -> &[Vec<f64>] {
        &self.q_rows
    }

    /// Current gains. Entries for chosen items are stale.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// `log |det(L_Y)|`, accumulated from the selected gains.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Sign of `det(L_Y)`.
    pub fn det_sign(&self) -> f64 {
        self.sign
    }

    /// `Σ pⱼᵀ qⱼ` as an `r × r` matrix.
    pub fn pq_sum(&self) -> Mat {
        let r = self.kernel.r();
        let mut out = Mat::zeros(r, r);
        for (p, q) in self.p_rows.iter().zip(&self.q_rows) {
            for a in 0..r {
                for (o, &qb) in out.row_mut(a).iter_mut().zip(q) {
                    *o += p[a] * qb;
                }
            }
        }
        out
    }

    /// Unchosen item with the largest gain among `candidates`, ties going to
    /// the smallest index.
    pub fn argmax(&self, candidates: impl IntoIterator<Item = usize>) -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in candidates {
            if self.in_y[i] {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) if self.delta[i] > self.delta[b] || (self.delta[i] == self.delta[b] && i < b) => Some(i),
                keep => keep,
            };
        }
        best
    }

    pub fn argmax_all(&self) -> Option<usize> {
        self.argmax(0..self.kernel.m())
    }

    /// Adds `a` to `Y` and updates every unchosen gain in `O(M r + r|Y|)`.
    /// The caller is responsible for rejecting a (near-)zero `Δ_a`.
    pub fn push(&mut self, a: usize) {
        assert!(!self.in_y[a], "item {a} already chosen");
        let r = self.kernel.r();
        let da = self.delta[a];
        let ba = self.kernel.btilde().row(a);
        let bct_a = self.bct.row(a);
        let bc_a = self.bc.row(a);

        // p = (b_a − b_a Cᵀ Qᵀ P) / Δ_a,  q = b_a − b_a C Pᵀ Q
        let mut p = ba.to_vec();
        let mut q = ba.to_vec();
        for (pj, qj) in self.p_rows.iter().zip(&self.q_rows) {
            let wp = dot(bct_a, qj);
            let wq = dot(bc_a, pj);
            for t in 0..r {
                p[t] -= wp * pj[t];
                q[t] -= wq * qj[t];
            }
        }
        p.iter_mut().for_each(|x| *x /= da);

        self.log_det += da.abs().ln();
        if da < 0.0 {
            self.sign = -self.sign;
        }
        self.in_y[a] = true;
        self.chosen.push(a);

        let (bc, bct, in_y) = (&self.bc, &self.bct, &self.in_y);
        self.delta.par_chunks_mut(PAR_CHUNK).enumerate().for_each(|(c, chunk)| {
            for (off, d) in chunk.iter_mut().enumerate() {
                let i = c * PAR_CHUNK + off;
                if !in_y[i] {
                    *d -= dot(bc.row(i), &p) * dot(bct.row(i), &q);
                }
            }
        });
        self.p_rows.push(p);
        self.q_rows.push(q);
    }
}

/// Algorithm tag carried by [`MapResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Greedy,
    StochasticGreedy,
    Mcmc,
    LocalSearch,
    Exact,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Greedy, Algorithm::StochasticGreedy, Algorithm::Mcmc, Algorithm::LocalSearch, Algorithm::Exact];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::StochasticGreedy => "sgreedy",
            Algorithm::Mcmc => "mcmc",
            Algorithm::LocalSearch => "local",
            Algorithm::Exact => "exact",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = NdppError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| NdppError::InvalidArgument(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapResult {
    /// Selected items, in selection order for the greedy variants.
    pub items: Vec<usize>,
    pub log_det: f64,
    pub wall_ms: f64,
    pub algorithm: Algorithm,
}

pub(crate) fn check_k(kernel: &InferenceKernel, k: usize) -> Result<()> {
    if k == 0 || k > kernel.m() {
        return Err(NdppError::InvalidArgument(format!("k={k} must be in 1..={}", kernel.m())));
    }
    Ok(())
}

/// Runs greedy selection to size `k`, drawing each step's candidates from
/// `candidates` (all unchosen items for plain greedy).
pub(crate) fn run_greedy<'a>(
    kernel: &'a InferenceKernel,
    k: usize,
    mut candidates: impl FnMut(&GreedyState<'a>) -> Vec<usize>,
) -> Result<GreedyState<'a>> {
    check_k(kernel, k)?;
    let mut state = GreedyState::new(kernel);
    while state.chosen().len() < k {
        let a = state.argmax(candidates(&state)).expect("k <= M leaves a candidate");
        if state.delta()[a] <= DEGENERATE_GAIN {
            return Err(NdppError::DegenerateGain { selected: state.chosen().to_vec(), log_det: state.log_det() });
        }
        state.push(a);
    }
    Ok(state)
}

/// Greedy MAP in `O(M r² + M r k)`.
pub fn greedy_map(kernel: &InferenceKernel, k: usize) -> Result<MapResult> {
    let start = std::time::Instant::now();
    let state = run_greedy(kernel, k, |_| (0..kernel.m()).collect())?;
    Ok(MapResult {
        items: state.chosen().to_vec(),
        log_det: state.log_det(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        algorithm: Algorithm::Greedy,
    })
}

/// Gains `det(L_{Y∪{i}}) / det(L_Y)` for every `i ∉ Y`, i.e. the diagonal
/// of the kernel conditioned on `Y`. Entries for items in `Y` are zero.
pub fn condition_singletons(kernel: &InferenceKernel, y: &[usize]) -> Result<Vec<f64>> {
    let mut state = GreedyState::new(kernel);
    for &a in y {
        if a >= kernel.m() {
            return Err(NdppError::InvalidArgument(format!("item {a} >= M={}", kernel.m())));
        }
        if state.contains(a) {
            return Err(NdppError::InvalidArgument(format!("item {a} repeated")));
        }
        if state.delta()[a].abs() <= DEGENERATE_GAIN {
            return Err(NdppError::DegenerateConditioning(a));
        }
        state.push(a);
    }
    let mut delta = state.delta;
    for &a in y {
        delta[a] = 0.0;
    }
    Ok(delta)
}
