//! Factorization of the endorsement matrix as `X ≈ U B Mᵀ`.
//!
//! Three modes share one solver:
//!
//! * `Bsmf`: `B` is the given belief mixture and stays fixed.
//! * `Nmf`: `B` is the identity (plain two-factor NMF).
//! * `Nmtf`: `B̃` is learned alongside `U` and `M`.
//!
//! The objective is
//! `‖X − U B Mᵀ‖²_F + λ1(‖U‖²_F + ‖M‖²_F) + λ2(‖U‖₁ + ‖M‖₁)`, minimized by
//! projected gradient steps. Factors are floored at `eps_clip` after every
//! step, so they stay strictly positive and the L1 term has gradient
//! `λ2 · 1`.

use rand::distributions::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefMixture;
use crate::error::{Error, Result};
use crate::linalg::{clip_floor_in_place, dot, frobenius_sq, l1_norm, spmm, spmm_t, DenseMatrix, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Bsmf,
    Nmf,
    Nmtf,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bsmf" => Ok(Mode::Bsmf),
            "nmf" => Ok(Mode::Nmf),
            "nmtf" => Ok(Mode::Nmtf),
            _ => Err(Error::Argument(format!("unknown mode `{s}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Bsmf => "bsmf",
            Mode::Nmf => "nmf",
            Mode::Nmtf => "nmtf",
        })
    }
}

/// Step rule for the descent updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "eta")]
pub enum StepSize {
    /// `U ← U − η ∇_U` with one constant `η`.
    Constant(f64),
    /// Elementwise steps `η_U = ½ U / (U BMᵀMBᵀ + λ1 U)` (and likewise for
    /// `M`), which turn the descent step into a multiplicative update.
    Multiplicative,
}

impl std::str::FromStr for StepSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("mult") || s.eq_ignore_ascii_case("multiplicative") {
            return Ok(StepSize::Multiplicative);
        }
        s.parse::<f64>()
            .map(StepSize::Constant)
            .map_err(|_| Error::Argument(format!("step size `{s}` is neither a number nor `mult`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub k: usize,
    pub mode: Mode,
    pub lambda1: f64,
    pub lambda2: f64,
    pub step: StepSize,
    pub eps_clip: f64,
    /// RBF width used by the similarity interpolation.
    pub eps_rbf: f64,
    /// Interpolated endorsements below this are dropped.
    pub cutoff: f64,
    pub max_iters: usize,
    /// Relative loss change that counts as converged.
    pub tol: f64,
    pub seed: u64,
}

impl FitConfig {
    pub const DEFAULT_LAMBDA1: f64 = 0.1;
    pub const DEFAULT_LAMBDA2: f64 = 0.1;
    pub const DEFAULT_ETA: f64 = 1e-3;
    pub const DEFAULT_EPS_CLIP: f64 = 1e-8;
    /// With ten observed claims per source, unrelated claims at distance
    /// √2 add up to a full endorsement once ε drops much below this.
    pub const DEFAULT_EPS_RBF: f64 = 1.4;
    pub const DEFAULT_MAX_ITERS: usize = 300;
    pub const DEFAULT_TOL: f64 = 1e-6;

    pub fn new(k: usize, mode: Mode) -> Self {
        Self {
            k,
            mode,
            lambda1: Self::DEFAULT_LAMBDA1,
            lambda2: Self::DEFAULT_LAMBDA2,
            step: StepSize::Constant(Self::DEFAULT_ETA),
            eps_clip: Self::DEFAULT_EPS_CLIP,
            eps_rbf: Self::DEFAULT_EPS_RBF,
            cutoff: crate::similarity::RbfParams::DEFAULT_CUTOFF,
            max_iters: Self::DEFAULT_MAX_ITERS,
            tol: Self::DEFAULT_TOL,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let arg = |msg: String| Err(Error::Argument(msg));
        if self.k == 0 {
            return arg("k must be at least 1".into());
        }
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return arg(format!("lambda1 must be >= 0, got {}", self.lambda1));
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return arg(format!("lambda2 must be >= 0, got {}", self.lambda2));
        }
        match self.step {
            StepSize::Constant(eta) if !(eta > 0.0 && eta.is_finite()) => {
                return arg(format!("step size must be positive, got {eta}"));
            }
            StepSize::Multiplicative if self.lambda2 != 0.0 => {
                return arg("multiplicative steps require lambda2 = 0".into());
            }
            _ => {}
        }
        if !(self.eps_clip > 0.0 && self.eps_clip.is_finite()) {
            return arg(format!("eps_clip must be positive, got {}", self.eps_clip));
        }
        if !(self.tol > 0.0) {
            return arg(format!("tol must be positive, got {}", self.tol));
        }
        crate::similarity::RbfParams::new(self.eps_rbf, self.cutoff)?;
        Ok(())
    }
}

/// `U` (sources × K), `M` (claims × K) and, in NMTF mode, the learned `B̃`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorPair {
    pub u: DenseMatrix,
    pub m: DenseMatrix,
    pub b_tilde: Option<DenseMatrix>,
}

impl FactorPair {
    /// Uniform `(0, 1)` initialization, drawn `U` first, then `M`, then `B̃`.
    pub fn random(n_sources: usize, n_claims: usize, k: usize, with_b_tilde: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |r, c| DenseMatrix::from_fn(r, c, |_, _| Open01.sample(&mut rng));
        let u = draw(n_sources, k);
        let m = draw(n_claims, k);
        let b_tilde = with_b_tilde.then(|| draw(k, k));
        Self { u, m, b_tilde }
    }

    pub fn k(&self) -> usize {
        self.u.n_cols()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub factors: FactorPair,
    pub loss_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
    pub config: FitConfig,
}

/// The mixture matrix the objective actually uses in the configured mode.
pub fn effective_mixture(f: &FactorPair, b: &BeliefMixture, cfg: &FitConfig) -> Result<DenseMatrix> {
    let k = f.k();
    let mix = match cfg.mode {
        Mode::Bsmf => {
            if b.k() != k {
                return Err(Error::shape("mixture", format!("B is {0}x{0}, factors have K = {k}", b.k())));
            }
            b.to_matrix()
        }
        Mode::Nmf => DenseMatrix::identity(k),
        Mode::Nmtf => f.b_tilde.clone().ok_or(Error::Mode { expected: "factors with B̃ for nmtf" })?,
    };
    if mix.shape() != (k, k) {
        return Err(Error::shape("mixture", format!("mixture {:?} for K = {k}", mix.shape())));
    }
    Ok(mix)
}

fn check_shapes(x: &DenseMatrix, f: &FactorPair) -> Result<()> {
    let k = f.u.n_cols();
    if f.m.n_cols() != k {
        return Err(Error::shape("factors", format!("U has K = {k}, M has K = {}", f.m.n_cols())));
    }
    if f.u.n_rows() != x.n_rows() || f.m.n_rows() != x.n_cols() {
        return Err(Error::shape(
            "factors",
            format!("X is {:?}, U is {:?}, M is {:?}", x.shape(), f.u.shape(), f.m.shape()),
        ));
    }
    Ok(())
}

/// `‖X − Q Mᵀ‖²_F` with `Q = U B`, without materializing the reconstruction.
fn residual_sq(x: &DenseMatrix, q: &DenseMatrix, m: &DenseMatrix) -> f64 {
    let mut total = 0.0;
    for i in 0..x.n_rows() {
        let qi = q.row(i);
        let mut row_total = 0.0;
        for (j, &xij) in x.row(i).iter().enumerate() {
            let r = xij - dot(qi, m.row(j));
            row_total += r * r;
        }
        total += row_total;
    }
    total
}

fn objective(x: &DenseMatrix, u: &DenseMatrix, mix: &DenseMatrix, m: &DenseMatrix, cfg: &FitConfig) -> Result<f64> {
    let q = u.matmul(mix)?;
    let mut j = residual_sq(x, &q, m);
    if cfg.lambda1 != 0.0 {
        j += cfg.lambda1 * (frobenius_sq(u) + frobenius_sq(m));
    }
    if cfg.lambda2 != 0.0 {
        j += cfg.lambda2 * (l1_norm(u) + l1_norm(m));
    }
    Ok(j)
}

/// Same value as [`objective`] from K×K products only:
/// `‖X‖² − 2⟨UᵀXM, B⟩ + ⟨BᵀUᵀUB, MᵀM⟩` plus the regularizers.
#[allow(clippy::too_many_arguments)]
fn expanded_objective(
    x_sq: f64,
    utxm: &DenseMatrix,
    utu: &DenseMatrix,
    mtm: &DenseMatrix,
    mix: &DenseMatrix,
    u: &DenseMatrix,
    m: &DenseMatrix,
    cfg: &FitConfig,
) -> Result<f64> {
    let cross: f64 = utxm.as_slice().iter().zip(mix.as_slice()).map(|(a, b)| a * b).sum();
    let gram = mix.t_matmul(&utu.matmul(mix)?)?;
    let quad: f64 = gram.as_slice().iter().zip(mtm.as_slice()).map(|(a, b)| a * b).sum();
    let mut j = (x_sq - 2.0 * cross + quad).max(0.0);
    if cfg.lambda1 != 0.0 {
        j += cfg.lambda1 * (utu.trace() + mtm.trace());
    }
    if cfg.lambda2 != 0.0 {
        j += cfg.lambda2 * (l1_norm(u) + l1_norm(m));
    }
    Ok(j)
}

pub fn loss(x: &DenseMatrix, f: &FactorPair, b: &BeliefMixture, cfg: &FitConfig) -> Result<f64> {
    check_shapes(x, f)?;
    let mix = effective_mixture(f, b, cfg)?;
    objective(x, &f.u, &mix, &f.m, cfg)
}

/// `2λ1 A + λ2` added in place to a data gradient.
fn add_regularizer_grad(g: &mut DenseMatrix, a: &DenseMatrix, cfg: &FitConfig) {
    for (gv, &av) in g.as_mut_slice().iter_mut().zip(a.as_slice()) {
        *gv += 2.0 * cfg.lambda1 * av + cfg.lambda2;
    }
}

/// Data part of `∇_U` split into `(X M Bᵀ, U (M Bᵀ)ᵀ(M Bᵀ))`.
fn u_terms(x: &DenseMatrix, u: &DenseMatrix, mix: &DenseMatrix, m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let p = m.matmul_t(mix)?; // M Bᵀ
    let xp = x.matmul(&p)?;
    let upp = u.matmul(&p.t_matmul(&p)?)?;
    Ok((xp, upp))
}

/// Data part of `∇_M` split into `(Xᵀ U B, M (U B)ᵀ(U B))`.
fn m_terms(x: &DenseMatrix, u: &DenseMatrix, mix: &DenseMatrix, m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let q = u.matmul(mix)?; // U B
    let xq = x.t_matmul(&q)?;
    let mqq = m.matmul(&q.t_matmul(&q)?)?;
    Ok((xq, mqq))
}

/// Data part of `∇_B̃` split into `(Uᵀ X M, UᵀU B̃ MᵀM)`.
fn b_terms(x: &DenseMatrix, u: &DenseMatrix, bt: &DenseMatrix, m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let uxm = u.t_matmul(&x.matmul(m)?)?;
    let utu_b_mtm = u.t_matmul(u)?.matmul(bt)?.matmul(&m.t_matmul(m)?)?;
    Ok((uxm, utu_b_mtm))
}

fn combine(attract: &DenseMatrix, repel: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(attract.n_rows(), attract.n_cols(), |i, j| -2.0 * attract.get(i, j) + 2.0 * repel.get(i, j))
}

/// `∇_U = −2 X M Bᵀ + 2 U B MᵀM Bᵀ + 2λ1 U + λ2 · 1`.
pub fn grad_u(x: &DenseMatrix, f: &FactorPair, b: &BeliefMixture, cfg: &FitConfig) -> Result<DenseMatrix> {
    check_shapes(x, f)?;
    let mix = effective_mixture(f, b, cfg)?;
    let (xp, upp) = u_terms(x, &f.u, &mix, &f.m)?;
    let mut g = combine(&xp, &upp);
    add_regularizer_grad(&mut g, &f.u, cfg);
    Ok(g)
}

/// `∇_M = −2 Xᵀ U B + 2 M Bᵀ UᵀU B + 2λ1 M + λ2 · 1`.
pub fn grad_m(x: &DenseMatrix, f: &FactorPair, b: &BeliefMixture, cfg: &FitConfig) -> Result<DenseMatrix> {
    check_shapes(x, f)?;
    let mix = effective_mixture(f, b, cfg)?;
    let (xq, mqq) = m_terms(x, &f.u, &mix, &f.m)?;
    let mut g = combine(&xq, &mqq);
    add_regularizer_grad(&mut g, &f.m, cfg);
    Ok(g)
}

/// `∇_B̃ = −2 Uᵀ X M + 2 UᵀU B̃ MᵀM`; NMTF mode only.
pub fn grad_b_tilde(x: &DenseMatrix, f: &FactorPair, cfg: &FitConfig) -> Result<DenseMatrix> {
    if cfg.mode != Mode::Nmtf {
        return Err(Error::Mode { expected: "nmtf" });
    }
    check_shapes(x, f)?;
    let bt = f.b_tilde.as_ref().ok_or(Error::Mode { expected: "factors with B̃ for nmtf" })?;
    let (uxm, rep) = b_terms(x, &f.u, bt, &f.m)?;
    Ok(combine(&uxm, &rep))
}

fn half_ratio(num: &DenseMatrix, den: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(num.n_rows(), num.n_cols(), |i, j| 0.5 * num.get(i, j) / den.get(i, j).max(f64::MIN_POSITIVE))
}

/// Elementwise adaptive step sizes `(½ U / U BMᵀMBᵀ, ½ M / M BᵀUᵀUB)`.
///
/// Taking `U ← U − step_u ∘ ∇_U` with no regularization is exactly the
/// multiplicative rule `U ← U ∘ (X MBᵀ) / (U BMᵀMBᵀ)`.
pub fn multiplicative_steps(
    f: &FactorPair,
    b: &BeliefMixture,
    x: &DenseMatrix,
    cfg: &FitConfig,
) -> Result<(DenseMatrix, DenseMatrix)> {
    check_shapes(x, f)?;
    let mix = effective_mixture(f, b, cfg)?;
    let p = f.m.matmul_t(&mix)?;
    let q = f.u.matmul(&mix)?;
    let den_u = with_l2(f.u.matmul(&p.t_matmul(&p)?)?, &f.u, cfg.lambda1);
    let den_m = with_l2(f.m.matmul(&q.t_matmul(&q)?)?, &f.m, cfg.lambda1);
    Ok((half_ratio(&f.u, &den_u), half_ratio(&f.m, &den_m)))
}

fn with_l2(mut den: DenseMatrix, a: &DenseMatrix, lambda1: f64) -> DenseMatrix {
    if lambda1 != 0.0 {
        for (d, &v) in den.as_mut_slice().iter_mut().zip(a.as_slice()) {
            *d += lambda1 * v;
        }
    }
    den
}

/// One descent step on `a` given the split data gradient terms.
fn descend(a: &mut DenseMatrix, attract: &DenseMatrix, repel: &DenseMatrix, cfg: &FitConfig, regularized: bool) {
    let (l1, l2) = if regularized { (cfg.lambda1, cfg.lambda2) } else { (0.0, 0.0) };
    for ((v, &at), &rp) in a.as_mut_slice().iter_mut().zip(attract.as_slice()).zip(repel.as_slice()) {
        let grad = -2.0 * at + 2.0 * rp + 2.0 * l1 * *v + l2;
        let eta = match cfg.step {
            StepSize::Constant(eta) => eta,
            StepSize::Multiplicative => 0.5 * *v / (rp + l1 * *v).max(f64::MIN_POSITIVE),
        };
        *v -= eta * grad;
    }
    clip_floor_in_place(a, cfg.eps_clip);
}

/// Random initialization followed by [`fit_from`].
pub fn fit(x: &DenseMatrix, b: &BeliefMixture, cfg: &FitConfig) -> Result<FitResult> {
    let init = FactorPair::random(x.n_rows(), x.n_cols(), cfg.k, cfg.mode == Mode::Nmtf, cfg.seed);
    fit_from(x, b, cfg, init)
}

/// Runs the alternating update loop from the given factors.
///
/// Each iteration updates `U` from the current `M`, then `M` from the new
/// `U`, then (NMTF) `B̃` from both, flooring each at `eps_clip`. The loss is
/// recorded after every iteration; the loop stops once the relative change
/// drops below `tol` or after `max_iters` iterations.
pub fn fit_from(x: &DenseMatrix, b: &BeliefMixture, cfg: &FitConfig, init: FactorPair) -> Result<FitResult> {
    cfg.validate()?;
    if let Some(v) = x.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Input(format!("endorsement matrix entry {v} outside [0, 1]")));
    }
    if init.k() != cfg.k {
        return Err(Error::shape("fit", format!("initial factors have K = {}, config K = {}", init.k(), cfg.k)));
    }
    if cfg.mode == Mode::Bsmf && b.k() != cfg.k {
        return Err(Error::shape("fit", format!("belief mixture has k = {}, config K = {}", b.k(), cfg.k)));
    }
    if (cfg.mode == Mode::Nmtf) != init.b_tilde.is_some() {
        return Err(Error::Mode { expected: "B̃ present exactly in nmtf" });
    }
    check_shapes(x, &init)?;

    let FactorPair { mut u, mut m, mut b_tilde } = init;
    let fixed_mix = match cfg.mode {
        Mode::Bsmf => Some(b.to_matrix()),
        Mode::Nmf => Some(DenseMatrix::identity(cfg.k)),
        Mode::Nmtf => None,
    };

    let x_sq = frobenius_sq(x);
    let xs = SparseMatrix::from_dense(x)?;
    let mut prev = {
        let mix = fixed_mix.as_ref().or(b_tilde.as_ref()).expect("mixture available");
        objective(x, &u, mix, &m, cfg)?
    };
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut converged = false;

    // Only X·M and Xᵀ·U touch the data matrix; everything else is K-wide.
    for iter in 1..=cfg.max_iters {
        let xtu = {
            let mix = fixed_mix.as_ref().or(b_tilde.as_ref()).expect("mixture available");
            let p = m.matmul_t(mix)?;
            let xp = spmm(&xs, &m)?.matmul_t(mix)?;
            let upp = u.matmul(&p.t_matmul(&p)?)?;
            descend(&mut u, &xp, &upp, cfg, true);

            let q = u.matmul(mix)?;
            let xtu = spmm_t(&xs, &u)?;
            let xq = xtu.matmul(mix)?;
            let mqq = m.matmul(&q.t_matmul(&q)?)?;
            descend(&mut m, &xq, &mqq, cfg, true);
            xtu
        };
        let utxm = xtu.t_matmul(&m)?;
        let utu = u.t_matmul(&u)?;
        let mtm = m.t_matmul(&m)?;
        if let Some(bt) = b_tilde.as_mut() {
            let rep = utu.matmul(bt)?.matmul(&mtm)?;
            descend(bt, &utxm, &rep, cfg, false);
        }

        let mix = fixed_mix.as_ref().or(b_tilde.as_ref()).expect("mixture available");
        let mut j = expanded_objective(x_sq, &utxm, &utu, &mtm, mix, &u, &m, cfg)?;
        if j.is_finite() && j < 1e-8 * x_sq {
            // the expansion loses all precision near an exact fit
            j = objective(x, &u, mix, &m, cfg)?;
        }
        if !j.is_finite() || !u.is_finite() || !m.is_finite() {
            return Err(Error::Divergence { iteration: iter, loss: j });
        }
        trace.push(j);
        if (prev - j).abs() / prev.max(1e-12) < cfg.tol {
            converged = true;
            break;
        }
        prev = j;
    }

    Ok(FitResult {
        iterations_run: trace.len(),
        loss_trace: trace,
        converged,
        factors: FactorPair { u, m, b_tilde },
        config: cfg.clone(),
    })
}

/// Dense reconstruction `U B Mᵀ`.
pub fn reconstruct(f: &FactorPair, mix: &DenseMatrix) -> Result<DenseMatrix> {
    f.u.matmul(mix)?.matmul_t(&f.m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(mode: Mode, k: usize, l1: f64, l2: f64) -> FitConfig {
        FitConfig { lambda1: l1, lambda2: l2, ..FitConfig::new(k, mode) }
    }

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn loss_examples() {
        let star = BeliefMixture::star(3).unwrap();
        let f = FactorPair { u: m(&[&[1.0, 0.0, 0.0]]), m: m(&[&[1.0, 0.0, 0.0]]), b_tilde: None };
        let x = m(&[&[1.0]]);
        let j = loss(&x, &f, &star, &cfg(Mode::Bsmf, 3, 0.1, 0.1)).unwrap();
        assert!((j - 0.4).abs() < 1e-15, "{j}");
        assert_eq!(loss(&x, &f, &star, &cfg(Mode::Bsmf, 3, 0.0, 0.0)).unwrap(), 0.0);

        let zero = FactorPair { u: DenseMatrix::zeros(2, 3), m: DenseMatrix::zeros(2, 3), b_tilde: None };
        let x = m(&[&[0.5, 1.0], &[0.0, 0.25]]);
        let j = loss(&x, &zero, &star, &cfg(Mode::Bsmf, 3, 0.0, 0.0)).unwrap();
        assert_eq!(j, frobenius_sq(&x));
    }

    #[test]
    fn identity_mixture_matches_nmf_loss() {
        let f = FactorPair::random(5, 7, 3, false, 3);
        let x = DenseMatrix::from_fn(5, 7, |i, j| ((i * 7 + j) % 5) as f64 / 4.0);
        let id = BeliefMixture::identity(3).unwrap();
        let star = BeliefMixture::star(3).unwrap();
        let a = loss(&x, &f, &id, &cfg(Mode::Bsmf, 3, 0.1, 0.1)).unwrap();
        let b = loss(&x, &f, &star, &cfg(Mode::Nmf, 3, 0.1, 0.1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gradients_vanish_at_exact_factorization() {
        let star = BeliefMixture::star(3).unwrap();
        let f = FactorPair {
            u: m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]),
            m: m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]),
            b_tilde: None,
        };
        let c = cfg(Mode::Bsmf, 3, 0.0, 0.0);
        let x = reconstruct(&f, &star.to_matrix()).unwrap();
        assert_eq!(grad_u(&x, &f, &star, &c).unwrap(), DenseMatrix::zeros(3, 3));
        assert_eq!(grad_m(&x, &f, &star, &c).unwrap(), DenseMatrix::zeros(3, 3));

        let nm = FactorPair { b_tilde: Some(m(&[&[0.5, 0.2, 0.0], &[0.1, 1.0, 0.0], &[0.0, 0.3, 0.7]])), ..f };
        let c = cfg(Mode::Nmtf, 3, 0.0, 0.0);
        let x = reconstruct(&nm, nm.b_tilde.as_ref().unwrap()).unwrap();
        assert!(grad_b_tilde(&x, &nm, &c).unwrap().max_abs_diff(&DenseMatrix::zeros(3, 3)) < 1e-15);
    }

    #[test]
    fn l1_only_gradient_is_constant() {
        let star = BeliefMixture::star(3).unwrap();
        let f = FactorPair { u: DenseMatrix::filled(2, 3, 0.4), m: DenseMatrix::zeros(4, 3), b_tilde: None };
        let g = grad_u(&DenseMatrix::zeros(2, 4), &f, &star, &cfg(Mode::Bsmf, 3, 0.0, 0.3)).unwrap();
        assert_eq!(g, DenseMatrix::filled(2, 3, 0.3));
    }

    #[test]
    fn scalar_b_tilde_gradient() {
        let c = cfg(Mode::Nmtf, 1, 0.0, 0.0);
        let x = m(&[&[2.0]]);
        let at = |b: f64| {
            let f = FactorPair { u: m(&[&[1.0]]), m: m(&[&[1.0]]), b_tilde: Some(m(&[&[b]])) };
            grad_b_tilde(&x, &f, &c).unwrap().get(0, 0)
        };
        assert_eq!(at(2.0), 0.0);
        assert_eq!(at(0.5), -2.0 * 2.0 + 2.0 * 0.5);
    }

    #[test]
    fn b_tilde_gradient_requires_nmtf() {
        let f = FactorPair::random(2, 2, 2, true, 0);
        let err = grad_b_tilde(&DenseMatrix::zeros(2, 2), &f, &cfg(Mode::Bsmf, 2, 0.0, 0.0));
        assert!(matches!(err, Err(Error::Mode { .. })));
    }

    #[test]
    fn scalar_multiplicative_step() {
        let f = FactorPair { u: m(&[&[1.0]]), m: m(&[&[2.0]]), b_tilde: None };
        let b = BeliefMixture::identity(1).unwrap();
        let c = FitConfig { step: StepSize::Multiplicative, ..cfg(Mode::Bsmf, 1, 0.0, 0.0) };
        let (su, sm) = multiplicative_steps(&f, &b, &m(&[&[4.0]]), &c).unwrap();
        assert_eq!(su.get(0, 0), 0.125);
        assert_eq!(sm.get(0, 0), 0.5 * 2.0 / (2.0 * 1.0));
    }

    #[test]
    fn multiplicative_fixed_point() {
        let star = BeliefMixture::star(3).unwrap();
        let f = FactorPair::random(4, 6, 3, false, 11);
        let x = reconstruct(&f, &star.to_matrix()).unwrap();
        let c = FitConfig { step: StepSize::Multiplicative, ..cfg(Mode::Bsmf, 3, 0.0, 0.0) };
        let (su, _) = multiplicative_steps(&f, &star, &x, &c).unwrap();
        let g = grad_u(&x, &f, &star, &c).unwrap();
        let next = f.u.sub(&su.hadamard(&g).unwrap()).unwrap();
        assert!(next.max_abs_diff(&f.u) < 1e-12);
    }

    #[test]
    fn multiplicative_step_matches_lee_seung_rule() {
        let star = BeliefMixture::star(3).unwrap();
        let f = FactorPair::random(5, 8, 3, false, 5);
        let x = DenseMatrix::from_fn(5, 8, |i, j| ((3 * i + j) % 4) as f64 / 3.0);
        let c = FitConfig { step: StepSize::Multiplicative, ..cfg(Mode::Bsmf, 3, 0.0, 0.0) };
        let (su, _) = multiplicative_steps(&f, &star, &x, &c).unwrap();
        let g = grad_u(&x, &f, &star, &c).unwrap();
        let stepped = f.u.sub(&su.hadamard(&g).unwrap()).unwrap();
        let p = f.m.matmul_t(&star.to_matrix()).unwrap();
        let num = x.matmul(&p).unwrap();
        let den = f.u.matmul(&p.t_matmul(&p).unwrap()).unwrap();
        let rule = DenseMatrix::from_fn(5, 3, |i, q| f.u.get(i, q) * num.get(i, q) / den.get(i, q));
        assert!(stepped.max_abs_diff(&rule) < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::new(3, Mode::Bsmf).validate().is_ok());
        let bad = FitConfig { step: StepSize::Multiplicative, ..FitConfig::new(3, Mode::Bsmf) };
        assert!(bad.validate().is_err());
        assert!(FitConfig { k: 0, ..FitConfig::new(3, Mode::Bsmf) }.validate().is_err());
        assert!(FitConfig { step: StepSize::Constant(-1.0), ..FitConfig::new(3, Mode::Bsmf) }.validate().is_err());
        assert_eq!("mult".parse::<StepSize>().unwrap(), StepSize::Multiplicative);
        assert_eq!("0.01".parse::<StepSize>().unwrap(), StepSize::Constant(0.01));
        assert_eq!("NMTF".parse::<Mode>().unwrap(), Mode::Nmtf);
    }

    #[test]
    fn fit_rejects_out_of_range_input_and_k_mismatch() {
        let star = BeliefMixture::star(3).unwrap();
        let c = cfg(Mode::Bsmf, 3, 0.0, 0.0);
        assert!(fit(&m(&[&[1.5]]), &star, &c).is_err());
        assert!(fit(&m(&[&[1.0]]), &BeliefMixture::star(4).unwrap(), &c).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let star = BeliefMixture::star(3).unwrap();
        let x = DenseMatrix::filled(6, 6, 1.0);
        let c = FitConfig { step: StepSize::Constant(1e200), max_iters: 50, ..cfg(Mode::Bsmf, 3, 0.0, 0.0) };
        match fit(&x, &star, &c) {
            Err(Error::Divergence { iteration, .. }) => assert!(iteration >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn factors_stay_above_floor() {
        let star = BeliefMixture::star(3).unwrap();
        let x = DenseMatrix::from_fn(6, 9, |i, j| if (i + j) % 3 == 0 { 1.0 } else { 0.0 });
        for step in [StepSize::Constant(1e-2), StepSize::Multiplicative] {
            let l2 = if step == StepSize::Multiplicative { 0.0 } else { 0.1 };
            let c = FitConfig { step, max_iters: 40, ..cfg(Mode::Bsmf, 3, 0.1, l2) };
            let r = fit(&x, &star, &c).unwrap();
            assert!(r.factors.u.min() >= c.eps_clip && r.factors.m.min() >= c.eps_clip);
            assert!(r.iterations_run <= 40);
        }
    }

    #[test]
    fn trace_matches_direct_loss() {
        let star = BeliefMixture::star(3).unwrap();
        let x = DenseMatrix::from_fn(7, 11, |i, j| ((i * 5 + j * 3) % 7) as f64 / 6.0);
        for (mode, l1, l2, step) in [
            (Mode::Bsmf, 0.1, 0.1, StepSize::Constant(1e-2)),
            (Mode::Nmf, 0.0, 0.0, StepSize::Multiplicative),
            (Mode::Nmtf, 0.2, 0.0, StepSize::Multiplicative),
        ] {
            for iters in [1, 2, 7] {
                let c = FitConfig { step, max_iters: iters, tol: 1e-300, ..cfg(mode, 3, l1, l2) };
                let r = fit(&x, &star, &c).unwrap();
                let direct = loss(&x, &r.factors, &star, &c).unwrap();
                let last = *r.loss_trace.last().unwrap();
                assert!((last - direct).abs() <= 1e-9 * direct.max(1.0), "{mode}: {last} vs {direct}");
            }
        }
    }

    #[test]
    fn fit_is_reproducible() {
        let star = BeliefMixture::star(3).unwrap();
        let x = DenseMatrix::from_fn(8, 12, |i, j| ((i * j) % 3) as f64 / 2.0);
        let c = FitConfig { step: StepSize::Multiplicative, seed: 9, ..cfg(Mode::Nmtf, 3, 0.0, 0.0) };
        let a = fit(&x, &star, &c).unwrap();
        let b = fit(&x, &star, &c).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
        assert_eq!(a.factors, b.factors);
    }
}
