//! Encoding a logical qudit into the `j₂ = n/2 − 1` sector.
//!
//! With `Q_{λλ′} = Σ_{m₂} |j₂,m₂;λ⟩⟨j₂,m₂;λ′|` a logical state `ρ` becomes
//! `(1/d) Σ ρ_{λλ′} Q_{λλ′}` and a POVM element `Π` becomes `Σ Π_{λλ′} Q_{λλ′}`.
//! The `λ` factor carries the state (signal); the `m₂` factor is held
//! maximally mixed (idler).
//!
//! All maps go through the frame `K` whose columns are the `d²` sector kets in
//! λ-major order, so that `Σ X_{λλ′} Q_{λλ′} = K (X ⊗ I_d) K†`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coupling::{CoupledBasis, CouplingMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, real, root_of_unity, CMatrix, Complex64, ONE};
use crate::spinsys::{self, SpinRegister};

/// Eigenvalues down to `−PSD_TOL` count as non-negative.
pub const PSD_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-12;
pub const POVM_SUM_TOL: f64 = 1e-10;
/// Tolerance for the build-time algebra checks.
pub const ALGEBRA_TOL: f64 = 1e-10;
/// Largest out-of-sector entry tolerated when decoding.
pub const SECTOR_TOL: f64 = 1e-9;

fn check_square(m: &CMatrix, what: &str) -> Result<usize> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::Validation(format!(
            "{what} must be a non-empty square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m.rows())
}

fn check_hermitian(m: &CMatrix, what: &str) -> Result<()> {
    let r = m.hermiticity_residual();
    if r > linalg::HERMITICITY_TOL {
        return Err(Error::Validation(format!(
            "{what} is not hermitian: max |A − A†| = {r:e}"
        )));
    }
    Ok(())
}

fn check_psd(m: &CMatrix, what: &str) -> Result<()> {
    let eig = linalg::hermitian_eig(m)?;
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min < -PSD_TOL {
        return Err(Error::Validation(format!(
            "{what} is not positive semidefinite: eigenvalue {min:e} < −{PSD_TOL:e}"
        )));
    }
    Ok(())
}

/// A `d × d` density matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CMatrix", into = "CMatrix")]
pub struct QuditState {
    rho: CMatrix,
}

impl TryFrom<CMatrix> for QuditState {
    type Error = Error;
    fn try_from(m: CMatrix) -> Result<Self> {
        QuditState::new(m)
    }
}

impl From<QuditState> for CMatrix {
    fn from(s: QuditState) -> CMatrix {
        s.rho
    }
}

impl QuditState {
    pub fn new(rho: CMatrix) -> Result<Self> {
        check_square(&rho, "density matrix")?;
        check_hermitian(&rho, "density matrix")?;
        let tr = rho.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::Validation(format!(
                "density matrix trace is {} + {}i, expected 1",
                tr.re, tr.im
            )));
        }
        check_psd(&rho, "density matrix")?;
        Ok(QuditState { rho })
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
    pub fn pure(psi: &CMatrix) -> Result<Self> {
        if !psi.is_column() || psi.rows() == 0 {
            return Err(Error::Validation("pure state needs a non-empty column vector".into()));
        }
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::Validation("pure state vector is zero".into()));
        }
        QuditState::new(CMatrix::projector(&psi.scale_real(1.0 / norm)))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        QuditState {
            rho: CMatrix::identity(d).scale_real(1.0 / d as f64),
        }
    }

    pub fn d(&self) -> usize {
        self.rho.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.rho, &self.rho)
            .map(|z| z.re)
            .unwrap_or(f64::NAN)
    }
}

/// A `d`-outcome-agnostic POVM on a `d`-dimensional system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CMatrix>", into = "Vec<CMatrix>")]
pub struct QuditPovm {
    elements: Vec<CMatrix>,
}

impl TryFrom<Vec<CMatrix>> for QuditPovm {
    type Error = Error;
    fn try_from(v: Vec<CMatrix>) -> Result<Self> {
        QuditPovm::new(v)
    }
}

impl From<QuditPovm> for Vec<CMatrix> {
    fn from(p: QuditPovm) -> Vec<CMatrix> {
        p.elements
    }
}

impl QuditPovm {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::Validation("POVM has no elements".into()))?;
        let d = check_square(first, "POVM element 1")?;
        let mut sum = CMatrix::zeros(d, d);
        for (k, e) in elements.iter().enumerate() {
            let what = format!("POVM element {}", k + 1);
            if check_square(e, &what)? != d {
                return Err(Error::Validation(format!(
                    "{what} is {}x{}, expected {d}x{d}",
                    e.rows(),
                    e.cols()
                )));
            }
            check_hermitian(e, &what)?;
            check_psd(e, &what)?;
            sum += e;
        }
        let dev = sum.max_diff(&CMatrix::identity(d));
        if dev > POVM_SUM_TOL {
            return Err(Error::Validation(format!(
                "POVM elements do not sum to the identity: max deviation {dev:e}"
            )));
        }
        Ok(QuditPovm { elements })
    }

    pub fn trivial(d: usize) -> Self {
        QuditPovm {
            elements: vec![CMatrix::identity(d)],
        }
    }

    pub fn d(&self) -> usize {
        self.elements[0].rows()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    /// `Tr(ρ Π_k)` for each element.
    pub fn probabilities(&self, rho: &QuditState) -> Result<Vec<f64>> {
        self.elements
            .iter()
            .map(|e| Ok(linalg::trace_product(rho.matrix(), e)?.re))
            .collect()
    }
}

/// Residuals of the matrix-unit algebra, measured at build time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlgebraResiduals {
    /// `max |⟨a|b⟩ − δ_ab|` over sector kets; closure of the `Q` products follows from it.
    pub closure: f64,
    /// `max |Tr Q_{λλ′} − d δ_{λλ′}|`.
    pub trace: f64,
    /// Largest deviation of `J₊, J₋, Jz` on the sector kets from the spin-`j₂` action on `m₂` alone.
    pub commutation: f64,
}

/// The `d²` operators `Q_{λλ′}`, held through the frame of sector kets.
#[derive(Clone, Debug)]
pub struct QOperatorSet {
    basis: CoupledBasis,
    frame: CMatrix,
    residuals: AlgebraResiduals,
}

/// Builds the `Q` set and verifies its algebra.
pub fn build_q_set(basis: &CoupledBasis) -> Result<QOperatorSet> {
    let d = basis.d();
    let dim = basis.register().dim();
    let mut frame = CMatrix::zeros(dim, d * d);
    for (col, (_, _, v)) in basis.iter().enumerate() {
        for (row, &z) in v.data().iter().enumerate() {
            frame[(row, col)] = z;
        }
    }
    let gram = &frame.dagger() * &frame;
    let closure = gram.max_diff(&CMatrix::identity(d * d));
    let mut trace = 0.0f64;
    for a in 0..d {
        for b in 0..d {
            let t: Complex64 = (0..d).map(|k| gram[(b * d + k, a * d + k)]).sum();
            let target = if a == b { d as f64 } else { 0.0 };
            trace = trace.max((t - real(target)).norm());
        }
    }
    let commutation = spin_action_residual(basis)?;
    let residuals = AlgebraResiduals {
        closure,
        trace,
        commutation,
    };
    for (name, r) in [
        ("Q_ab·Q_ce = δ_bc·Q_ae", closure),
        ("Tr Q_ab = d·δ_ab", trace),
        ("[Q_ab, J] = 0", commutation),
    ] {
        if !(r <= ALGEBRA_TOL) {
            return Err(Error::consistency(name, r));
        }
    }
    Ok(QOperatorSet {
        basis: basis.clone(),
        frame,
        residuals,
    })
}

/// `J₊|m;λ⟩ = c₊|m+1;λ⟩`, `J₋|m;λ⟩ = c₋|m−1;λ⟩`, `Jz|m;λ⟩ = m|m;λ⟩`, checked
/// ket by ket. This is equivalent to every `Q_{λλ′}` commuting with `J`.
fn spin_action_residual(basis: &CoupledBasis) -> Result<f64> {
    let reg = basis.register();
    let j = basis.j2().value();
    let m2s = basis.m2_values();
    let d = basis.d();
    let mut worst = 0.0f64;
    for lambda in 1..=d {
        let kets = basis.channel(lambda);
        for (k, v) in kets.iter().enumerate() {
            let m = m2s[k].value();
            let jz = spinsys::apply_jz(reg, v)?;
            worst = worst.max((&jz - &v.scale_real(m)).max_abs());

            let up = spinsys::apply_j_plus(reg, v)?;
            let up_expect = if k == 0 {
                CMatrix::zeros(v.rows(), 1)
            } else {
                kets[k - 1].scale_real((j * (j + 1.0) - m * (m + 1.0)).sqrt())
            };
            worst = worst.max((&up - &up_expect).max_abs());

            let down = spinsys::apply_j_minus(reg, v)?;
            let down_expect = if k + 1 == d {
                CMatrix::zeros(v.rows(), 1)
            } else {
                kets[k + 1].scale_real((j * (j + 1.0) - m * (m - 1.0)).sqrt())
            };
            worst = worst.max((&down - &down_expect).max_abs());
        }
    }
    Ok(worst)
}

impl QOperatorSet {
    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn d(&self) -> usize {
        self.basis.d()
    }

    pub fn register(&self) -> SpinRegister {
        self.basis.register()
    }

    pub fn basis(&self) -> &CoupledBasis {
        &self.basis
    }

    pub fn coupling(&self) -> &CouplingMatrix {
        self.basis.coupling()
    }

    pub fn residuals(&self) -> AlgebraResiduals {
        self.residuals
    }

    /// `2^n × d²` matrix of sector kets, column `(λ−1)·d + (j₂ − m₂)`.
    pub fn frame(&self) -> &CMatrix {
        &self.frame
    }

    /// Dense `Q_{λλ′}`, both labels 1-based.
    pub fn q(&self, lambda: usize, lambda_p: usize) -> Result<CMatrix> {
        let d = self.d();
        if lambda == 0 || lambda > d || lambda_p == 0 || lambda_p > d {
            return Err(Error::InvalidArgument(format!(
                "Q_({lambda},{lambda_p}) outside 1..={d}"
            )));
        }
        let mut unit = CMatrix::zeros(d, d);
        unit[(lambda - 1, lambda_p - 1)] = ONE;
        self.embed(&unit)
    }

    /// All `d²` operators, indexed `[λ−1][λ′−1]`.
    pub fn all(&self) -> Result<Vec<Vec<CMatrix>>> {
        let d = self.d();
        (1..=d)
            .map(|a| (1..=d).map(|b| self.q(a, b)).collect())
            .collect()
    }

    /// `Σ_λ Q_λλ`, the projector onto the sector.
    pub fn sector_projector(&self) -> CMatrix {
        &self.frame * &self.frame.dagger()
    }

    /// `Σ X_{λλ′} Q_{λλ′} = K (X ⊗ I_d) K†`.
    pub fn embed(&self, x: &CMatrix) -> Result<CMatrix> {
        let d = self.d();
        if x.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "logical operator is {}x{}, expected {d}x{d}",
                x.rows(),
                x.cols()
            )));
        }
        let lifted = linalg::kron(x, &CMatrix::identity(d))?;
        Ok(&(&self.frame * &lifted) * &self.frame.dagger())
    }

    /// `K† A K`, the `d² × d²` sector block of `A`.
    pub fn compress(&self, a: &CMatrix) -> Result<CMatrix> {
        let dim = self.register().dim();
        if a.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, expected {dim}x{dim}",
                a.rows(),
                a.cols()
            )));
        }
        Ok(&(&self.frame.dagger() * a) * &self.frame)
    }

    /// `Σ_{m₂} ⟨m₂;λ|A|m₂;λ′⟩ = Tr(Q_{λ′λ} A)`.
    pub fn reduce(&self, a: &CMatrix) -> Result<CMatrix> {
        let c = self.compress(a)?;
        let d = self.d();
        let mut out = CMatrix::zeros(d, d);
        for l in 0..d {
            for lp in 0..d {
                out[(l, lp)] = (0..d).map(|k| c[(l * d + k, lp * d + k)]).sum();
            }
        }
        Ok(out)
    }

    /// `‖A − I_{j₂} A I_{j₂}‖_max`.
    pub fn sector_support_residual(&self, a: &CMatrix) -> Result<f64> {
        let c = self.compress(a)?;
        let inside = &(&self.frame * &c) * &self.frame.dagger();
        Ok(a.max_diff(&inside))
    }

    /// `Tr A − Tr(I_{j₂} A)`, the weight of a state outside the sector.
    pub fn leakage(&self, a: &CMatrix) -> Result<f64> {
        let c = self.compress(a)?;
        Ok(a.trace().re - c.trace().re)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    State,
    PovmElement,
}

/// A `2^n`-dimensional operator produced by the encoder.
#[derive(Clone, Debug)]
pub struct EncodedOperator {
    pub n: usize,
    pub d: usize,
    pub coupling: CouplingMatrix,
    pub kind: OperatorKind,
    pub payload: CMatrix,
}

#[derive(Serialize)]
struct EncodedMetadata<'a> {
    n: usize,
    d: usize,
    coupling: &'a CouplingMatrix,
    kind: OperatorKind,
}

impl Serialize for EncodedOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("EncodedOperator", 2)?;
        st.serialize_field(
            "metadata",
            &EncodedMetadata {
                n: self.n,
                d: self.d,
                coupling: &self.coupling,
                kind: self.kind,
            },
        )?;
        st.serialize_field("payload", &self.payload)?;
        st.end()
    }
}

impl EncodedOperator {
    fn check_compatible(&self, qs: &QOperatorSet) -> Result<()> {
        if self.n != qs.n() || self.d != qs.d() {
            return Err(Error::DimensionMismatch(format!(
                "operator encoded for n = {}, d = {} decoded with n = {}, d = {}",
                self.n,
                self.d,
                qs.n(),
                qs.d()
            )));
        }
        if !self.coupling.same_as(qs.coupling()) {
            return Err(Error::Validation(
                "operator was encoded with a different coupling matrix".into(),
            ));
        }
        Ok(())
    }

    /// Replaces the payload, e.g. after applying a channel.
    pub fn with_payload(&self, payload: CMatrix) -> Result<Self> {
        if payload.shape() != self.payload.shape() {
            return Err(Error::DimensionMismatch("payload shape changed".into()));
        }
        Ok(EncodedOperator {
            payload,
            ..self.clone()
        })
    }
}

fn encoded(qs: &QOperatorSet, kind: OperatorKind, payload: CMatrix) -> EncodedOperator {
    EncodedOperator {
        n: qs.n(),
        d: qs.d(),
        coupling: qs.coupling().clone(),
        kind,
        payload,
    }
}

/// `ρ ↦ (1/d) Σ ρ_{λλ′} Q_{λλ′}`.
pub fn encode_state(qs: &QOperatorSet, rho: &QuditState) -> Result<EncodedOperator> {
    if rho.d() != qs.d() {
        return Err(Error::DimensionMismatch(format!(
            "state has d = {}, sector has d = {}",
            rho.d(),
            qs.d()
        )));
    }
    let payload = qs.embed(rho.matrix())?.scale_real(1.0 / qs.d() as f64);
    Ok(encoded(qs, OperatorKind::State, payload))
}

/// `Π_k ↦ Σ (Π_k)_{λλ′} Q_{λλ′}`; the images sum to `I_{j₂}`.
pub fn encode_povm(qs: &QOperatorSet, povm: &QuditPovm) -> Result<Vec<EncodedOperator>> {
    if povm.d() != qs.d() {
        return Err(Error::DimensionMismatch(format!(
            "POVM has d = {}, sector has d = {}",
            povm.d(),
            qs.d()
        )));
    }
    povm.elements()
        .iter()
        .map(|e| Ok(encoded(qs, OperatorKind::PovmElement, qs.embed(e)?)))
        .collect()
}

/// Inverse of the encoding for either kind: `Tr(Q_{λ′λ} X)`, divided by `d`
/// for POVM elements.
pub fn decode_operator(qs: &QOperatorSet, enc: &EncodedOperator) -> Result<CMatrix> {
    enc.check_compatible(qs)?;
    let r = qs.reduce(&enc.payload)?;
    Ok(match enc.kind {
        OperatorKind::State => r,
        OperatorKind::PovmElement => r.scale_real(1.0 / qs.d() as f64),
    })
}

/// `ρ_{λλ′} = Tr(Q_{λ′λ} · payload)`, after checking that the payload lives on the sector.
pub fn decode_state(qs: &QOperatorSet, enc: &EncodedOperator) -> Result<QuditState> {
    enc.check_compatible(qs)?;
    if enc.kind != OperatorKind::State {
        return Err(Error::InvalidArgument("decode_state needs a state payload".into()));
    }
    let outside = qs.sector_support_residual(&enc.payload)?;
    if outside > SECTOR_TOL {
        return Err(Error::Validation(format!(
            "payload is not supported on the j2 sector: ‖P − I·P·I‖_max = {outside:e}"
        )));
    }
    QuditState::new(qs.reduce(&enc.payload)?)
}

/// `Tr(ρ^enc Π^enc)`.
pub fn encoded_probability(state: &EncodedOperator, element: &EncodedOperator) -> Result<f64> {
    Ok(linalg::trace_product(&state.payload, &element.payload)?.re)
}

/// Von Neumann entropy in bits. Eigenvalues in `[−PSD_TOL, 0)` count as zero.
pub fn von_neumann_entropy(m: &CMatrix) -> Result<f64> {
    let eig = linalg::hermitian_eig(m)?;
    let mut s = 0.0;
    for &p in &eig.values {
        if p < -PSD_TOL {
            return Err(Error::Validation(format!(
                "entropy of a matrix with eigenvalue {p:e}"
            )));
        }
        if p > 0.0 {
            s -= p * p.log2();
        }
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntropyReport {
    pub s_logical: f64,
    pub s_encoded: f64,
    pub log2_d: f64,
    /// `S(ρ^enc) − S(ρ) − log₂ d`, zero in exact arithmetic.
    pub excess: f64,
}

pub fn encoded_entropy_check(rho: &QuditState, enc: &EncodedOperator) -> Result<EntropyReport> {
    let s_logical = von_neumann_entropy(rho.matrix())?;
    let s_encoded = von_neumann_entropy(&enc.payload)?;
    let log2_d = (rho.d() as f64).log2();
    Ok(EntropyReport {
        s_logical,
        s_encoded,
        log2_d,
        excess: s_encoded - s_logical - log2_d,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HwsResiduals {
    /// `‖U^d − I‖` on the sector.
    pub u_period: f64,
    pub v_period: f64,
    /// `max_{j,k} ‖U^j V^k − ω^{−jk} V^k U^j‖` on the sector.
    pub commutation: f64,
    /// Largest entry of `U` or `V` outside the sector.
    pub off_sector: f64,
}

/// The Heisenberg-Weyl pair `U = Σ ω_d^λ Q_λλ`, `V = Σ Q_{λ,λ+1} + Q_{d1}`.
#[derive(Clone, Debug)]
pub struct HwsPair {
    pub d: usize,
    pub u: CMatrix,
    pub v: CMatrix,
    pub residuals: HwsResiduals,
}

impl HwsPair {
    pub fn omega(&self) -> Complex64 {
        root_of_unity(self.d, 1)
    }
}

/// Logical clock `diag(ω, ω², …, ω^d)`.
pub fn clock(d: usize) -> CMatrix {
    CMatrix::diag(&(1..=d).map(|l| root_of_unity(d, l as i64)).collect::<Vec<_>>())
}

/// Logical shift with ones at `(λ, λ+1)` and `(d, 1)`.
pub fn shift(d: usize) -> CMatrix {
    let mut v = CMatrix::zeros(d, d);
    for l in 0..d {
        v[(l, (l + 1) % d)] = ONE;
    }
    v
}

/// Residuals of the HWS relations for `U`, `V` restricted by the frame of `qs`.
pub fn hws_residuals(qs: &QOperatorSet, u: &CMatrix, v: &CMatrix) -> Result<HwsResiduals> {
    let d = qs.d();
    let us = qs.compress(u)?;
    let vs = qs.compress(v)?;
    let id = CMatrix::identity(d * d);
    let u_period = us.pow(d as u32).max_diff(&id);
    let v_period = vs.pow(d as u32).max_diff(&id);
    let mut commutation = 0.0f64;
    let mut upow = id.clone();
    for j in 1..=d {
        upow = &upow * &us;
        let mut vpow = id.clone();
        for k in 1..=d {
            vpow = &vpow * &vs;
            let lhs = &upow * &vpow;
            let rhs = (&vpow * &upow).scale(root_of_unity(d, -((j * k) as i64)));
            commutation = commutation.max(lhs.max_diff(&rhs));
        }
    }
    let off_u = qs.sector_support_residual(u)?;
    let off_v = qs.sector_support_residual(v)?;
    Ok(HwsResiduals {
        u_period,
        v_period,
        commutation,
        off_sector: off_u.max(off_v),
    })
}

pub fn build_hws(qs: &QOperatorSet) -> Result<HwsPair> {
    let d = qs.d();
    let u = qs.embed(&clock(d))?;
    let v = qs.embed(&shift(d))?;
    let residuals = hws_residuals(qs, &u, &v)?;
    for (name, r) in [
        ("U^d = I on the sector", residuals.u_period),
        ("V^d = I on the sector", residuals.v_period),
        ("U^j V^k = ω^(−jk) V^k U^j", residuals.commutation),
        ("U, V supported on the sector", residuals.off_sector),
    ] {
        if !(r <= ALGEBRA_TOL) {
            return Err(Error::consistency(name, r));
        }
    }
    Ok(HwsPair { d, u, v, residuals })
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let data = (0..rows * cols)
        .map(|_| c64(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    CMatrix::from_vec(rows, cols, data).expect("finite gaussian samples")
}

/// Full-rank random density matrix `G G†/Tr(G G†)` with Ginibre `G`.
pub fn random_density<R: Rng + ?Sized>(d: usize, rng: &mut R) -> QuditState {
    let g = gaussian_matrix(d, d, rng);
    let gg = &g * &g.dagger();
    let tr = gg.trace().re;
    let mut rho = gg.scale_real(1.0 / tr);
    symmetrize(&mut rho);
    QuditState { rho }
}

/// Uniformly random pure state.
pub fn random_pure<R: Rng + ?Sized>(d: usize, rng: &mut R) -> QuditState {
    let psi = gaussian_matrix(d, 1, rng);
    let psi = psi.scale_real(1.0 / psi.norm());
    QuditState {
        rho: CMatrix::projector(&psi),
    }
}

/// Random POVM `Π_k = S^{-1/2} G_k S^{-1/2}` from positive `G_k = A_k A_k†`, `S = Σ G_k`.
pub fn random_povm<R: Rng + ?Sized>(d: usize, outcomes: usize, rng: &mut R) -> Result<QuditPovm> {
    if outcomes == 0 {
        return Err(Error::InvalidArgument("a POVM needs at least one outcome".into()));
    }
    let parts: Vec<CMatrix> = (0..outcomes)
        .map(|_| {
            let a = gaussian_matrix(d, d, rng);
            &a * &a.dagger()
        })
        .collect();
    let mut total = CMatrix::zeros(d, d);
    for p in &parts {
        total += p;
    }
    symmetrize(&mut total);
    let eig = linalg::hermitian_eig(&total)?;
    if eig.values[0] <= 0.0 {
        return Err(Error::Numerical("singular POVM normalization".into()));
    }
    let inv_sqrt = eig.map_spectrum(|x| real(1.0 / x.sqrt()));
    let elements = parts
        .iter()
        .map(|p| {
            let mut e = &(&inv_sqrt * p) * &inv_sqrt;
            symmetrize(&mut e);
            e
        })
        .collect();
    QuditPovm::new(elements)
}

fn symmetrize(m: &mut CMatrix) {
    let h = (&*m + &m.dagger()).scale_real(0.5);
    *m = h;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::build_coupled_basis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qset(n: usize) -> QOperatorSet {
        let reg = SpinRegister::new(n).unwrap();
        let basis = build_coupled_basis(reg, &CouplingMatrix::fourier(n).unwrap()).unwrap();
        build_q_set(&basis).unwrap()
    }

    #[test]
    fn q_set_examples() {
        let qs = qset(3);
        let q12 = qs.q(1, 2).unwrap();
        let q21 = qs.q(2, 1).unwrap();
        let q11 = qs.q(1, 1).unwrap();
        assert!((&q12 * &q21).max_diff(&q11) < 1e-12);
        assert!(q12.dagger().max_diff(&q21) < 1e-15);
        let p = &q11 + &qs.q(2, 2).unwrap();
        assert!((p.trace() - real(4.0)).norm() < 1e-12);
        assert!(p.max_diff(&qs.sector_projector()) < 1e-14);
        let r = qs.residuals();
        assert!(r.closure < 1e-12 && r.trace < 1e-12 && r.commutation < 1e-12);
        assert!(qs.q(0, 1).is_err() && qs.q(1, 3).is_err());
    }

    #[test]
    fn q_set_scales_to_large_registers() {
        let qs = qset(10);
        assert_eq!(qs.d(), 9);
        assert!(qs.residuals().commutation < 1e-10);
    }

    #[test]
    fn maximally_mixed_maps_to_normalized_projector() {
        for n in 3..=5 {
            let qs = qset(n);
            let d = qs.d();
            let enc = encode_state(&qs, &QuditState::maximally_mixed(d)).unwrap();
            let target = qs.sector_projector().scale_real(1.0 / (d * d) as f64);
            assert!(enc.payload.max_diff(&target) < 1e-14);
            let back = decode_state(&qs, &enc).unwrap();
            assert!(back.matrix().max_diff(QuditState::maximally_mixed(d).matrix()) < 1e-14);
        }
    }

    #[test]
    fn pure_state_payload_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let qs = qset(4);
        let enc = encode_state(&qs, &random_pure(3, &mut rng)).unwrap();
        let eig = linalg::hermitian_eig(&enc.payload).unwrap();
        let groups = eig.grouped(1e-9);
        assert_eq!(groups.len(), 2);
        assert!(groups[0].0.abs() < 1e-12 && groups[0].1 == 13);
        assert!((groups[1].0 - 1.0 / 3.0).abs() < 1e-12 && groups[1].1 == 3);
    }

    #[test]
    fn round_trip_and_born_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 3..=6 {
            let qs = qset(n);
            let d = qs.d();
            let rho = random_density(d, &mut rng);
            let povm = random_povm(d, d + 1, &mut rng).unwrap();
            let enc = encode_state(&qs, &rho).unwrap();
            assert!(decode_state(&qs, &enc).unwrap().matrix().max_diff(rho.matrix()) < 1e-10);
            let els = encode_povm(&qs, &povm).unwrap();
            let mut sum = CMatrix::zeros(qs.register().dim(), qs.register().dim());
            let probs = povm.probabilities(&rho).unwrap();
            for (k, e) in els.iter().enumerate() {
                assert!((encoded_probability(&enc, e).unwrap() - probs[k]).abs() < 1e-10);
                assert!(decode_operator(&qs, e).unwrap().max_diff(&povm.elements()[k]) < 1e-10);
                sum += &e.payload;
            }
            assert!(sum.max_diff(&qs.sector_projector()) < 1e-10);
        }
    }

    #[test]
    fn trivial_povm_maps_to_sector_projector() {
        let qs = qset(4);
        let els = encode_povm(&qs, &QuditPovm::trivial(3)).unwrap();
        assert_eq!(els.len(), 1);
        assert!(els[0].payload.max_diff(&qs.sector_projector()) < 1e-14);
    }

    #[test]
    fn entropy_examples() {
        let qs = qset(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pure = random_pure(2, &mut rng);
        let r = encoded_entropy_check(&pure, &encode_state(&qs, &pure).unwrap()).unwrap();
        assert!((r.s_encoded - 1.0).abs() < 1e-8);
        let mixed = QuditState::maximally_mixed(2);
        let r = encoded_entropy_check(&mixed, &encode_state(&qs, &mixed).unwrap()).unwrap();
        assert!((r.s_encoded - 2.0).abs() < 1e-8);
        assert!(von_neumann_entropy(&CMatrix::real_diag(&[1.1, -0.1])).is_err());
    }

    #[test]
    fn hws_examples() {
        for n in 3..=6 {
            let qs = qset(n);
            let hws = build_hws(&qs).unwrap();
            assert!(hws.residuals.u_period < 1e-10);
            assert!(hws.residuals.commutation < 1e-10);
        }
        let qs = qset(3);
        let hws = build_hws(&qs).unwrap();
        let sz = &qs.q(1, 1).unwrap() - &qs.q(2, 2).unwrap();
        let sx = &qs.q(1, 2).unwrap() + &qs.q(2, 1).unwrap();
        assert!(hws.u.max_diff(&(-&sz)) < 1e-12);
        assert!(hws.v.max_diff(&sx) < 1e-12);
    }

    #[test]
    fn validation_errors() {
        let err = QuditState::new(CMatrix::real_diag(&[1.2, -0.2])).unwrap_err().to_string();
        assert!(err.contains("positive semidefinite") && err.contains("-2"), "{err}");
        let err = QuditState::new(CMatrix::real_diag(&[0.5, 0.6])).unwrap_err().to_string();
        assert!(err.contains("trace"), "{err}");
        let err = QuditPovm::new(vec![CMatrix::real_diag(&[1.0, 0.5])]).unwrap_err().to_string();
        assert!(err.contains("sum"), "{err}");
        let qs = qset(3);
        assert!(encode_state(&qs, &QuditState::maximally_mixed(3)).is_err());
    }

    #[test]
    fn decode_rejects_foreign_payloads() {
        let qs = qset(3);
        let mut enc = encode_state(&qs, &QuditState::maximally_mixed(2)).unwrap();
        let other = {
            let reg = SpinRegister::new(3).unwrap();
            let c = CouplingMatrix::conjugate_fourier(3).unwrap();
            build_q_set(&build_coupled_basis(reg, &c).unwrap()).unwrap()
        };
        assert!(decode_state(&other, &enc).is_err());
        enc.payload = CMatrix::identity(8).scale_real(1.0 / 8.0);
        let err = decode_state(&qs, &enc).unwrap_err().to_string();
        assert!(err.contains("sector"), "{err}");
    }

    #[test]
    fn json_shapes() {
        let qs = qset(3);
        let enc = encode_state(&qs, &QuditState::maximally_mixed(2)).unwrap();
        let v = serde_json::to_value(&enc).unwrap();
        assert_eq!(v["metadata"]["coupling"], "fourier");
        assert_eq!(v["metadata"]["kind"], "state");
        assert_eq!(v["payload"]["rows"], 8);
        let s: QuditState = serde_json::from_value(serde_json::to_value(QuditState::maximally_mixed(2)).unwrap()).unwrap();
        assert_eq!(s.d(), 2);
        let bad = serde_json::json!({"rows": 1, "cols": 1, "data": [[2.0, 0.0]]});
        assert!(serde_json::from_value::<QuditState>(bad).is_err());
    }
}
