//! Symmetric coupling of `n` spin-1/2 constituents.
//!
//! The `j₂ = n/2 − 1` sector has multiplicity `n − 1`. Its kets are
//!
//! ```text
//! |j₂, m₂; λ⟩ = sqrt((j₂+m₂)! / ((2j₂)! (j₂−m₂)!)) · Ω₋(λ) J₋^{j₂−m₂} |0…0⟩
//! Ω₋(λ)       = Σ_ℓ U_{λℓ} σ₋^{(ℓ)}
//! ```
//!
//! where `U` is an `n × n` unitary whose last row is `n^{-1/2}(1, …, 1)`; rows
//! `1..n−1` label the degenerate copies. The default `U` is the discrete
//! Fourier matrix `U_{λℓ} = n^{-1/2} ω_n^{λℓ}`, `ω_n = e^{2πi/n}`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, real, root_of_unity, CMatrix, Complex64, ONE, ZERO};
use crate::spinsys::{self, SiteOp, SpinRegister};

/// A half-integer stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt(i64);

impl HalfInt {
    pub const fn from_twice(twice: i64) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(k: i64) -> Self {
        HalfInt(2 * k)
    }

    pub const fn twice(self) -> i64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// Parses `"3/2"`, `"-1/2"` or `"2"`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("{s:?} is not an integer or half-integer"));
        match s.trim().split_once('/') {
            Some((num, "2")) => {
                let k: i64 = num.trim().parse().map_err(|_| bad())?;
                Ok(HalfInt(k))
            }
            Some(_) => Err(bad()),
            None => Ok(HalfInt(2 * s.trim().parse::<i64>().map_err(|_| bad())?)),
        }
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl Serialize for HalfInt {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        HalfInt::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn factorial(k: u64) -> Result<u128> {
    (1..=k as u128).try_fold(1u128, |acc, x| acc.checked_mul(x)).ok_or_else(|| {
        Error::InvalidArgument(format!("{k}! overflows exact integer arithmetic"))
    })
}

/// Allowed total angular momenta `n/2, n/2 − 1, …, (0 or 1/2)`.
pub fn index_set(n: usize) -> Vec<HalfInt> {
    (0..=n / 2).map(|k| HalfInt::from_twice((n - 2 * k) as i64)).collect()
}

/// Multiplicity `c_j = n!(2j+1) / ((n/2+j+1)!(n/2−j)!)`, in exact integer arithmetic.
pub fn multiplicity(n: usize, j: HalfInt) -> Result<u64> {
    let tj = j.twice();
    if tj < 0 || tj > n as i64 || (n as i64 - tj) % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "j = {j} is not in the index set for n = {n}"
        )));
    }
    let upper = (n as i64 + tj) / 2 + 1; // n/2 + j + 1
    let lower = (n as i64 - tj) / 2; // n/2 − j
    let num = factorial(n as u64)?
        .checked_mul((tj + 1) as u128)
        .ok_or_else(|| Error::InvalidArgument("multiplicity overflow".into()))?;
    let den = factorial(upper as u64)? * factorial(lower as u64)?;
    debug_assert_eq!(num % den, 0);
    Ok((num / den) as u64)
}

/// One irreducible sector in the decomposition of `(1/2)^{⊗n}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SectorSpec {
    #[serde(skip)]
    pub n: usize,
    pub j: HalfInt,
    pub multiplicity: u64,
    pub dimension: u64,
}

/// A census row: the formula multiplicity next to the count of `J²`
/// eigenvalues `j(j+1)` found by diagonalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CensusRow {
    #[serde(flatten)]
    pub spec: SectorSpec,
    /// Number of `J²` eigenvalues equal to `j(j+1)`; expected `multiplicity · dimension`.
    pub eigen_count: u64,
    pub agrees: bool,
}

/// Sector specs from the multiplicity formula alone.
pub fn sector_specs(n: usize) -> Result<Vec<SectorSpec>> {
    index_set(n)
        .into_iter()
        .map(|j| {
            Ok(SectorSpec {
                n,
                j,
                multiplicity: multiplicity(n, j)?,
                dimension: (j.twice() + 1) as u64,
            })
        })
        .collect()
}

/// Formula multiplicities alongside eigenvalue counts of `J²`, obtained by
/// diagonalizing `J²` within each `Jz` eigenspace. Never fails on disagreement;
/// see [`sector_census`] for the checked version.
pub fn census_table(reg: SpinRegister) -> Result<Vec<CensusRow>> {
    let n = reg.n();
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for ones in 0..=n {
        let (_, block) = spinsys::j_squared_block(reg, ones)?;
        let eig = linalg::hermitian_eig(&block)?;
        for (value, count) in eig.grouped(linalg::DEGENERACY_TOL) {
            // j(j+1) = value  ⇒  2j = sqrt(1 + 4·value) − 1
            let twice_j = ((1.0 + 4.0 * value).max(0.0).sqrt() - 1.0).round() as i64;
            let j = twice_j as f64 / 2.0;
            let residual = (j * (j + 1.0) - value).abs();
            if residual > linalg::DEGENERACY_TOL {
                return Err(Error::consistency(
                    format!("J² eigenvalue {value} is not of the form j(j+1)"),
                    residual,
                ));
            }
            *counts.entry(twice_j).or_default() += count as u64;
        }
    }
    let specs = sector_specs(n)?;
    let mut rows: Vec<CensusRow> = specs
        .into_iter()
        .map(|spec| {
            let eigen_count = counts.remove(&spec.j.twice()).unwrap_or(0);
            CensusRow {
                spec,
                eigen_count,
                agrees: eigen_count == spec.multiplicity * spec.dimension,
            }
        })
        .collect();
    // eigenvalues outside the index set
    for (twice_j, count) in counts {
        rows.push(CensusRow {
            spec: SectorSpec {
                n,
                j: HalfInt::from_twice(twice_j),
                multiplicity: 0,
                dimension: (twice_j + 1).max(0) as u64,
            },
            eigen_count: count,
            agrees: false,
        });
    }
    Ok(rows)
}

/// Sector list for `n` constituents, cross-checked against diagonalization.
pub fn sector_census(reg: SpinRegister) -> Result<Vec<SectorSpec>> {
    let rows = census_table(reg)?;
    if let Some(bad) = rows.iter().find(|r| !r.agrees) {
        return Err(Error::consistency(
            format!(
                "multiplicity of j = {} (formula {} × {}, diagonalization {})",
                bad.spec.j, bad.spec.multiplicity, bad.spec.dimension, bad.eigen_count
            ),
            (bad.eigen_count as f64 - (bad.spec.multiplicity * bad.spec.dimension) as f64).abs(),
        ));
    }
    let total: u64 = rows.iter().map(|r| r.spec.multiplicity * r.spec.dimension).sum();
    if total != reg.dim() as u64 {
        return Err(Error::consistency(
            format!("Σ c_j(2j+1) = {total} differs from 2^n = {}", reg.dim()),
            (total as f64 - reg.dim() as f64).abs(),
        ));
    }
    Ok(rows.into_iter().map(|r| r.spec).collect())
}

/// Tolerance for accepting a coupling matrix.
pub const COUPLING_TOL: f64 = 1e-12;

/// How a coupling matrix was specified.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplingKind {
    Fourier,
    Explicit,
}

/// The `n × n` unitary defining `Ω₋(λ) = Σ_ℓ U_{λℓ} σ₋^{(ℓ)}`. The last row is
/// fixed to `n^{-1/2}(1, …, 1)`; rows `1..n−1` define the `λ` channels.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    kind: CouplingKind,
    u: CMatrix,
}

impl CouplingMatrix {
    /// Discrete Fourier coupling `U_{λℓ} = n^{-1/2} e^{2πiλℓ/n}`.
    pub fn fourier(n: usize) -> Result<Self> {
        Self::fourier_with_sign(n, 1).map(|u| CouplingMatrix {
            kind: CouplingKind::Fourier,
            u,
        })
    }

    /// Fourier coupling with `ω_n` replaced by `ω_n^{-1}`, equivalent to the
    /// relabeling `λ → n − λ` of the default channels.
    pub fn conjugate_fourier(n: usize) -> Result<Self> {
        Self::fourier_with_sign(n, -1).map(|u| CouplingMatrix {
            kind: CouplingKind::Explicit,
            u,
        })
    }

    fn fourier_with_sign(n: usize, sign: i64) -> Result<CMatrix> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("coupling needs n ≥ 2, got {n}")));
        }
        let s = 1.0 / (n as f64).sqrt();
        let mut u = CMatrix::zeros(n, n);
        for lam in 1..=n {
            for l in 1..=n {
                u[(lam - 1, l - 1)] = root_of_unity(n, sign * (lam * l) as i64) * s;
            }
        }
        Ok(u)
    }

    /// Validates an explicit coupling matrix.
    pub fn from_matrix(u: CMatrix) -> Result<Self> {
        Self::from_matrix_with_tol(u, COUPLING_TOL)
    }

    pub fn from_matrix_with_tol(u: CMatrix, tol: f64) -> Result<Self> {
        if !u.is_square() || u.rows() < 2 {
            return Err(Error::Validation(format!(
                "coupling matrix must be square with n ≥ 2, got {}x{}",
                u.rows(),
                u.cols()
            )));
        }
        let n = u.rows();
        let unitarity = u.unitarity_residual();
        if unitarity > tol {
            return Err(Error::Validation(format!(
                "coupling matrix is not unitary: ‖U·U† − I‖_max = {unitarity:e} > {tol:e}"
            )));
        }
        let target = 1.0 / (n as f64).sqrt();
        let last_row = (0..n)
            .map(|l| (u[(n - 1, l)] - real(target)).norm())
            .fold(0.0, f64::max);
        if last_row > tol {
            return Err(Error::Validation(format!(
                "last row of the coupling matrix must equal n^(-1/2) = {target}: deviation {last_row:e} > {tol:e}"
            )));
        }
        Ok(CouplingMatrix {
            kind: CouplingKind::Explicit,
            u,
        })
    }

    pub fn n(&self) -> usize {
        self.u.rows()
    }

    pub fn kind(&self) -> CouplingKind {
        self.kind
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.u
    }

    /// `U_{λℓ}`, both 1-based.
    pub fn entry(&self, lambda: usize, l: usize) -> Complex64 {
        self.u[(lambda - 1, l - 1)]
    }

    /// Whether two couplings define the same kets.
    pub fn same_as(&self, other: &CouplingMatrix) -> bool {
        self.u.shape() == other.u.shape() && self.u.max_diff(&other.u) <= COUPLING_TOL
    }
}

impl Serialize for CouplingMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.kind {
            CouplingKind::Fourier => s.serialize_str("fourier"),
            CouplingKind::Explicit => self.u.serialize(s),
        }
    }
}

fn check_lambda(reg: SpinRegister, coupling: &CouplingMatrix, lambda: usize) -> Result<()> {
    if coupling.n() != reg.n() {
        return Err(Error::DimensionMismatch(format!(
            "coupling for n = {} used on an n = {} register",
            coupling.n(),
            reg.n()
        )));
    }
    if lambda == 0 || lambda > reg.n() {
        return Err(Error::InvalidArgument(format!(
            "λ = {lambda} outside 1..={}",
            reg.n()
        )));
    }
    Ok(())
}

/// `Ω₋(λ) = Σ_ℓ U_{λℓ} σ₋^{(ℓ)}` as a dense operator. `λ = n` gives `J₋/√n`.
pub fn omega_minus(reg: SpinRegister, coupling: &CouplingMatrix, lambda: usize) -> Result<CMatrix> {
    check_lambda(reg, coupling, lambda)?;
    let mut acc = CMatrix::zeros(reg.dim(), reg.dim());
    for l in 1..=reg.n() {
        acc.add_scaled(coupling.entry(lambda, l), &spinsys::sigma(reg, l, SiteOp::Minus)?);
    }
    Ok(acc)
}

/// `Ω₋(λ)·v` without forming the operator.
pub fn apply_omega_minus(
    reg: SpinRegister,
    coupling: &CouplingMatrix,
    lambda: usize,
    v: &CMatrix,
) -> Result<CMatrix> {
    check_lambda(reg, coupling, lambda)?;
    let mut acc = CMatrix::zeros(reg.dim(), 1);
    for l in 1..=reg.n() {
        let lowered = spinsys::apply_site(reg, l, SiteOp::Minus, v)?;
        acc.add_scaled(coupling.entry(lambda, l), &lowered);
    }
    Ok(acc)
}

/// Tolerance on the norm of each ket produced by the closed-form prefactor.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Orthonormal kets `|j₂, m₂; λ⟩` of the second-largest sector, plus the
/// maximal sector `|j₁, m₁⟩`.
#[derive(Clone, Debug)]
pub struct CoupledBasis {
    reg: SpinRegister,
    coupling: CouplingMatrix,
    /// `kets[λ−1][k]` holds `m₂ = j₂ − k`.
    kets: Vec<Vec<CMatrix>>,
    /// `top[k]` holds `m₁ = j₁ − k`.
    top: Vec<CMatrix>,
}

/// Builds the coupled basis. Kets are exactly the closed-form expression;
/// their norms are checked, not corrected.
pub fn build_coupled_basis(reg: SpinRegister, coupling: &CouplingMatrix) -> Result<CoupledBasis> {
    let n = reg.n();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "the coupled basis needs n ≥ 3 (so d ≥ 2), got n = {n}"
        )));
    }
    if coupling.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "coupling for n = {} used on an n = {n} register",
            coupling.n()
        )));
    }
    // J₋^k |0…0⟩ for k = 0..=n
    let mut ladder = vec![CMatrix::basis_ket(reg.dim(), 0)];
    for k in 0..n {
        let next = spinsys::apply_j_minus(reg, &ladder[k])?;
        ladder.push(next);
    }

    let d = n - 1;
    let two_j2 = (n - 2) as u64;
    let mut kets = Vec::with_capacity(d);
    for lambda in 1..=d {
        let mut row = Vec::with_capacity(d);
        for (k, lowered) in ladder.iter().take(d).enumerate() {
            // (j₂+m₂)! / ((2j₂)! (j₂−m₂)!) with j₂ − m₂ = k
            let num = factorial(two_j2 - k as u64)?;
            let den = factorial(two_j2)? * factorial(k as u64)?;
            let prefactor = (num as f64 / den as f64).sqrt();
            let ket = apply_omega_minus(reg, coupling, lambda, lowered)?.scale_real(prefactor);
            let norm = ket.norm();
            if (norm - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::consistency(
                    format!("norm of |j2, m2 = j2 − {k}; λ = {lambda}⟩"),
                    (norm - 1.0).abs(),
                ));
            }
            row.push(ket);
        }
        kets.push(row);
    }

    let top = ladder
        .into_iter()
        .map(|v| {
            let norm = v.norm();
            v.scale_real(1.0 / norm)
        })
        .collect();

    Ok(CoupledBasis {
        reg,
        coupling: coupling.clone(),
        kets,
        top,
    })
}

impl CoupledBasis {
    pub fn register(&self) -> SpinRegister {
        self.reg
    }

    pub fn n(&self) -> usize {
        self.reg.n()
    }

    /// Logical dimension `d = n − 1`.
    pub fn d(&self) -> usize {
        self.reg.n() - 1
    }

    /// `j₂ = n/2 − 1`.
    pub fn j2(&self) -> HalfInt {
        HalfInt::from_twice(self.reg.n() as i64 - 2)
    }

    pub fn coupling(&self) -> &CouplingMatrix {
        &self.coupling
    }

    /// `m₂ = j₂, j₂ − 1, …, −j₂`.
    pub fn m2_values(&self) -> Vec<HalfInt> {
        let tj = self.j2().twice();
        (0..self.d()).map(|k| HalfInt::from_twice(tj - 2 * k as i64)).collect()
    }

    /// `|j₂, m₂; λ⟩`.
    pub fn ket(&self, m2: HalfInt, lambda: usize) -> Result<&CMatrix> {
        let k = (self.j2().twice() - m2.twice()) / 2;
        if (self.j2().twice() - m2.twice()) % 2 != 0 || k < 0 || k as usize >= self.d() {
            return Err(Error::InvalidArgument(format!(
                "m2 = {m2} is not a projection of j2 = {}",
                self.j2()
            )));
        }
        if lambda == 0 || lambda > self.d() {
            return Err(Error::InvalidArgument(format!(
                "λ = {lambda} outside 1..={}",
                self.d()
            )));
        }
        Ok(&self.kets[lambda - 1][k as usize])
    }

    /// Kets for channel `λ`, ordered by descending `m₂`.
    pub fn channel(&self, lambda: usize) -> &[CMatrix] {
        &self.kets[lambda - 1]
    }

    /// All `d²` kets as `(m₂, λ, ket)`, λ-major.
    pub fn iter(&self) -> impl Iterator<Item = (HalfInt, usize, &CMatrix)> + '_ {
        let m2s = self.m2_values();
        self.kets.iter().enumerate().flat_map(move |(l, row)| {
            let m2s = m2s.clone();
            row.iter().enumerate().map(move |(k, v)| (m2s[k], l + 1, v))
        })
    }

    /// Maximal-sector kets `|j₁ = n/2, m₁⟩`, ordered by descending `m₁`.
    pub fn top_sector(&self) -> &[CMatrix] {
        &self.top
    }

    /// Projector `I_{j₂}` onto the second-largest sector.
    pub fn sector_projector(&self) -> CMatrix {
        let dim = self.reg.dim();
        let mut p = CMatrix::zeros(dim, dim);
        for (_, _, v) in self.iter() {
            p += &CMatrix::projector(v);
        }
        p
    }

    /// `max |⟨a|b⟩ − δ_ab|` over all pairs of sector kets.
    pub fn gram_residual(&self) -> f64 {
        let all: Vec<&CMatrix> = self.iter().map(|(_, _, v)| v).collect();
        let mut worst = 0.0f64;
        for (a, va) in all.iter().enumerate() {
            for (b, vb) in all.iter().enumerate().skip(a) {
                let target = if a == b { ONE } else { ZERO };
                worst = worst.max((va.inner(vb) - target).norm());
            }
        }
        worst
    }

    /// `(max ‖J²v − j₂(j₂+1)v‖, max ‖Jz v − m₂ v‖)` over the sector kets.
    pub fn sector_residuals(&self) -> Result<(f64, f64)> {
        let j = self.j2().value();
        let mut j2_res = 0.0f64;
        let mut jz_res = 0.0f64;
        for (m2, _, v) in self.iter() {
            let jsq = spinsys::apply_j_squared(self.reg, v)?;
            j2_res = j2_res.max((&jsq - &v.scale_real(j * (j + 1.0))).max_abs());
            let jz = spinsys::apply_jz(self.reg, v)?;
            jz_res = jz_res.max((&jz - &v.scale_real(m2.value())).max_abs());
        }
        Ok((j2_res, jz_res))
    }

    /// Overlaps `⟨m₂, λ | other: m₂′, λ′⟩` as a `d² × d²` matrix (λ-major ordering).
    pub fn overlap_with(&self, other: &CoupledBasis) -> Result<CMatrix> {
        if other.n() != self.n() {
            return Err(Error::DimensionMismatch("bases for different n".into()));
        }
        let a: Vec<&CMatrix> = self.iter().map(|(_, _, v)| v).collect();
        let b: Vec<&CMatrix> = other.iter().map(|(_, _, v)| v).collect();
        let size = a.len();
        let mut m = CMatrix::zeros(size, size);
        for (i, va) in a.iter().enumerate() {
            for (k, vb) in b.iter().enumerate() {
                m[(i, k)] = va.inner(vb);
            }
        }
        Ok(m)
    }
}

fn require_four(reg: SpinRegister, what: &str) -> Result<()> {
    if reg.n() != 4 {
        return Err(Error::InvalidArgument(format!(
            "{what} are defined for n = 4 only, got n = {}",
            reg.n()
        )));
    }
    Ok(())
}

fn superpose(reg: SpinRegister, terms: &[(Complex64, &str)]) -> Result<CMatrix> {
    let mut v = CMatrix::zeros(reg.dim(), 1);
    for &(amp, label) in terms {
        v.data_mut()[reg.index_of(label)?] += amp;
    }
    Ok(v)
}

/// The two `j = 0` states of four constituents with `ω₃` phases,
/// `(ω₃^λ(|1001⟩+|0110⟩) + ω₃^{2λ}(|0101⟩+|1010⟩) + |0011⟩+|1100⟩)/√6` for λ = 1, 2.
pub fn symmetric_singlets(reg: SpinRegister) -> Result<[CMatrix; 2]> {
    require_four(reg, "symmetric singlets")?;
    let s = 1.0 / 6f64.sqrt();
    let make = |lambda: i64| {
        let w1 = root_of_unity(3, lambda) * s;
        let w2 = root_of_unity(3, 2 * lambda) * s;
        let one = real(s);
        superpose(
            reg,
            &[
                (w1, "1001"),
                (w1, "0110"),
                (w2, "0101"),
                (w2, "1010"),
                (one, "0011"),
                (one, "1100"),
            ],
        )
    };
    Ok([make(1)?, make(2)?])
}

/// The two `j = 0` states of successive Clebsch-Gordan coupling,
/// `|S₁⟩ = (|0101⟩+|1010⟩−|1001⟩−|0110⟩)/2` and
/// `|S₂⟩ = (2|0011⟩+2|1100⟩−|0101⟩−|1010⟩−|0110⟩−|1001⟩)/√12`.
pub fn cg_singlets(reg: SpinRegister) -> Result<[CMatrix; 2]> {
    require_four(reg, "Clebsch-Gordan singlets")?;
    let h = real(0.5);
    let s1 = superpose(reg, &[(h, "0101"), (h, "1010"), (-h, "1001"), (-h, "0110")])?;
    let t = 1.0 / 12f64.sqrt();
    let (two, one) = (real(2.0 * t), real(-t));
    let s2 = superpose(
        reg,
        &[
            (two, "0011"),
            (two, "1100"),
            (one, "0101"),
            (one, "1010"),
            (one, "0110"),
            (one, "1001"),
        ],
    )?;
    Ok([s1, s2])
}
